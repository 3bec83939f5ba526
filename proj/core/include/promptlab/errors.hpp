#pragma once

#include <stdexcept>
#include <string>

namespace promptlab {

/// Base of every error raised by the library. `category()` drives CLI exit codes.
class Error : public std::runtime_error {
public:
    enum class Category { Config, Io, Divergence, Capacity, Input, Internal };

    Error(Category category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    Category category() const noexcept { return category_; }

private:
    Category category_;
};

#define PROMPTLAB_DEFINE_ERROR(Name, Cat)                                      \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string& what) : Error(Category::Cat, what) {} \
    }

// tensor-core
PROMPTLAB_DEFINE_ERROR(DimensionError, Input);
PROMPTLAB_DEFINE_ERROR(NumericError, Input);
PROMPTLAB_DEFINE_ERROR(VocabularyError, Input);
PROMPTLAB_DEFINE_ERROR(EmptyLossError, Input);
PROMPTLAB_DEFINE_ERROR(GraphError, Internal);

// model / adaptation
PROMPTLAB_DEFINE_ERROR(CapacityError, Capacity);
PROMPTLAB_DEFINE_ERROR(EmptyInputError, Input);

// corpus / tokenizer / io
PROMPTLAB_DEFINE_ERROR(StateError, Internal);
PROMPTLAB_DEFINE_ERROR(IoError, Io);
PROMPTLAB_DEFINE_ERROR(FormatError, Io);
PROMPTLAB_DEFINE_ERROR(ConfigError, Config);

// trainer
PROMPTLAB_DEFINE_ERROR(DivergenceError, Divergence);
PROMPTLAB_DEFINE_ERROR(SweepError, Divergence);

#undef PROMPTLAB_DEFINE_ERROR

}  // namespace promptlab
