#include "promptlab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json_io.hpp"
#include "promptlab/errors.hpp"

namespace promptlab {

namespace {

constexpr std::string_view kMagic = "PLCKPT01";

static_assert(std::endian::native == std::endian::little, "checkpoints assume little-endian");

template <typename T>
void put(std::string& out, T value) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    out.append(bytes, sizeof(T));
}

template <typename T>
T take(std::string_view bytes, std::size_t& offset) {
    if (bytes.size() - offset < sizeof(T)) throw FormatError("checkpoint truncated");
    T value;
    std::memcpy(&value, bytes.data() + offset, sizeof(T));
    offset += sizeof(T);
    return value;
}

std::size_t pool_capacity(const AdaptationRegime& regime) {
    return regime.prompt_pool ? regime.prompt_pool->capacity() : 0;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& checkpoint) {
    const auto& state = checkpoint.state;
    const auto params = all_parameters(state.regime, state.lm);

    json_io::json header;
    header["model"] = json_io::to_json(state.lm.config());
    header["regime"] = {{"kind", std::string(to_string(state.regime.kind))},
                        {"pool_capacity", pool_capacity(state.regime)}};
    header["tokenizer"] = json_io::json::parse(checkpoint.tokenizer.to_json());
    try {
        header["metadata"] = json_io::json::parse(checkpoint.metadata);
    } catch (const json_io::json::exception& e) {
        throw FormatError(std::string("checkpoint metadata is not JSON: ") + e.what());
    }
    auto& table = header["tensors"] = json_io::json::array();
    for (const auto& p : params) {
        table.push_back({{"name", p.name}, {"group", std::string(to_string(p.group))},
                         {"shape", p.tensor.shape()}});
    }
    const std::string text = header.dump();

    std::string out(kMagic);
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, text.size());
    out += text;
    for (const auto& p : params) {
        const auto values = p.tensor.values();
        out.append(reinterpret_cast<const char*>(values.data()), values.size_bytes());
    }
    return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
    if (bytes.substr(0, kMagic.size()) != kMagic) throw FormatError("not a checkpoint file");
    std::size_t offset = kMagic.size();
    const auto version = take<std::uint32_t>(bytes, offset);
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    }
    const auto header_len = take<std::uint64_t>(bytes, offset);
    if (bytes.size() - offset < header_len) throw FormatError("checkpoint header truncated");

    json_io::json header;
    try {
        header = json_io::json::parse(bytes.substr(offset, header_len));
    } catch (const json_io::json::exception& e) {
        throw FormatError(std::string("checkpoint header: ") + e.what());
    }
    offset += header_len;

    try {
        const ModelConfig config = json_io::model_config_from_json(header.at("model"));
        config.validate();
        const auto& regime_json = header.at("regime");
        const auto kind = parse_regime_kind(regime_json.at("kind").get<std::string>());
        const auto capacity = regime_json.at("pool_capacity").get<std::size_t>();

        Checkpoint out{ModelState{LanguageModel(config),
                                  AdaptationRegime::create(kind, config, capacity, config.seed)},
                       Tokenizer::from_json(header.at("tokenizer").dump()),
                       header.at("metadata").dump()};

        const auto params = all_parameters(out.state.regime, out.state.lm);
        const auto& table = header.at("tensors");
        if (table.size() != params.size()) {
            throw FormatError("checkpoint holds " + std::to_string(table.size()) +
                              " tensors, model expects " + std::to_string(params.size()));
        }
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto name = table[i].at("name").get<std::string>();
            const auto shape = table[i].at("shape").get<Shape>();
            if (name != params[i].name || shape != params[i].tensor.shape()) {
                throw FormatError("checkpoint tensor " + name + " " + shape_to_string(shape) +
                                  " does not match " + params[i].name + " " +
                                  shape_to_string(params[i].tensor.shape()));
            }
            Tensor target = params[i].tensor;
            auto values = target.mutable_values();
            if (bytes.size() - offset < values.size_bytes()) {
                throw FormatError("checkpoint data truncated at " + name);
            }
            std::memcpy(values.data(), bytes.data() + offset, values.size_bytes());
            offset += values.size_bytes();
        }
        if (offset != bytes.size()) throw FormatError("trailing bytes after checkpoint data");
        return out;
    } catch (const json_io::json::exception& e) {
        throw FormatError(std::string("checkpoint header: ") + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(std::string("checkpoint header: ") + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    const std::string bytes = serialize_checkpoint(checkpoint);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return deserialize_checkpoint(buffer.str());
}

}  // namespace promptlab
