#pragma once

// Dense float64 tensors with reverse-mode autodiff.
//
// A Tensor is a cheap handle onto a graph node. Operations on tensors that
// require gradients record their parents and a backward closure; calling
// backward() on a scalar root replays those closures in reverse topological
// order. The graph is rebuilt for every step and released after backward.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace promptlab {

using Shape = std::vector<std::size_t>;
using TokenId = std::int32_t;

std::string shape_to_string(const Shape& shape);

namespace detail {
struct Node;
struct Access;
}

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor filled(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const noexcept { return node_ != nullptr; }

    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t size() const;
    /// Rows/cols of a rank-2 tensor; a rank-1 tensor is treated as a single row.
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<const double> values() const;
    /// Mutable access. Only legal on leaves (tensors not produced by a recorded op).
    std::span<double> mutable_values();
    double item() const;
    double at(std::size_t r, std::size_t c) const;

    bool requires_grad() const;
    void set_requires_grad(bool flag);
    bool is_leaf() const;

    bool has_grad() const;
    std::span<const double> grad() const;
    std::span<double> mutable_grad();
    void zero_grad();

    /// Accumulates d(this)/d(leaf) into every reachable requires_grad leaf.
    /// `this` must be a scalar. A graph can be backpropagated once.
    void backward() const;

    /// Deep copy of values (and flags) as a fresh leaf with no grad.
    Tensor clone() const;

    /// Identity of the underlying node, for tape inspection.
    const void* id() const noexcept { return node_.get(); }

private:
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

    std::shared_ptr<detail::Node> node_;

    friend struct detail::Access;
};

/// Reverse-topological replay order of a recorded graph, rooted at a tensor.
class GradTape {
public:
    struct Entry {
        const void* node;
        std::string_view op;
    };

    static GradTape record(const Tensor& root);

    /// Entries in forward (topological) order; backward replays them reversed.
    const std::vector<Entry>& entries() const noexcept { return entries_; }

private:
    std::vector<Entry> entries_;
};

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_mode_enabled() noexcept;

// --- operations ------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
/// a[r x k] * b[c x k]^T -> [r x c]
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
/// x[r x c] + bias[c], bias added to every row.
Tensor add_row_bias(const Tensor& x, const Tensor& bias);

Tensor gelu(const Tensor& x);
Tensor sum(const Tensor& x);

Tensor softmax_rows(const Tensor& x);
/// Row-wise softmax over columns j <= i (square input); entries j > i are exactly 0.
Tensor causal_softmax_rows(const Tensor& x);
Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias,
                       double eps = 1e-5);

/// Gathers rows of `table` by id.
Tensor gather_rows(const Tensor& table, std::span<const TokenId> ids);
/// Gathers from the logical concatenation [table; extension]. Ids at or past
/// table.rows() address extension rows.
Tensor gather_rows(const Tensor& table, const Tensor& extension,
                   std::span<const TokenId> ids);

Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count);

/// Mean of -log softmax(logits)[t, targets[t]] over rows with mask[t] != 0.
/// Masked-out rows are never read, so their logits and targets are unconstrained.
Tensor masked_cross_entropy(const Tensor& logits, std::span<const TokenId> targets,
                            std::span<const std::uint8_t> mask);

}  // namespace promptlab
