#include "promptlab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "promptlab/errors.hpp"

namespace promptlab {

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;
    bool leaf = true;
    bool consumed = false;
    std::string_view op = "leaf";
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    std::vector<double>& grad_buffer() {
        if (grad.empty()) grad.assign(values.size(), 0.0);
        return grad;
    }
};

struct Access {
    static Tensor wrap(std::shared_ptr<Node> node) { return Tensor(std::move(node)); }
    static const std::shared_ptr<Node>& node(const Tensor& t) { return t.node_; }
};

}  // namespace detail

namespace {

using detail::Access;
using detail::Node;
using BackwardFn = std::function<void(Node&)>;

thread_local bool g_grad_enabled = true;

std::size_t product(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

const Node& node_of(const Tensor& t) {
    if (!t.defined()) throw GraphError("operation on an undefined tensor");
    return *Access::node(t);
}

// Parent gradient sink: null when that parent does not take gradients.
double* sink(Node& self, std::size_t parent) {
    Node& p = *self.parents[parent];
    return p.requires_grad ? p.grad_buffer().data() : nullptr;
}

Tensor make_result(Shape shape, std::vector<double> values, std::string_view op,
                   std::initializer_list<const Tensor*> inputs, BackwardFn backward) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->values = std::move(values);
    node->op = op;
    bool needs_grad = false;
    if (g_grad_enabled) {
        for (const Tensor* in : inputs) needs_grad = needs_grad || in->requires_grad();
    }
    if (needs_grad) {
        node->requires_grad = true;
        node->leaf = false;
        for (const Tensor* in : inputs) node->parents.push_back(Access::node(*in));
        node->backward_fn = std::move(backward);
    }
    return Access::wrap(std::move(node));
}

Tensor make_result_n(Shape shape, std::vector<double> values, std::string_view op,
                     std::span<const Tensor> inputs, BackwardFn backward) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->values = std::move(values);
    node->op = op;
    bool needs_grad = false;
    if (g_grad_enabled) {
        for (const Tensor& in : inputs) needs_grad = needs_grad || in.requires_grad();
    }
    if (needs_grad) {
        node->requires_grad = true;
        node->leaf = false;
        for (const Tensor& in : inputs) node->parents.push_back(Access::node(in));
        node->backward_fn = std::move(backward);
    }
    return Access::wrap(std::move(node));
}

void require_rank2(const Tensor& t, std::string_view op) {
    if (t.rank() != 2) {
        throw DimensionError(std::string(op) + ": expected a matrix, got shape " +
                             shape_to_string(t.shape()));
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, std::string_view op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                             " vs " + shape_to_string(b.shape()));
    }
}

// C[r x c] += A[r x k] * B[k x c]
void gemm_nn(const double* a, const double* b, double* c, std::size_t r, std::size_t k,
             std::size_t n) {
    for (std::size_t i = 0; i < r; ++i) {
        double* ci = c + i * n;
        const double* ai = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ai[p];
            if (av == 0.0) continue;
            const double* bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

// C[r x n] += A[r x k] * B[n x k]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t r, std::size_t k,
             std::size_t n) {
    for (std::size_t i = 0; i < r; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* bj = b + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] += acc;
        }
    }
}

// C[r x n] += A[k x r]^T * B[k x n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t k, std::size_t r,
             std::size_t n) {
    for (std::size_t p = 0; p < k; ++p) {
        const double* ap = a + p * r;
        const double* bp = b + p * n;
        for (std::size_t i = 0; i < r; ++i) {
            const double av = ap[i];
            if (av == 0.0) continue;
            double* ci = c + i * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

// Forward (topological) order of every node reachable from root.
std::vector<Node*> topological_order(Node* root) {
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
    visited.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (visited.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    return order;
}

}  // namespace

std::string shape_to_string(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << 'x';
        out << shape[i];
    }
    out << ']';
    return out.str();
}

// --- Tensor ------------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return filled(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
    std::vector<double> values(product(shape), value);
    return from(std::move(shape), std::move(values), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    if (product(shape) != values.size()) {
        throw DimensionError("tensor shape " + shape_to_string(shape) + " needs " +
                             std::to_string(product(shape)) + " values, got " +
                             std::to_string(values.size()));
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->values = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from(Shape{1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return node_of(*this).shape; }
std::size_t Tensor::size() const { return node_of(*this).values.size(); }

std::size_t Tensor::rows() const {
    const auto& s = shape();
    return s.size() == 2 ? s[0] : 1;
}

std::size_t Tensor::cols() const {
    const auto& s = shape();
    return s.empty() ? 1 : s.back();
}

std::span<const double> Tensor::values() const { return node_of(*this).values; }

std::span<double> Tensor::mutable_values() {
    node_of(*this);
    if (!node_->leaf) throw GraphError("mutable_values() on a non-leaf tensor");
    return node_->values;
}

double Tensor::item() const {
    if (size() != 1) {
        throw DimensionError("item() on non-scalar tensor " + shape_to_string(shape()));
    }
    return node_->values[0];
}

double Tensor::at(std::size_t r, std::size_t c) const { return values()[r * cols() + c]; }

bool Tensor::requires_grad() const { return node_of(*this).requires_grad; }

void Tensor::set_requires_grad(bool flag) {
    node_of(*this);
    if (!node_->leaf) throw GraphError("set_requires_grad() on a non-leaf tensor");
    node_->requires_grad = flag;
}

bool Tensor::is_leaf() const { return node_of(*this).leaf; }
bool Tensor::has_grad() const { return !node_of(*this).grad.empty(); }

std::span<const double> Tensor::grad() const {
    if (!has_grad()) throw GraphError("tensor has no gradient");
    return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
    node_of(*this);
    return node_->grad_buffer();
}

void Tensor::zero_grad() {
    node_of(*this);
    node_->grad.clear();
}

Tensor Tensor::clone() const {
    const Node& n = node_of(*this);
    return from(n.shape, n.values, n.requires_grad);
}

void Tensor::backward() const {
    Node& root = const_cast<Node&>(node_of(*this));
    if (root.values.size() != 1) {
        throw DimensionError("backward() needs a scalar root, got shape " +
                             shape_to_string(root.shape));
    }
    if (root.consumed) throw GraphError("backward() already ran on this graph");
    if (!root.requires_grad) throw GraphError("backward() on a tensor with no recorded graph");

    const std::vector<Node*> order = topological_order(&root);
    for (Node* n : order) {
        if (n->consumed) throw GraphError("backward() reached an already-released graph");
    }
    root.grad_buffer()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->leaf || n->grad.empty()) continue;
        n->backward_fn(*n);
    }
    for (Node* n : order) {
        if (n->leaf) continue;
        n->backward_fn = nullptr;
        n->parents.clear();
        n->grad.clear();
        n->grad.shrink_to_fit();
        n->consumed = true;
    }
}

GradTape GradTape::record(const Tensor& root) {
    node_of(root);
    GradTape tape;
    for (Node* n : topological_order(Access::node(root).get())) {
        tape.entries_.push_back({n, n->op});
    }
    return tape;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_mode_enabled() noexcept { return g_grad_enabled; }

// --- linear algebra ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    const std::size_t r = a.rows(), k = a.cols(), c = b.cols();
    if (b.rows() != k) {
        throw DimensionError("matmul: inner dimensions disagree, " + shape_to_string(a.shape()) +
                             " x " + shape_to_string(b.shape()));
    }
    std::vector<double> out(r * c, 0.0);
    gemm_nn(a.values().data(), b.values().data(), out.data(), r, k, c);
    return make_result({r, c}, std::move(out), "matmul", {&a, &b}, [r, k, c](Node& self) {
        const double* g = self.grad.data();
        const Node& pa = *self.parents[0];
        const Node& pb = *self.parents[1];
        if (double* ga = sink(self, 0)) gemm_nt(g, pb.values.data(), ga, r, c, k);
        if (double* gb = sink(self, 1)) gemm_tn(pa.values.data(), g, gb, r, k, c);
    });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul_nt");
    require_rank2(b, "matmul_nt");
    const std::size_t r = a.rows(), k = a.cols(), c = b.rows();
    if (b.cols() != k) {
        throw DimensionError("matmul_nt: inner dimensions disagree, " +
                             shape_to_string(a.shape()) + " x " + shape_to_string(b.shape()) +
                             "^T");
    }
    std::vector<double> out(r * c, 0.0);
    gemm_nt(a.values().data(), b.values().data(), out.data(), r, k, c);
    return make_result({r, c}, std::move(out), "matmul_nt", {&a, &b}, [r, k, c](Node& self) {
        const double* g = self.grad.data();
        const Node& pa = *self.parents[0];
        const Node& pb = *self.parents[1];
        if (double* ga = sink(self, 0)) gemm_nn(g, pb.values.data(), ga, r, c, k);
        if (double* gb = sink(self, 1)) gemm_tn(g, pa.values.data(), gb, r, c, k);
    });
}

Tensor transpose(const Tensor& a) {
    require_rank2(a, "transpose");
    const std::size_t r = a.rows(), c = a.cols();
    std::vector<double> out(r * c);
    const auto in = a.values();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = in[i * c + j];
    return make_result({c, r}, std::move(out), "transpose", {&a}, [r, c](Node& self) {
        if (double* ga = sink(self, 0)) {
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += self.grad[j * r + i];
        }
    });
}

// --- elementwise -------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.values().begin(), a.values().end());
    const auto bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    return make_result(a.shape(), std::move(out), "add", {&a, &b}, [](Node& self) {
        for (std::size_t p = 0; p < 2; ++p) {
            if (double* g = sink(self, p)) {
                for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
            }
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.values().begin(), a.values().end());
    const auto bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    return make_result(a.shape(), std::move(out), "sub", {&a, &b}, [](Node& self) {
        if (double* g = sink(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
        }
        if (double* g = sink(self, 1)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.values().begin(), a.values().end());
    const auto bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    return make_result(a.shape(), std::move(out), "mul", {&a, &b}, [](Node& self) {
        const auto& av = self.parents[0]->values;
        const auto& bv = self.parents[1]->values;
        if (double* g = sink(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * bv[i];
        }
        if (double* g = sink(self, 1)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * av[i];
        }
    });
}

Tensor scale(const Tensor& a, double factor) {
    std::vector<double> out(a.values().begin(), a.values().end());
    for (double& v : out) v *= factor;
    return make_result(a.shape(), std::move(out), "scale", {&a}, [factor](Node& self) {
        if (double* g = sink(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * factor;
        }
    });
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
    require_rank2(x, "add_row_bias");
    const std::size_t r = x.rows(), c = x.cols();
    if (bias.size() != c || bias.rank() != 1) {
        throw DimensionError("add_row_bias: bias " + shape_to_string(bias.shape()) +
                             " does not match rows of " + shape_to_string(x.shape()));
    }
    std::vector<double> out(x.values().begin(), x.values().end());
    const auto bv = bias.values();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] += bv[j];
    return make_result(x.shape(), std::move(out), "add_row_bias", {&x, &bias},
                       [r, c](Node& self) {
                           if (double* gx = sink(self, 0)) {
                               for (std::size_t i = 0; i < r * c; ++i) gx[i] += self.grad[i];
                           }
                           if (double* gb = sink(self, 1)) {
                               for (std::size_t i = 0; i < r; ++i)
                                   for (std::size_t j = 0; j < c; ++j)
                                       gb[j] += self.grad[i * c + j];
                           }
                       });
}

Tensor gelu(const Tensor& x) {
    constexpr double kAlpha = 0.7978845608028654;  // sqrt(2/pi)
    constexpr double kBeta = 0.044715;
    const auto in = x.values();
    std::vector<double> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        const double v = in[i];
        out[i] = 0.5 * v * (1.0 + std::tanh(kAlpha * (v + kBeta * v * v * v)));
    }
    return make_result(x.shape(), std::move(out), "gelu", {&x}, [](Node& self) {
        double* g = sink(self, 0);
        if (!g) return;
        const auto& in = self.parents[0]->values;
        for (std::size_t i = 0; i < in.size(); ++i) {
            const double v = in[i];
            const double t = std::tanh(kAlpha * (v + kBeta * v * v * v));
            const double d = 0.5 * (1.0 + t) +
                             0.5 * v * (1.0 - t * t) * kAlpha * (1.0 + 3.0 * kBeta * v * v);
            g[i] += self.grad[i] * d;
        }
    });
}

Tensor sum(const Tensor& x) {
    const auto in = x.values();
    const double total = std::accumulate(in.begin(), in.end(), 0.0);
    return make_result({1}, {total}, "sum", {&x}, [](Node& self) {
        if (double* g = sink(self, 0)) {
            const std::size_t n = self.parents[0]->values.size();
            for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
        }
    });
}

// --- normalisation -----------------------------------------------------------

namespace {

void softmax_row(const double* in, double* out, std::size_t width) {
    double max = in[0];
    for (std::size_t j = 1; j < width; ++j) max = std::max(max, in[j]);
    double total = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
        out[j] = std::exp(in[j] - max);
        total += out[j];
    }
    for (std::size_t j = 0; j < width; ++j) out[j] /= total;
}

// dx = y * (dy - <dy, y>) over the first `width` entries of a row.
void softmax_row_backward(const double* y, const double* dy, double* dx, std::size_t width) {
    double dot = 0.0;
    for (std::size_t j = 0; j < width; ++j) dot += dy[j] * y[j];
    for (std::size_t j = 0; j < width; ++j) dx[j] += y[j] * (dy[j] - dot);
}

void require_finite(const Tensor& x, std::string_view op) {
    for (double v : x.values()) {
        if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite input");
    }
}

}  // namespace

Tensor softmax_rows(const Tensor& x) {
    require_rank2(x, "softmax_rows");
    require_finite(x, "softmax_rows");
    const std::size_t r = x.rows(), c = x.cols();
    std::vector<double> out(r * c);
    const double* in = x.values().data();
    for (std::size_t i = 0; i < r; ++i) softmax_row(in + i * c, out.data() + i * c, c);
    auto y = std::make_shared<std::vector<double>>(out);
    return make_result({r, c}, std::move(out), "softmax_rows", {&x}, [r, c, y](Node& self) {
        if (double* g = sink(self, 0)) {
            for (std::size_t i = 0; i < r; ++i)
                softmax_row_backward(y->data() + i * c, self.grad.data() + i * c, g + i * c, c);
        }
    });
}

Tensor causal_softmax_rows(const Tensor& x) {
    require_rank2(x, "causal_softmax_rows");
    const std::size_t n = x.rows();
    if (x.cols() != n) {
        throw DimensionError("causal_softmax_rows: expected a square matrix, got " +
                             shape_to_string(x.shape()));
    }
    require_finite(x, "causal_softmax_rows");
    std::vector<double> out(n * n, 0.0);
    const double* in = x.values().data();
    for (std::size_t i = 0; i < n; ++i) softmax_row(in + i * n, out.data() + i * n, i + 1);
    auto y = std::make_shared<std::vector<double>>(out);
    return make_result({n, n}, std::move(out), "causal_softmax_rows", {&x}, [n, y](Node& self) {
        if (double* g = sink(self, 0)) {
            for (std::size_t i = 0; i < n; ++i)
                softmax_row_backward(y->data() + i * n, self.grad.data() + i * n, g + i * n,
                                     i + 1);
        }
    });
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    require_rank2(x, "layer_norm_rows");
    const std::size_t r = x.rows(), c = x.cols();
    if (gain.size() != c || bias.size() != c) {
        throw DimensionError("layer_norm_rows: gain/bias " + shape_to_string(gain.shape()) + "/" +
                             shape_to_string(bias.shape()) + " vs input " +
                             shape_to_string(x.shape()));
    }
    const double* in = x.values().data();
    const auto gv = gain.values();
    const auto bv = bias.values();
    auto xhat = std::make_shared<std::vector<double>>(r * c);
    auto rstd = std::make_shared<std::vector<double>>(r);
    std::vector<double> out(r * c);
    for (std::size_t i = 0; i < r; ++i) {
        const double* row = in + i * c;
        double mean = 0.0;
        for (std::size_t j = 0; j < c; ++j) mean += row[j];
        mean /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) var += (row[j] - mean) * (row[j] - mean);
        var /= static_cast<double>(c);
        const double inv = 1.0 / std::sqrt(var + eps);
        (*rstd)[i] = inv;
        for (std::size_t j = 0; j < c; ++j) {
            const double h = (row[j] - mean) * inv;
            (*xhat)[i * c + j] = h;
            out[i * c + j] = h * gv[j] + bv[j];
        }
    }
    return make_result(
        {r, c}, std::move(out), "layer_norm_rows", {&x, &gain, &bias},
        [r, c, xhat, rstd](Node& self) {
            const auto& gv = self.parents[1]->values;
            const double* dy = self.grad.data();
            if (double* gg = sink(self, 1)) {
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) gg[j] += dy[i * c + j] * (*xhat)[i * c + j];
            }
            if (double* gb = sink(self, 2)) {
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) gb[j] += dy[i * c + j];
            }
            if (double* gx = sink(self, 0)) {
                const double inv_c = 1.0 / static_cast<double>(c);
                for (std::size_t i = 0; i < r; ++i) {
                    double mean_d = 0.0, mean_dh = 0.0;
                    for (std::size_t j = 0; j < c; ++j) {
                        const double d = dy[i * c + j] * gv[j];
                        mean_d += d;
                        mean_dh += d * (*xhat)[i * c + j];
                    }
                    mean_d *= inv_c;
                    mean_dh *= inv_c;
                    for (std::size_t j = 0; j < c; ++j) {
                        const double d = dy[i * c + j] * gv[j];
                        gx[i * c + j] +=
                            (*rstd)[i] * (d - mean_d - (*xhat)[i * c + j] * mean_dh);
                    }
                }
            }
        });
}

// --- indexing ----------------------------------------------------------------

Tensor gather_rows(const Tensor& table, std::span<const TokenId> ids) {
    require_rank2(table, "gather_rows");
    const std::size_t n = table.rows(), c = table.cols();
    std::vector<double> out(ids.size() * c);
    const double* src = table.values().data();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= n) {
            throw VocabularyError("gather_rows: id " + std::to_string(ids[i]) +
                                  " outside table of " + std::to_string(n) + " rows");
        }
        std::copy_n(src + static_cast<std::size_t>(ids[i]) * c, c, out.data() + i * c);
    }
    std::vector<TokenId> kept(ids.begin(), ids.end());
    return make_result({ids.size(), c}, std::move(out), "gather_rows", {&table},
                       [c, kept = std::move(kept)](Node& self) {
                           if (double* g = sink(self, 0)) {
                               for (std::size_t i = 0; i < kept.size(); ++i) {
                                   double* dst = g + static_cast<std::size_t>(kept[i]) * c;
                                   for (std::size_t j = 0; j < c; ++j)
                                       dst[j] += self.grad[i * c + j];
                               }
                           }
                       });
}

Tensor gather_rows(const Tensor& table, const Tensor& extension, std::span<const TokenId> ids) {
    require_rank2(table, "gather_rows");
    require_rank2(extension, "gather_rows");
    const std::size_t base = table.rows(), c = table.cols();
    if (extension.cols() != c) {
        throw DimensionError("gather_rows: extension " + shape_to_string(extension.shape()) +
                             " does not match table " + shape_to_string(table.shape()));
    }
    const std::size_t total = base + extension.rows();
    std::vector<double> out(ids.size() * c);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= total) {
            throw VocabularyError("gather_rows: id " + std::to_string(ids[i]) +
                                  " outside extended table of " + std::to_string(total) +
                                  " rows");
        }
        const auto id = static_cast<std::size_t>(ids[i]);
        const double* src = id < base ? table.values().data() + id * c
                                      : extension.values().data() + (id - base) * c;
        std::copy_n(src, c, out.data() + i * c);
    }
    std::vector<TokenId> kept(ids.begin(), ids.end());
    return make_result({ids.size(), c}, std::move(out), "gather_rows", {&table, &extension},
                       [base, c, kept = std::move(kept)](Node& self) {
                           double* gt = sink(self, 0);
                           double* ge = sink(self, 1);
                           for (std::size_t i = 0; i < kept.size(); ++i) {
                               const auto id = static_cast<std::size_t>(kept[i]);
                               double* dst = id < base ? (gt ? gt + id * c : nullptr)
                                                       : (ge ? ge + (id - base) * c : nullptr);
                               if (!dst) continue;
                               for (std::size_t j = 0; j < c; ++j) dst[j] += self.grad[i * c + j];
                           }
                       });
}

Tensor concat_rows(std::span<const Tensor> parts) {
    if (parts.empty()) throw DimensionError("concat_rows: no inputs");
    const std::size_t c = parts.front().cols();
    std::size_t rows = 0;
    std::vector<std::size_t> offsets;
    for (const Tensor& p : parts) {
        require_rank2(p, "concat_rows");
        if (p.cols() != c) {
            throw DimensionError("concat_rows: column mismatch " +
                                 shape_to_string(parts.front().shape()) + " vs " +
                                 shape_to_string(p.shape()));
        }
        offsets.push_back(rows);
        rows += p.rows();
    }
    std::vector<double> out;
    out.reserve(rows * c);
    for (const Tensor& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
    return make_result_n({rows, c}, std::move(out), "concat_rows", parts,
                         [c, offsets](Node& self) {
                             for (std::size_t k = 0; k < offsets.size(); ++k) {
                                 double* g = sink(self, k);
                                 if (!g) continue;
                                 const std::size_t n = self.parents[k]->values.size();
                                 const double* src = self.grad.data() + offsets[k] * c;
                                 for (std::size_t i = 0; i < n; ++i) g[i] += src[i];
                             }
                         });
}

Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no inputs");
    const std::size_t r = parts.front().rows();
    std::size_t cols = 0;
    std::vector<std::size_t> offsets, widths;
    for (const Tensor& p : parts) {
        require_rank2(p, "concat_cols");
        if (p.rows() != r) {
            throw DimensionError("concat_cols: row mismatch " +
                                 shape_to_string(parts.front().shape()) + " vs " +
                                 shape_to_string(p.shape()));
        }
        offsets.push_back(cols);
        widths.push_back(p.cols());
        cols += p.cols();
    }
    std::vector<double> out(r * cols);
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const double* src = parts[k].values().data();
        for (std::size_t i = 0; i < r; ++i)
            std::copy_n(src + i * widths[k], widths[k], out.data() + i * cols + offsets[k]);
    }
    return make_result_n({r, cols}, std::move(out), "concat_cols", parts,
                         [r, cols, offsets, widths](Node& self) {
                             for (std::size_t k = 0; k < offsets.size(); ++k) {
                                 double* g = sink(self, k);
                                 if (!g) continue;
                                 for (std::size_t i = 0; i < r; ++i)
                                     for (std::size_t j = 0; j < widths[k]; ++j)
                                         g[i * widths[k] + j] +=
                                             self.grad[i * cols + offsets[k] + j];
                             }
                         });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
    require_rank2(x, "slice_rows");
    const std::size_t c = x.cols();
    if (begin + count > x.rows()) {
        throw DimensionError("slice_rows: rows [" + std::to_string(begin) + ", " +
                             std::to_string(begin + count) + ") outside " +
                             shape_to_string(x.shape()));
    }
    const double* src = x.values().data() + begin * c;
    std::vector<double> out(src, src + count * c);
    return make_result({count, c}, std::move(out), "slice_rows", {&x},
                       [begin, count, c](Node& self) {
                           if (double* g = sink(self, 0)) {
                               for (std::size_t i = 0; i < count * c; ++i)
                                   g[begin * c + i] += self.grad[i];
                           }
                       });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
    require_rank2(x, "slice_cols");
    const std::size_t r = x.rows(), c = x.cols();
    if (begin + count > c) {
        throw DimensionError("slice_cols: cols [" + std::to_string(begin) + ", " +
                             std::to_string(begin + count) + ") outside " +
                             shape_to_string(x.shape()));
    }
    std::vector<double> out(r * count);
    const double* src = x.values().data();
    for (std::size_t i = 0; i < r; ++i)
        std::copy_n(src + i * c + begin, count, out.data() + i * count);
    return make_result({r, count}, std::move(out), "slice_cols", {&x},
                       [r, c, begin, count](Node& self) {
                           if (double* g = sink(self, 0)) {
                               for (std::size_t i = 0; i < r; ++i)
                                   for (std::size_t j = 0; j < count; ++j)
                                       g[i * c + begin + j] += self.grad[i * count + j];
                           }
                       });
}

// --- loss --------------------------------------------------------------------

Tensor masked_cross_entropy(const Tensor& logits, std::span<const TokenId> targets,
                            std::span<const std::uint8_t> mask) {
    require_rank2(logits, "masked_cross_entropy");
    const std::size_t rows = logits.rows(), vocab = logits.cols();
    if (targets.size() != rows || mask.size() != rows) {
        throw DimensionError("masked_cross_entropy: " + std::to_string(targets.size()) +
                             " targets / " + std::to_string(mask.size()) + " mask entries for " +
                             shape_to_string(logits.shape()) + " logits");
    }
    std::vector<std::size_t> active;
    for (std::size_t t = 0; t < rows; ++t) {
        if (!mask[t]) continue;
        if (targets[t] < 0 || static_cast<std::size_t>(targets[t]) >= vocab) {
            throw VocabularyError("masked_cross_entropy: target id " + std::to_string(targets[t]) +
                                  " at position " + std::to_string(t) + " outside vocabulary of " +
                                  std::to_string(vocab));
        }
        active.push_back(t);
    }
    if (active.empty()) throw EmptyLossError("masked_cross_entropy: mask selects no positions");

    const double* in = logits.values().data();
    auto probs = std::make_shared<std::vector<double>>(active.size() * vocab);
    double total = 0.0;
    for (std::size_t k = 0; k < active.size(); ++k) {
        const double* row = in + active[k] * vocab;
        double max = row[0];
        for (std::size_t j = 1; j < vocab; ++j) max = std::max(max, row[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < vocab; ++j) z += std::exp(row[j] - max);
        const double lse = max + std::log(z);
        total += lse - row[targets[active[k]]];
        for (std::size_t j = 0; j < vocab; ++j) (*probs)[k * vocab + j] = std::exp(row[j] - lse);
    }
    const double inv_count = 1.0 / static_cast<double>(active.size());
    std::vector<TokenId> picked;
    for (std::size_t t : active) picked.push_back(targets[t]);
    return make_result(
        {1}, {total * inv_count}, "masked_cross_entropy", {&logits},
        [vocab, inv_count, probs, active = std::move(active),
         picked = std::move(picked)](Node& self) {
            double* g = sink(self, 0);
            if (!g) return;
            const double scale_factor = self.grad[0] * inv_count;
            for (std::size_t k = 0; k < active.size(); ++k) {
                double* dst = g + active[k] * vocab;
                const double* p = probs->data() + k * vocab;
                for (std::size_t j = 0; j < vocab; ++j) dst[j] += scale_factor * p[j];
                dst[picked[k]] -= scale_factor;
            }
        });
}

}  // namespace promptlab
