#include "asm2tv/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace asm2tv {

using detail::Node;

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ')';
    return os.str();
}

namespace {

void require(bool cond, const char* op, const std::string& what) {
    if (!cond) throw ShapeError(std::string(op) + ": " + what);
}

// Grad buffer of an input, or nullptr when it does not take gradient.
double* grad_of(Node& self, std::size_t i) {
    Node& in = *self.inputs[i];
    return in.requires_grad ? in.grad.data() : nullptr;
}

}  // namespace

Tensor make_op_result(const char* op, Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                      std::function<void(Node&)> backward) {
    for (double v : data)
        if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite output");
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->op = op;
    bool needs = false;
    for (const auto& t : inputs) needs = needs || t.requires_grad();
    if (needs) {
        node->requires_grad = true;
        node->inputs.reserve(inputs.size());
        for (auto& t : inputs) node->inputs.push_back(t.node_);
        node->backward = std::move(backward);
    }
    return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape_numel(shape) != data.size())
        throw ShapeError("tensor: shape " + shape_str(shape) + " does not match " + std::to_string(data.size()) +
                         " values");
    for (double v : data)
        if (!std::isfinite(v)) throw NumericError("tensor: non-finite leaf value");
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    if (requires_grad) node->grad.assign(node->data.size(), 0.0);
    return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    const auto n = shape_numel(shape);
    return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    const auto n = shape_numel(shape);
    return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from({1}, {value}, requires_grad);
}

std::size_t Tensor::cols() const {
    return node_->shape.empty() ? 1 : node_->shape.back();
}

std::size_t Tensor::rows() const {
    const auto c = cols();
    return c == 0 ? 0 : numel() / c;
}

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item: tensor of shape " + shape_str(shape()) + " is not a scalar");
    return node_->data[0];
}

void Tensor::zero_grad() {
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
    auto node = std::make_shared<Node>();
    node->shape = node_->shape;
    node->data = node_->data;
    return Tensor(std::move(node));
}

void Tensor::backward() const {
    if (numel() != 1) throw ShapeError("backward: loss of shape " + shape_str(shape()) + " is not a scalar");
    if (!node_->requires_grad) return;

    // Iterative post-order DFS gives a topological order (inputs first).
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->inputs.size()) {
            Node* child = n->inputs[next++].get();
            if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    for (Node* n : order)
        if (!n->is_leaf()) n->grad.assign(n->data.size(), 0.0);
    node_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (!n->is_leaf() && n->backward) n->backward(*n);
    }
}

// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.dim() == 2 && b.dim() == 2, "matmul", "operands must be 2-D, got " + shape_str(a.shape()) + " and " +
                                                         shape_str(b.shape()));
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    require(b.shape()[0] == k, "matmul", "inner dims " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    std::vector<double> out(m * n, 0.0);
    const double* A = a.data().data();
    const double* B = b.data().data();
    // Row i of the result depends only on row i of a, with a fixed
    // accumulation order over k.
    for (std::size_t i = 0; i < m; ++i) {
        double* c = out.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = A[i * k + p];
            const double* brow = B + p * n;
            for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
        }
    }
    return make_op_result("matmul", {m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
        const double* G = self.grad.data();
        const double* A = self.inputs[0]->data.data();
        const double* B = self.inputs[1]->data.data();
        if (double* gA = grad_of(self, 0)) {
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double* g = G + i * n;
                    const double* brow = B + p * n;
                    double acc = 0.0;
                    for (std::size_t j = 0; j < n; ++j) acc += g[j] * brow[j];
                    gA[i * k + p] += acc;
                }
        }
        if (double* gB = grad_of(self, 1)) {
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double av = A[i * k + p];
                    const double* g = G + i * n;
                    double* dst = gB + p * n;
                    for (std::size_t j = 0; j < n; ++j) dst[j] += av * g[j];
                }
        }
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() == b.shape()) {
        std::vector<double> out(a.numel());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
        return make_op_result("add", a.shape(), std::move(out), {a, b}, [](Node& self) {
            const auto& G = self.grad;
            for (std::size_t k = 0; k < 2; ++k)
                if (double* g = grad_of(self, k))
                    for (std::size_t i = 0; i < G.size(); ++i) g[i] += G[i];
        });
    }
    // Bias-add: (r, c) + (c) or (r, c) + (1, c).
    const bool row_vec = b.rows() == 1 && b.dim() <= 2;
    require(a.dim() == 2 && row_vec && b.cols() == a.cols(), "add",
            "shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) + " do not conform");
    const std::size_t r = a.rows(), c = a.cols();
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = a[i * c + j] + b[j];
    return make_op_result("add_bias", a.shape(), std::move(out), {a, b}, [r, c](Node& self) {
        const auto& G = self.grad;
        if (double* g = grad_of(self, 0))
            for (std::size_t i = 0; i < G.size(); ++i) g[i] += G[i];
        if (double* g = grad_of(self, 1))
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) g[j] += G[i * c + j];
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require(a.shape() == b.shape(), "sub", "shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
    return make_op_result("sub", a.shape(), std::move(out), {a, b}, [](Node& self) {
        const auto& G = self.grad;
        if (double* g = grad_of(self, 0))
            for (std::size_t i = 0; i < G.size(); ++i) g[i] += G[i];
        if (double* g = grad_of(self, 1))
            for (std::size_t i = 0; i < G.size(); ++i) g[i] -= G[i];
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require(a.shape() == b.shape(), "mul", "shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    return make_op_result("mul", a.shape(), std::move(out), {a, b}, [](Node& self) {
        const auto& G = self.grad;
        const auto& A = self.inputs[0]->data;
        const auto& B = self.inputs[1]->data;
        if (double* g = grad_of(self, 0))
            for (std::size_t i = 0; i < G.size(); ++i) g[i] += G[i] * B[i];
        if (double* g = grad_of(self, 1))
            for (std::size_t i = 0; i < G.size(); ++i) g[i] += G[i] * A[i];
    });
}

Tensor relu(const Tensor& x) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
    return make_op_result("relu", x.shape(), std::move(out), {x}, [](Node& self) {
        const auto& X = self.inputs[0]->data;
        if (double* g = grad_of(self, 0))
            for (std::size_t i = 0; i < X.size(); ++i)
                if (X[i] > 0.0) g[i] += self.grad[i];
    });
}

Tensor exp(const Tensor& x) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(x[i]);
    return make_op_result("exp", x.shape(), std::move(out), {x}, [](Node& self) {
        if (double* g = grad_of(self, 0))
            for (std::size_t i = 0; i < self.data.size(); ++i) g[i] += self.grad[i] * self.data[i];
    });
}

Tensor neg(const Tensor& x) {
    return scale(x, -1.0);
}

Tensor scale(const Tensor& x, double factor) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = factor * x[i];
    return make_op_result("scale", x.shape(), std::move(out), {x}, [factor](Node& self) {
        if (double* g = grad_of(self, 0))
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += factor * self.grad[i];
    });
}

Tensor mul_scalar(const Tensor& x, const Tensor& s) {
    require(s.numel() == 1, "mul_scalar", "factor must have one element, got " + shape_str(s.shape()));
    const double f = s[0];
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f * x[i];
    return make_op_result("mul_scalar", x.shape(), std::move(out), {x, s}, [](Node& self) {
        const auto& X = self.inputs[0]->data;
        const double f = self.inputs[1]->data[0];
        if (double* g = grad_of(self, 0))
            for (std::size_t i = 0; i < X.size(); ++i) g[i] += f * self.grad[i];
        if (double* g = grad_of(self, 1)) {
            double acc = 0.0;
            for (std::size_t i = 0; i < X.size(); ++i) acc += X[i] * self.grad[i];
            g[0] += acc;
        }
    });
}

Tensor softmax(const Tensor& x) {
    const std::size_t r = x.rows(), c = x.cols();
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < r; ++i) {
        const double* xi = x.data().data() + i * c;
        double* oi = out.data() + i * c;
        const double mx = *std::max_element(xi, xi + c);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) z += (oi[j] = std::exp(xi[j] - mx));
        for (std::size_t j = 0; j < c; ++j) oi[j] /= z;
    }
    return make_op_result("softmax", x.shape(), std::move(out), {x}, [r, c](Node& self) {
        double* g = grad_of(self, 0);
        if (!g) return;
        for (std::size_t i = 0; i < r; ++i) {
            const double* y = self.data.data() + i * c;
            const double* gy = self.grad.data() + i * c;
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) dot += gy[j] * y[j];
            for (std::size_t j = 0; j < c; ++j) g[i * c + j] += y[j] * (gy[j] - dot);
        }
    });
}

Tensor log_softmax(const Tensor& x) {
    const std::size_t r = x.rows(), c = x.cols();
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < r; ++i) {
        const double* xi = x.data().data() + i * c;
        double* oi = out.data() + i * c;
        const double mx = *std::max_element(xi, xi + c);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) z += std::exp(xi[j] - mx);
        const double lz = mx + std::log(z);
        for (std::size_t j = 0; j < c; ++j) oi[j] = xi[j] - lz;
    }
    return make_op_result("log_softmax", x.shape(), std::move(out), {x}, [r, c](Node& self) {
        double* g = grad_of(self, 0);
        if (!g) return;
        for (std::size_t i = 0; i < r; ++i) {
            const double* y = self.data.data() + i * c;
            const double* gy = self.grad.data() + i * c;
            double total = 0.0;
            for (std::size_t j = 0; j < c; ++j) total += gy[j];
            for (std::size_t j = 0; j < c; ++j) g[i * c + j] += gy[j] - std::exp(y[j]) * total;
        }
    });
}

Tensor sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    return make_op_result("sum", {1}, {s}, {x}, [](Node& self) {
        if (double* g = grad_of(self, 0))
            for (std::size_t i = 0; i < self.inputs[0]->data.size(); ++i) g[i] += self.grad[0];
    });
}

Tensor mean(const Tensor& x) {
    require(x.numel() > 0, "mean", "empty tensor");
    const double n = static_cast<double>(x.numel());
    double s = 0.0;
    for (double v : x.data()) s += v;
    return make_op_result("mean", {1}, {s / n}, {x}, [n](Node& self) {
        if (double* g = grad_of(self, 0))
            for (std::size_t i = 0; i < self.inputs[0]->data.size(); ++i) g[i] += self.grad[0] / n;
    });
}

Tensor row_sum(const Tensor& x) {
    const std::size_t r = x.rows(), c = x.cols();
    std::vector<double> out(r, 0.0);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i] += x[i * c + j];
    return make_op_result("row_sum", {r}, std::move(out), {x}, [r, c](Node& self) {
        if (double* g = grad_of(self, 0))
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[i];
    });
}

Tensor l2_norm(const Tensor& x) {
    const std::size_t r = x.rows(), c = x.cols();
    std::vector<double> out(r, 0.0);
    for (std::size_t i = 0; i < r; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += x[i * c + j] * x[i * c + j];
        out[i] = std::sqrt(s);
    }
    return make_op_result("l2_norm", {r}, std::move(out), {x}, [r, c](Node& self) {
        double* g = grad_of(self, 0);
        if (!g) return;
        const auto& X = self.inputs[0]->data;
        for (std::size_t i = 0; i < r; ++i) {
            const double nrm = self.data[i];
            if (nrm == 0.0) continue;
            for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[i] * X[i * c + j] / nrm;
        }
    });
}

Tensor concat(const std::vector<Tensor>& parts) {
    require(!parts.empty(), "concat", "no inputs");
    const std::size_t r = parts[0].rows();
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    for (const auto& p : parts) {
        require(p.rows() == r && p.dim() == parts[0].dim(), "concat",
                "row mismatch " + shape_str(p.shape()) + " vs " + shape_str(parts[0].shape()));
        widths.push_back(p.cols());
        total += p.cols();
    }
    std::vector<double> out(r * total);
    std::size_t off = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const std::size_t w = widths[k];
        for (std::size_t i = 0; i < r; ++i)
            std::copy_n(parts[k].data().data() + i * w, w, out.data() + i * total + off);
        off += w;
    }
    Shape shape = parts[0].shape();
    shape.back() = total;
    return make_op_result("concat", std::move(shape), std::move(out), parts, [r, total, widths](Node& self) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
            const std::size_t w = widths[k];
            if (double* g = grad_of(self, k))
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < w; ++j) g[i * w + j] += self.grad[i * total + off + j];
            off += w;
        }
    });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    require(!parts.empty(), "concat_rows", "no inputs");
    const std::size_t c = parts[0].cols();
    std::vector<std::size_t> sizes;
    std::vector<double> out;
    std::size_t r = 0;
    for (const auto& p : parts) {
        require(p.dim() == 2 && p.cols() == c, "concat_rows", "column mismatch " + shape_str(p.shape()));
        out.insert(out.end(), p.data().begin(), p.data().end());
        sizes.push_back(p.numel());
        r += p.rows();
    }
    return make_op_result("concat_rows", {r, c}, std::move(out), parts, [sizes](Node& self) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < sizes.size(); ++k) {
            if (double* g = grad_of(self, k))
                for (std::size_t i = 0; i < sizes[k]; ++i) g[i] += self.grad[off + i];
            off += sizes[k];
        }
    });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
    require(x.dim() == 2 && begin <= end && end <= x.rows(), "slice_rows",
            "range [" + std::to_string(begin) + "," + std::to_string(end) + ") of " + shape_str(x.shape()));
    const std::size_t c = x.cols();
    std::vector<double> out(x.data().begin() + begin * c, x.data().begin() + end * c);
    return make_op_result("slice_rows", {end - begin, c}, std::move(out), {x}, [begin, c](Node& self) {
        if (double* g = grad_of(self, 0))
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * c + i] += self.grad[i];
    });
}

Tensor element(const Tensor& x, std::size_t i) {
    require(i < x.numel(), "element", "index " + std::to_string(i) + " out of " + shape_str(x.shape()));
    return make_op_result("element", {1}, {x[i]}, {x}, [i](Node& self) {
        if (double* g = grad_of(self, 0)) g[i] += self.grad[0];
    });
}

Tensor pick(const Tensor& x, std::span<const int> labels) {
    const std::size_t r = x.rows(), c = x.cols();
    require(labels.size() == r, "pick", "need one label per row");
    std::vector<std::size_t> idx(r);
    std::vector<double> out(r);
    for (std::size_t i = 0; i < r; ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c)
            throw std::out_of_range("pick: label " + std::to_string(labels[i]) + " outside [0," + std::to_string(c) +
                                    ")");
        idx[i] = i * c + static_cast<std::size_t>(labels[i]);
        out[i] = x[idx[i]];
    }
    return make_op_result("pick", {r}, std::move(out), {x}, [idx](Node& self) {
        if (double* g = grad_of(self, 0))
            for (std::size_t i = 0; i < idx.size(); ++i) g[idx[i]] += self.grad[i];
    });
}

Tensor minimum(const Tensor& x, double cap) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(x[i], cap);
    return make_op_result("minimum", x.shape(), std::move(out), {x}, [cap](Node& self) {
        const auto& X = self.inputs[0]->data;
        if (double* g = grad_of(self, 0))
            for (std::size_t i = 0; i < X.size(); ++i)
                if (X[i] < cap) g[i] += self.grad[i];
    });
}

Tensor dropout(const Tensor& x, double keep_prob, Rng& rng, bool train) {
    if (!(keep_prob > 0.0 && keep_prob <= 1.0)) throw std::invalid_argument("dropout: keep_prob must be in (0, 1]");
    if (!train || keep_prob == 1.0) return x;
    std::vector<double> mask(x.numel());
    for (auto& m : mask) m = uniform01(rng) < keep_prob ? 1.0 / keep_prob : 0.0;
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * mask[i];
    return make_op_result("dropout", x.shape(), std::move(out), {x}, [mask = std::move(mask)](Node& self) {
        if (double* g = grad_of(self, 0))
            for (std::size_t i = 0; i < mask.size(); ++i) g[i] += mask[i] * self.grad[i];
    });
}

Tensor stop_gradient(const Tensor& x) {
    return x.detach();
}

Tensor kl_rows(const Tensor& p, const Tensor& q) {
    require(p.shape() == q.shape(), "kl_rows", "shapes " + shape_str(p.shape()) + " and " + shape_str(q.shape()));
    const std::size_t r = p.rows(), c = p.cols();
    for (std::size_t i = 0; i < p.numel(); ++i)
        if (p[i] < 0.0 || q[i] < 0.0) throw std::domain_error("kl_rows: negative probability");
    std::vector<double> out(r, 0.0);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) {
            const double pv = p[i * c + j];
            if (pv > 0.0) out[i] += pv * (std::log(pv) - std::log(std::max(q[i * c + j], kProbFloor)));
        }
    return make_op_result("kl_rows", {r}, std::move(out), {p, q}, [r, c](Node& self) {
        const auto& P = self.inputs[0]->data;
        const auto& Q = self.inputs[1]->data;
        double* gp = grad_of(self, 0);
        double* gq = grad_of(self, 1);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) {
                const std::size_t k = i * c + j;
                const double qv = std::max(Q[k], kProbFloor);
                if (gp && P[k] > 0.0) gp[k] += self.grad[i] * (std::log(P[k]) - std::log(qv) + 1.0);
                if (gq && Q[k] > kProbFloor) gq[k] -= self.grad[i] * P[k] / Q[k];
            }
    });
}

}  // namespace asm2tv
