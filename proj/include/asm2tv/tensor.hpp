#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "asm2tv/rng.hpp"

namespace asm2tv {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when an op produces NaN or Inf.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward;

    bool is_leaf() const { return inputs.empty(); }
};

}  // namespace detail

/// Handle to a node of a reverse-mode computation graph.
///
/// Copies share the node. Leaves created with requires_grad accumulate
/// gradients across backward() calls until zero_grad(). Interior nodes keep
/// their inputs alive, so dropping the loss handle frees the whole graph.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t numel() const { return node_->data.size(); }
    std::size_t dim() const { return node_->shape.size(); }
    /// Leading extent when viewed as a matrix over the last axis.
    std::size_t rows() const;
    /// Extent of the last axis.
    std::size_t cols() const;

    std::span<const double> data() const { return node_->data; }
    std::span<double> mutable_data() { return node_->data; }
    std::span<const double> grad() const { return node_->grad; }
    std::span<double> mutable_grad() { return node_->grad; }
    double operator[](std::size_t i) const { return node_->data[i]; }
    double at(std::size_t r, std::size_t c) const { return node_->data[r * cols() + c]; }
    double item() const;

    bool requires_grad() const { return node_->requires_grad; }
    const char* op() const { return node_->op; }

    /// Reverse sweep from a one-element tensor.
    void backward() const;
    void zero_grad();

    /// Copy of the values with no graph history.
    Tensor detach() const;

    bool same_node(const Tensor& other) const { return node_ == other.node_; }
    detail::Node* node() const { return node_.get(); }

private:
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    friend Tensor make_op_result(const char*, Shape, std::vector<double>, std::vector<Tensor>,
                                 std::function<void(detail::Node&)>);

    std::shared_ptr<detail::Node> node_;
};

/// Builds an op output, records it in the graph when any input requires grad,
/// and rejects non-finite values.
Tensor make_op_result(const char* op, Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                      std::function<void(detail::Node&)> backward);

// Differentiable ops. Everything is row-major; "last axis" ops treat an
// (r, c) matrix as r rows and a 1-D tensor as a single row. Broadcasting is
// limited to bias-add of a row vector onto a matrix.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor neg(const Tensor& x);
Tensor scale(const Tensor& x, double factor);
/// x times a one-element tensor, differentiable in both.
Tensor mul_scalar(const Tensor& x, const Tensor& s);
Tensor softmax(const Tensor& x);
Tensor log_softmax(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Sum over the last axis; shape {rows}.
Tensor row_sum(const Tensor& x);
/// Euclidean norm over the last axis; shape {rows}. Subgradient 0 at the origin.
Tensor l2_norm(const Tensor& x);
Tensor concat(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
/// Element i as a one-element tensor.
Tensor element(const Tensor& x, std::size_t i);
/// x[r, labels[r]] for each row; shape {rows}.
Tensor pick(const Tensor& x, std::span<const int> labels);
/// Elementwise min(x, cap); gradient passes only where x < cap.
Tensor minimum(const Tensor& x, double cap);
/// Inverted dropout. Identity when !train or keep_prob == 1.
Tensor dropout(const Tensor& x, double keep_prob, Rng& rng, bool train);
Tensor stop_gradient(const Tensor& x);
/// Per-row KL(p || q) = sum_i p_i (log p_i - log max(q_i, 1e-12)), with 0 log 0 = 0.
Tensor kl_rows(const Tensor& p, const Tensor& q);

inline constexpr double kProbFloor = 1e-12;

}  // namespace asm2tv
