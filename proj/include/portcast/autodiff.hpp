#pragma once

// Reverse-mode automatic differentiation over dense double matrices.
//
// Graphs are built eagerly: every op allocates a Node holding its value and a
// closure that scatters the incoming adjoint to its parents. backward() walks
// the graph once in reverse topological order. Models keep their parameters
// as long-lived leaf Values and rebuild the rest of the graph each step, so a
// step's intermediates are freed when the step's root goes out of scope.

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "portcast/errors.hpp"

namespace portcast::ad {

using Mat = Eigen::MatrixXd;

struct Node {
    Mat value;
    Mat grad;                 // allocated on demand during backward
    bool requires_grad = false;  // leaf flag
    bool needs_grad = false;     // requires_grad or any parent needs it
    bool grad_alloc = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;  // reads this->grad, accumulates into parents

    void accumulate(const Mat& g) {
        if (!grad_alloc) {
            grad = g;
            grad_alloc = true;
        } else {
            grad += g;
        }
    }
};

using NodePtr = std::shared_ptr<Node>;

class Value {
  public:
    Value() = default;
    explicit Value(NodePtr n) : node_(std::move(n)) {}

    static Value leaf(Mat v, bool requires_grad = true) {
        auto n = std::make_shared<Node>();
        n->value = std::move(v);
        n->requires_grad = requires_grad;
        n->needs_grad = requires_grad;
        return Value(std::move(n));
    }
    static Value constant(Mat v) { return leaf(std::move(v), false); }
    static Value scalar(double x, bool requires_grad = false) {
        Mat m(1, 1);
        m(0, 0) = x;
        return leaf(std::move(m), requires_grad);
    }

    bool defined() const { return node_ != nullptr; }
    const Mat& val() const { return node_->value; }
    Mat& raw() { return node_->value; }  // in-place edits (optimizer steps)
    double item() const { return node_->value(0, 0); }
    Eigen::Index rows() const { return node_->value.rows(); }
    Eigen::Index cols() const { return node_->value.cols(); }
    const Mat& grad() const { return node_->grad; }
    bool has_grad() const { return node_->grad_alloc; }
    bool requires_grad() const { return node_->requires_grad; }
    NodePtr node() const { return node_; }

  private:
    NodePtr node_;
};

// Runs reverse-mode accumulation from a 1x1 root. Leaf gradients are left on
// the nodes; clear them with zero_grad before the next backward.
void backward(const Value& root);
void zero_grad(const std::vector<Value>& params);

// --- ops -------------------------------------------------------------------

Value add(const Value& a, const Value& b);           // same shape
Value add_rowvec(const Value& a, const Value& b);    // a: r x c, b: 1 x c
Value sub(const Value& a, const Value& b);
Value neg(const Value& a);
Value mul(const Value& a, const Value& b);           // elementwise
Value cmul(double c, const Value& a);                // constant scale
Value matmul(const Value& a, const Value& b);
Value transpose(const Value& a);
Value slice_rows(const Value& a, Eigen::Index r0, Eigen::Index nrows);
Value vcat(const Value& a, const Value& b);
Value gather_rows(const Value& a, const std::vector<int>& idx);
Value rows_mean(const Value& a);                     // r x c -> 1 x c
Value repeat_row(const Value& a, Eigen::Index n);    // 1 x c -> n x c
Value sum(const Value& a);                           // -> 1 x 1
Value mean(const Value& a);                          // -> 1 x 1
Value mul_scalar(const Value& a, const Value& s);    // s: 1 x 1
Value sigmoid(const Value& a);
Value tanh_act(const Value& a);
Value gelu(const Value& a);
Value softplus(const Value& a);
Value log_act(const Value& a);
Value exp_act(const Value& a);
Value clamp(const Value& a, double lo, double hi);
Value softmax_rows(const Value& a);
Value softmax_col(const Value& a);                   // k x 1 column vector

inline Value operator+(const Value& a, const Value& b) { return add(a, b); }
inline Value operator-(const Value& a, const Value& b) { return sub(a, b); }
inline Value operator*(const Value& a, const Value& b) { return matmul(a, b); }

Value dot(const Value& a, const Value& b);           // column vectors -> 1 x 1

// --- optimizer ---------------------------------------------------------------

// Adam with optional global gradient-norm clipping (clip <= 0 disables).
class Adam {
  public:
    Adam(std::vector<Value> params, double lr, double clip_norm = 1.0,
         double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void step();
    void zero_grad();
    const std::vector<Value>& params() const { return params_; }

  private:
    std::vector<Value> params_;
    std::vector<Mat> m_, v_;
    double lr_, clip_, beta1_, beta2_, eps_;
    long t_ = 0;
};

// Global L2 norm of the current gradients of `params` (missing grads count 0).
double grad_norm(const std::vector<Value>& params);

}  // namespace portcast::ad
