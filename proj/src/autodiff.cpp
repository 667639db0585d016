#include "portcast/autodiff.hpp"

#include <cmath>
#include <unordered_set>

namespace portcast::ad {

namespace {

Value make_op(Mat value, std::vector<NodePtr> parents,
              std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    for (auto& p : parents) n->needs_grad = n->needs_grad || p->needs_grad;
    n->parents = std::move(parents);
    if (n->needs_grad) n->backprop = std::move(backprop);
    return Value(std::move(n));
}

void check_same_shape(const Value& a, const Value& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeMismatch(std::string(op) + ": shape mismatch " +
                            std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                            " vs " + std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()));
}

}  // namespace

void backward(const Value& root) {
    if (root.rows() != 1 || root.cols() != 1)
        throw ShapeMismatch("backward: root must be 1x1");
    // iterative post-order topological sort
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.push_back({root.node().get(), 0});
    while (!stack.empty()) {
        auto& [n, i] = stack.back();
        if (i == 0 && visited.count(n)) {
            stack.pop_back();
            continue;
        }
        if (i < n->parents.size()) {
            Node* p = n->parents[i++].get();
            if (!visited.count(p) && p->needs_grad) stack.push_back({p, 0});
        } else {
            visited.insert(n);
            order.push_back(n);
            stack.pop_back();
        }
    }
    root.node()->accumulate(Mat::Ones(1, 1));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backprop && n->grad_alloc) n->backprop(*n);
    }
}

void zero_grad(const std::vector<Value>& params) {
    for (const auto& p : params) {
        p.node()->grad_alloc = false;
        p.node()->grad.resize(0, 0);
    }
}

Value add(const Value& a, const Value& b) {
    check_same_shape(a, b, "add");
    return make_op(a.val() + b.val(), {a.node(), b.node()}, [](Node& self) {
        if (self.parents[0]->needs_grad) self.parents[0]->accumulate(self.grad);
        if (self.parents[1]->needs_grad) self.parents[1]->accumulate(self.grad);
    });
}

Value add_rowvec(const Value& a, const Value& b) {
    if (b.rows() != 1 || a.cols() != b.cols())
        throw ShapeMismatch("add_rowvec: need 1 x cols(a) row vector");
    Mat out = a.val().rowwise() + b.val().row(0);
    return make_op(std::move(out), {a.node(), b.node()}, [](Node& self) {
        if (self.parents[0]->needs_grad) self.parents[0]->accumulate(self.grad);
        if (self.parents[1]->needs_grad)
            self.parents[1]->accumulate(self.grad.colwise().sum());
    });
}

Value sub(const Value& a, const Value& b) {
    check_same_shape(a, b, "sub");
    return make_op(a.val() - b.val(), {a.node(), b.node()}, [](Node& self) {
        if (self.parents[0]->needs_grad) self.parents[0]->accumulate(self.grad);
        if (self.parents[1]->needs_grad) self.parents[1]->accumulate(-self.grad);
    });
}

Value neg(const Value& a) {
    return make_op(-a.val(), {a.node()}, [](Node& self) {
        self.parents[0]->accumulate(-self.grad);
    });
}

Value mul(const Value& a, const Value& b) {
    check_same_shape(a, b, "mul");
    return make_op(a.val().cwiseProduct(b.val()), {a.node(), b.node()}, [](Node& self) {
        if (self.parents[0]->needs_grad)
            self.parents[0]->accumulate(self.grad.cwiseProduct(self.parents[1]->value));
        if (self.parents[1]->needs_grad)
            self.parents[1]->accumulate(self.grad.cwiseProduct(self.parents[0]->value));
    });
}

Value cmul(double c, const Value& a) {
    return make_op(c * a.val(), {a.node()}, [c](Node& self) {
        self.parents[0]->accumulate(c * self.grad);
    });
}

Value matmul(const Value& a, const Value& b) {
    if (a.cols() != b.rows()) throw ShapeMismatch("matmul: inner dims differ");
    return make_op(a.val() * b.val(), {a.node(), b.node()}, [](Node& self) {
        if (self.parents[0]->needs_grad)
            self.parents[0]->accumulate(self.grad * self.parents[1]->value.transpose());
        if (self.parents[1]->needs_grad)
            self.parents[1]->accumulate(self.parents[0]->value.transpose() * self.grad);
    });
}

Value transpose(const Value& a) {
    return make_op(a.val().transpose(), {a.node()}, [](Node& self) {
        self.parents[0]->accumulate(self.grad.transpose());
    });
}

Value slice_rows(const Value& a, Eigen::Index r0, Eigen::Index nrows) {
    if (r0 < 0 || r0 + nrows > a.rows()) throw ShapeMismatch("slice_rows: out of range");
    Mat out = a.val().middleRows(r0, nrows);
    return make_op(std::move(out), {a.node()}, [r0, nrows](Node& self) {
        Mat g = Mat::Zero(self.parents[0]->value.rows(), self.parents[0]->value.cols());
        g.middleRows(r0, nrows) = self.grad;
        self.parents[0]->accumulate(g);
    });
}

Value vcat(const Value& a, const Value& b) {
    if (a.cols() != b.cols()) throw ShapeMismatch("vcat: column counts differ");
    Mat out(a.rows() + b.rows(), a.cols());
    out.topRows(a.rows()) = a.val();
    out.bottomRows(b.rows()) = b.val();
    return make_op(std::move(out), {a.node(), b.node()}, [](Node& self) {
        Eigen::Index ra = self.parents[0]->value.rows();
        Eigen::Index rb = self.parents[1]->value.rows();
        if (self.parents[0]->needs_grad) self.parents[0]->accumulate(self.grad.topRows(ra));
        if (self.parents[1]->needs_grad)
            self.parents[1]->accumulate(self.grad.bottomRows(rb));
    });
}

Value gather_rows(const Value& a, const std::vector<int>& idx) {
    Mat out(static_cast<Eigen::Index>(idx.size()), a.cols());
    for (size_t k = 0; k < idx.size(); ++k) {
        if (idx[k] < 0 || idx[k] >= a.rows()) throw ShapeMismatch("gather_rows: index");
        out.row(static_cast<Eigen::Index>(k)) = a.val().row(idx[k]);
    }
    return make_op(std::move(out), {a.node()}, [idx](Node& self) {
        Mat g = Mat::Zero(self.parents[0]->value.rows(), self.parents[0]->value.cols());
        for (size_t k = 0; k < idx.size(); ++k)
            g.row(idx[k]) += self.grad.row(static_cast<Eigen::Index>(k));
        self.parents[0]->accumulate(g);
    });
}

Value rows_mean(const Value& a) {
    Mat out = a.val().colwise().mean();
    return make_op(std::move(out), {a.node()}, [](Node& self) {
        Eigen::Index r = self.parents[0]->value.rows();
        Mat g = (self.grad / static_cast<double>(r)).replicate(r, 1);
        self.parents[0]->accumulate(g);
    });
}

Value repeat_row(const Value& a, Eigen::Index n) {
    if (a.rows() != 1) throw ShapeMismatch("repeat_row: need row vector");
    Mat out = a.val().replicate(n, 1);
    return make_op(std::move(out), {a.node()}, [](Node& self) {
        self.parents[0]->accumulate(self.grad.colwise().sum());
    });
}

Value sum(const Value& a) {
    Mat out(1, 1);
    out(0, 0) = a.val().sum();
    return make_op(std::move(out), {a.node()}, [](Node& self) {
        double g = self.grad(0, 0);
        self.parents[0]->accumulate(
            Mat::Constant(self.parents[0]->value.rows(), self.parents[0]->value.cols(), g));
    });
}

Value mean(const Value& a) {
    Mat out(1, 1);
    out(0, 0) = a.val().mean();
    return make_op(std::move(out), {a.node()}, [](Node& self) {
        double n = static_cast<double>(self.parents[0]->value.size());
        double g = self.grad(0, 0) / n;
        self.parents[0]->accumulate(
            Mat::Constant(self.parents[0]->value.rows(), self.parents[0]->value.cols(), g));
    });
}

Value mul_scalar(const Value& a, const Value& s) {
    if (s.rows() != 1 || s.cols() != 1) throw ShapeMismatch("mul_scalar: s must be 1x1");
    return make_op(a.val() * s.item(), {a.node(), s.node()}, [](Node& self) {
        if (self.parents[0]->needs_grad)
            self.parents[0]->accumulate(self.grad * self.parents[1]->value(0, 0));
        if (self.parents[1]->needs_grad) {
            Mat g(1, 1);
            g(0, 0) = self.grad.cwiseProduct(self.parents[0]->value).sum();
            self.parents[1]->accumulate(g);
        }
    });
}

namespace {

template <typename F, typename DF>
Value elementwise(const Value& a, F f, DF df) {
    Mat out = a.val().unaryExpr(f);
    return make_op(std::move(out), {a.node()}, [df](Node& self) {
        Mat d = self.parents[0]->value.unaryExpr(df);
        self.parents[0]->accumulate(self.grad.cwiseProduct(d));
    });
}

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

}  // namespace

Value sigmoid(const Value& a) {
    return elementwise(
        a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](double x) {
            double s = 1.0 / (1.0 + std::exp(-x));
            return s * (1.0 - s);
        });
}

Value tanh_act(const Value& a) {
    return elementwise(
        a, [](double x) { return std::tanh(x); },
        [](double x) {
            double t = std::tanh(x);
            return 1.0 - t * t;
        });
}

Value gelu(const Value& a) {
    // exact (erf-based) form so the derivative is smooth for gradient checks
    return elementwise(
        a,
        [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); },
        [](double x) {
            double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
            double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
            return cdf + x * pdf;
        });
}

Value softplus(const Value& a) {
    return elementwise(
        a,
        [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); },
        [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
}

Value log_act(const Value& a) {
    return elementwise(a, [](double x) { return std::log(x); },
                       [](double x) { return 1.0 / x; });
}

Value exp_act(const Value& a) {
    return elementwise(a, [](double x) { return std::exp(x); },
                       [](double x) { return std::exp(x); });
}

Value clamp(const Value& a, double lo, double hi) {
    Mat out = a.val().cwiseMax(lo).cwiseMin(hi);
    return make_op(std::move(out), {a.node()}, [lo, hi](Node& self) {
        Mat mask = self.parents[0]->value.unaryExpr(
            [lo, hi](double x) { return (x > lo && x < hi) ? 1.0 : 0.0; });
        self.parents[0]->accumulate(self.grad.cwiseProduct(mask));
    });
}

Value softmax_rows(const Value& a) {
    Mat out = a.val();
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        double mx = out.row(i).maxCoeff();
        out.row(i) = (out.row(i).array() - mx).exp().matrix();
        out.row(i) /= out.row(i).sum();
    }
    return make_op(std::move(out), {a.node()}, [](Node& self) {
        const Mat& p = self.value;
        Mat g(p.rows(), p.cols());
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
            double inner = self.grad.row(i).dot(p.row(i));
            g.row(i) = (p.row(i).array() * (self.grad.row(i).array() - inner)).matrix();
        }
        self.parents[0]->accumulate(g);
    });
}

Value softmax_col(const Value& a) {
    if (a.cols() != 1) throw ShapeMismatch("softmax_col: need column vector");
    return transpose(softmax_rows(transpose(a)));
}

Value dot(const Value& a, const Value& b) {
    check_same_shape(a, b, "dot");
    return sum(mul(a, b));
}

// --- Adam --------------------------------------------------------------------

Adam::Adam(std::vector<Value> params, double lr, double clip_norm, double beta1,
           double beta2, double eps)
    : params_(std::move(params)), lr_(lr), clip_(clip_norm), beta1_(beta1),
      beta2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
        m_.push_back(Mat::Zero(p.rows(), p.cols()));
        v_.push_back(Mat::Zero(p.rows(), p.cols()));
    }
}

double grad_norm(const std::vector<Value>& params) {
    double sq = 0.0;
    for (const auto& p : params)
        if (p.has_grad()) sq += p.grad().squaredNorm();
    return std::sqrt(sq);
}

void Adam::step() {
    ++t_;
    double scale = 1.0;
    if (clip_ > 0.0) {
        double n = grad_norm(params_);
        if (n > clip_) scale = clip_ / n;
    }
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        if (!params_[i].has_grad()) continue;
        Mat g = params_[i].grad() * scale;
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
        Mat mhat = m_[i] / bc1;
        Mat vhat = v_[i] / bc2;
        Mat denom = (vhat.array().sqrt() + eps_).matrix();
        params_[i].raw() -= lr_ * mhat.cwiseQuotient(denom);
    }
}

void Adam::zero_grad() { ad::zero_grad(params_); }

}  // namespace portcast::ad
