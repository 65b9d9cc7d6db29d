#include "duq/tape.hpp"

#include <cmath>

#include "duq/kernels.hpp"

namespace duq {

namespace math {

double softplus(double x) {
    // max(x,0) + log1p(exp(-|x|)) is stable across the whole axis
    return (x > 0.0 ? x : 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

double sigmoid(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace math

Tape::Id Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
}

void Tape::check_same_shape(Id a, Id b, const char* op) const {
    if (!nodes_[a].value.same_shape(nodes_[b].value))
        throw ContractViolation(std::string(op) + ": shape mismatch " +
                                shape_string(nodes_[a].value) + " vs " +
                                shape_string(nodes_[b].value));
}

Tape::Id Tape::leaf(Tensor value) { return push({Op::leaf, -1, -1, -1, 0.0, std::move(value), {}}); }

Tape::Id Tape::constant(Tensor value) {
    return push({Op::constant, -1, -1, -1, 0.0, std::move(value), {}});
}

Tape::Id Tape::add(Id a, Id b) {
    check_same_shape(a, b, "add");
    Tensor out = Tensor::zeros(nodes_[a].value.shape);
    kernels::add(nodes_[a].value.data(), nodes_[b].value.data(), out.data(), out.size());
    return push({Op::add, a, b, -1, 0.0, std::move(out), {}});
}

Tape::Id Tape::sub(Id a, Id b) {
    check_same_shape(a, b, "sub");
    Tensor out = Tensor::zeros(nodes_[a].value.shape);
    kernels::sub(nodes_[a].value.data(), nodes_[b].value.data(), out.data(), out.size());
    return push({Op::sub, a, b, -1, 0.0, std::move(out), {}});
}

Tape::Id Tape::mul(Id a, Id b) {
    check_same_shape(a, b, "mul");
    Tensor out = Tensor::zeros(nodes_[a].value.shape);
    kernels::mul(nodes_[a].value.data(), nodes_[b].value.data(), out.data(), out.size());
    return push({Op::mul, a, b, -1, 0.0, std::move(out), {}});
}

Tape::Id Tape::mul_const(Id a, Tensor c) {
    if (!nodes_[a].value.same_shape(c))
        throw ContractViolation("mul_const: shape mismatch");
    Tensor out = Tensor::zeros(nodes_[a].value.shape);
    kernels::mul(nodes_[a].value.data(), c.data(), out.data(), out.size());
    return push({Op::mul_const, a, -1, -1, 0.0, std::move(out), std::move(c)});
}

Tape::Id Tape::scale(Id a, double alpha) {
    Tensor out = Tensor::zeros(nodes_[a].value.shape);
    kernels::scale(alpha, nodes_[a].value.data(), out.data(), out.size());
    return push({Op::scale, a, -1, -1, alpha, std::move(out), {}});
}

Tape::Id Tape::add_scalar(Id a, double alpha) {
    Tensor out = nodes_[a].value;
    for (double& x : out.v) x += alpha;
    return push({Op::add_scalar, a, -1, -1, alpha, std::move(out), {}});
}

Tape::Id Tape::linear(Id x, Id w, Id b) {
    const Tensor& X = nodes_[x].value;
    const Tensor& W = nodes_[w].value;
    const Tensor& B = nodes_[b].value;
    if (W.shape.size() != 2) throw ContractViolation("linear: weights must be 2-D");
    const std::size_t in = W.shape[0], out = W.shape[1];
    const bool batched = X.shape.size() == 2;
    const std::size_t cols = batched ? X.shape[1] : X.size();
    const std::size_t rows = batched ? X.shape[0] : 1;
    if (cols != in)
        throw ContractViolation("linear: weight inner extent " + std::to_string(in) +
                                " does not match input extent " + std::to_string(cols));
    if (B.size() != out) throw ContractViolation("linear: bias extent mismatch");
    Tensor Y = batched ? Tensor::zeros({rows, out}) : Tensor::zeros({out});
    kernels::linear_forward(X.data(), W.data(), B.data(), Y.data(), rows, in, out);
    return push({Op::linear, x, w, b, 0.0, std::move(Y), {}});
}

Tape::Id Tape::tanh(Id a) {
    Tensor out = nodes_[a].value;
    for (double& x : out.v) x = std::tanh(x);
    return push({Op::tanh_fn, a, -1, -1, 0.0, std::move(out), {}});
}

Tape::Id Tape::relu(Id a) {
    Tensor out = Tensor::zeros(nodes_[a].value.shape);
    kernels::relu(nodes_[a].value.data(), out.data(), out.size());
    return push({Op::relu_fn, a, -1, -1, 0.0, std::move(out), {}});
}

Tape::Id Tape::softplus(Id a) {
    Tensor out = nodes_[a].value;
    for (double& x : out.v) x = math::softplus(x);
    return push({Op::softplus_fn, a, -1, -1, 0.0, std::move(out), {}});
}

Tape::Id Tape::exp(Id a) {
    Tensor out = nodes_[a].value;
    for (double& x : out.v) x = std::exp(x);
    return push({Op::exp_fn, a, -1, -1, 0.0, std::move(out), {}});
}

Tape::Id Tape::log(Id a) {
    Tensor out = nodes_[a].value;
    for (double& x : out.v) x = std::log(x);
    return push({Op::log_fn, a, -1, -1, 0.0, std::move(out), {}});
}

Tape::Id Tape::square(Id a) {
    Tensor out = Tensor::zeros(nodes_[a].value.shape);
    kernels::mul(nodes_[a].value.data(), nodes_[a].value.data(), out.data(), out.size());
    return push({Op::square_fn, a, -1, -1, 0.0, std::move(out), {}});
}

Tape::Id Tape::sum(Id a) {
    double s = 0.0;
    for (double x : nodes_[a].value.v) s += x;
    return push({Op::sum_all, a, -1, -1, 0.0, Tensor::scalar(s), {}});
}

Tape::Id Tape::mean(Id a) {
    if (nodes_[a].value.size() == 0) throw ContractViolation("mean: empty tensor");
    double s = 0.0;
    for (double x : nodes_[a].value.v) s += x;
    const double n = static_cast<double>(nodes_[a].value.size());
    return push({Op::mean_all, a, -1, -1, 0.0, Tensor::scalar(s / n), {}});
}

void Tape::backward(Id root) {
    if (root < 0 || root >= static_cast<Id>(nodes_.size()))
        throw ContractViolation("backward: invalid root id");
    if (!nodes_[root].value.is_scalar())
        throw ContractViolation("backward: root must be a scalar, got shape " +
                                shape_string(nodes_[root].value));
    grads_.clear();
    grads_.reserve(nodes_.size());
    for (const Node& n : nodes_) grads_.push_back(Tensor::zeros(n.value.shape));
    grads_[root].v[0] = 1.0;

    for (Id id = root; id >= 0; --id) {
        const Node& n = nodes_[id];
        const Tensor& g = grads_[id];
        switch (n.op) {
            case Op::leaf:
            case Op::constant:
                break;
            case Op::add:
                kernels::axpy(1.0, g.data(), grads_[n.a].data(), g.size());
                kernels::axpy(1.0, g.data(), grads_[n.b].data(), g.size());
                break;
            case Op::sub:
                kernels::axpy(1.0, g.data(), grads_[n.a].data(), g.size());
                kernels::axpy(-1.0, g.data(), grads_[n.b].data(), g.size());
                break;
            case Op::mul:
                kernels::mul_accumulate(g.data(), nodes_[n.b].value.data(), grads_[n.a].data(),
                                        g.size());
                kernels::mul_accumulate(g.data(), nodes_[n.a].value.data(), grads_[n.b].data(),
                                        g.size());
                break;
            case Op::mul_const:
                kernels::mul_accumulate(g.data(), n.aux.data(), grads_[n.a].data(), g.size());
                break;
            case Op::scale:
                kernels::axpy(n.alpha, g.data(), grads_[n.a].data(), g.size());
                break;
            case Op::add_scalar:
                kernels::axpy(1.0, g.data(), grads_[n.a].data(), g.size());
                break;
            case Op::linear: {
                const Tensor& X = nodes_[n.a].value;
                const Tensor& W = nodes_[n.b].value;
                const std::size_t in = W.shape[0], out = W.shape[1];
                const std::size_t rows = X.size() / in;
                Tensor dX = Tensor::zeros(X.shape);
                kernels::linear_backward_input(g.data(), W.data(), dX.data(), rows, in, out);
                kernels::axpy(1.0, dX.data(), grads_[n.a].data(), dX.size());
                kernels::linear_backward_params(X.data(), g.data(), grads_[n.b].data(),
                                                grads_[n.c].data(), rows, in, out);
                break;
            }
            case Op::tanh_fn:
                kernels::tanh_backward(n.value.data(), g.data(), grads_[n.a].data(), g.size());
                break;
            case Op::relu_fn:
                kernels::relu_backward(nodes_[n.a].value.data(), g.data(), grads_[n.a].data(),
                                       g.size());
                break;
            case Op::softplus_fn: {
                Tensor& ga = grads_[n.a];
                const Tensor& x = nodes_[n.a].value;
                for (std::size_t i = 0; i < g.size(); ++i)
                    ga.v[i] += g.v[i] * math::sigmoid(x.v[i]);
                break;
            }
            case Op::exp_fn:
                kernels::mul_accumulate(g.data(), n.value.data(), grads_[n.a].data(), g.size());
                break;
            case Op::log_fn: {
                Tensor& ga = grads_[n.a];
                const Tensor& x = nodes_[n.a].value;
                for (std::size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i] / x.v[i];
                break;
            }
            case Op::square_fn: {
                Tensor& ga = grads_[n.a];
                const Tensor& x = nodes_[n.a].value;
                for (std::size_t i = 0; i < g.size(); ++i) ga.v[i] += 2.0 * g.v[i] * x.v[i];
                break;
            }
            case Op::sum_all: {
                const double gs = g.v[0];
                Tensor& ga = grads_[n.a];
                for (double& x : ga.v) x += gs;
                break;
            }
            case Op::mean_all: {
                const double gs = g.v[0] / static_cast<double>(nodes_[n.a].value.size());
                Tensor& ga = grads_[n.a];
                for (double& x : ga.v) x += gs;
                break;
            }
        }
    }
    ran_backward_ = true;
}

const Tensor& Tape::grad(Id id) const {
    if (!ran_backward_) throw ContractViolation("grad: backward() has not been run");
    return grads_[id];
}

Tape::Id dense_forward(Tape& tape, Tape::Id weights, Tape::Id bias, Tape::Id input,
                       Activation activation) {
    Tape::Id z = tape.linear(input, weights, bias);
    switch (activation) {
        case Activation::tanh: return tape.tanh(z);
        case Activation::relu: return tape.relu(z);
        case Activation::softplus: return tape.softplus(z);
        case Activation::identity: return z;
    }
    throw ContractViolation("dense_forward: unknown activation");
}

}  // namespace duq
