#pragma once

#include <vector>

#include "duq/tensor.hpp"

namespace duq {

// Reverse-mode tape over dense tensors (a Wengert list). Nodes are recorded
// in forward order; backward(root) walks them in reverse accumulating
// adjoints. Tapes are single-threaded objects; independent tapes may run on
// different threads.
class Tape {
  public:
    using Id = int;

    enum class Op {
        leaf,        // differentiable input (parameters)
        constant,    // non-differentiable input (data, noise draws)
        add,         // elementwise a + b
        sub,         // elementwise a - b
        mul,         // elementwise a * b
        mul_const,   // elementwise a * C (C constant tensor, no adjoint)
        scale,       // alpha * a
        add_scalar,  // a + alpha
        linear,      // X(batch x in) * W(in x out) + b(out), row broadcast
        tanh_fn,
        relu_fn,     // derivative at exactly 0 is 0
        softplus_fn, // ln(1 + e^x), numerically stable
        exp_fn,
        log_fn,
        square_fn,
        sum_all,     // -> scalar
        mean_all,    // -> scalar
    };

    Id leaf(Tensor value);
    Id constant(Tensor value);

    Id add(Id a, Id b);
    Id sub(Id a, Id b);
    Id mul(Id a, Id b);
    Id mul_const(Id a, Tensor c);
    Id scale(Id a, double alpha);
    Id add_scalar(Id a, double alpha);
    Id linear(Id x, Id w, Id b);
    Id tanh(Id a);
    Id relu(Id a);
    Id softplus(Id a);
    Id exp(Id a);
    Id log(Id a);
    Id square(Id a);
    Id sum(Id a);
    Id mean(Id a);

    const Tensor& value(Id id) const { return nodes_[id].value; }
    std::size_t size() const { return nodes_.size(); }

    // Accumulates d(root)/d(node) for every node; root must be scalar.
    // Leaves not on any path to root keep zero adjoints.
    void backward(Id root);
    // Adjoint of a node after backward(); zero tensor if untouched.
    const Tensor& grad(Id id) const;

  private:
    struct Node {
        Op op;
        Id a = -1, b = -1, c = -1;
        double alpha = 0.0;
        Tensor value;
        Tensor aux;  // op-dependent saved tensor (inputs, constants)
    };

    Id push(Node n);
    void check_same_shape(Id a, Id b, const char* op) const;

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
    bool ran_backward_ = false;
};

// Activation choices for dense layers.
enum class Activation { tanh, relu, identity, softplus };

// activation(weights * input + bias), recorded on the tape.
// `input` may be a vector (treated as one row) or a (batch x in) matrix;
// `weights` is (in x out). Shape mismatch raises ContractViolation.
Tape::Id dense_forward(Tape& tape, Tape::Id weights, Tape::Id bias, Tape::Id input,
                       Activation activation);

namespace math {
double softplus(double x);
double sigmoid(double x);
}  // namespace math

}  // namespace duq
