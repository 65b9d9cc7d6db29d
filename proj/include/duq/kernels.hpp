#pragma once

// Data-parallel inner loops behind the tensor/autodiff layer.
//
// Two implementations are provided: a scalar reference and an AVX2 variant,
// selected once at startup (cpuid, overridable via DUQ_KERNELS=scalar|avx2
// or force()). Both paths use the same per-element operation order and no
// FMA contraction, so results are bit-identical; the equivalence tests
// assert exact equality.

#include <cstddef>
#include <string>

namespace duq::kernels {

enum class Isa { scalar, avx2 };

Isa active();
void force(Isa isa);
bool avx2_available();
std::string name(Isa isa);

// y[i] += a * x[i]
void axpy(double a, const double* x, double* y, std::size_t n);
// out[i] = a[i] (+,-,*) b[i]
void add(const double* a, const double* b, double* out, std::size_t n);
void sub(const double* a, const double* b, double* out, std::size_t n);
void mul(const double* a, const double* b, double* out, std::size_t n);
// out[i] = a * x[i]
void scale(double a, const double* x, double* out, std::size_t n);
// out[i] = max(x[i], 0)
void relu(const double* x, double* out, std::size_t n);
// out[i] += g[i] where x[i] > 0 (relu backward; derivative at 0 is 0)
void relu_backward(const double* x, const double* g, double* out, std::size_t n);
// out[i] += g[i] * (1 - y[i]*y[i])   (tanh backward from stored output)
void tanh_backward(const double* y, const double* g, double* out, std::size_t n);
// out[i] += a[i] * b[i]
void mul_accumulate(const double* a, const double* b, double* out, std::size_t n);

// Blocked 4-accumulator dot product; the scalar path mirrors the SIMD
// lane/combine order exactly.
double dot(const double* x, const double* y, std::size_t n);

// Y[r,o] = b[o] + sum_i X[r,i] * W[i,o]        X: rows x in, W: in x out
void linear_forward(const double* X, const double* W, const double* b, double* Y,
                    std::size_t rows, std::size_t in, std::size_t out);
// dX[r,i] = dot(dY[r,:], W[i,:])
void linear_backward_input(const double* dY, const double* W, double* dX,
                           std::size_t rows, std::size_t in, std::size_t out);
// dW[i,o] += sum_r X[r,i] * dY[r,o];  db[o] += sum_r dY[r,o]
void linear_backward_params(const double* X, const double* dY, double* dW, double* db,
                            std::size_t rows, std::size_t in, std::size_t out);

namespace detail {
// Raw tables so the dispatcher can swap implementations wholesale.
struct Vtable {
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*add)(const double*, const double*, double*, std::size_t);
    void (*sub)(const double*, const double*, double*, std::size_t);
    void (*mul)(const double*, const double*, double*, std::size_t);
    void (*scale)(double, const double*, double*, std::size_t);
    void (*relu)(const double*, double*, std::size_t);
    void (*relu_backward)(const double*, const double*, double*, std::size_t);
    void (*tanh_backward)(const double*, const double*, double*, std::size_t);
    void (*mul_accumulate)(const double*, const double*, double*, std::size_t);
    double (*dot)(const double*, const double*, std::size_t);
    void (*linear_forward)(const double*, const double*, const double*, double*,
                           std::size_t, std::size_t, std::size_t);
    void (*linear_backward_input)(const double*, const double*, double*,
                                  std::size_t, std::size_t, std::size_t);
    void (*linear_backward_params)(const double*, const double*, double*, double*,
                                   std::size_t, std::size_t, std::size_t);
};
const Vtable& scalar_table();
const Vtable* avx2_table();  // nullptr when not compiled in
}  // namespace detail

}  // namespace duq::kernels
