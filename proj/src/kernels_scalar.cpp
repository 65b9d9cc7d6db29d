#include "duq/kernels.hpp"

// Reference kernels. The loops are written so that each output element sees
// the same sequence of multiplies and adds as the AVX2 variant (independent
// accumulation per output; reductions use the shared 4-lane blocking).

namespace duq::kernels::detail {
namespace {

void axpy_s(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void add_s(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_s(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_s(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_s(double a, const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i];
}

void relu_s(const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_s(const double* x, const double* g, double* out, std::size_t n) {
    // Unconditional add of a masked value, matching the SIMD path bit-for-bit.
    for (std::size_t i = 0; i < n; ++i) out[i] += x[i] > 0.0 ? g[i] : 0.0;
}

void tanh_backward_s(const double* y, const double* g, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] += g[i] * (1.0 - y[i] * y[i]);
}

void mul_accumulate_s(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] += a[i] * b[i];
}

double dot_s(const double* x, const double* y, std::size_t n) {
    // 4-lane blocked order, identical to the AVX2 path.
    double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 += x[i] * y[i];
        acc1 += x[i + 1] * y[i + 1];
        acc2 += x[i + 2] * y[i + 2];
        acc3 += x[i + 3] * y[i + 3];
    }
    double tail = 0.0;
    for (; i < n; ++i) tail += x[i] * y[i];
    return ((acc0 + acc1) + (acc2 + acc3)) + tail;
}

void linear_forward_s(const double* X, const double* W, const double* b, double* Y,
                      std::size_t rows, std::size_t in, std::size_t out) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* yr = Y + r * out;
        for (std::size_t o = 0; o < out; ++o) yr[o] = b[o];
        const double* xr = X + r * in;
        for (std::size_t i = 0; i < in; ++i) {
            const double xi = xr[i];
            const double* wi = W + i * out;
            for (std::size_t o = 0; o < out; ++o) yr[o] += xi * wi[o];
        }
    }
}

void linear_backward_input_s(const double* dY, const double* W, double* dX,
                             std::size_t rows, std::size_t in, std::size_t out) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* gy = dY + r * out;
        double* gx = dX + r * in;
        for (std::size_t i = 0; i < in; ++i) gx[i] = dot_s(gy, W + i * out, out);
    }
}

void linear_backward_params_s(const double* X, const double* dY, double* dW, double* db,
                              std::size_t rows, std::size_t in, std::size_t out) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = X + r * in;
        const double* gy = dY + r * out;
        for (std::size_t i = 0; i < in; ++i) {
            const double xi = xr[i];
            double* wi = dW + i * out;
            for (std::size_t o = 0; o < out; ++o) wi[o] += xi * gy[o];
        }
        for (std::size_t o = 0; o < out; ++o) db[o] += gy[o];
    }
}

}  // namespace

const Vtable& scalar_table() {
    static const Vtable t = {axpy_s,          add_s,
                             sub_s,           mul_s,
                             scale_s,         relu_s,
                             relu_backward_s, tanh_backward_s,
                             mul_accumulate_s, dot_s,
                             linear_forward_s, linear_backward_input_s,
                             linear_backward_params_s};
    return t;
}

}  // namespace duq::kernels::detail
