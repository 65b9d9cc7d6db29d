#include "duq/kernels.hpp"

// AVX2 (4 x f64) variants. Multiplies and adds are kept separate (no FMA)
// and each output element accumulates in the same order as the scalar
// reference, so the two paths produce identical bits.

#if defined(__AVX2__)

#include <immintrin.h>

namespace duq::kernels::detail {
namespace {

void axpy_v(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        __m256d vx = _mm256_loadu_pd(x + i);
        vy = _mm256_add_pd(vy, _mm256_mul_pd(va, vx));
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void add_v(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_v(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_v(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_v(double a, const double* x, double* out, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) out[i] = a * x[i];
}

void relu_v(const double* x, double* out, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    // max_pd(x, 0) returns 0 for NaN inputs, same as the scalar x>0 test.
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_v(const double* x, const double* g, double* out, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
        __m256d gmask = _mm256_and_pd(mask, _mm256_loadu_pd(g + i));
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(out + i), gmask));
    }
    for (; i < n; ++i) out[i] += x[i] > 0.0 ? g[i] : 0.0;
}

void tanh_backward_v(const double* y, const double* g, double* out, std::size_t n) {
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        __m256d t = _mm256_sub_pd(one, _mm256_mul_pd(vy, vy));
        __m256d acc = _mm256_add_pd(_mm256_loadu_pd(out + i),
                                    _mm256_mul_pd(_mm256_loadu_pd(g + i), t));
        _mm256_storeu_pd(out + i, acc);
    }
    for (; i < n; ++i) out[i] += g[i] * (1.0 - y[i] * y[i]);
}

void mul_accumulate_v(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d acc = _mm256_add_pd(_mm256_loadu_pd(out + i),
                                    _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
        _mm256_storeu_pd(out + i, acc);
    }
    for (; i < n; ++i) out[i] += a[i] * b[i];
}

double dot_v(const double* x, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    double tail = 0.0;
    for (; i < n; ++i) tail += x[i] * y[i];
    return ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) + tail;
}

void linear_forward_v(const double* X, const double* W, const double* b, double* Y,
                      std::size_t rows, std::size_t in, std::size_t out) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* yr = Y + r * out;
        std::size_t o = 0;
        for (; o + 4 <= out; o += 4) _mm256_storeu_pd(yr + o, _mm256_loadu_pd(b + o));
        for (; o < out; ++o) yr[o] = b[o];
        const double* xr = X + r * in;
        for (std::size_t i = 0; i < in; ++i) {
            const __m256d xi = _mm256_set1_pd(xr[i]);
            const double* wi = W + i * out;
            o = 0;
            for (; o + 4 <= out; o += 4) {
                __m256d acc = _mm256_add_pd(_mm256_loadu_pd(yr + o),
                                            _mm256_mul_pd(xi, _mm256_loadu_pd(wi + o)));
                _mm256_storeu_pd(yr + o, acc);
            }
            for (; o < out; ++o) yr[o] += xr[i] * wi[o];
        }
    }
}

void linear_backward_input_v(const double* dY, const double* W, double* dX,
                             std::size_t rows, std::size_t in, std::size_t out) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* gy = dY + r * out;
        double* gx = dX + r * in;
        for (std::size_t i = 0; i < in; ++i) gx[i] = dot_v(gy, W + i * out, out);
    }
}

void linear_backward_params_v(const double* X, const double* dY, double* dW, double* db,
                              std::size_t rows, std::size_t in, std::size_t out) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = X + r * in;
        const double* gy = dY + r * out;
        for (std::size_t i = 0; i < in; ++i) {
            const __m256d xi = _mm256_set1_pd(xr[i]);
            double* wi = dW + i * out;
            std::size_t o = 0;
            for (; o + 4 <= out; o += 4) {
                __m256d acc = _mm256_add_pd(_mm256_loadu_pd(wi + o),
                                            _mm256_mul_pd(xi, _mm256_loadu_pd(gy + o)));
                _mm256_storeu_pd(wi + o, acc);
            }
            for (; o < out; ++o) wi[o] += xr[i] * gy[o];
        }
        std::size_t o = 0;
        for (; o + 4 <= out; o += 4)
            _mm256_storeu_pd(db + o, _mm256_add_pd(_mm256_loadu_pd(db + o), _mm256_loadu_pd(gy + o)));
        for (; o < out; ++o) db[o] += gy[o];
    }
}

}  // namespace

const Vtable* avx2_table() {
    static const Vtable t = {axpy_v,          add_v,
                             sub_v,           mul_v,
                             scale_v,         relu_v,
                             relu_backward_v, tanh_backward_v,
                             mul_accumulate_v, dot_v,
                             linear_forward_v, linear_backward_input_v,
                             linear_backward_params_v};
    return &t;
}

}  // namespace duq::kernels::detail

#else

namespace duq::kernels::detail {
const Vtable* avx2_table() { return nullptr; }
}  // namespace duq::kernels::detail

#endif
