#include "duq/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace duq::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

Isa pick_initial() {
    if (const char* env = std::getenv("DUQ_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return Isa::scalar;
        if (std::strcmp(env, "avx2") == 0 && detail::avx2_table() && cpu_has_avx2())
            return Isa::avx2;
        return Isa::scalar;
    }
    if (detail::avx2_table() && cpu_has_avx2()) return Isa::avx2;
    return Isa::scalar;
}

Isa g_isa = pick_initial();

const detail::Vtable& table() {
    return g_isa == Isa::avx2 ? *detail::avx2_table() : detail::scalar_table();
}

}  // namespace

Isa active() { return g_isa; }

void force(Isa isa) {
    if (isa == Isa::avx2 && (!detail::avx2_table() || !cpu_has_avx2())) return;
    g_isa = isa;
}

bool avx2_available() { return detail::avx2_table() != nullptr && cpu_has_avx2(); }

std::string name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

void axpy(double a, const double* x, double* y, std::size_t n) { table().axpy(a, x, y, n); }
void add(const double* a, const double* b, double* out, std::size_t n) { table().add(a, b, out, n); }
void sub(const double* a, const double* b, double* out, std::size_t n) { table().sub(a, b, out, n); }
void mul(const double* a, const double* b, double* out, std::size_t n) { table().mul(a, b, out, n); }
void scale(double a, const double* x, double* out, std::size_t n) { table().scale(a, x, out, n); }
void relu(const double* x, double* out, std::size_t n) { table().relu(x, out, n); }
void relu_backward(const double* x, const double* g, double* out, std::size_t n) {
    table().relu_backward(x, g, out, n);
}
void tanh_backward(const double* y, const double* g, double* out, std::size_t n) {
    table().tanh_backward(y, g, out, n);
}
void mul_accumulate(const double* a, const double* b, double* out, std::size_t n) {
    table().mul_accumulate(a, b, out, n);
}
double dot(const double* x, const double* y, std::size_t n) { return table().dot(x, y, n); }
void linear_forward(const double* X, const double* W, const double* b, double* Y,
                    std::size_t rows, std::size_t in, std::size_t out) {
    table().linear_forward(X, W, b, Y, rows, in, out);
}
void linear_backward_input(const double* dY, const double* W, double* dX,
                           std::size_t rows, std::size_t in, std::size_t out) {
    table().linear_backward_input(dY, W, dX, rows, in, out);
}
void linear_backward_params(const double* X, const double* dY, double* dW, double* db,
                            std::size_t rows, std::size_t in, std::size_t out) {
    table().linear_backward_params(X, dY, dW, db, rows, in, out);
}

}  // namespace duq::kernels
