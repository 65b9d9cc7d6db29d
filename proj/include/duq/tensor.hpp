#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "duq/errors.hpp"

namespace duq {

// Dense row-major tensor of doubles. Everything in this project is f64:
// the networks are tiny, and full precision keeps gradient checks and
// cross-run determinism tight.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> v;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, std::vector<double> values)
        : shape(std::move(s)), v(std::move(values)) {
        if (v.size() != count(shape))
            throw ContractViolation("Tensor: value count does not match shape");
    }

    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t e : s) n *= e;
        return n;
    }

    static Tensor zeros(std::vector<std::size_t> s) {
        std::size_t n = count(s);
        return Tensor(std::move(s), std::vector<double>(n, 0.0));
    }
    static Tensor full(std::vector<std::size_t> s, double value) {
        std::size_t n = count(s);
        return Tensor(std::move(s), std::vector<double>(n, value));
    }
    static Tensor scalar(double value) { return Tensor({1}, {value}); }

    std::size_t size() const { return v.size(); }
    bool is_scalar() const { return v.size() == 1; }
    double scalar_value() const {
        if (!is_scalar()) throw ContractViolation("Tensor: scalar_value on non-scalar");
        return v[0];
    }

    // 2-D helpers
    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
    double& at(std::size_t r, std::size_t c) { return v[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return v[r * cols() + c]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }

    double* data() { return v.data(); }
    const double* data() const { return v.data(); }

    bool operator==(const Tensor& o) const { return shape == o.shape && v == o.v; }
};

inline std::string shape_string(const Tensor& t) {
    std::string s = "(";
    for (std::size_t i = 0; i < t.shape.size(); ++i)
        s += (i ? "," : "") + std::to_string(t.shape[i]);
    return s + ")";
}

}  // namespace duq
