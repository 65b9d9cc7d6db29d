#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "duq/tensor.hpp"

namespace duq {

// xoshiro256++ stream seeded through SplitMix64.
//
// Substreams are derived from the stream's *seed* (not its position) by
// hashing (seed, label, index) through SplitMix64, so a stream can be split
// per purpose (data, weight init, MC sampling, per-epoch residuals) and each
// substream is reproducible in isolation. Identical seeds give identical
// draw sequences across runs; all arithmetic is integer or basic IEEE ops.
class Rng {
  public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t seed() const { return seed_; }

    // Independent stream for a named purpose.
    Rng substream(std::string_view label, std::uint64_t index = 0) const;

    std::uint64_t next_u64();
    // [0, 1) with 53 random bits
    double uniform();
    double uniform(double lo, double hi);
    // N(0,1) via the Marsaglia polar method (no trig; spare value cached)
    double normal();
    // i.i.d. standard normal tensor; same seed and shape give identical bits
    Tensor normal_tensor(std::vector<std::size_t> shape);
    // uniform integer in [0, n)
    std::uint64_t next_below(std::uint64_t n);
    // Fisher-Yates permutation of 0..n-1
    std::vector<std::size_t> permutation(std::size_t n);

  private:
    std::uint64_t s_[4];
    std::uint64_t seed_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Standard-normal samples of the given shape (spec-level convenience).
Tensor gaussian_draw(Rng& rng, std::vector<std::size_t> shape);

}  // namespace duq
