#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "duq/rng.hpp"

namespace duq {

inline constexpr std::size_t kFeatureCount = 6;

// Gaussian feature family of the synthetic benchmark.
struct FeatureSpec {
    std::array<double, kFeatureCount> means{0.0, 3.0, 0.0, 5.0, 0.0, 0.0};
    std::array<double, kFeatureCount> stds{4.0, 2.0, 2.0, 2.0, 2.0, 2.0};
    std::size_t sample_count = 1000;
    std::uint64_t seed = 0;

    void validate() const;  // stds strictly positive, sample_count > 0
};

struct NoiseModel {
    enum class Kind { none, uniform_scale, step_on_x1 };
    Kind kind = Kind::uniform_scale;
    double lo = 0.0, hi = 2.0;            // uniform_scale: sigma ~ U[lo, hi]
    double low_sigma = 1.0, high_sigma = 5.0;  // step_on_x1
    double threshold = 0.0;

    void validate() const;
};

enum class Split { train, test_id, test_ood };
std::string split_name(Split s);
Split split_from_name(const std::string& name);

struct Dataset {
    std::vector<std::array<double, kFeatureCount>> features;
    std::vector<double> targets;
    std::vector<double> noise_sigma;  // true per-sample sigma used
    Split split = Split::train;

    std::size_t size() const { return targets.size(); }
    bool operator==(const Dataset&) const = default;
};

// Column j ~ N(means[j], stds[j]^2), i.i.d., deterministic under spec.seed.
std::vector<std::array<double, kFeatureCount>> sample_features(const FeatureSpec& spec, Rng& rng);

// Noiseless benchmark target. The exponential term's argument is clamped at
// `exp_arg_cap` (rare x2<0 draws with large x5^2 otherwise produce values
// beyond 1e15, which no regression benchmark survives); sqrt takes
// max(x4, 0). Total and deterministic over all real inputs.
double target_function(const std::array<double, kFeatureCount>& x, double exp_arg_cap = 6.0);

struct NoisyTargets {
    std::vector<double> targets;
    std::vector<double> sigma;
};
NoisyTargets apply_noise(const std::vector<double>& y,
                         const std::vector<std::array<double, kFeatureCount>>& x,
                         const NoiseModel& model, Rng& rng);

// Out-of-distribution variant: means shifted by +shift_factor * std each,
// stds and sample_count unchanged.
FeatureSpec make_ood(const FeatureSpec& spec, double shift_factor = 2.5);

Dataset make_dataset(const FeatureSpec& spec, const NoiseModel& noise, Split split, Rng& rng,
                     double exp_arg_cap = 6.0);

// CSV with header x1..x6,y,sigma_true,split; full round-trip precision.
void save_csv(const Dataset& ds, const std::string& path);
Dataset load_csv(const std::string& path);

}  // namespace duq
