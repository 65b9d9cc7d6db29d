#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "duq/datagen.hpp"

namespace duq {

struct DataConfig {
    FeatureSpec feature_spec;          // means/stds/train sample count
    std::size_t test_id_count = 1000;
    std::size_t test_ood_count = 1000;
    NoiseModel noise;
    double ood_shift = 2.5;
    double exp_arg_cap = 6.0;
};

struct ModelConfig {
    std::vector<std::size_t> bnn_hidden{20, 20, 20};
    std::vector<std::size_t> vnet_hidden{20, 20, 20};
    double prior_sigma = 1.0;
    double sigma_lik = 0.03;           // likelihood std in standardized target units
    double init_posterior_std = 0.05;
};

struct TrainingConfig {
    std::size_t epochs = 2500;
    std::size_t batch = 64;
    double learning_rate = 2e-3;
    double lr_floor = 0.05;            // cosine decay floor fraction
    double kl_scale = 0.125;           // multiplies the 1/num_minibatches ELBO weight
    std::size_t mc_train = 1;          // ELBO gradient samples per step
    std::size_t mc_residual = 10;      // draws per epoch for variance-net targets
    double winsor_quantile = 0.98;     // per-epoch clamp on variance-net targets
    double vnet_lr_mult = 3.0;
    double vnet_warmup_frac = 0.1;     // variance net sits out this first fraction of epochs
    double vnet_decay_start = 0.75;    // constant lr until here, cosine after
    std::size_t prediction_samples = 100;  // S
    std::size_t eval_mc = 25;          // MC samples for learning-curve RMSE
    std::size_t eval_interval = 50;    // epochs between curve points
};

struct OutputConfig {
    std::string dir = "out";
    bool plots = true;
};

struct ExperimentConfig {
    DataConfig data;
    ModelConfig model;
    TrainingConfig training;
    OutputConfig output;
    std::uint64_t seed = 1;

    void validate() const;  // throws ConfigError naming the offending field
};

ExperimentConfig default_config();
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& cfg, const std::string& path);
std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const std::string& text);

// FNV-1a over the canonical JSON form; stored in checkpoints and reports.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace duq
