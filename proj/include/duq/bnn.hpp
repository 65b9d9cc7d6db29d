#pragma once

#include <array>
#include <functional>
#include <vector>

#include "duq/config.hpp"
#include "duq/datagen.hpp"
#include "duq/rng.hpp"
#include "duq/tape.hpp"

namespace duq {

// Train-split standardization shared by both networks. Uncertainties are
// reported back in target units via y_std^2.
struct Normalization {
    std::array<double, kFeatureCount> x_mean{}, x_std{};
    double y_mean = 0.0, y_std = 1.0;

    static Normalization fit(const Dataset& train);
    void standardize_row(const std::array<double, kFeatureCount>& in, double* out) const;
    Tensor standardize_features(const std::vector<std::array<double, kFeatureCount>>& rows) const;
    std::vector<double> standardize_targets(const std::vector<double>& y) const;
    double destandardize_mean(double m) const { return m * y_std + y_mean; }
    double destandardize_var(double v) const { return v * y_std * y_std; }

    bool operator==(const Normalization&) const = default;
};

// One dense layer with an independent Gaussian posterior per weight;
// posterior std is softplus(rho).
struct VariationalLayer {
    Tensor w_mu, w_rho;  // (in x out)
    Tensor b_mu, b_rho;  // (out)

    std::size_t fan_in() const { return w_mu.shape[0]; }
    std::size_t fan_out() const { return w_mu.shape[1]; }
};

struct BnnModel {
    std::vector<VariationalLayer> layers;  // hidden activations tanh, output identity
    double prior_sigma = 1.0;
    Normalization norm;

    static BnnModel init(const std::vector<std::size_t>& widths, double prior_sigma,
                         double init_posterior_std, Rng& rng);
    std::vector<std::size_t> widths() const;
    std::size_t parameter_count() const;
    // All-mu forward (the zero-posterior-variance limit), standardized units.
    std::vector<double> mean_forward(const Tensor& X_std) const;
};

struct EpistemicPrediction {
    double mean = 0.0;           // target units
    double epistemic_var = 0.0;  // target units^2, unbiased over S samples
    std::size_t mc_samples = 0;
};

// KL(N(mu, sigma^2) || N(0, prior_sigma^2)) summed over elements.
double kl_gaussian(const Tensor& post_mu, const Tensor& post_sigma, double prior_sigma);
double kl_gaussian(double post_mu, double post_sigma, double prior_sigma);
// Analytic KL of the whole posterior against the prior.
double kl_model(const BnnModel& model);

// Ids of the reparameterized pass recorded on a tape.
struct BnnTapeBinding {
    struct LayerIds {
        Tape::Id w_mu, w_rho, b_mu, b_rho;
    };
    std::vector<LayerIds> layers;
    Tape::Id output = -1;  // (batch x 1) standardized network output
};

// Records mu + softplus(rho) * eps weight draws and the forward pass;
// gradients flow to every mu and rho. X_std is a constant on the tape.
BnnTapeBinding reparam_forward_tape(Tape& tape, const BnnModel& model, const Tensor& X_std,
                                    Rng& rng);

// Single stochastic forward pass (no tape), standardized units.
std::vector<double> reparam_forward(const BnnModel& model, const Tensor& X_std, Rng& rng);

// ELBO for one minibatch: mean over mc_train samples of the summed Gaussian
// NLL (fixed sigma_lik, standardized units) plus kl_weight * KL.
// Returns the scalar; used by training via its tape form.
double elbo_loss(const BnnModel& model, const Tensor& X_std, const std::vector<double>& y_std,
                 Rng& rng, std::size_t mc_train_samples, double kl_weight, double sigma_lik);

// Predictive mean and unbiased sample variance over S reparameterized draws,
// de-normalized to target units. S >= 2. Draw s uses the pre-split substream
// rng.substream("mc-draw", s), so the draws may be evaluated in any order
// (or in parallel) with identical results.
EpistemicPrediction predict_epistemic(const BnnModel& model,
                                      const std::array<double, kFeatureCount>& x, std::size_t S,
                                      const Rng& rng);
// Batched version: one weight draw per sample s, evaluated at all rows.
void predict_epistemic_batch(const BnnModel& model, const Tensor& X_std, std::size_t S,
                             const Rng& rng, std::vector<double>& mean_std,
                             std::vector<double>& var_std);

struct AdamState {
    std::vector<Tensor> m, v;
    std::size_t t = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    void init(const std::vector<Tensor*>& params);
    void step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
              double lr);
};

struct LearningCurvePoint {
    std::size_t epoch = 0;
    double bnn_rmse_train = 0.0, bnn_rmse_id = 0.0, bnn_rmse_ood = 0.0;
    double vnet_rmse_train = 0.0, vnet_rmse_id = 0.0, vnet_rmse_ood = 0.0;
};

// Incremental BNN trainer so the dual workflow can interleave per-epoch
// passes. Streams: epoch e consumes rng.substream("bnn-epoch", e) only.
class BnnTrainer {
  public:
    BnnTrainer(BnnModel& model, const Tensor& X_train_std, std::vector<double> y_train_std,
               const TrainingConfig& train_cfg, double sigma_lik, const Rng& run_rng);

    // One full pass over shuffled minibatches; throws TrainingError on NaN.
    void epoch(std::size_t epoch_index);
    double learning_rate(std::size_t epoch_index) const;
    std::size_t minibatches() const { return minibatches_; }
    double kl_weight() const { return kl_weight_; }

  private:
    BnnModel& model_;
    const Tensor& X_;
    std::vector<double> y_;
    TrainingConfig cfg_;
    double sigma_lik_;
    Rng rng_;
    AdamState adam_;
    std::size_t minibatches_;
    double kl_weight_;
    long step_count_ = 0;
};

// Trains on the train split; evaluation datasets (already standardized
// against the same normalization) feed the learning curve. Returns one curve
// point per eval_interval. The vnet columns stay zero here.
std::vector<LearningCurvePoint> train_bnn(BnnModel& model, const Dataset& train,
                                          const ExperimentConfig& cfg, const Rng& run_rng,
                                          const Dataset* test_id = nullptr,
                                          const Dataset* test_ood = nullptr);

// RMSE of the de-normalized predictive mean against raw targets.
double predictive_rmse(const BnnModel& model, const Tensor& X_std,
                       const std::vector<double>& y_raw, std::size_t mc, const Rng& rng);

}  // namespace duq
