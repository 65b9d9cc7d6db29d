#pragma once

#include <functional>
#include <vector>

#include "duq/bnn.hpp"

namespace duq {

// Deterministic MLP estimating total conditional variance by direct
// estimation. Input is (6 standardized features, standardized BNN mean);
// hidden activations relu; the raw output maps to a strictly positive
// variance as exp(raw) * sigma_lik^2 in standardized target units.
//
// exp rather than softplus: the residual^2 field spans several decades and
// softplus saturates (dead gradients) below ~e^-5; exp keeps the same
// quadratic objective under a pure output reparameterization.
struct VarianceModel {
    struct DenseLayer {
        Tensor w;  // (in x out)
        Tensor b;  // (out)
    };
    std::vector<DenseLayer> layers;  // default 7-20-20-20-1
    double out_scale = 1.0;          // sigma_lik^2; multiplies exp(raw)
    Normalization norm;

    static VarianceModel init(const std::vector<std::size_t>& widths, double out_scale, Rng& rng);
    std::size_t input_width() const { return layers.front().w.shape[0]; }

    // Raw pre-output values for standardized input rows (n x input_width).
    std::vector<double> raw_forward(const Tensor& X_in) const;
    // Positive variance in *standardized* units: out_scale * exp(raw).
    std::vector<double> forward_var_std(const Tensor& X_in) const;
};

// sigma_tot^2 in de-normalized target units^2 for one sample. y_hat is the
// BNN predictive mean in target units.
double predict_total_variance(const VarianceModel& model,
                              const std::array<double, kFeatureCount>& x, double y_hat);
// Batched: X_std is (n x 6) standardized features, yhat_std standardized means.
std::vector<double> predict_total_variance_batch(const VarianceModel& model, const Tensor& X_std,
                                                 const std::vector<double>& yhat_std);

// mean over the batch of (predicted_var - residual^2)^2; units are the
// caller's. Exactly the direct-estimation summand.
double direct_estimation_loss(const std::vector<double>& predicted_var,
                              const std::vector<double>& residual);

// Per-epoch residual provider: fills standardized predictive means and
// mean-of-squares residuals (over mc_residual draws) for the training set.
// The dual workflow backs this with the live BNN; tests can stub it.
using ResidualSource =
    std::function<void(std::size_t epoch, std::vector<double>& yhat_std,
                       std::vector<double>& residual_sq_std)>;

// Incremental trainer mirroring BnnTrainer. Epoch e consumes
// rng.substream("vnet-epoch", e) only; residuals come from the source.
class VnetTrainer {
  public:
    VnetTrainer(VarianceModel& model, const Tensor& X_train_std, const TrainingConfig& cfg,
                const Rng& run_rng);

    // Runs one pass with the given residual targets (standardized units).
    // Targets are divided by out_scale and winsorized at winsor_quantile.
    void epoch(std::size_t epoch_index, const std::vector<double>& yhat_std,
               const std::vector<double>& residual_sq_std);
    double learning_rate(std::size_t epoch_index) const;
    bool active_at(std::size_t epoch_index) const;  // false during warmup
    // sqrt(direct-estimation loss) against given residuals, standardized units.
    double loss_rmse(const Tensor& X_std, const std::vector<double>& yhat_std,
                     const std::vector<double>& residual_sq_std) const;

  private:
    VarianceModel& model_;
    const Tensor& X_;
    TrainingConfig cfg_;
    Rng rng_;
    AdamState adam_;
    std::size_t minibatches_;
    long step_count_ = 0;
};

// Trains against residuals from `source` for cfg.training.epochs epochs.
// Returns sqrt(loss) on the training set per eval_interval.
std::vector<double> train_variance_net(VarianceModel& model, const Dataset& train,
                                       const ResidualSource& source, const ExperimentConfig& cfg,
                                       const Rng& run_rng);

// Residual source backed by a (frozen or live) BNN: draws mc_residual
// reparameterized samples per point with the per-epoch substream
// rng.substream("residual", epoch) and returns the draw-mean and the mean of
// squared residuals. Ensures no BNN parameter is touched.
ResidualSource bnn_residual_source(const BnnModel& bnn, const Tensor& X_train_std,
                                   const std::vector<double>& y_train_std, std::size_t mc_residual,
                                   const Rng& run_rng);

}  // namespace duq
