#pragma once

#include "duq/variance_net.hpp"

namespace duq {

struct PredictiveBundle {
    double mean = 0.0;           // target units
    double epistemic_var = 0.0;  // sigma1^2, target units^2
    double total_var = 0.0;      // sigma_tot^2, target units^2
    double aleatoric_var = 0.0;  // sigma2^2 = max(total - epistemic, 0)
    bool clamped = false;        // total_var < epistemic_var
};

// Monotone piecewise-linear map from nominal quantile level to empirical
// coverage, fixed at (0,0) and (1,1).
struct CalibrationMap {
    std::vector<double> nominal;    // knots, ascending
    std::vector<double> empirical;  // non-decreasing
    double apply(double level) const;
};

struct DualModel {
    BnnModel bnn;
    VarianceModel vnet;
    std::string config_hash;
    std::vector<LearningCurvePoint> history;

    const Normalization& norm() const { return bnn.norm; }
};

// sigma2^2 = sigma_tot^2 - sigma1^2, clamped at zero. Inputs must be
// non-negative. clamped is true exactly when sigma_tot^2 < sigma1^2.
struct Decomposition {
    double aleatoric_var;
    bool clamped;
};
Decomposition decompose(double total_var, double epistemic_var);

// Fig. 1 workflow: each epoch runs one BNN ELBO pass over all minibatches,
// then one variance-net pass on that epoch's residuals. No gradient reaches
// BNN parameters from the variance objective (residuals are constants).
// `with_vnet=false` reproduces plain BNN training bit-for-bit under the
// same seed stream.
DualModel joint_train(const Dataset& train, const Dataset& test_id, const Dataset& test_ood,
                      const ExperimentConfig& cfg, const Rng& run_rng, bool with_vnet = true);

PredictiveBundle predict(const DualModel& model, const std::array<double, kFeatureCount>& x,
                         std::size_t S, const Rng& rng);
// Batched prediction over a dataset (one weight draw evaluated at all rows).
std::vector<PredictiveBundle> predict_batch(const DualModel& model, const Dataset& data,
                                            std::size_t S, const Rng& rng);

// Eq. 1 baseline head: mean over the batch of (mean-y)^2/var + ln(var).
double heteroscedastic_nll(const std::vector<double>& pred_mean,
                           const std::vector<double>& pred_var, const std::vector<double>& y);

// Quantile-coverage recalibration on held-out predictions: for nominal
// levels 0.05..0.95 computes the empirical fraction of truths below the
// Gaussian predictive quantile (mean, sigma_tot^2) and returns the monotone
// map. Needs at least 50 points.
CalibrationMap recalibrate(const std::vector<PredictiveBundle>& bundles,
                           const std::vector<double>& truths);

// Gaussian inverse CDF (Acklam's rational approximation, |rel err| < 1.2e-9).
double normal_quantile(double p);
double normal_cdf(double x);

}  // namespace duq
