#include "duq/dual.hpp"

#include <algorithm>
#include <cmath>

namespace duq {

Decomposition decompose(double total_var, double epistemic_var) {
    if (total_var < 0.0 || epistemic_var < 0.0)
        throw ContractViolation("decompose: variances must be non-negative");
    if (total_var < epistemic_var) return {0.0, true};
    return {total_var - epistemic_var, false};
}

double CalibrationMap::apply(double level) const {
    if (nominal.empty()) return level;
    if (level <= 0.0) return 0.0;
    if (level >= 1.0) return 1.0;
    // piecewise-linear through (0,0), knots, (1,1)
    double x0 = 0.0, y0 = 0.0;
    for (std::size_t i = 0; i <= nominal.size(); ++i) {
        const double x1 = i < nominal.size() ? nominal[i] : 1.0;
        const double y1 = i < nominal.size() ? empirical[i] : 1.0;
        if (level <= x1) {
            const double w = x1 > x0 ? (level - x0) / (x1 - x0) : 0.0;
            return y0 + w * (y1 - y0);
        }
        x0 = x1;
        y0 = y1;
    }
    return 1.0;
}

DualModel joint_train(const Dataset& train, const Dataset& test_id, const Dataset& test_ood,
                      const ExperimentConfig& cfg, const Rng& run_rng, bool with_vnet) {
    if (train.split != Split::train)
        throw ContractViolation("joint_train: first dataset must be the train split");
    cfg.validate();

    DualModel model;
    model.config_hash = config_hash(cfg);

    Rng init_bnn = run_rng.substream("init-bnn");
    std::vector<std::size_t> bnn_widths;
    bnn_widths.push_back(kFeatureCount);
    for (std::size_t w : cfg.model.bnn_hidden) bnn_widths.push_back(w);
    bnn_widths.push_back(1);
    model.bnn = BnnModel::init(bnn_widths, cfg.model.prior_sigma, cfg.model.init_posterior_std,
                               init_bnn);
    model.bnn.norm = Normalization::fit(train);

    Rng init_vnet = run_rng.substream("init-vnet");
    std::vector<std::size_t> vnet_widths;
    vnet_widths.push_back(kFeatureCount + 1);
    for (std::size_t w : cfg.model.vnet_hidden) vnet_widths.push_back(w);
    vnet_widths.push_back(1);
    model.vnet = VarianceModel::init(vnet_widths, cfg.model.sigma_lik * cfg.model.sigma_lik,
                                     init_vnet);
    model.vnet.norm = model.bnn.norm;

    const Tensor X = model.bnn.norm.standardize_features(train.features);
    const std::vector<double> y = model.bnn.norm.standardize_targets(train.targets);
    const Tensor X_id = model.bnn.norm.standardize_features(test_id.features);
    const Tensor X_ood = model.bnn.norm.standardize_features(test_ood.features);

    BnnTrainer bnn_trainer(model.bnn, X, y, cfg.training, cfg.model.sigma_lik, run_rng);
    VnetTrainer vnet_trainer(model.vnet, X, cfg.training, run_rng);
    ResidualSource residuals =
        bnn_residual_source(model.bnn, X, y, cfg.training.mc_residual, run_rng);

    std::vector<double> yhat, r2;
    std::vector<double> yhat_id, r2_id, yhat_ood, r2_ood;  // for curve bookkeeping
    for (std::size_t e = 0; e < cfg.training.epochs; ++e) {
        bnn_trainer.epoch(e);
        if (with_vnet) {
            residuals(e, yhat, r2);
            vnet_trainer.epoch(e, yhat, r2);
        }
        if ((e + 1) % cfg.training.eval_interval == 0 || e + 1 == cfg.training.epochs) {
            LearningCurvePoint pt;
            pt.epoch = e + 1;
            Rng eval_rng = run_rng.substream("eval", e);
            pt.bnn_rmse_train =
                predictive_rmse(model.bnn, X, train.targets, cfg.training.eval_mc, eval_rng);
            pt.bnn_rmse_id =
                predictive_rmse(model.bnn, X_id, test_id.targets, cfg.training.eval_mc, eval_rng);
            pt.bnn_rmse_ood =
                predictive_rmse(model.bnn, X_ood, test_ood.targets, cfg.training.eval_mc, eval_rng);
            if (with_vnet) {
                // loss RMSE against this epoch's residual targets per split
                auto eval_split = [&](const Tensor& Xs, const Dataset& ds,
                                      std::vector<double>& yh, std::vector<double>& rr,
                                      const char* label) {
                    const std::size_t n = Xs.rows();
                    yh.assign(n, 0.0);
                    rr.assign(n, 0.0);
                    Rng sub = eval_rng.substream(label);
                    const std::vector<double> ys = model.bnn.norm.standardize_targets(ds.targets);
                    for (std::size_t s = 0; s < cfg.training.mc_residual; ++s) {
                        std::vector<double> draw = reparam_forward(model.bnn, Xs, sub);
                        for (std::size_t i = 0; i < n; ++i) {
                            yh[i] += draw[i];
                            const double r = draw[i] - ys[i];
                            rr[i] += r * r;
                        }
                    }
                    const double inv = 1.0 / static_cast<double>(cfg.training.mc_residual);
                    for (std::size_t i = 0; i < n; ++i) {
                        yh[i] *= inv;
                        rr[i] *= inv;
                    }
                };
                pt.vnet_rmse_train = vnet_trainer.loss_rmse(X, yhat, r2);
                eval_split(X_id, test_id, yhat_id, r2_id, "vnet-eval-id");
                pt.vnet_rmse_id = vnet_trainer.loss_rmse(X_id, yhat_id, r2_id);
                eval_split(X_ood, test_ood, yhat_ood, r2_ood, "vnet-eval-ood");
                pt.vnet_rmse_ood = vnet_trainer.loss_rmse(X_ood, yhat_ood, r2_ood);
            }
            model.history.push_back(pt);
        }
    }
    return model;
}

PredictiveBundle predict(const DualModel& model, const std::array<double, kFeatureCount>& x,
                         std::size_t S, const Rng& rng) {
    EpistemicPrediction ep = predict_epistemic(model.bnn, x, S, rng);
    const double total = predict_total_variance(model.vnet, x, ep.mean);
    const Decomposition d = decompose(total, ep.epistemic_var);
    PredictiveBundle b;
    b.mean = ep.mean;
    b.epistemic_var = ep.epistemic_var;
    b.total_var = total;
    b.aleatoric_var = d.aleatoric_var;
    b.clamped = d.clamped;
    return b;
}

std::vector<PredictiveBundle> predict_batch(const DualModel& model, const Dataset& data,
                                            std::size_t S, const Rng& rng) {
    const Tensor X = model.norm().standardize_features(data.features);
    std::vector<double> mean_std, var_std;
    predict_epistemic_batch(model.bnn, X, S, rng, mean_std, var_std);
    const std::vector<double> total = predict_total_variance_batch(model.vnet, X, mean_std);
    std::vector<PredictiveBundle> out(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        PredictiveBundle& b = out[i];
        b.mean = model.norm().destandardize_mean(mean_std[i]);
        b.epistemic_var = model.norm().destandardize_var(var_std[i]);
        b.total_var = total[i];
        const Decomposition d = decompose(b.total_var, b.epistemic_var);
        b.aleatoric_var = d.aleatoric_var;
        b.clamped = d.clamped;
    }
    return out;
}

double heteroscedastic_nll(const std::vector<double>& pred_mean,
                           const std::vector<double>& pred_var, const std::vector<double>& y) {
    if (pred_mean.size() != pred_var.size() || pred_mean.size() != y.size() || y.empty())
        throw ContractViolation("heteroscedastic_nll: size mismatch or empty batch");
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!(pred_var[i] > 0.0))
            throw ContractViolation("heteroscedastic_nll: variance must be positive");
        const double r = pred_mean[i] - y[i];
        s += r * r / pred_var[i] + std::log(pred_var[i]);
    }
    return s / static_cast<double>(y.size());
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ContractViolation("normal_quantile: p must be in (0,1)");
    // Acklam's rational approximation
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1 - plow;
    double q, r;
    if (p < plow) {
        q = std::sqrt(-2 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    if (p > phigh) {
        q = std::sqrt(-2 * std::log(1 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    q = p - 0.5;
    r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

CalibrationMap recalibrate(const std::vector<PredictiveBundle>& bundles,
                           const std::vector<double>& truths) {
    if (bundles.size() != truths.size())
        throw ContractViolation("recalibrate: bundle/truth size mismatch");
    if (bundles.size() < 50)
        throw ContractViolation("recalibrate: need at least 50 held-out points");
    CalibrationMap map;
    const double n = static_cast<double>(bundles.size());
    for (int k = 1; k <= 19; ++k) {
        const double level = 0.05 * k;
        const double z = normal_quantile(level);
        std::size_t below = 0;
        for (std::size_t i = 0; i < bundles.size(); ++i) {
            const double q = bundles[i].mean + z * std::sqrt(bundles[i].total_var);
            if (truths[i] <= q) ++below;
        }
        map.nominal.push_back(level);
        map.empirical.push_back(static_cast<double>(below) / n);
    }
    // Empirical coverage at increasing quantiles is non-decreasing by
    // construction; assert rather than re-fit.
    for (std::size_t i = 1; i < map.empirical.size(); ++i)
        if (map.empirical[i] < map.empirical[i - 1])
            throw ContractViolation("recalibrate: empirical coverage not monotone");
    return map;
}

}  // namespace duq
