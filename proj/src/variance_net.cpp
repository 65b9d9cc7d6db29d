#include "duq/variance_net.hpp"

#include <algorithm>
#include <cmath>

#include "duq/kernels.hpp"

namespace duq {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kRawClamp = 30.0;  // exp argument bound during training
}  // namespace

VarianceModel VarianceModel::init(const std::vector<std::size_t>& widths, double out_scale,
                                  Rng& rng) {
    if (widths.size() < 2) throw ContractViolation("VarianceModel::init: need at least two widths");
    if (!(out_scale > 0.0)) throw ContractViolation("VarianceModel::init: out_scale must be positive");
    VarianceModel m;
    m.out_scale = out_scale;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const std::size_t in = widths[l], out = widths[l + 1];
        DenseLayer layer;
        layer.w = Tensor::zeros({in, out});
        const double scale = std::sqrt(2.0 / static_cast<double>(in));  // He init for relu
        for (double& w : layer.w.v) w = scale * rng.normal();
        layer.b = Tensor::zeros({out});
        m.layers.push_back(std::move(layer));
    }
    return m;
}

std::vector<double> VarianceModel::raw_forward(const Tensor& X_in) const {
    const std::size_t rows = X_in.rows();
    Tensor h = X_in;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& L = layers[l];
        const std::size_t in = L.w.shape[0], out = L.w.shape[1];
        Tensor z = Tensor::zeros({rows, out});
        kernels::linear_forward(h.data(), L.w.data(), L.b.data(), z.data(), rows, in, out);
        if (l + 1 < layers.size()) kernels::relu(z.data(), z.data(), z.size());
        h = std::move(z);
    }
    std::vector<double> raw(rows);
    for (std::size_t i = 0; i < rows; ++i) raw[i] = h.v[i];
    return raw;
}

std::vector<double> VarianceModel::forward_var_std(const Tensor& X_in) const {
    std::vector<double> raw = raw_forward(X_in);
    for (double& r : raw) r = out_scale * std::exp(std::fmin(r, kRawClamp));
    return raw;
}

double predict_total_variance(const VarianceModel& model,
                              const std::array<double, kFeatureCount>& x, double y_hat) {
    Tensor in = Tensor::zeros({1, kFeatureCount + 1});
    model.norm.standardize_row(x, in.data());
    in.v[kFeatureCount] = (y_hat - model.norm.y_mean) / model.norm.y_std;
    const double var_std = model.forward_var_std(in)[0];
    return model.norm.destandardize_var(var_std);
}

std::vector<double> predict_total_variance_batch(const VarianceModel& model, const Tensor& X_std,
                                                 const std::vector<double>& yhat_std) {
    const std::size_t n = X_std.rows();
    if (yhat_std.size() != n)
        throw ContractViolation("predict_total_variance_batch: length mismatch");
    Tensor in = Tensor::zeros({n, kFeatureCount + 1});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < kFeatureCount; ++j)
            in.v[i * (kFeatureCount + 1) + j] = X_std.v[i * kFeatureCount + j];
        in.v[i * (kFeatureCount + 1) + kFeatureCount] = yhat_std[i];
    }
    std::vector<double> var = model.forward_var_std(in);
    for (double& v : var) v = model.norm.destandardize_var(v);
    return var;
}

double direct_estimation_loss(const std::vector<double>& predicted_var,
                              const std::vector<double>& residual) {
    if (predicted_var.size() != residual.size() || predicted_var.empty())
        throw ContractViolation("direct_estimation_loss: size mismatch or empty batch");
    double s = 0.0;
    for (std::size_t i = 0; i < residual.size(); ++i) {
        const double d = predicted_var[i] - residual[i] * residual[i];
        s += d * d;
    }
    return s / static_cast<double>(residual.size());
}

VnetTrainer::VnetTrainer(VarianceModel& model, const Tensor& X_train_std,
                         const TrainingConfig& cfg, const Rng& run_rng)
    : model_(model), X_(X_train_std), cfg_(cfg), rng_(run_rng) {
    const std::size_t n = X_train_std.rows();
    if (n == 0) throw ContractViolation("VnetTrainer: empty training set");
    minibatches_ = (n + cfg_.batch - 1) / cfg_.batch;
    std::vector<Tensor*> params;
    for (auto& l : model_.layers) {
        params.push_back(&l.w);
        params.push_back(&l.b);
    }
    adam_.init(params);
}

double VnetTrainer::learning_rate(std::size_t epoch_index) const {
    // constant until vnet_decay_start, then cosine to the floor; the targets
    // are non-stationary and an early decay freezes a stale field
    const double base = cfg_.learning_rate * cfg_.vnet_lr_mult;
    const double start = cfg_.vnet_decay_start * static_cast<double>(cfg_.epochs);
    if (static_cast<double>(epoch_index) < start) return base;
    const double span = static_cast<double>(cfg_.epochs) - start;
    const double progress = span > 0.0 ? (static_cast<double>(epoch_index) - start) / span : 1.0;
    const double f = cfg_.lr_floor;
    return base * (f + (1.0 - f) * 0.5 * (1.0 + std::cos(kPi * std::fmin(progress, 1.0))));
}

bool VnetTrainer::active_at(std::size_t epoch_index) const {
    return static_cast<double>(epoch_index) >=
           cfg_.vnet_warmup_frac * static_cast<double>(cfg_.epochs);
}

namespace {

double quantile_of(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
}

}  // namespace

void VnetTrainer::epoch(std::size_t epoch_index, const std::vector<double>& yhat_std,
                        const std::vector<double>& residual_sq_std) {
    if (!active_at(epoch_index)) return;
    const std::size_t n = X_.rows();
    if (yhat_std.size() != n || residual_sq_std.size() != n)
        throw ContractViolation("VnetTrainer::epoch: residual length mismatch");

    // Targets in out_scale units, winsorized so the few extreme residuals
    // do not own the whole gradient budget.
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = residual_sq_std[i] / model_.out_scale;
    const double cap = quantile_of(t, cfg_.winsor_quantile);
    for (double& x : t) x = std::fmin(x, cap);

    Rng erng = rng_.substream("vnet-epoch", epoch_index);
    const auto perm = erng.permutation(n);
    const double lr = learning_rate(epoch_index);
    const std::size_t in_w = model_.input_width();

    for (std::size_t b = 0; b < minibatches_; ++b) {
        const std::size_t lo = b * cfg_.batch;
        const std::size_t hi = std::min(lo + cfg_.batch, n);
        const std::size_t bs = hi - lo;

        // forward pass with saved activations
        std::vector<Tensor> acts;
        acts.reserve(model_.layers.size() + 1);
        Tensor X = Tensor::zeros({bs, in_w});
        for (std::size_t i = 0; i < bs; ++i) {
            const std::size_t src = perm[lo + i];
            for (std::size_t j = 0; j < kFeatureCount; ++j)
                X.v[i * in_w + j] = X_.v[src * kFeatureCount + j];
            X.v[i * in_w + kFeatureCount] = yhat_std[src];
        }
        acts.push_back(std::move(X));
        for (std::size_t l = 0; l < model_.layers.size(); ++l) {
            const auto& L = model_.layers[l];
            const std::size_t li = L.w.shape[0], lo2 = L.w.shape[1];
            Tensor z = Tensor::zeros({bs, lo2});
            kernels::linear_forward(acts.back().data(), L.w.data(), L.b.data(), z.data(), bs, li,
                                    lo2);
            acts.push_back(std::move(z));
        }
        // relu applied in place on hidden activations (raw kept for backward mask)
        std::vector<Tensor> hidden(model_.layers.size() - 1);
        for (std::size_t l = 0; l + 1 < model_.layers.size(); ++l) {
            hidden[l] = Tensor::zeros(acts[l + 1].shape);
            kernels::relu(acts[l + 1].data(), hidden[l].data(), hidden[l].size());
        }

        // loss = mean (exp(raw) - t)^2; d/draw = 2*(exp(raw)-t)*exp(raw)/bs
        Tensor d = Tensor::zeros({bs, 1});
        double loss = 0.0;
        for (std::size_t i = 0; i < bs; ++i) {
            const double raw = acts.back().v[i];
            const double e = std::exp(std::fmin(raw, kRawClamp));
            const double tgt = t[perm[lo + i]];
            loss += (e - tgt) * (e - tgt);
            d.v[i] = 2.0 * (e - tgt) * e / static_cast<double>(bs);
        }
        ++step_count_;
        if (!std::isfinite(loss))
            throw TrainingError("variance net training diverged (non-finite loss)", step_count_);

        // backward through the dense stack
        std::vector<Tensor> gw(model_.layers.size()), gb(model_.layers.size());
        Tensor grad = std::move(d);
        for (std::size_t l = model_.layers.size(); l-- > 0;) {
            const auto& L = model_.layers[l];
            const std::size_t li = L.w.shape[0], lo2 = L.w.shape[1];
            const Tensor& input = l == 0 ? acts[0] : hidden[l - 1];
            gw[l] = Tensor::zeros(L.w.shape);
            gb[l] = Tensor::zeros(L.b.shape);
            kernels::linear_backward_params(input.data(), grad.data(), gw[l].data(), gb[l].data(),
                                            bs, li, lo2);
            if (l > 0) {
                Tensor gin = Tensor::zeros({bs, li});
                kernels::linear_backward_input(grad.data(), L.w.data(), gin.data(), bs, li, lo2);
                Tensor masked = Tensor::zeros({bs, li});
                kernels::relu_backward(acts[l].data(), gin.data(), masked.data(), masked.size());
                grad = std::move(masked);
            }
        }
        std::vector<Tensor*> params;
        std::vector<const Tensor*> grads;
        for (std::size_t l = 0; l < model_.layers.size(); ++l) {
            params.push_back(&model_.layers[l].w);
            params.push_back(&model_.layers[l].b);
            grads.push_back(&gw[l]);
            grads.push_back(&gb[l]);
        }
        adam_.step(params, grads, lr);
    }
}

double VnetTrainer::loss_rmse(const Tensor& X_std, const std::vector<double>& yhat_std,
                              const std::vector<double>& residual_sq_std) const {
    std::vector<double> var = predict_total_variance_batch(model_, X_std, yhat_std);
    // compare in standardized units to keep the curve scale-free
    std::vector<double> resid(residual_sq_std.size());
    for (std::size_t i = 0; i < resid.size(); ++i) {
        var[i] = var[i] / (model_.norm.y_std * model_.norm.y_std);
        resid[i] = std::sqrt(residual_sq_std[i]);
    }
    return std::sqrt(direct_estimation_loss(var, resid));
}

std::vector<double> train_variance_net(VarianceModel& model, const Dataset& train,
                                       const ResidualSource& source, const ExperimentConfig& cfg,
                                       const Rng& run_rng) {
    const Tensor X = model.norm.standardize_features(train.features);
    VnetTrainer trainer(model, X, cfg.training, run_rng);
    std::vector<double> curve;
    std::vector<double> yhat, r2;
    for (std::size_t e = 0; e < cfg.training.epochs; ++e) {
        source(e, yhat, r2);
        trainer.epoch(e, yhat, r2);
        if ((e + 1) % cfg.training.eval_interval == 0 || e + 1 == cfg.training.epochs)
            curve.push_back(trainer.loss_rmse(X, yhat, r2));
    }
    return curve;
}

ResidualSource bnn_residual_source(const BnnModel& bnn, const Tensor& X_train_std,
                                   const std::vector<double>& y_train_std,
                                   std::size_t mc_residual, const Rng& run_rng) {
    return [&bnn, &X_train_std, &y_train_std, mc_residual, run_rng](
               std::size_t epoch, std::vector<double>& yhat_std,
               std::vector<double>& residual_sq_std) {
        const std::size_t n = X_train_std.rows();
        yhat_std.assign(n, 0.0);
        residual_sq_std.assign(n, 0.0);
        Rng rng = run_rng.substream("residual", epoch);
        for (std::size_t s = 0; s < mc_residual; ++s) {
            std::vector<double> draw = reparam_forward(bnn, X_train_std, rng);
            for (std::size_t i = 0; i < n; ++i) {
                yhat_std[i] += draw[i];
                const double r = draw[i] - y_train_std[i];
                residual_sq_std[i] += r * r;
            }
        }
        const double inv = 1.0 / static_cast<double>(mc_residual);
        for (std::size_t i = 0; i < n; ++i) {
            yhat_std[i] *= inv;
            residual_sq_std[i] *= inv;
        }
    };
}

}  // namespace duq
