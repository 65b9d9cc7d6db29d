#include "duq/bnn.hpp"

#include <cmath>

#include "duq/kernels.hpp"

namespace duq {

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5*ln(2*pi)
constexpr double kPi = 3.14159265358979323846;

// inverse of softplus: rho such that softplus(rho) = s
double softplus_inverse(double s) { return std::log(std::expm1(s)); }
}  // namespace

Normalization Normalization::fit(const Dataset& train) {
    if (train.size() == 0) throw ContractViolation("Normalization::fit: empty dataset");
    Normalization n;
    const double count = static_cast<double>(train.size());
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
        double mean = 0.0;
        for (const auto& row : train.features) mean += row[j];
        mean /= count;
        double var = 0.0;
        for (const auto& row : train.features) var += (row[j] - mean) * (row[j] - mean);
        var /= count;
        n.x_mean[j] = mean;
        n.x_std[j] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    double mean = 0.0;
    for (double y : train.targets) mean += y;
    mean /= count;
    double var = 0.0;
    for (double y : train.targets) var += (y - mean) * (y - mean);
    var /= count;
    n.y_mean = mean;
    n.y_std = var > 0.0 ? std::sqrt(var) : 1.0;
    return n;
}

void Normalization::standardize_row(const std::array<double, kFeatureCount>& in,
                                    double* out) const {
    for (std::size_t j = 0; j < kFeatureCount; ++j) out[j] = (in[j] - x_mean[j]) / x_std[j];
}

Tensor Normalization::standardize_features(
    const std::vector<std::array<double, kFeatureCount>>& rows) const {
    Tensor X = Tensor::zeros({rows.size(), kFeatureCount});
    for (std::size_t i = 0; i < rows.size(); ++i)
        standardize_row(rows[i], X.data() + i * kFeatureCount);
    return X;
}

std::vector<double> Normalization::standardize_targets(const std::vector<double>& y) const {
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = (y[i] - y_mean) / y_std;
    return out;
}

BnnModel BnnModel::init(const std::vector<std::size_t>& widths, double prior_sigma,
                        double init_posterior_std, Rng& rng) {
    if (widths.size() < 2) throw ContractViolation("BnnModel::init: need at least two widths");
    if (!(prior_sigma > 0.0)) throw ContractViolation("BnnModel::init: prior_sigma must be positive");
    if (!(init_posterior_std > 0.0))
        throw ContractViolation("BnnModel::init: init_posterior_std must be positive");
    BnnModel model;
    model.prior_sigma = prior_sigma;
    const double rho0 = softplus_inverse(init_posterior_std);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const std::size_t in = widths[l], out = widths[l + 1];
        VariationalLayer layer;
        layer.w_mu = Tensor::zeros({in, out});
        const double scale = 1.0 / std::sqrt(static_cast<double>(in));
        for (double& w : layer.w_mu.v) w = scale * rng.normal();
        layer.w_rho = Tensor::full({in, out}, rho0);
        layer.b_mu = Tensor::zeros({out});
        layer.b_rho = Tensor::full({out}, rho0);
        model.layers.push_back(std::move(layer));
    }
    return model;
}

std::vector<std::size_t> BnnModel::widths() const {
    std::vector<std::size_t> w;
    if (layers.empty()) return w;
    w.push_back(layers.front().fan_in());
    for (const auto& l : layers) w.push_back(l.fan_out());
    return w;
}

std::size_t BnnModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.w_mu.size() + l.b_mu.size();
    return n;
}

std::vector<double> BnnModel::mean_forward(const Tensor& X_std) const {
    const std::size_t rows = X_std.rows();
    Tensor h = X_std;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& L = layers[l];
        Tensor z = Tensor::zeros({rows, L.fan_out()});
        kernels::linear_forward(h.data(), L.w_mu.data(), L.b_mu.data(), z.data(), rows, L.fan_in(),
                                L.fan_out());
        if (l + 1 < layers.size())
            for (double& x : z.v) x = std::tanh(x);
        h = std::move(z);
    }
    std::vector<double> out(rows);
    for (std::size_t i = 0; i < rows; ++i) out[i] = h.v[i];
    return out;
}

double kl_gaussian(const Tensor& post_mu, const Tensor& post_sigma, double prior_sigma) {
    if (!post_mu.same_shape(post_sigma))
        throw ContractViolation("kl_gaussian: mu/sigma shape mismatch");
    if (!(prior_sigma > 0.0)) throw ContractViolation("kl_gaussian: prior_sigma must be positive");
    double kl = 0.0;
    const double inv2p2 = 1.0 / (2.0 * prior_sigma * prior_sigma);
    for (std::size_t i = 0; i < post_mu.size(); ++i) {
        const double s = post_sigma.v[i];
        if (!(s > 0.0)) throw ContractViolation("kl_gaussian: post_sigma must be positive");
        const double mu = post_mu.v[i];
        kl += std::log(prior_sigma / s) + (s * s + mu * mu) * inv2p2 - 0.5;
    }
    return kl;
}

double kl_gaussian(double post_mu, double post_sigma, double prior_sigma) {
    return kl_gaussian(Tensor::scalar(post_mu), Tensor::scalar(post_sigma), prior_sigma);
}

double kl_model(const BnnModel& model) {
    double kl = 0.0;
    for (const auto& l : model.layers) {
        Tensor ws = l.w_rho, bs = l.b_rho;
        for (double& x : ws.v) x = math::softplus(x);
        for (double& x : bs.v) x = math::softplus(x);
        kl += kl_gaussian(l.w_mu, ws, model.prior_sigma);
        kl += kl_gaussian(l.b_mu, bs, model.prior_sigma);
    }
    return kl;
}

BnnTapeBinding reparam_forward_tape(Tape& tape, const BnnModel& model, const Tensor& X_std,
                                    Rng& rng) {
    if (X_std.cols() != model.layers.front().fan_in())
        throw ContractViolation("reparam_forward: input width mismatch");
    BnnTapeBinding bind;
    Tape::Id h = tape.constant(X_std);
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto& L = model.layers[l];
        BnnTapeBinding::LayerIds ids;
        ids.w_mu = tape.leaf(L.w_mu);
        ids.w_rho = tape.leaf(L.w_rho);
        ids.b_mu = tape.leaf(L.b_mu);
        ids.b_rho = tape.leaf(L.b_rho);
        // W = mu + softplus(rho) * eps, eps ~ N(0,1) constant on the tape
        Tape::Id w = tape.add(ids.w_mu,
                              tape.mul_const(tape.softplus(ids.w_rho),
                                             rng.normal_tensor(L.w_mu.shape)));
        Tape::Id b = tape.add(ids.b_mu,
                              tape.mul_const(tape.softplus(ids.b_rho),
                                             rng.normal_tensor(L.b_mu.shape)));
        h = tape.linear(h, w, b);
        if (l + 1 < model.layers.size()) h = tape.tanh(h);
        bind.layers.push_back(ids);
    }
    bind.output = h;
    return bind;
}

std::vector<double> reparam_forward(const BnnModel& model, const Tensor& X_std, Rng& rng) {
    const std::size_t rows = X_std.rows();
    Tensor h = X_std;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto& L = model.layers[l];
        const std::size_t in = L.fan_in(), out = L.fan_out();
        Tensor W = Tensor::zeros({in, out});
        for (std::size_t i = 0; i < W.size(); ++i)
            W.v[i] = L.w_mu.v[i] + math::softplus(L.w_rho.v[i]) * rng.normal();
        Tensor B = Tensor::zeros({out});
        for (std::size_t i = 0; i < B.size(); ++i)
            B.v[i] = L.b_mu.v[i] + math::softplus(L.b_rho.v[i]) * rng.normal();
        Tensor z = Tensor::zeros({rows, out});
        kernels::linear_forward(h.data(), W.data(), B.data(), z.data(), rows, in, out);
        if (l + 1 < model.layers.size())
            for (double& x : z.v) x = std::tanh(x);
        h = std::move(z);
    }
    std::vector<double> outv(rows);
    for (std::size_t i = 0; i < rows; ++i) outv[i] = h.v[i];
    return outv;
}

namespace {

// Gaussian NLL of the batch (summed over points) plus weighted KL, on tape.
Tape::Id elbo_tape(Tape& tape, const BnnModel& model, const Tensor& X_std,
                   const std::vector<double>& y_std, Rng& rng, std::size_t mc_train,
                   double kl_weight, double sigma_lik, BnnTapeBinding* binding_out) {
    if (y_std.empty()) throw ContractViolation("elbo_loss: empty batch");
    const std::size_t n = y_std.size();
    const double nll_const = static_cast<double>(n) * (std::log(sigma_lik) + kHalfLog2Pi);
    Tensor y_col = Tensor::zeros({n, 1});
    for (std::size_t i = 0; i < n; ++i) y_col.v[i] = y_std[i];
    Tape::Id y_const = tape.constant(std::move(y_col));

    Tape::Id nll_sum = -1;
    BnnTapeBinding first_bind;
    for (std::size_t s = 0; s < mc_train; ++s) {
        BnnTapeBinding bind = reparam_forward_tape(tape, model, X_std, rng);
        if (s == 0) first_bind = bind;
        Tape::Id r = tape.sub(bind.output, y_const);
        Tape::Id nll = tape.add_scalar(
            tape.scale(tape.sum(tape.square(r)), 1.0 / (2.0 * sigma_lik * sigma_lik)), nll_const);
        nll_sum = s == 0 ? nll : tape.add(nll_sum, nll);
    }
    Tape::Id nll_mean = mc_train == 1 ? nll_sum : tape.scale(nll_sum, 1.0 / mc_train);

    // KL of every layer's mu/rho leaves against the prior, in closed form.
    // Gradients flow through softplus/log/square; mc passes share the leaves
    // of the first pass for the KL term (same parameters underneath).
    const double inv2p2 = 1.0 / (2.0 * model.prior_sigma * model.prior_sigma);
    const double log_prior = std::log(model.prior_sigma);
    Tape::Id kl_total = -1;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto ids = first_bind.layers[l];
        for (auto [mu_id, rho_id] : {std::pair{ids.w_mu, ids.w_rho}, std::pair{ids.b_mu, ids.b_rho}}) {
            Tape::Id sigma = tape.softplus(rho_id);
            Tape::Id expr = tape.add(tape.scale(tape.log(sigma), -1.0),
                                     tape.scale(tape.add(tape.square(sigma), tape.square(mu_id)),
                                                inv2p2));
            Tape::Id part = tape.add_scalar(
                tape.sum(expr),
                static_cast<double>(tape.value(mu_id).size()) * (log_prior - 0.5));
            kl_total = kl_total < 0 ? part : tape.add(kl_total, part);
        }
    }
    Tape::Id loss = tape.add(nll_mean, tape.scale(kl_total, kl_weight));
    if (binding_out) *binding_out = first_bind;
    return loss;
}

}  // namespace

double elbo_loss(const BnnModel& model, const Tensor& X_std, const std::vector<double>& y_std,
                 Rng& rng, std::size_t mc_train_samples, double kl_weight, double sigma_lik) {
    Tape tape;
    Tape::Id loss = elbo_tape(tape, model, X_std, y_std, rng, mc_train_samples, kl_weight,
                              sigma_lik, nullptr);
    return tape.value(loss).scalar_value();
}

EpistemicPrediction predict_epistemic(const BnnModel& model,
                                      const std::array<double, kFeatureCount>& x, std::size_t S,
                                      const Rng& rng) {
    Tensor X = Tensor::zeros({1, kFeatureCount});
    model.norm.standardize_row(x, X.data());
    std::vector<double> mean_std, var_std;
    predict_epistemic_batch(model, X, S, rng, mean_std, var_std);
    EpistemicPrediction p;
    p.mean = model.norm.destandardize_mean(mean_std[0]);
    p.epistemic_var = model.norm.destandardize_var(var_std[0]);
    p.mc_samples = S;
    return p;
}

void predict_epistemic_batch(const BnnModel& model, const Tensor& X_std, std::size_t S,
                             const Rng& rng, std::vector<double>& mean_std,
                             std::vector<double>& var_std) {
    if (S < 2) throw ContractViolation("predict_epistemic: need at least 2 MC samples");
    const std::size_t n = X_std.rows();
    mean_std.assign(n, 0.0);
    var_std.assign(n, 0.0);
    std::vector<std::vector<double>> draws(S);
    for (std::size_t s = 0; s < S; ++s) {
        Rng draw_rng = rng.substream("mc-draw", s);
        draws[s] = reparam_forward(model, X_std, draw_rng);
    }
    // fixed accumulation order: samples outer, points inner
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t i = 0; i < n; ++i) mean_std[i] += draws[s][i];
    for (std::size_t i = 0; i < n; ++i) mean_std[i] /= static_cast<double>(S);
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t i = 0; i < n; ++i) {
            const double d = draws[s][i] - mean_std[i];
            var_std[i] += d * d;
        }
    for (std::size_t i = 0; i < n; ++i) var_std[i] /= static_cast<double>(S - 1);
}

void AdamState::init(const std::vector<Tensor*>& params) {
    m.clear();
    v.clear();
    for (const Tensor* p : params) {
        m.push_back(Tensor::zeros(p->shape));
        v.push_back(Tensor::zeros(p->shape));
    }
    t = 0;
}

void AdamState::step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
                     double lr) {
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& p = *params[k];
        const Tensor& g = *grads[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[k].v[i] = beta1 * m[k].v[i] + (1.0 - beta1) * g.v[i];
            v[k].v[i] = beta2 * v[k].v[i] + (1.0 - beta2) * g.v[i] * g.v[i];
            const double mh = m[k].v[i] / bc1;
            const double vh = v[k].v[i] / bc2;
            p.v[i] -= lr * mh / (std::sqrt(vh) + eps);
        }
    }
}

BnnTrainer::BnnTrainer(BnnModel& model, const Tensor& X_train_std, std::vector<double> y_train_std,
                       const TrainingConfig& train_cfg, double sigma_lik, const Rng& run_rng)
    : model_(model),
      X_(X_train_std),
      y_(std::move(y_train_std)),
      cfg_(train_cfg),
      sigma_lik_(sigma_lik),
      rng_(run_rng) {
    const std::size_t n = y_.size();
    if (n == 0) throw ContractViolation("BnnTrainer: empty training set");
    minibatches_ = (n + cfg_.batch - 1) / cfg_.batch;
    kl_weight_ = cfg_.kl_scale / static_cast<double>(minibatches_);
    std::vector<Tensor*> params;
    for (auto& l : model_.layers) {
        params.push_back(&l.w_mu);
        params.push_back(&l.w_rho);
        params.push_back(&l.b_mu);
        params.push_back(&l.b_rho);
    }
    adam_.init(params);
}

double BnnTrainer::learning_rate(std::size_t epoch_index) const {
    const double f = cfg_.lr_floor;
    const double progress = static_cast<double>(epoch_index) / static_cast<double>(cfg_.epochs);
    return cfg_.learning_rate * (f + (1.0 - f) * 0.5 * (1.0 + std::cos(kPi * progress)));
}

void BnnTrainer::epoch(std::size_t epoch_index) {
    Rng erng = rng_.substream("bnn-epoch", epoch_index);
    const std::size_t n = y_.size();
    const auto perm = erng.permutation(n);
    const double lr = learning_rate(epoch_index);
    for (std::size_t b = 0; b < minibatches_; ++b) {
        const std::size_t lo = b * cfg_.batch;
        const std::size_t hi = std::min(lo + cfg_.batch, n);
        const std::size_t bs = hi - lo;
        Tensor Xb = Tensor::zeros({bs, kFeatureCount});
        std::vector<double> yb(bs);
        for (std::size_t i = 0; i < bs; ++i) {
            const std::size_t src = perm[lo + i];
            for (std::size_t j = 0; j < kFeatureCount; ++j)
                Xb.v[i * kFeatureCount + j] = X_.v[src * kFeatureCount + j];
            yb[i] = y_[src];
        }
        Tape tape;
        BnnTapeBinding bind;
        Tape::Id loss = elbo_tape(tape, model_, Xb, yb, erng, cfg_.mc_train, kl_weight_,
                                  sigma_lik_, &bind);
        ++step_count_;
        if (!std::isfinite(tape.value(loss).scalar_value()))
            throw TrainingError("BNN training diverged (non-finite loss)", step_count_);
        tape.backward(loss);
        std::vector<Tensor*> params;
        std::vector<const Tensor*> grads;
        for (std::size_t l = 0; l < model_.layers.size(); ++l) {
            auto& L = model_.layers[l];
            const auto& ids = bind.layers[l];
            params.insert(params.end(), {&L.w_mu, &L.w_rho, &L.b_mu, &L.b_rho});
            grads.insert(grads.end(), {&tape.grad(ids.w_mu), &tape.grad(ids.w_rho),
                                       &tape.grad(ids.b_mu), &tape.grad(ids.b_rho)});
        }
        adam_.step(params, grads, lr);
    }
}

double predictive_rmse(const BnnModel& model, const Tensor& X_std,
                       const std::vector<double>& y_raw, std::size_t mc, const Rng& rng) {
    std::vector<double> mean_std, var_std;
    predict_epistemic_batch(model, X_std, mc, rng, mean_std, var_std);
    double se = 0.0;
    for (std::size_t i = 0; i < y_raw.size(); ++i) {
        const double d = model.norm.destandardize_mean(mean_std[i]) - y_raw[i];
        se += d * d;
    }
    return std::sqrt(se / static_cast<double>(y_raw.size()));
}

std::vector<LearningCurvePoint> train_bnn(BnnModel& model, const Dataset& train,
                                          const ExperimentConfig& cfg, const Rng& run_rng,
                                          const Dataset* test_id, const Dataset* test_ood) {
    if (train.split != Split::train) throw ContractViolation("train_bnn: dataset split must be train");
    const Tensor X = model.norm.standardize_features(train.features);
    const std::vector<double> y = model.norm.standardize_targets(train.targets);
    BnnTrainer trainer(model, X, y, cfg.training, cfg.model.sigma_lik, run_rng);
    const Tensor X_id = test_id ? model.norm.standardize_features(test_id->features) : Tensor{};
    const Tensor X_ood = test_ood ? model.norm.standardize_features(test_ood->features) : Tensor{};
    std::vector<LearningCurvePoint> curve;
    for (std::size_t e = 0; e < cfg.training.epochs; ++e) {
        trainer.epoch(e);
        if ((e + 1) % cfg.training.eval_interval == 0 || e + 1 == cfg.training.epochs) {
            LearningCurvePoint pt;
            pt.epoch = e + 1;
            Rng eval_rng = run_rng.substream("eval", e);
            pt.bnn_rmse_train = predictive_rmse(model, X, train.targets, cfg.training.eval_mc,
                                                eval_rng);
            if (test_id)
                pt.bnn_rmse_id = predictive_rmse(model, X_id, test_id->targets,
                                                 cfg.training.eval_mc, eval_rng);
            if (test_ood)
                pt.bnn_rmse_ood = predictive_rmse(model, X_ood, test_ood->targets,
                                                  cfg.training.eval_mc, eval_rng);
            curve.push_back(pt);
        }
    }
    return curve;
}

}  // namespace duq
