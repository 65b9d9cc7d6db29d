#include "duq/config.hpp"

#include <fstream>
#include <sstream>

#include "duq/errors.hpp"
#include "json.hpp"

namespace duq {

using json = nlohmann::ordered_json;

namespace {

std::string noise_kind_name(NoiseModel::Kind k) {
    switch (k) {
        case NoiseModel::Kind::none: return "none";
        case NoiseModel::Kind::uniform_scale: return "uniform_scale";
        case NoiseModel::Kind::step_on_x1: return "step_on_x1";
    }
    return "none";
}

NoiseModel::Kind noise_kind_from(const std::string& s) {
    if (s == "none") return NoiseModel::Kind::none;
    if (s == "uniform_scale") return NoiseModel::Kind::uniform_scale;
    if (s == "step_on_x1") return NoiseModel::Kind::step_on_x1;
    throw ConfigError("data.noise.kind: unknown value '" + s + "'");
}

template <typename T>
void read_into(const json& j, const char* section, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string(section) + "." + key + ": wrong type");
    }
}

}  // namespace

void ExperimentConfig::validate() const {
    for (std::size_t j = 0; j < kFeatureCount; ++j)
        if (!(data.feature_spec.stds[j] > 0.0))
            throw ConfigError("data.stds[" + std::to_string(j) + "]: must be strictly positive");
    if (data.feature_spec.sample_count == 0)
        throw ConfigError("data.train_count: must be positive");
    if (data.test_id_count == 0) throw ConfigError("data.test_id_count: must be positive");
    if (data.test_ood_count == 0) throw ConfigError("data.test_ood_count: must be positive");
    if (data.noise.kind == NoiseModel::Kind::uniform_scale && data.noise.lo > data.noise.hi)
        throw ConfigError("data.noise.lo: must not exceed data.noise.hi");
    if (data.noise.low_sigma < 0.0 || data.noise.high_sigma < 0.0)
        throw ConfigError("data.noise.low_sigma/high_sigma: must be non-negative");
    if (model.bnn_hidden.empty()) throw ConfigError("model.bnn_hidden: must be non-empty");
    if (model.vnet_hidden.empty()) throw ConfigError("model.vnet_hidden: must be non-empty");
    if (!(model.prior_sigma > 0.0)) throw ConfigError("model.prior_sigma: must be positive");
    if (!(model.sigma_lik > 0.0)) throw ConfigError("model.sigma_lik: must be positive");
    if (!(model.init_posterior_std > 0.0))
        throw ConfigError("model.init_posterior_std: must be positive");
    if (training.epochs == 0) throw ConfigError("training.epochs: must be positive");
    if (training.batch == 0) throw ConfigError("training.batch: must be positive");
    if (!(training.learning_rate > 0.0)) throw ConfigError("training.learning_rate: must be positive");
    if (training.lr_floor < 0.0 || training.lr_floor > 1.0)
        throw ConfigError("training.lr_floor: must be in [0,1]");
    if (!(training.kl_scale > 0.0)) throw ConfigError("training.kl_scale: must be positive");
    if (training.mc_train == 0) throw ConfigError("training.mc_train: must be positive");
    if (training.mc_residual == 0) throw ConfigError("training.mc_residual: must be positive");
    if (training.winsor_quantile <= 0.0 || training.winsor_quantile > 1.0)
        throw ConfigError("training.winsor_quantile: must be in (0,1]");
    if (training.prediction_samples < 2)
        throw ConfigError("training.prediction_samples: must be at least 2");
    if (training.eval_mc < 2) throw ConfigError("training.eval_mc: must be at least 2");
    if (training.eval_interval == 0) throw ConfigError("training.eval_interval: must be positive");
    if (output.dir.empty()) throw ConfigError("output.dir: must be non-empty");
}

ExperimentConfig default_config() { return ExperimentConfig{}; }

std::string config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["data"]["means"] = cfg.data.feature_spec.means;
    j["data"]["stds"] = cfg.data.feature_spec.stds;
    j["data"]["train_count"] = cfg.data.feature_spec.sample_count;
    j["data"]["test_id_count"] = cfg.data.test_id_count;
    j["data"]["test_ood_count"] = cfg.data.test_ood_count;
    j["data"]["noise"]["kind"] = noise_kind_name(cfg.data.noise.kind);
    j["data"]["noise"]["lo"] = cfg.data.noise.lo;
    j["data"]["noise"]["hi"] = cfg.data.noise.hi;
    j["data"]["noise"]["low_sigma"] = cfg.data.noise.low_sigma;
    j["data"]["noise"]["high_sigma"] = cfg.data.noise.high_sigma;
    j["data"]["noise"]["threshold"] = cfg.data.noise.threshold;
    j["data"]["ood_shift"] = cfg.data.ood_shift;
    j["data"]["exp_arg_cap"] = cfg.data.exp_arg_cap;
    j["model"]["bnn_hidden"] = cfg.model.bnn_hidden;
    j["model"]["vnet_hidden"] = cfg.model.vnet_hidden;
    j["model"]["prior_sigma"] = cfg.model.prior_sigma;
    j["model"]["sigma_lik"] = cfg.model.sigma_lik;
    j["model"]["init_posterior_std"] = cfg.model.init_posterior_std;
    j["training"]["epochs"] = cfg.training.epochs;
    j["training"]["batch"] = cfg.training.batch;
    j["training"]["learning_rate"] = cfg.training.learning_rate;
    j["training"]["lr_floor"] = cfg.training.lr_floor;
    j["training"]["kl_scale"] = cfg.training.kl_scale;
    j["training"]["mc_train"] = cfg.training.mc_train;
    j["training"]["mc_residual"] = cfg.training.mc_residual;
    j["training"]["winsor_quantile"] = cfg.training.winsor_quantile;
    j["training"]["vnet_lr_mult"] = cfg.training.vnet_lr_mult;
    j["training"]["vnet_warmup_frac"] = cfg.training.vnet_warmup_frac;
    j["training"]["vnet_decay_start"] = cfg.training.vnet_decay_start;
    j["training"]["prediction_samples"] = cfg.training.prediction_samples;
    j["training"]["eval_mc"] = cfg.training.eval_mc;
    j["training"]["eval_interval"] = cfg.training.eval_interval;
    j["output"]["dir"] = cfg.output.dir;
    j["output"]["plots"] = cfg.output.plots;
    j["seed"] = cfg.seed;
    return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("config is not valid JSON: ") + e.what());
    }
    ExperimentConfig cfg;
    if (j.contains("data")) {
        const json& d = j["data"];
        read_into(d, "data", "means", cfg.data.feature_spec.means);
        read_into(d, "data", "stds", cfg.data.feature_spec.stds);
        read_into(d, "data", "train_count", cfg.data.feature_spec.sample_count);
        read_into(d, "data", "test_id_count", cfg.data.test_id_count);
        read_into(d, "data", "test_ood_count", cfg.data.test_ood_count);
        if (d.contains("noise")) {
            const json& nz = d["noise"];
            if (nz.contains("kind")) cfg.data.noise.kind = noise_kind_from(nz["kind"].get<std::string>());
            read_into(nz, "data.noise", "lo", cfg.data.noise.lo);
            read_into(nz, "data.noise", "hi", cfg.data.noise.hi);
            read_into(nz, "data.noise", "low_sigma", cfg.data.noise.low_sigma);
            read_into(nz, "data.noise", "high_sigma", cfg.data.noise.high_sigma);
            read_into(nz, "data.noise", "threshold", cfg.data.noise.threshold);
        }
        read_into(d, "data", "ood_shift", cfg.data.ood_shift);
        read_into(d, "data", "exp_arg_cap", cfg.data.exp_arg_cap);
    }
    if (j.contains("model")) {
        const json& m = j["model"];
        read_into(m, "model", "bnn_hidden", cfg.model.bnn_hidden);
        read_into(m, "model", "vnet_hidden", cfg.model.vnet_hidden);
        read_into(m, "model", "prior_sigma", cfg.model.prior_sigma);
        read_into(m, "model", "sigma_lik", cfg.model.sigma_lik);
        read_into(m, "model", "init_posterior_std", cfg.model.init_posterior_std);
    }
    if (j.contains("training")) {
        const json& t = j["training"];
        read_into(t, "training", "epochs", cfg.training.epochs);
        read_into(t, "training", "batch", cfg.training.batch);
        read_into(t, "training", "learning_rate", cfg.training.learning_rate);
        read_into(t, "training", "lr_floor", cfg.training.lr_floor);
        read_into(t, "training", "kl_scale", cfg.training.kl_scale);
        read_into(t, "training", "mc_train", cfg.training.mc_train);
        read_into(t, "training", "mc_residual", cfg.training.mc_residual);
        read_into(t, "training", "winsor_quantile", cfg.training.winsor_quantile);
        read_into(t, "training", "vnet_lr_mult", cfg.training.vnet_lr_mult);
        read_into(t, "training", "vnet_warmup_frac", cfg.training.vnet_warmup_frac);
        read_into(t, "training", "vnet_decay_start", cfg.training.vnet_decay_start);
        read_into(t, "training", "prediction_samples", cfg.training.prediction_samples);
        read_into(t, "training", "eval_mc", cfg.training.eval_mc);
        read_into(t, "training", "eval_interval", cfg.training.eval_interval);
    }
    if (j.contains("output")) {
        const json& o = j["output"];
        read_into(o, "output", "dir", cfg.output.dir);
        read_into(o, "output", "plots", cfg.output.plots);
    }
    if (j.contains("seed")) read_into(j, "", "seed", cfg.seed);
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str());
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << config_to_json(cfg);
    if (!out) throw IoError("write failed for '" + path + "'");
}

std::string config_hash(const ExperimentConfig& cfg) {
    const std::string canon = config_to_json(cfg);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canon) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace duq
