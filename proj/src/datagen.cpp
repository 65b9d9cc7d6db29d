#include "duq/datagen.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "duq/errors.hpp"

namespace duq {

void FeatureSpec::validate() const {
    for (std::size_t j = 0; j < kFeatureCount; ++j)
        if (!(stds[j] > 0.0))
            throw ContractViolation("FeatureSpec: stds[" + std::to_string(j) +
                                    "] must be strictly positive");
    if (sample_count == 0) throw ContractViolation("FeatureSpec: sample_count must be positive");
}

void NoiseModel::validate() const {
    if (kind == Kind::uniform_scale && lo > hi)
        throw ContractViolation("NoiseModel: lo must not exceed hi");
    if (kind == Kind::step_on_x1 && (low_sigma < 0.0 || high_sigma < 0.0))
        throw ContractViolation("NoiseModel: sigmas must be non-negative");
}

std::string split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::test_id: return "test_id";
        case Split::test_ood: return "test_ood";
    }
    return "train";
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "test_id") return Split::test_id;
    if (name == "test_ood") return Split::test_ood;
    throw ParseError("unknown split label '" + name + "'");
}

std::vector<std::array<double, kFeatureCount>> sample_features(const FeatureSpec& spec, Rng& rng) {
    spec.validate();
    std::vector<std::array<double, kFeatureCount>> rows(spec.sample_count);
    for (auto& row : rows)
        for (std::size_t j = 0; j < kFeatureCount; ++j)
            row[j] = spec.means[j] + spec.stds[j] * rng.normal();
    return rows;
}

double target_function(const std::array<double, kFeatureCount>& x, double exp_arg_cap) {
    const double x1 = x[0], x2 = x[1], x3 = x[2], x4 = x[3], x5 = x[4], x6 = x[5];
    const double exp_arg = std::fmin(-x2 * x5 * x5, exp_arg_cap);
    return std::sin(x1) + x2 * x2 - 2.0 * x1 * x3 * x3 + std::sqrt(std::fmax(x4, 0.0)) +
           std::exp(exp_arg) - 3.0 * x6 / (0.2 + std::fabs(x1));
}

NoisyTargets apply_noise(const std::vector<double>& y,
                         const std::vector<std::array<double, kFeatureCount>>& x,
                         const NoiseModel& model, Rng& rng) {
    if (y.size() != x.size()) throw ContractViolation("apply_noise: length mismatch");
    model.validate();
    NoisyTargets out;
    out.targets.resize(y.size());
    out.sigma.assign(y.size(), 0.0);
    switch (model.kind) {
        case NoiseModel::Kind::none:
            out.targets = y;
            break;
        case NoiseModel::Kind::uniform_scale:
            for (std::size_t i = 0; i < y.size(); ++i) {
                out.sigma[i] = rng.uniform(model.lo, model.hi);
                out.targets[i] = y[i] + out.sigma[i] * rng.normal();
            }
            break;
        case NoiseModel::Kind::step_on_x1:
            for (std::size_t i = 0; i < y.size(); ++i) {
                out.sigma[i] = x[i][0] < model.threshold ? model.low_sigma : model.high_sigma;
                out.targets[i] = y[i] + out.sigma[i] * rng.normal();
            }
            break;
    }
    return out;
}

FeatureSpec make_ood(const FeatureSpec& spec, double shift_factor) {
    spec.validate();
    FeatureSpec ood = spec;
    for (std::size_t j = 0; j < kFeatureCount; ++j)
        ood.means[j] = spec.means[j] + shift_factor * spec.stds[j];
    return ood;
}

Dataset make_dataset(const FeatureSpec& spec, const NoiseModel& noise, Split split, Rng& rng,
                     double exp_arg_cap) {
    Dataset ds;
    ds.split = split;
    ds.features = sample_features(spec, rng);
    std::vector<double> clean(ds.features.size());
    for (std::size_t i = 0; i < clean.size(); ++i)
        clean[i] = target_function(ds.features[i], exp_arg_cap);
    NoisyTargets nt = apply_noise(clean, ds.features, noise, rng);
    ds.targets = std::move(nt.targets);
    ds.noise_sigma = std::move(nt.sigma);
    return ds;
}

namespace {

const char* kHeader = "x1,x2,x3,x4,x5,x6,y,sigma_true,split";

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& field, long line) {
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (end == field.c_str() || *end != '\0')
        throw ParseError("malformed numeric field '" + field + "'", line);
    return v;
}

}  // namespace

void save_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << kHeader << '\n';
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t j = 0; j < kFeatureCount; ++j) out << format_double(ds.features[i][j]) << ',';
        out << format_double(ds.targets[i]) << ',' << format_double(ds.noise_sigma[i]) << ','
            << split_name(ds.split) << '\n';
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

Dataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::string line;
    if (!std::getline(in, line)) throw ParseError("missing header in '" + path + "'");
    if (line != kHeader)
        throw ParseError("unexpected header '" + line + "', want '" + kHeader + "'", 1);
    Dataset ds;
    bool split_seen = false;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() != kFeatureCount + 3)
            throw ParseError("expected " + std::to_string(kFeatureCount + 3) + " fields, got " +
                                 std::to_string(fields.size()),
                             lineno - 1);  // data line number, header excluded
        std::array<double, kFeatureCount> row;
        for (std::size_t j = 0; j < kFeatureCount; ++j) row[j] = parse_double(fields[j], lineno - 1);
        ds.features.push_back(row);
        ds.targets.push_back(parse_double(fields[kFeatureCount], lineno - 1));
        const double sigma = parse_double(fields[kFeatureCount + 1], lineno - 1);
        if (sigma < 0.0) throw ParseError("noise sigma must be non-negative", lineno - 1);
        ds.noise_sigma.push_back(sigma);
        Split s = split_from_name(fields[kFeatureCount + 2]);
        if (!split_seen) {
            ds.split = s;
            split_seen = true;
        } else if (s != ds.split) {
            throw ParseError("mixed split labels in one file", lineno - 1);
        }
    }
    return ds;
}

}  // namespace duq
