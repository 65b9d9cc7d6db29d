#include "duq/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace duq {

namespace {

constexpr const char* kMagic = "duq-checkpoint";
constexpr int kVersion = 1;

void write_tensor(std::ostream& out, const char* tag, const Tensor& t) {
    out << tag;
    out << ' ' << t.shape.size();
    for (std::size_t e : t.shape) out << ' ' << e;
    char buf[40];
    for (double x : t.v) {
        std::snprintf(buf, sizeof buf, " %a", x);
        out << buf;
    }
    out << '\n';
}

Tensor read_tensor(std::istream& in, const std::string& want_tag, long& lineno) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("checkpoint truncated, expected " + want_tag, lineno);
    ++lineno;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag != want_tag) throw ParseError("expected tensor '" + want_tag + "', got '" + tag + "'", lineno);
    std::size_t ndim;
    if (!(ss >> ndim)) throw ParseError("bad tensor rank", lineno);
    std::vector<std::size_t> shape(ndim);
    for (auto& e : shape)
        if (!(ss >> e)) throw ParseError("bad tensor shape", lineno);
    Tensor t = Tensor::zeros(shape);
    for (double& x : t.v) {
        std::string f;
        if (!(ss >> f)) throw ParseError("tensor value count mismatch", lineno);
        char* end = nullptr;
        x = std::strtod(f.c_str(), &end);
        if (end == f.c_str()) throw ParseError("bad tensor value '" + f + "'", lineno);
    }
    std::string extra;
    if (ss >> extra) throw ParseError("trailing tensor values", lineno);
    return t;
}

double read_scalar_line(std::istream& in, const std::string& key, long& lineno) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("checkpoint truncated, expected " + key, lineno);
    ++lineno;
    std::istringstream ss(line);
    std::string tag, value;
    ss >> tag >> value;
    if (tag != key) throw ParseError("expected '" + key + "', got '" + tag + "'", lineno);
    return std::strtod(value.c_str(), nullptr);
}

}  // namespace

void save_checkpoint(const DualModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << kMagic << ' ' << kVersion << '\n';
    out << "config_hash " << model.config_hash << '\n';
    const Normalization& n = model.norm();
    char buf[40];
    out << "norm";
    for (double x : n.x_mean) { std::snprintf(buf, sizeof buf, " %a", x); out << buf; }
    for (double x : n.x_std) { std::snprintf(buf, sizeof buf, " %a", x); out << buf; }
    std::snprintf(buf, sizeof buf, " %a", n.y_mean); out << buf;
    std::snprintf(buf, sizeof buf, " %a", n.y_std); out << buf;
    out << '\n';
    std::snprintf(buf, sizeof buf, "%a", model.bnn.prior_sigma);
    out << "section bnn layers " << model.bnn.layers.size() << " prior_sigma " << buf << '\n';
    for (const auto& l : model.bnn.layers) {
        write_tensor(out, "w_mu", l.w_mu);
        write_tensor(out, "w_rho", l.w_rho);
        write_tensor(out, "b_mu", l.b_mu);
        write_tensor(out, "b_rho", l.b_rho);
    }
    std::snprintf(buf, sizeof buf, "%a", model.vnet.out_scale);
    out << "section vnet layers " << model.vnet.layers.size() << " out_scale " << buf << '\n';
    for (const auto& l : model.vnet.layers) {
        write_tensor(out, "w", l.w);
        write_tensor(out, "b", l.b);
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

DualModel load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");
    long lineno = 0;
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty checkpoint file", 1);
    ++lineno;
    {
        std::istringstream ss(line);
        std::string magic;
        int version = 0;
        ss >> magic >> version;
        if (magic != kMagic) throw ParseError("not a checkpoint file", lineno);
        if (version != kVersion)
            throw ParseError("unsupported checkpoint version " + std::to_string(version), lineno);
    }
    DualModel model;
    if (!std::getline(in, line)) throw ParseError("missing config_hash", lineno);
    ++lineno;
    {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag >> model.config_hash;
        if (tag != "config_hash") throw ParseError("expected config_hash", lineno);
    }
    if (!std::getline(in, line)) throw ParseError("missing normalization", lineno);
    ++lineno;
    Normalization norm;
    {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag != "norm") throw ParseError("expected norm", lineno);
        auto next = [&]() {
            std::string f;
            if (!(ss >> f)) throw ParseError("normalization truncated", lineno);
            return std::strtod(f.c_str(), nullptr);
        };
        for (auto& x : norm.x_mean) x = next();
        for (auto& x : norm.x_std) x = next();
        norm.y_mean = next();
        norm.y_std = next();
    }

    auto read_section = [&](const char* want) -> std::pair<std::size_t, double> {
        if (!std::getline(in, line)) throw ParseError(std::string("missing section ") + want, lineno);
        ++lineno;
        std::istringstream ss(line);
        std::string tag, name, layers_kw, param_kw, param_val;
        std::size_t count;
        ss >> tag >> name >> layers_kw >> count >> param_kw >> param_val;
        if (tag != "section" || name != want)
            throw ParseError(std::string("expected section ") + want, lineno);
        return {count, std::strtod(param_val.c_str(), nullptr)};
    };

    auto [bnn_layers, prior_sigma] = read_section("bnn");
    model.bnn.prior_sigma = prior_sigma;
    for (std::size_t l = 0; l < bnn_layers; ++l) {
        VariationalLayer layer;
        layer.w_mu = read_tensor(in, "w_mu", lineno);
        layer.w_rho = read_tensor(in, "w_rho", lineno);
        layer.b_mu = read_tensor(in, "b_mu", lineno);
        layer.b_rho = read_tensor(in, "b_rho", lineno);
        model.bnn.layers.push_back(std::move(layer));
    }
    auto [vnet_layers, out_scale] = read_section("vnet");
    model.vnet.out_scale = out_scale;
    for (std::size_t l = 0; l < vnet_layers; ++l) {
        VarianceModel::DenseLayer layer;
        layer.w = read_tensor(in, "w", lineno);
        layer.b = read_tensor(in, "b", lineno);
        model.vnet.layers.push_back(std::move(layer));
    }
    model.bnn.norm = norm;
    model.vnet.norm = norm;
    return model;
}

}  // namespace duq
