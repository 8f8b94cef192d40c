#include "ssmf/model_io.hpp"
#include "ssmf/error.hpp"

#include "json.hpp"

#include <fstream>
#include <sstream>

namespace ssmf::model_io {
namespace {

using nlohmann::json;

json matrix_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from(const json& j, Eigen::Index cols_if_empty = 0) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    const Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(j.at(0).size()) : cols_if_empty;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = j.at(static_cast<std::size_t>(i));
        if (static_cast<Eigen::Index>(row.size()) != cols)
            fail(ErrorKind::Schema, "ragged matrix in model file");
        for (Eigen::Index c = 0; c < cols; ++c)
            m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
    return m;
}

json vector_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::VectorXd vector_from(const json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json config_json(const FitConfig& c) {
    return {{"sigma", c.sigma},
            {"gamma", c.gamma_shrink},
            {"rel_tol", c.rel_tol},
            {"max_iters", c.max_iters},
            {"max_substeps", c.max_substeps},
            {"initial_step", c.initial_step},
            {"seed", c.seed},
            {"window", c.window},
            {"warm_start_beta", c.warm_start_beta}};
}

FitConfig config_from(const json& j) {
    FitConfig c;
    c.sigma = j.at("sigma").get<double>();
    c.gamma_shrink = j.at("gamma").get<double>();
    c.rel_tol = j.at("rel_tol").get<double>();
    c.max_iters = j.at("max_iters").get<int>();
    c.max_substeps = j.at("max_substeps").get<int>();
    c.initial_step = j.at("initial_step").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.window = j.at("window").get<int>();
    c.warm_start_beta = j.at("warm_start_beta").get<bool>();
    return c;
}

ordinal::GroupKey parse_key(const std::string& s) {
    const auto bar = s.find('|');
    if (bar == std::string::npos || s.find('|', bar + 1) != std::string::npos)
        fail(ErrorKind::Schema, "group key '" + s + "' is not of the form time|app");
    return {s.substr(0, bar), s.substr(bar + 1)};
}

} // namespace

std::string to_json(const NormalFit& fit) {
    json j;
    j["format"] = "ssmf-model";
    j["version"] = 1;
    j["model"] = "normal";
    j["topics"] = fit.lambda.cols();
    j["terms"] = fit.lambda.rows();
    j["lambda"] = matrix_json(fit.lambda);
    j["beta"] = vector_json(fit.beta);
    j["objective_trace"] = fit.objective_trace;
    j["iterations"] = fit.iterations;
    j["converged"] = fit.converged;
    j["rank_deficient"] = fit.rank_deficient;
    j["config"] = config_json(fit.config);
    return j.dump(1) + "\n";
}

std::string to_json(const ordinal::OrdinalModel& model) {
    json j;
    j["format"] = "ssmf-model";
    j["version"] = 1;
    j["model"] = std::string(ordinal::to_string(model.kind));
    j["levels"] = model.levels;
    j["window"] = model.window;
    j["topics"] = model.lambda.cols();
    j["terms"] = model.lambda.rows();
    j["lambda"] = matrix_json(model.lambda);
    json alphas = json::object();
    json betas = json::object();
    for (const auto& [key, gp] : model.params) {
        alphas[key.to_string()] = vector_json(gp.alpha);
        if (model.kind == ordinal::ModelKind::constrained) {
            betas[key.to_string()] = vector_json(gp.beta.col(0));
        } else {
            for (Eigen::Index k = 0; k < gp.beta.cols(); ++k)
                betas[key.to_string() + "|" + std::to_string(k + 1)] = vector_json(gp.beta.col(k));
        }
    }
    j["alphas"] = std::move(alphas);
    j["betas"] = std::move(betas);
    j["loglik_trace"] = model.loglik_trace;
    j["iterations"] = model.iterations;
    j["converged"] = model.converged;
    j["config"] = config_json(model.config);
    return j.dump(1) + "\n";
}

AnyModel from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        if (j.at("format").get<std::string>() != "ssmf-model")
            fail(ErrorKind::Schema, "not an ssmf model file");
        const auto kind = j.at("model").get<std::string>();
        const auto topics = j.at("topics").get<Eigen::Index>();
        if (kind == "normal") {
            NormalFit fit;
            fit.lambda = matrix_from(j.at("lambda"), topics);
            fit.beta = vector_from(j.at("beta"));
            fit.objective_trace = j.at("objective_trace").get<std::vector<double>>();
            fit.iterations = j.at("iterations").get<int>();
            fit.converged = j.at("converged").get<bool>();
            fit.rank_deficient = j.at("rank_deficient").get<bool>();
            fit.config = config_from(j.at("config"));
            if (fit.beta.size() != fit.lambda.cols())
                fail(ErrorKind::Schema, "beta length does not match topic count");
            return fit;
        }
        ordinal::OrdinalModel model;
        model.kind = ordinal::parse_model_kind(kind);
        model.levels = j.at("levels").get<int>();
        model.window = j.at("window").get<int>();
        model.lambda = matrix_from(j.at("lambda"), topics);
        if (model.levels < 2)
            fail(ErrorKind::Schema, "model needs at least 2 levels");
        const auto& betas = j.at("betas");
        const bool saturated = model.kind == ordinal::ModelKind::saturated;
        for (const auto& [name, alpha] : j.at("alphas").items()) {
            ordinal::GroupParams gp;
            gp.alpha = vector_from(alpha);
            if (saturated) {
                gp.beta.resize(topics, model.levels - 1);
                for (int k = 1; k < model.levels; ++k) {
                    const Eigen::VectorXd col = vector_from(betas.at(name + "|" + std::to_string(k)));
                    if (col.size() != topics)
                        fail(ErrorKind::Schema, "coefficient length for '" + name + "' does not match the model");
                    gp.beta.col(k - 1) = col;
                }
            } else {
                gp.beta = vector_from(betas.at(name));
            }
            if (gp.alpha.size() != model.levels - 1 || gp.beta.rows() != topics)
                fail(ErrorKind::Schema, "coefficient shapes for group '" + name + "' do not match the model");
            model.params.emplace(parse_key(name), std::move(gp));
        }
        if (betas.size() != model.params.size() * (saturated ? static_cast<std::size_t>(model.levels - 1) : 1))
            fail(ErrorKind::Schema, "coefficient keys do not match the intercept keys");
        model.loglik_trace = j.at("loglik_trace").get<std::vector<double>>();
        model.iterations = j.at("iterations").get<int>();
        model.converged = j.at("converged").get<bool>();
        model.config = config_from(j.at("config"));
        return model;
    } catch (const json::exception& e) {
        fail(ErrorKind::Schema, std::string("malformed model file: ") + e.what());
    }
}

void save(const std::filesystem::path& path, const AnyModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        fail(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
    out << std::visit([](const auto& m) { return to_json(m); }, model);
}

AnyModel load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorKind::Io, "cannot open '" + path.string() + "' for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

} // namespace ssmf::model_io
