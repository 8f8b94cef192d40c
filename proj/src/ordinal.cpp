#include "ssmf/ordinal.hpp"
#include "ssmf/error.hpp"
#include "ssmf/factorization.hpp"
#include "ssmf/line_search.hpp"
#include "ssmf/log.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <set>

namespace ssmf::ordinal {
namespace {

double sigmoid(double x) {
    if (x >= 0.0)
        return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void check_levels(int levels) {
    if (levels < 2)
        fail(ErrorKind::Config, "ordinal models need at least 2 rating levels");
}

SparseMatrix stack_rows(const std::vector<const GroupData*>& parts, Eigen::Index cols) {
    Eigen::Index rows = 0;
    for (const auto* part : parts)
        rows += part->x.rows();
    std::vector<Eigen::Triplet<double>> triplets;
    Eigen::Index offset = 0;
    for (const auto* part : parts) {
        for (Eigen::Index i = 0; i < part->x.outerSize(); ++i)
            for (SparseMatrix::InnerIterator it(part->x, i); it; ++it)
                triplets.emplace_back(static_cast<int>(offset + i), static_cast<int>(it.col()), it.value());
        offset += part->x.rows();
    }
    SparseMatrix out(rows, cols);
    out.setFromTriplets(triplets.begin(), triplets.end());
    out.makeCompressed();
    return out;
}

// eta(i, k-1) = alpha_k + reduced_i . beta_k
Eigen::MatrixXd linear_predictors(const Eigen::MatrixXd& reduced, const GroupParams& params, int levels) {
    const Eigen::MatrixXd scores = reduced * params.beta;
    Eigen::MatrixXd eta(reduced.rows(), levels - 1);
    for (int k = 1; k < levels; ++k) {
        const Eigen::Index col = params.beta.cols() == 1 ? 0 : k - 1;
        eta.col(k - 1) = scores.col(col).array() + params.alpha[k - 1];
    }
    return eta;
}

const GroupParams& params_for(const std::map<GroupKey, GroupParams>& params, const GroupKey& key) {
    auto it = params.find(key);
    if (it == params.end())
        fail(ErrorKind::UnknownGroupKey, "no coefficients for group " + key.to_string());
    return it->second;
}

void check_params(const GroupParams& gp, Eigen::Index m, int levels, const GroupKey& key) {
    if (gp.alpha.size() != levels - 1 || gp.beta.rows() != m ||
        (gp.beta.cols() != 1 && gp.beta.cols() != levels - 1))
        fail(ErrorKind::ShapeMismatch, "coefficient shapes for group " + key.to_string() + " do not conform");
}

double window_loglik(const Eigen::MatrixXd& lambda, const GroupParams& gp, const WindowedGroup& w, int levels) {
    if (w.x.cols() != lambda.rows())
        fail(ErrorKind::ShapeMismatch, "group " + w.key.to_string() + " column count does not match loadings");
    check_params(gp, lambda.cols(), levels, w.key);
    const Eigen::MatrixXd reduced = w.x * lambda;
    const Eigen::MatrixXd eta = linear_predictors(reduced, gp, levels);
    double ll = 0.0;
    std::vector<double> row(static_cast<std::size_t>(levels - 1));
    for (Eigen::Index i = 0; i < eta.rows(); ++i) {
        for (int k = 0; k < levels - 1; ++k)
            row[static_cast<std::size_t>(k)] = eta(i, k);
        ll += document_loglik(row, w.ratings[static_cast<std::size_t>(i)]);
    }
    return ll;
}

} // namespace

RecodedResponse recode(std::span<const int> ratings, int levels) {
    check_levels(levels);
    RecodedResponse rec;
    rec.levels = levels;
    rec.ratings.assign(ratings.begin(), ratings.end());
    rec.indicators = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ratings.size()), levels);
    for (std::size_t i = 0; i < ratings.size(); ++i) {
        if (ratings[i] < 1 || ratings[i] > levels)
            fail(ErrorKind::OutOfRangeRating, "rating " + std::to_string(ratings[i]) + " at position " +
                                                  std::to_string(i) + " outside 1.." + std::to_string(levels));
        rec.indicators(static_cast<Eigen::Index>(i), ratings[i] - 1) = 1.0;
    }
    return rec;
}

StackedDesign stack_for_logistic(const Eigen::MatrixXd& reduced, const RecodedResponse& rec, bool drop_empty_levels) {
    const Eigen::Index n = reduced.rows();
    if (n == 0)
        fail(ErrorKind::DegenerateLevel, "no documents to stack");
    if (static_cast<std::size_t>(n) != rec.ratings.size())
        fail(ErrorKind::ShapeMismatch, "reduced design rows and ratings differ");

    StackedDesign st;
    Eigen::Index total = 0;
    for (int k = 1; k < rec.levels; ++k) {
        const auto at_risk = std::count_if(rec.ratings.begin(), rec.ratings.end(), [k](int y) { return y >= k; });
        if (at_risk > 0) {
            st.active_levels.push_back(k);
            total += at_risk;
        } else if (drop_empty_levels) {
            st.empty_levels.push_back(k);
        } else {
            fail(ErrorKind::DegenerateLevel, "no documents with rating >= " + std::to_string(k));
        }
    }
    const auto n_dummies = static_cast<Eigen::Index>(st.active_levels.size());
    const Eigen::Index m = reduced.cols();
    st.design = Eigen::MatrixXd::Zero(total, n_dummies + m);
    st.response = Eigen::VectorXd::Zero(total);
    Eigen::Index row = 0;
    for (Eigen::Index d = 0; d < n_dummies; ++d) {
        const int k = st.active_levels[static_cast<std::size_t>(d)];
        for (Eigen::Index i = 0; i < n; ++i) {
            const int y = rec.ratings[static_cast<std::size_t>(i)];
            if (y < k)
                continue;
            st.design(row, d) = 1.0;
            st.design.row(row).tail(m) = reduced.row(i);
            st.response[row] = (y == k) ? 1.0 : 0.0;
            st.level.push_back(k);
            st.source_row.push_back(i);
            ++row;
        }
    }
    return st;
}

GroupedData group_documents(const corpus::DocumentTermMatrix& dtm) {
    if (static_cast<Eigen::Index>(dtm.rows.size()) != dtm.values.rows())
        fail(ErrorKind::ShapeMismatch, "matrix has no metadata for every row");
    std::map<GroupKey, std::vector<Eigen::Index>> members;
    for (Eigen::Index i = 0; i < dtm.values.rows(); ++i) {
        const auto& meta = dtm.rows[static_cast<std::size_t>(i)];
        members[{meta.time_bucket, meta.app}].push_back(i);
    }
    GroupedData data;
    for (const auto& [key, rows] : members) {
        std::vector<Eigen::Triplet<double>> triplets;
        GroupData g;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            for (SparseMatrix::InnerIterator it(dtm.values, rows[r]); it; ++it)
                triplets.emplace_back(static_cast<int>(r), static_cast<int>(it.col()), it.value());
            g.ratings.push_back(dtm.rows[static_cast<std::size_t>(rows[r])].rating);
        }
        g.x.resize(static_cast<Eigen::Index>(rows.size()), dtm.values.cols());
        g.x.setFromTriplets(triplets.begin(), triplets.end());
        g.x.makeCompressed();
        data.emplace(key, std::move(g));
    }
    return data;
}

std::vector<std::string> time_points(const GroupedData& data) {
    std::set<std::string> times;
    for (const auto& [key, g] : data)
        times.insert(key.time);
    return {times.begin(), times.end()};
}

std::vector<WindowedGroup> build_windows(const GroupedData& data, int window) {
    if (window < 1)
        fail(ErrorKind::Config, "window must be >= 1");
    const auto times = time_points(data);
    std::vector<WindowedGroup> out;
    out.reserve(data.size());
    for (const auto& [key, g] : data) {
        const auto pos = std::lower_bound(times.begin(), times.end(), key.time) - times.begin();
        std::vector<const GroupData*> parts;
        for (int back = 0; back < window && pos - back >= 0; ++back) {
            auto it = data.find({times[static_cast<std::size_t>(pos - back)], key.app});
            if (it != data.end())
                parts.push_back(&it->second);
        }
        WindowedGroup w;
        w.key = key;
        w.x = stack_rows(parts, g.x.cols());
        for (const auto* part : parts)
            w.ratings.insert(w.ratings.end(), part->ratings.begin(), part->ratings.end());
        out.push_back(std::move(w));
    }
    return out;
}

std::string_view to_string(ModelKind kind) { return kind == ModelKind::constrained ? "constrained" : "saturated"; }

ModelKind parse_model_kind(std::string_view s) {
    if (s == "constrained" || s == "ordinal")
        return ModelKind::constrained;
    if (s == "saturated")
        return ModelKind::saturated;
    fail(ErrorKind::Config, "unknown ordinal model kind '" + std::string(s) + "'");
}

double document_loglik(std::span<const double> eta, int rating) {
    const int last = std::min<int>(rating, static_cast<int>(eta.size()));
    double ll = 0.0;
    for (int k = 1; k <= last; ++k) {
        const double e = eta[static_cast<std::size_t>(k - 1)];
        ll += (k == rating) ? e - log1p_exp(e) : -log1p_exp(e);
    }
    return ll;
}

double cr_loglik(const Eigen::MatrixXd& lambda, const std::map<GroupKey, GroupParams>& params,
                 std::span<const WindowedGroup> windows, int levels) {
    check_levels(levels);
    double ll = 0.0;
    for (const auto& w : windows)
        ll += window_loglik(lambda, params_for(params, w.key), w, levels);
    return ll;
}

double cr_loglik(const OrdinalModel& model, const GroupedData& data) {
    const auto windows = build_windows(data, model.window);
    return cr_loglik(model.lambda, model.params, windows, model.levels);
}

Eigen::MatrixXd gradient_lambda_cr(const Eigen::MatrixXd& lambda, const std::map<GroupKey, GroupParams>& params,
                                   std::span<const WindowedGroup> windows, int levels) {
    check_levels(levels);
    const Eigen::Index m = lambda.cols();
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(lambda.rows(), m);
    for (const auto& w : windows) {
        const GroupParams& gp = params_for(params, w.key);
        if (w.x.cols() != lambda.rows())
            fail(ErrorKind::ShapeMismatch, "group " + w.key.to_string() + " column count does not match loadings");
        check_params(gp, m, levels, w.key);
        const Eigen::MatrixXd reduced = w.x * lambda;
        const Eigen::MatrixXd eta = linear_predictors(reduced, gp, levels);
        // Row i holds sum_k c_ik beta_k', the derivative with respect to the
        // reduced design row.
        Eigen::MatrixXd weights = Eigen::MatrixXd::Zero(reduced.rows(), m);
        for (Eigen::Index i = 0; i < reduced.rows(); ++i) {
            const int y = w.ratings[static_cast<std::size_t>(i)];
            const int last = std::min(y, levels - 1);
            for (int k = 1; k <= last; ++k) {
                const double p = sigmoid(eta(i, k - 1));
                const double c = (k == y) ? 1.0 - p : -p;
                weights.row(i) += c * gp.beta_for_level(k).transpose();
            }
        }
        grad += w.x.transpose() * weights;
    }
    return grad;
}

Eigen::MatrixXd gradient_lambda_cr(const OrdinalModel& model, const GroupedData& data) {
    const auto windows = build_windows(data, model.window);
    return gradient_lambda_cr(model.lambda, model.params, windows, model.levels);
}

std::map<GroupKey, GroupParams> fit_coefficients(const Eigen::MatrixXd& lambda, std::span<const WindowedGroup> windows,
                                                 int levels, ModelKind kind, const LogisticOptions& options,
                                                 CoefficientStats* stats) {
    check_levels(levels);
    CoefficientStats local;
    auto note = [&](const LogisticFit& fit) {
        ++local.fits;
        local.ridge += fit.ridge_used;
    };
    const Eigen::Index m = lambda.cols();
    std::map<GroupKey, GroupParams> out;
    for (const auto& w : windows) {
        const Eigen::MatrixXd reduced = w.x * lambda;
        const RecodedResponse rec = recode(w.ratings, levels);
        GroupParams gp;
        gp.alpha = Eigen::VectorXd::Zero(levels - 1);
        if (kind == ModelKind::constrained) {
            const StackedDesign st = stack_for_logistic(reduced, rec, true);
            for (int k : st.empty_levels) {
                ++local.dropped;
                if (!options.quiet)
                    log::warn("group " + w.key.to_string() + ": no documents at risk for level " + std::to_string(k) +
                              "; intercept dropped");
            }
            const LogisticFit fit = fit_logistic(st.design, st.response, options);
            note(fit);
            for (std::size_t d = 0; d < st.active_levels.size(); ++d)
                gp.alpha[st.active_levels[d] - 1] = fit.coef[static_cast<Eigen::Index>(d)];
            gp.beta = fit.coef.tail(m);
        } else {
            gp.beta = Eigen::MatrixXd::Zero(m, levels - 1);
            for (int k = 1; k < levels; ++k) {
                std::vector<Eigen::Index> rows;
                for (std::size_t i = 0; i < w.ratings.size(); ++i)
                    if (w.ratings[i] >= k)
                        rows.push_back(static_cast<Eigen::Index>(i));
                if (rows.empty()) {
                    ++local.dropped;
                    if (!options.quiet)
                        log::warn("group " + w.key.to_string() + ": no documents at risk for level " +
                                  std::to_string(k) + "; level coefficients dropped");
                    continue;
                }
                Eigen::MatrixXd design(static_cast<Eigen::Index>(rows.size()), m + 1);
                Eigen::VectorXd response(static_cast<Eigen::Index>(rows.size()));
                for (std::size_t r = 0; r < rows.size(); ++r) {
                    const auto row = static_cast<Eigen::Index>(r);
                    design(row, 0) = 1.0;
                    design.row(row).tail(m) = reduced.row(rows[r]);
                    response[row] = w.ratings[static_cast<std::size_t>(rows[r])] == k ? 1.0 : 0.0;
                }
                const LogisticFit fit = fit_logistic(design, response, options);
                note(fit);
                gp.alpha[k - 1] = fit.coef[0];
                gp.beta.col(k - 1) = fit.coef.tail(m);
            }
        }
        out.emplace(w.key, std::move(gp));
    }
    if (stats) {
        stats->fits += local.fits;
        stats->ridge += local.ridge;
        stats->dropped += local.dropped;
    }
    return out;
}

OrdinalModel fit_ordinal(const GroupedData& data, Eigen::Index m, int levels, ModelKind kind, const FitConfig& config) {
    config.validate();
    check_levels(levels);
    if (data.empty())
        fail(ErrorKind::Config, "no groups to fit");
    const Eigen::Index p = data.begin()->second.x.cols();
    for (const auto& [key, g] : data)
        if (g.x.cols() != p)
            fail(ErrorKind::ShapeMismatch, "groups do not share a vocabulary");

    const auto windows = build_windows(data, config.window);
    OrdinalModel model;
    model.kind = kind;
    model.levels = levels;
    model.window = config.window;
    model.config = config;
    model.lambda = init_params(p, m, config.seed).lambda;
    LogisticOptions quiet;
    quiet.quiet = true;
    CoefficientStats stats;
    model.params = fit_coefficients(model.lambda, windows, levels, kind, quiet, &stats);

    double current = cr_loglik(model.lambda, model.params, windows, levels);
    model.loglik_trace.push_back(current);
    double step = config.initial_step;

    for (int iter = 1; iter <= config.max_iters; ++iter) {
        const Eigen::MatrixXd grad = gradient_lambda_cr(model.lambda, model.params, windows, levels);
        const double grad_norm = grad.norm();
        if (grad_norm == 0.0) {
            model.converged = true;
            break;
        }
        // The first step is capped so that it moves Lambda by at most its own
        // norm; later steps warm-start from the previous accepted size.
        if (iter == 1)
            step = std::min(step, std::max(model.lambda.norm(), 1.0) / grad_norm);

        auto trial = [&](double s) {
            StepCandidate c;
            c.lambda = project(model.lambda + s * grad);
            c.value = cr_loglik(c.lambda, model.params, windows, levels);
            const double bound = config.sigma * (grad.array() * (c.lambda - model.lambda).array()).sum();
            c.accepted = std::isfinite(c.value) && (c.value - current) >= bound;
            return c;
        };
        StepOutcome outcome;
        try {
            outcome = armijo_search(step, config, trial);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::StepSearchExhausted)
                throw;
            log::warn("ordinal fit stopped at iteration " + std::to_string(iter) + ": " + e.what());
            break;
        }
        step = outcome.step;
        model.lambda = std::move(outcome.candidate.lambda);

        // Refit coefficients; a group keeps its previous values if the refit
        // does not raise its likelihood (possible only after a ridge fallback).
        auto refit = fit_coefficients(model.lambda, windows, levels, kind, quiet, &stats);
        double next = 0.0;
        for (const auto& w : windows) {
            auto& old_params = model.params.at(w.key);
            const double before = window_loglik(model.lambda, old_params, w, levels);
            const double after = window_loglik(model.lambda, refit.at(w.key), w, levels);
            if (after >= before) {
                old_params = std::move(refit.at(w.key));
                next += after;
            } else {
                next += before;
            }
        }

        model.loglik_trace.push_back(next);
        model.iterations = iter;
        const double delta = (next - current) / std::max(std::abs(current), 1e-300);
        current = next;
        if (std::abs(delta) < config.rel_tol) {
            model.converged = true;
            break;
        }
    }
    if (stats.ridge > 0)
        log::warn(std::to_string(stats.ridge) + " of " + std::to_string(stats.fits) +
                  " logistic fits needed the ridge fallback (separation or singular design)");
    if (stats.dropped > 0)
        log::warn("some groups have no documents at risk for a level; those intercepts were fixed at 0");
    return model;
}

OrdinalModel fit_dynamic(const GroupedData& data, Eigen::Index m, int levels, const FitConfig& config) {
    return fit_ordinal(data, m, levels, ModelKind::constrained, config);
}

OrdinalModel fit_saturated(const GroupedData& data, Eigen::Index m, int levels, const FitConfig& config) {
    return fit_ordinal(data, m, levels, ModelKind::saturated, config);
}

Eigen::VectorXd rating_probs_from_eta(std::span<const double> eta, int levels) {
    check_levels(levels);
    if (eta.size() != static_cast<std::size_t>(levels - 1))
        fail(ErrorKind::ShapeMismatch, "expected K-1 linear predictors");
    Eigen::VectorXd probs(levels);
    double survive = 1.0;
    for (int k = 1; k < levels; ++k) {
        const double e = eta[static_cast<std::size_t>(k - 1)];
        probs[k - 1] = survive * sigmoid(e);
        survive *= sigmoid(-e);
    }
    probs[levels - 1] = survive;
    return probs;
}

Eigen::VectorXd predict_rating_probs_reduced(const Eigen::VectorXd& reduced, const GroupParams& params) {
    const int levels = static_cast<int>(params.alpha.size()) + 1;
    if (params.beta.rows() != reduced.size())
        fail(ErrorKind::ShapeMismatch, "reduced design length does not match coefficients");
    std::vector<double> eta(static_cast<std::size_t>(levels - 1));
    for (int k = 1; k < levels; ++k)
        eta[static_cast<std::size_t>(k - 1)] = params.alpha[k - 1] + reduced.dot(params.beta_for_level(k));
    return rating_probs_from_eta(eta, levels);
}

Eigen::VectorXd predict_rating_probs(const Eigen::VectorXd& x, const Eigen::MatrixXd& lambda, const GroupParams& params) {
    if (x.size() != lambda.rows())
        fail(ErrorKind::ShapeMismatch, "document vector length does not match loadings");
    const Eigen::VectorXd reduced = lambda.transpose() * x;
    return predict_rating_probs_reduced(reduced, params);
}

Eigen::VectorXd predict_rating_probs(const Eigen::VectorXd& x, const Eigen::MatrixXd& lambda,
                                     const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta) {
    if (beta.size() != lambda.cols())
        fail(ErrorKind::ShapeMismatch, "coefficient length does not match topic count");
    return predict_rating_probs(x, lambda, GroupParams{alpha, beta});
}

int argmax_level(const Eigen::VectorXd& probs) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < probs.size(); ++k)
        if (probs[k] > probs[best])
            best = k;
    return static_cast<int>(best) + 1;
}

int predict_rating(const Eigen::VectorXd& x, const Eigen::MatrixXd& lambda, const Eigen::VectorXd& alpha,
                   const Eigen::VectorXd& beta) {
    return argmax_level(predict_rating_probs(x, lambda, alpha, beta));
}

GroupKey resolve_key(const OrdinalModel& model, const GroupKey& wanted, const std::optional<std::string>& pinned_time) {
    if (pinned_time) {
        GroupKey key{*pinned_time, wanted.app};
        if (!model.params.contains(key))
            fail(ErrorKind::UnknownGroupKey, "model has no coefficients for " + key.to_string());
        return key;
    }
    if (model.params.contains(wanted))
        return wanted;
    std::optional<GroupKey> best;
    for (const auto& [key, gp] : model.params)
        if (key.app == wanted.app && key.time < wanted.time && (!best || best->time < key.time))
            best = key;
    if (!best)
        fail(ErrorKind::UnknownGroupKey, "no coefficients at or before " + wanted.to_string());
    return *best;
}

DegreesOfFreedom lrt_degrees_of_freedom(long topics, long apps, long times, int levels) {
    check_levels(levels);
    DegreesOfFreedom df;
    df.constrained = topics * apps * times;
    df.saturated = df.constrained * (levels - 1);
    return df;
}

double chi_squared_upper_tail(double statistic, double df) {
    if (df <= 0.0)
        return 1.0;
    if (statistic <= 0.0)
        return 1.0;
    return boost::math::gamma_q(0.5 * df, 0.5 * statistic);
}

LrtResult lrt(const OrdinalModel& constrained, const OrdinalModel& saturated, const GroupedData& data) {
    if (constrained.levels != saturated.levels || constrained.topics() != saturated.topics())
        fail(ErrorKind::ShapeMismatch, "models differ in levels or topic count");
    LrtResult r;
    r.loglik_constrained = cr_loglik(constrained, data);
    r.loglik_saturated = cr_loglik(saturated, data);
    r.g = 2.0 * (r.loglik_saturated - r.loglik_constrained);

    std::set<std::string> apps;
    for (const auto& [key, g] : data)
        apps.insert(key.app);
    r.df = lrt_degrees_of_freedom(constrained.topics(), static_cast<long>(apps.size()),
                                  static_cast<long>(time_points(data).size()), constrained.levels);
    if (r.g < 0.0) {
        r.negative_g = true;
        log::warn("likelihood ratio statistic is negative (" + std::to_string(r.g) + "); models were not fit on a "
                  "shared Lambda or did not fully converge");
    }
    r.p_value = chi_squared_upper_tail(std::max(r.g, 0.0), static_cast<double>(r.df.difference()));
    return r;
}

OrdinalModel saturated_on_shared_lambda(const OrdinalModel& constrained, const GroupedData& data) {
    OrdinalModel sat = constrained;
    sat.kind = ModelKind::saturated;
    const auto windows = build_windows(data, constrained.window);
    LogisticOptions quiet;
    quiet.quiet = true;
    CoefficientStats stats;
    sat.params = fit_coefficients(constrained.lambda, windows, constrained.levels, ModelKind::saturated, quiet, &stats);
    if (stats.ridge > 0)
        log::warn(std::to_string(stats.ridge) + " of " + std::to_string(stats.fits) +
                  " logistic fits needed the ridge fallback (separation or singular design)");
    sat.loglik_trace = {cr_loglik(sat.lambda, sat.params, windows, sat.levels)};
    sat.iterations = 0;
    return sat;
}

} // namespace ssmf::ordinal
