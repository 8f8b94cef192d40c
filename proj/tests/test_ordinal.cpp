#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "support.hpp"

#include "ssmf/error.hpp"
#include "ssmf/metrics.hpp"
#include "ssmf/ordinal.hpp"

#include <cmath>

using namespace ssmf;
using namespace ssmf::ordinal;
using testing::Gen;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Product-form probability of `rating`, written out directly.
double oracle_prob(const std::vector<double>& eta, int rating) {
    double survive = 1.0;
    for (int k = 1; k < rating; ++k)
        survive *= 1.0 - sigmoid(eta[static_cast<std::size_t>(k - 1)]);
    if (rating <= static_cast<int>(eta.size()))
        return survive * sigmoid(eta[static_cast<std::size_t>(rating - 1)]);
    return survive;
}

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an ssmf::Error");
    return ErrorKind::Io;
}

GroupedData random_groups(Gen& g, int apps, int times, Eigen::Index p, int levels, int min_docs = 4,
                          int max_docs = 9) {
    GroupedData data;
    for (int a = 0; a < apps; ++a)
        for (int t = 0; t < times; ++t) {
            const int n = g.integer(min_docs, max_docs);
            GroupData gd;
            gd.x = g.sparse(n, p, 0.5, 2.0);
            gd.ratings = g.ratings(static_cast<std::size_t>(n), levels);
            data[{"t" + std::to_string(t), "app" + std::to_string(a)}] = std::move(gd);
        }
    return data;
}

std::map<GroupKey, GroupParams> random_params(Gen& g, const GroupedData& data, Eigen::Index m, int levels,
                                              ModelKind kind) {
    std::map<GroupKey, GroupParams> params;
    for (const auto& [key, gd] : data) {
        GroupParams gp;
        gp.alpha = g.normal_vector(levels - 1);
        gp.beta = g.normal_matrix(m, kind == ModelKind::constrained ? 1 : levels - 1, 0.7);
        params[key] = gp;
    }
    return params;
}

} // namespace

TEST_CASE("recode builds one indicator column per level") {
    const std::vector<int> y{1, 3, 5, 3};
    const auto rec = recode(y, 5);
    CHECK(rec.levels == 5);
    CHECK(rec.indicators.rows() == 4);
    CHECK(rec.indicators.cols() == 5);
    CHECK(rec.indicator(3) == Eigen::Vector4d(0, 1, 0, 1));
    CHECK(rec.indicators.rowwise().sum() == Eigen::VectorXd::Ones(4));

    const std::vector<int> bad{1, 6};
    CHECK(kind_of([&] { recode(bad, 5); }) == ErrorKind::OutOfRangeRating);
    const std::vector<int> zero{0};
    CHECK(kind_of([&] { recode(zero, 5); }) == ErrorKind::OutOfRangeRating);
}

TEST_CASE("stacking produces one row per level at risk") {
    // Ratings 3 and 2 with five levels: 3 + 2 = 5 stacked rows.
    const std::vector<int> y{3, 2};
    const Eigen::MatrixXd reduced = Eigen::MatrixXd::Ones(2, 1);
    const auto s = stack_for_logistic(reduced, recode(y, 5), true);
    CHECK(s.design.rows() == 5);
    CHECK(s.response.sum() == 2.0);
    CHECK(s.level == std::vector<int>{1, 1, 2, 2, 3});
    CHECK(s.active_levels == std::vector<int>{1, 2, 3});
    CHECK(s.empty_levels == std::vector<int>{4});
    CHECK(s.design.cols() == 3 + 1);

    CHECK(kind_of([&] { stack_for_logistic(reduced, recode(y, 5)); }) == ErrorKind::DegenerateLevel);

    const std::vector<int> top{5};
    CHECK(stack_for_logistic(Eigen::MatrixXd::Ones(1, 1), recode(top, 5)).design.rows() == 4);

    Gen g(1);
    for (int t = 0; t < 20; ++t) {
        const int n = g.integer(5, 30);
        auto ratings = g.ratings(static_cast<std::size_t>(n), 4);
        ratings[0] = 4;
        long expected = 0;
        for (int r : ratings)
            expected += std::min(r, 3);
        const auto st = stack_for_logistic(g.normal_matrix(n, 2), recode(ratings, 4));
        CHECK(st.design.rows() == expected);
    }
}

TEST_CASE("stacked logistic likelihood equals the direct likelihood") {
    Gen g(2);
    for (int t = 0; t < 50; ++t) {
        const int levels = g.integer(2, 6);
        const int n = g.integer(3, 25);
        const Eigen::Index m = g.integer(1, 4);
        auto ratings = g.ratings(static_cast<std::size_t>(n), levels);
        ratings[0] = levels;
        const Eigen::MatrixXd reduced = g.normal_matrix(n, m);
        const Eigen::VectorXd alpha = g.normal_vector(levels - 1);
        const Eigen::VectorXd beta = g.normal_vector(m);
        const auto s = stack_for_logistic(reduced, recode(ratings, levels));
        Eigen::VectorXd coef(levels - 1 + m);
        coef << alpha, beta;
        double direct = 0.0;
        for (int i = 0; i < n; ++i) {
            std::vector<double> eta(static_cast<std::size_t>(levels - 1));
            for (int k = 0; k < levels - 1; ++k)
                eta[static_cast<std::size_t>(k)] = alpha[k] + reduced.row(i).dot(beta);
            direct += document_loglik(eta, ratings[static_cast<std::size_t>(i)]);
        }
        CHECK(std::abs(logistic_loglik(s.design, s.response, coef) - direct) <= 1e-10 * std::max(1.0, std::abs(direct)));
    }
}

TEST_CASE("document_loglik matches the product-form probabilities") {
    Gen g(3);
    for (int t = 0; t < 200; ++t) {
        const int levels = g.integer(2, 7);
        std::vector<double> eta(static_cast<std::size_t>(levels - 1));
        for (auto& e : eta)
            e = g.normal(2.0);
        const int y = g.integer(1, levels);
        CHECK(document_loglik(eta, y) == doctest::Approx(std::log(oracle_prob(eta, y))).epsilon(1e-12));
    }
    // A large first intercept makes the lowest level almost certain.
    const std::vector<double> sure{30.0, 0.0, 0.0, 0.0};
    CHECK(std::abs(document_loglik(sure, 1)) < 1e-12);
    CHECK(document_loglik(sure, 2) == doctest::Approx(-30.0 - std::log(2.0)).epsilon(1e-9));
    const std::vector<double> never{-30.0, 0.0};
    CHECK(document_loglik(never, 1) == doctest::Approx(-30.0).epsilon(1e-9));
}

TEST_CASE("rating probabilities") {
    const std::vector<double> zero(4, 0.0);
    const auto p = rating_probs_from_eta(zero, 5);
    CHECK(p[0] == 0.5);
    CHECK(p[1] == 0.25);
    CHECK(p[2] == 0.125);
    CHECK(p[3] == 0.0625);
    CHECK(p[4] == 0.0625);

    Gen g(4);
    for (int t = 0; t < 1000; ++t) {
        const int levels = g.integer(2, 8);
        std::vector<double> eta(static_cast<std::size_t>(levels - 1));
        for (auto& e : eta)
            e = g.normal(t % 10 == 0 ? 200.0 : 3.0);
        const auto probs = rating_probs_from_eta(eta, levels);
        CHECK(std::abs(probs.sum() - 1.0) <= 1e-12);
        CHECK(probs.minCoeff() >= 0.0);
        for (int k = 1; k <= levels; ++k)
            CHECK(probs[k - 1] == doctest::Approx(oracle_prob(eta, k)).epsilon(1e-10));
    }

    // Through the loadings.
    const Eigen::MatrixXd lambda = g.uniform_matrix(6, 2);
    const Eigen::VectorXd x = g.uniform_matrix(6, 1).col(0);
    const Eigen::VectorXd alpha = g.normal_vector(3);
    const Eigen::VectorXd beta = g.normal_vector(2);
    const auto q = predict_rating_probs(x, lambda, alpha, beta);
    const double shift = x.dot(lambda * beta);
    for (int k = 1; k <= 4; ++k)
        CHECK(q[k - 1] == doctest::Approx(oracle_prob({alpha[0] + shift, alpha[1] + shift, alpha[2] + shift}, k)));
    CHECK(predict_rating(x, lambda, alpha, beta) == argmax_level(q));
}

TEST_CASE("argmax_level breaks ties toward the lower level") {
    CHECK(argmax_level(Eigen::Vector3d(0.3, 0.3, 0.4)) == 3);
    CHECK(argmax_level(Eigen::Vector3d(0.4, 0.4, 0.2)) == 1);
    CHECK(argmax_level(Eigen::Vector4d(0.1, 0.35, 0.35, 0.2)) == 2);
}

TEST_CASE("gradient matches finite differences of the windowed log-likelihood") {
    Gen g(5);
    for (int t = 0; t < 20; ++t) {
        const int levels = g.integer(2, 5);
        const Eigen::Index p = g.integer(2, 6), m = g.integer(1, static_cast<int>(p));
        const auto data = random_groups(g, g.integer(1, 2), g.integer(1, 3), p, levels);
        const auto kind = t % 2 ? ModelKind::saturated : ModelKind::constrained;
        const auto params = random_params(g, data, m, levels, kind);
        const auto windows = build_windows(data, g.integer(1, 3));
        const Eigen::MatrixXd lambda = g.uniform_matrix(p, m);
        const auto analytic = gradient_lambda_cr(lambda, params, windows, levels);
        const auto ll = [&](const Eigen::MatrixXd& l) { return cr_loglik(l, params, windows, levels); };
        CHECK(testing::relative_error(analytic, testing::numeric_gradient(ll, lambda)) < 1e-6);
    }
}

TEST_CASE("windows stack the current and preceding periods of the same app") {
    Gen g(6);
    const auto data = random_groups(g, 2, 3, 4, 3);
    const auto w1 = build_windows(data, 1);
    const auto w2 = build_windows(data, 2);
    const auto w9 = build_windows(data, 9);
    REQUIRE(w2.size() == data.size());
    for (std::size_t i = 0; i < w2.size(); ++i) {
        const auto& key = w2[i].key;
        const int t = key.time.back() - '0';
        std::size_t own = data.at(key).ratings.size(), prev = 0, all = 0;
        if (t > 0)
            prev = data.at({"t" + std::to_string(t - 1), key.app}).ratings.size();
        for (int s = 0; s <= t; ++s)
            all += data.at({"t" + std::to_string(s), key.app}).ratings.size();
        CHECK(w1[i].ratings.size() == own);
        CHECK(w2[i].ratings.size() == own + prev);
        CHECK(w9[i].ratings.size() == all);
        CHECK(w2[i].x.rows() == static_cast<Eigen::Index>(own + prev));
        CHECK(std::equal(data.at(key).ratings.begin(), data.at(key).ratings.end(), w2[i].ratings.begin()));
    }
    CHECK(kind_of([&] { build_windows(data, 0); }) == ErrorKind::Config);
    CHECK(time_points(data) == std::vector<std::string>{"t0", "t1", "t2"});
}

TEST_CASE("resolve_key") {
    OrdinalModel model;
    model.params[{"2020Q1", "a"}] = {};
    model.params[{"2020Q3", "a"}] = {};
    model.params[{"2020Q2", "b"}] = {};
    CHECK(resolve_key(model, {"2020Q3", "a"}) == GroupKey{"2020Q3", "a"});
    CHECK(resolve_key(model, {"2020Q2", "a"}) == GroupKey{"2020Q1", "a"});
    CHECK(resolve_key(model, {"2020Q4", "a"}) == GroupKey{"2020Q3", "a"});
    CHECK(resolve_key(model, {"2020Q4", "a"}, std::string("2020Q1")) == GroupKey{"2020Q1", "a"});
    CHECK(kind_of([&] { resolve_key(model, {"2019Q4", "a"}); }) == ErrorKind::UnknownGroupKey);
    CHECK(kind_of([&] { resolve_key(model, {"2020Q1", "b"}); }) == ErrorKind::UnknownGroupKey);
    CHECK(kind_of([&] { resolve_key(model, {"2020Q3", "c"}); }) == ErrorKind::UnknownGroupKey);
    CHECK(kind_of([&] { resolve_key(model, {"2020Q3", "a"}, std::string("2020Q2")); }) == ErrorKind::UnknownGroupKey);
}

TEST_CASE("likelihood-ratio degrees of freedom") {
    const auto df = lrt_degrees_of_freedom(5, 3, 10, 5);
    CHECK(df.constrained == 150);
    CHECK(df.saturated == 600);
    CHECK(df.difference() == 450);
    const auto two = lrt_degrees_of_freedom(4, 2, 3, 2);
    CHECK(two.difference() == 0);
    Gen g(7);
    for (int t = 0; t < 50; ++t) {
        const long m = g.integer(1, 30), a = g.integer(1, 10), n = g.integer(1, 20);
        const int k = g.integer(2, 10);
        const auto d = lrt_degrees_of_freedom(m, a, n, k);
        CHECK(d.difference() == m * a * n * (k - 2));
    }
}

TEST_CASE("chi-squared upper tail") {
    for (double x : {0.1, 1.0, 2.5, 7.0, 30.0}) {
        CHECK(chi_squared_upper_tail(x, 2.0) == doctest::Approx(std::exp(-x / 2.0)).epsilon(1e-12));
        CHECK(chi_squared_upper_tail(x, 1.0) == doctest::Approx(std::erfc(std::sqrt(x / 2.0))).epsilon(1e-12));
    }
    CHECK(chi_squared_upper_tail(5.0, 0.0) == 1.0);
    CHECK(chi_squared_upper_tail(0.0, 3.0) == 1.0);
}

TEST_CASE("coefficient fit with two levels is a plain logistic regression") {
    Gen g(8);
    GroupedData data;
    GroupData gd;
    gd.x = g.sparse(60, 4, 0.6);
    gd.ratings = g.ratings(60, 2);
    data[{"t0", "a"}] = gd;
    const Eigen::MatrixXd lambda = g.uniform_matrix(4, 2);
    const auto windows = build_windows(data, 1);
    const auto params = fit_coefficients(lambda, windows, 2, ModelKind::constrained);
    const auto& gp = params.at({"t0", "a"});

    Eigen::MatrixXd design(60, 3);
    design.col(0).setOnes();
    design.rightCols(2) = gd.x * lambda;
    Eigen::VectorXd y(60);
    for (int i = 0; i < 60; ++i)
        y[i] = gd.ratings[static_cast<std::size_t>(i)] == 1 ? 1.0 : 0.0;
    const auto direct = fit_logistic(design, y);
    CHECK(gp.alpha[0] == doctest::Approx(direct.coef[0]).epsilon(1e-8));
    CHECK((gp.beta.col(0) - direct.coef.tail(2)).norm() < 1e-8);

    const auto sat = fit_coefficients(lambda, windows, 2, ModelKind::saturated);
    CHECK((sat.at({"t0", "a"}).beta - gp.beta).norm() < 1e-8);
}

TEST_CASE("ordinal fits on the synthetic review corpus") {
    testing::WarningCapture warnings;
    const auto split = testing::fixture_split(500, 7);
    const auto train = group_documents(split.train);
    FitConfig cfg;
    const auto model = fit_dynamic(train, 5, 5, cfg);

    SUBCASE("log-likelihood trace never decreases") {
        REQUIRE(model.loglik_trace.size() >= 2);
        for (std::size_t i = 1; i < model.loglik_trace.size(); ++i)
            CHECK(model.loglik_trace[i] >= model.loglik_trace[i - 1]);
        CHECK(model.lambda.minCoeff() >= 0.0);
        CHECK(model.loglik_trace.back() == doctest::Approx(cr_loglik(model, train)));
    }

    SUBCASE("fit is deterministic") {
        const auto again = fit_dynamic(train, 5, 5, cfg);
        CHECK(again.lambda == model.lambda);
        CHECK(again.loglik_trace == model.loglik_trace);
    }

    SUBCASE("gradient at the fitted loadings matches finite differences") {
        const auto windows = build_windows(train, model.window);
        const auto ll = [&](const Eigen::MatrixXd& l) { return cr_loglik(l, model.params, windows, 5); };
        const auto analytic = gradient_lambda_cr(model.lambda, model.params, windows, 5);
        CHECK(testing::relative_error(analytic, testing::numeric_gradient(ll, model.lambda, 1e-6)) < 1e-5);
    }

    SUBCASE("held-out misclassification beats the majority class") {
        std::vector<int> counts(6, 0);
        for (const auto& r : split.train.rows)
            ++counts[static_cast<std::size_t>(r.rating)];
        const int majority = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
        std::vector<int> truth, predicted, baseline;
        const Eigen::MatrixXd x(split.test.values);
        for (std::size_t i = 0; i < split.test.rows.size(); ++i) {
            const auto& meta = split.test.rows[i];
            const auto key = resolve_key(model, {meta.time_bucket, meta.app});
            const auto& gp = model.params.at(key);
            const auto probs = predict_rating_probs(x.row(static_cast<Eigen::Index>(i)).transpose(), model.lambda, gp);
            truth.push_back(meta.rating);
            predicted.push_back(argmax_level(probs));
            baseline.push_back(majority);
        }
        CHECK(metrics::mer(truth, predicted) < metrics::mer(truth, baseline));
    }

    SUBCASE("saturated refit on the same loadings nests the constrained model") {
        const auto sat = saturated_on_shared_lambda(model, train);
        CHECK(sat.lambda == model.lambda);
        const auto r = lrt(model, sat, train);
        CHECK(r.g >= -1e-6);
        CHECK(r.df.constrained == 5 * 2 * 3);
        CHECK(r.df.saturated == 5 * 2 * 3 * 4);
        CHECK(r.p_value >= 0.0);
        CHECK(r.p_value <= 1.0);
    }
}

TEST_CASE("with two levels the saturated refit adds nothing") {
    testing::WarningCapture warnings;
    Gen g(9);
    // Groups large enough that no logistic fit is separable.
    const auto data = random_groups(g, 2, 2, 5, 2, 60, 80);
    FitConfig cfg;
    cfg.window = 1;
    const auto model = fit_dynamic(data, 2, 2, cfg);
    const auto sat = saturated_on_shared_lambda(model, data);
    const auto r = lrt(model, sat, data);
    CHECK(warnings.messages.empty());
    CHECK(std::abs(r.g) < 1e-6);
    CHECK(r.df.difference() == 0);
    CHECK(r.p_value == 1.0);
}
