#include "ssmf/logistic.hpp"
#include "ssmf/error.hpp"
#include "ssmf/log.hpp"

#include <cmath>

namespace ssmf {

double log1p_exp(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double logistic_loglik(const Eigen::MatrixXd& design, const Eigen::VectorXd& response, const Eigen::VectorXd& coef) {
    const Eigen::VectorXd eta = design * coef;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i)
        ll += response[i] * eta[i] - log1p_exp(eta[i]);
    return ll;
}

namespace {

double sigmoid(double x) {
    if (x >= 0.0)
        return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

enum class Outcome { converged, failed };

// Newton iterations on loglik - ridge/2 |coef|^2. Returns failed on
// separation symptoms so the caller can retry with a penalty.
Outcome newton(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double ridge, const LogisticOptions& opt,
               LogisticFit& fit) {
    const Eigen::Index d = x.cols();
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(d);
    auto penalized = [&](const Eigen::VectorXd& c) { return logistic_loglik(x, y, c) - 0.5 * ridge * c.squaredNorm(); };
    double current = penalized(coef);

    for (int it = 1; it <= opt.max_iter; ++it) {
        const Eigen::VectorXd eta = x * coef;
        Eigen::VectorXd mu(eta.size()), w(eta.size());
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            mu[i] = sigmoid(eta[i]);
            w[i] = mu[i] * (1.0 - mu[i]);
        }
        const Eigen::VectorXd score = x.transpose() * (y - mu) - ridge * coef;
        fit.iterations = it - 1;
        if (score.norm() < opt.tol) {
            fit.coef = coef;
            fit.converged = true;
            return Outcome::converged;
        }
        Eigen::MatrixXd info = x.transpose() * w.asDiagonal() * x;
        info.diagonal().array() += ridge;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
            return Outcome::failed;
        const Eigen::VectorXd diag = ldlt.vectorD();
        if (diag.minCoeff() <= 1e-14 * std::max(1.0, diag.maxCoeff()))
            return Outcome::failed;
        Eigen::VectorXd direction = ldlt.solve(score);

        double scale = 1.0;
        Eigen::VectorXd next = coef + direction;
        double value = penalized(next);
        int halvings = 0;
        const double slack = 1e-12 * std::max(1.0, std::abs(current));
        while (!(value >= current - slack) && halvings < 30) {
            scale *= 0.5;
            next = coef + scale * direction;
            value = penalized(next);
            ++halvings;
        }
        if (!(value >= current - slack))
            return Outcome::failed;
        coef = std::move(next);
        current = value;
        // Fitted probabilities numerically 0 or 1.
        if (ridge == 0.0 && (x * coef).cwiseAbs().maxCoeff() > 30.0)
            return Outcome::failed;
    }
    fit.iterations = opt.max_iter;
    fit.coef = coef;
    return Outcome::failed;
}

} // namespace

LogisticFit fit_logistic(const Eigen::MatrixXd& design, const Eigen::VectorXd& response, const LogisticOptions& options) {
    if (design.rows() != response.size())
        fail(ErrorKind::ShapeMismatch, "logistic design rows and response length differ");
    if (design.rows() == 0)
        fail(ErrorKind::DegenerateLevel, "logistic regression on zero rows");

    LogisticFit fit;
    if (newton(design, response, 0.0, options, fit) == Outcome::converged) {
        fit.loglik = logistic_loglik(design, response, fit.coef);
        return fit;
    }
    if (!options.quiet)
        log::warn("logistic fit did not converge unpenalized (separation or singular design); refitting with ridge " +
                  std::to_string(options.ridge));
    fit = LogisticFit{};
    fit.ridge_used = true;
    LogisticOptions relaxed = options;
    relaxed.max_iter = std::max(options.max_iter, 200);
    if (newton(design, response, options.ridge, relaxed, fit) != Outcome::converged) {
        if (fit.coef.size() != design.cols())
            fit.coef = Eigen::VectorXd::Zero(design.cols());
        if (!options.quiet)
            log::warn("ridge-stabilized logistic fit did not reach the score tolerance");
    }
    fit.loglik = logistic_loglik(design, response, fit.coef);
    return fit;
}

} // namespace ssmf
