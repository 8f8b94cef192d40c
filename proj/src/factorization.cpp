#include "ssmf/factorization.hpp"
#include "ssmf/error.hpp"
#include "ssmf/line_search.hpp"
#include "ssmf/log.hpp"
#include "ssmf/rng.hpp"

#include <cmath>
#include <sstream>

namespace ssmf {

void FitConfig::validate() const {
    if (!(sigma > 0.0 && sigma < 1.0))
        fail(ErrorKind::Config, "sigma must lie in (0, 1)");
    if (!(gamma_shrink > 0.0 && gamma_shrink < 1.0))
        fail(ErrorKind::Config, "gamma must lie in (0, 1)");
    if (!(rel_tol > 0.0))
        fail(ErrorKind::Config, "rel_tol must be positive");
    if (max_iters < 1)
        fail(ErrorKind::Config, "max_iters must be >= 1");
    if (max_substeps < 1)
        fail(ErrorKind::Config, "max_substeps must be >= 1");
    if (!(initial_step > 0.0))
        fail(ErrorKind::Config, "initial step must be positive");
    if (window < 1)
        fail(ErrorKind::Config, "window must be >= 1");
}

InitialParams init_params(Eigen::Index p, Eigen::Index m, std::uint64_t seed) {
    if (m < 1 || m > p)
        fail(ErrorKind::InvalidRank, "topic count " + std::to_string(m) + " must lie in 1.." + std::to_string(p));
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    InitialParams out;
    out.beta.resize(m);
    for (Eigen::Index k = 0; k < m; ++k)
        out.beta[k] = normal(rng);
    out.lambda.resize(p, m);
    for (Eigen::Index j = 0; j < p; ++j)
        for (Eigen::Index k = 0; k < m; ++k)
            out.lambda(j, k) = uniform(rng);
    return out;
}

namespace {

void check_shapes(const Eigen::VectorXd& y, const SparseMatrix& x, const Eigen::MatrixXd& lambda,
                  const Eigen::VectorXd& beta) {
    if (x.rows() != y.size() || x.cols() != lambda.rows() || lambda.cols() != beta.size()) {
        std::ostringstream msg;
        msg << "shape mismatch: Y " << y.size() << ", X " << x.rows() << "x" << x.cols() << ", Lambda "
            << lambda.rows() << "x" << lambda.cols() << ", beta " << beta.size();
        fail(ErrorKind::ShapeMismatch, msg.str());
    }
}

double sum_of_squares(const Eigen::VectorXd& y, const SparseMatrix& x, const Eigen::MatrixXd& lambda,
                      const Eigen::VectorXd& beta) {
    const Eigen::VectorXd coef = lambda * beta;
    return (y - x * coef).squaredNorm();
}

} // namespace

double objective(const Eigen::VectorXd& y, const SparseMatrix& x, const Eigen::MatrixXd& lambda,
                 const Eigen::VectorXd& beta) {
    check_shapes(y, x, lambda, beta);
    return sum_of_squares(y, x, lambda, beta);
}

Eigen::MatrixXd gradient_lambda(const Eigen::MatrixXd& xtx, const Eigen::VectorXd& xty,
                                const Eigen::MatrixXd& lambda, const Eigen::VectorXd& beta) {
    if (xtx.rows() != xtx.cols() || xtx.rows() != lambda.rows() || xty.size() != lambda.rows() ||
        lambda.cols() != beta.size())
        fail(ErrorKind::ShapeMismatch, "gradient_lambda: operand shapes do not conform");
    const Eigen::VectorXd lb = lambda * beta;
    const Eigen::VectorXd u = xtx * lb - xty;
    return u * beta.transpose();
}

Eigen::MatrixXd project(const Eigen::MatrixXd& m) { return m.cwiseMax(0.0); }

NormalProblem::NormalProblem(SparseMatrix x, Eigen::VectorXd y) : x_(std::move(x)), y_(std::move(y)) {
    if (x_.rows() != y_.size())
        fail(ErrorKind::ShapeMismatch, "X rows and Y length differ");
    const SparseMatrix xt = x_.transpose();
    xtx_ = Eigen::MatrixXd(xt * x_);
    xty_ = xt * y_;
}

double NormalProblem::objective(const Eigen::MatrixXd& lambda, const Eigen::VectorXd& beta) const {
    return sum_of_squares(y_, x_, lambda, beta);
}

ArmijoStep armijo_step(const NormalProblem& problem, const Eigen::MatrixXd& lambda, const Eigen::VectorXd& beta,
                       double step0, const FitConfig& config) {
    check_shapes(problem.y(), problem.x(), lambda, beta);
    const Eigen::MatrixXd grad = gradient_lambda(problem.xtx(), problem.xty(), lambda, beta);
    if (grad.cwiseAbs().maxCoeff() == 0.0)
        return {lambda, step0, 0};

    const double f0 = 0.5 * problem.objective(lambda, beta);
    auto trial = [&](double step) {
        StepCandidate c;
        c.lambda = project(lambda - step * grad);
        c.value = 0.5 * problem.objective(c.lambda, beta);
        const double decrease_bound = config.sigma * (grad.array() * (c.lambda - lambda).array()).sum();
        c.accepted = (c.value - f0) <= decrease_bound;
        return c;
    };
    StepOutcome out = armijo_search(step0, config, trial);
    return {std::move(out.candidate.lambda), out.step, out.substeps};
}

BetaSolve solve_beta(const SparseMatrix& x, const Eigen::MatrixXd& lambda, const Eigen::VectorXd& y) {
    if (x.cols() != lambda.rows() || x.rows() != y.size())
        fail(ErrorKind::ShapeMismatch, "solve_beta: operand shapes do not conform");
    const Eigen::MatrixXd reduced = x * lambda;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(reduced);
    BetaSolve out;
    out.beta = cod.solve(y);
    out.rank_deficient = cod.rank() < lambda.cols();
    if (out.rank_deficient) {
        log::warn("X*Lambda has rank " + std::to_string(cod.rank()) + " < " + std::to_string(lambda.cols()) +
                  " columns; using the minimum-norm solution");
    } else {
        const auto r = cod.matrixQTZ().diagonal().head(cod.rank()).cwiseAbs();
        const double cond = r.maxCoeff() / r.minCoeff();
        if (cond > 1e12)
            log::warn("X*Lambda is ill-conditioned (condition number ~" + std::to_string(cond) + ")");
    }
    return out;
}

NormalFit fit_normal(const SparseMatrix& x, const Eigen::VectorXd& y, Eigen::Index m, const FitConfig& config) {
    config.validate();
    if (x.rows() != y.size())
        fail(ErrorKind::ShapeMismatch, "X rows and Y length differ");
    InitialParams init = init_params(x.cols(), m, config.seed);
    const NormalProblem problem(x, y);

    NormalFit fit;
    fit.config = config;
    fit.lambda = std::move(init.lambda);
    fit.beta = std::move(init.beta);
    if (config.warm_start_beta) {
        BetaSolve b = solve_beta(x, fit.lambda, y);
        fit.beta = std::move(b.beta);
        fit.rank_deficient = b.rank_deficient;
    }

    double current = problem.objective(fit.lambda, fit.beta);
    fit.objective_trace.push_back(current);
    // Below this the residual is zero to working precision and the relative
    // change is meaningless.
    const double floor = 1e-24 * std::max(y.squaredNorm(), 1e-300);
    double step = config.initial_step;

    for (int iter = 1; iter <= config.max_iters; ++iter) {
        if (current <= floor) {
            fit.converged = true;
            break;
        }
        ArmijoStep s;
        try {
            s = armijo_step(problem, fit.lambda, fit.beta, step, config);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::StepSearchExhausted)
                throw;
            log::warn(std::string("fit_normal stopped at iteration ") + std::to_string(iter) + ": " + e.what());
            break;
        }
        step = s.step;
        fit.lambda = std::move(s.lambda);
        const double after_step = problem.objective(fit.lambda, fit.beta);

        BetaSolve b = solve_beta(x, fit.lambda, y);
        fit.rank_deficient = fit.rank_deficient || b.rank_deficient;
        const double after_beta = problem.objective(fit.lambda, b.beta);
        // The least-squares refit can only lower the objective; keep the old
        // coefficients if rounding says otherwise.
        double next = after_step;
        if (after_beta <= after_step) {
            fit.beta = std::move(b.beta);
            next = after_beta;
        }

        fit.objective_trace.push_back(next);
        fit.iterations = iter;
        const double delta = (next - current) / current;
        current = next;
        if (std::abs(delta) < config.rel_tol) {
            fit.converged = true;
            break;
        }
    }
    return fit;
}

double predict_normal(const Eigen::VectorXd& x, const NormalFit& fit) {
    if (x.size() != fit.lambda.rows())
        fail(ErrorKind::ShapeMismatch, "document vector length does not match loadings");
    return x.dot(fit.lambda * fit.beta);
}

Eigen::VectorXd predict_normal(const SparseMatrix& x, const NormalFit& fit) {
    if (x.cols() != fit.lambda.rows())
        fail(ErrorKind::ShapeMismatch, "matrix columns do not match loadings");
    const Eigen::VectorXd coef = fit.lambda * fit.beta;
    return x * coef;
}

} // namespace ssmf
