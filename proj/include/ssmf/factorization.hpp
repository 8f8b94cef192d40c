#pragma once

#include "ssmf/corpus.hpp"
#include "ssmf/fit_config.hpp"

#include <Eigen/Dense>

#include <vector>

namespace ssmf {

struct InitialParams {
    Eigen::MatrixXd lambda; // p x m, entries Uniform[0, 1]
    Eigen::VectorXd beta;   // m, entries N(0, 1)
};

/// Deterministic under `seed`. Throws InvalidRank when m > p or m < 1.
InitialParams init_params(Eigen::Index p, Eigen::Index m, std::uint64_t seed);

/// ||Y - X Lambda beta||^2
double objective(const Eigen::VectorXd& y, const SparseMatrix& x, const Eigen::MatrixXd& lambda,
                 const Eigen::VectorXd& beta);

/// X'X Lambda beta beta' - X'Y beta', the gradient of half the objective.
Eigen::MatrixXd gradient_lambda(const Eigen::MatrixXd& xtx, const Eigen::VectorXd& xty,
                                const Eigen::MatrixXd& lambda, const Eigen::VectorXd& beta);

/// Elementwise max(0, .)
Eigen::MatrixXd project(const Eigen::MatrixXd& m);

/// Data plus the products that stay fixed across iterations (X'X, X'Y).
class NormalProblem {
public:
    NormalProblem(SparseMatrix x, Eigen::VectorXd y);

    const SparseMatrix& x() const { return x_; }
    const Eigen::VectorXd& y() const { return y_; }
    const Eigen::MatrixXd& xtx() const { return xtx_; }
    const Eigen::VectorXd& xty() const { return xty_; }

    double objective(const Eigen::MatrixXd& lambda, const Eigen::VectorXd& beta) const;

private:
    SparseMatrix x_;
    Eigen::VectorXd y_;
    Eigen::MatrixXd xtx_;
    Eigen::VectorXd xty_;
};

struct ArmijoStep {
    Eigen::MatrixXd lambda;
    double step = 0.0;
    int substeps = 0;
};

/// One projected-gradient update of Lambda with beta fixed. Accepted steps
/// satisfy f(next) - f(cur) <= sigma <grad, next - cur> with f = half the
/// objective. Throws StepSearchExhausted.
ArmijoStep armijo_step(const NormalProblem& problem, const Eigen::MatrixXd& lambda,
                       const Eigen::VectorXd& beta, double step0, const FitConfig& config);

struct BetaSolve {
    Eigen::VectorXd beta;
    bool rank_deficient = false;
};

/// Least-squares coefficients of Y on X Lambda. Falls back to the minimum-norm
/// solution (with a warning) when X Lambda loses column rank.
BetaSolve solve_beta(const SparseMatrix& x, const Eigen::MatrixXd& lambda, const Eigen::VectorXd& y);

struct NormalFit {
    Eigen::MatrixXd lambda;
    Eigen::VectorXd beta;
    std::vector<double> objective_trace; // entry 0 is the starting point
    int iterations = 0;
    bool converged = false;
    bool rank_deficient = false;
    FitConfig config;
};

NormalFit fit_normal(const SparseMatrix& x, const Eigen::VectorXd& y, Eigen::Index m, const FitConfig& config);

double predict_normal(const Eigen::VectorXd& x, const NormalFit& fit);
Eigen::VectorXd predict_normal(const SparseMatrix& x, const NormalFit& fit);

} // namespace ssmf
