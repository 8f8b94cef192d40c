#pragma once

#include <Eigen/Dense>

namespace ssmf {

struct LogisticOptions {
    double tol = 1e-8;    // converged when the score norm falls below this
    int max_iter = 100;
    double ridge = 1e-6;  // L2 weight used only when the unpenalized fit fails
    bool quiet = false;   // suppress fallback warnings; callers read ridge_used instead
};

struct LogisticFit {
    Eigen::VectorXd coef;
    int iterations = 0;
    bool converged = false;
    bool ridge_used = false;
    double loglik = 0.0; // unpenalized
};

// Sum over rows of y*eta - log(1 + exp(eta)), evaluated without overflow.
double logistic_loglik(const Eigen::MatrixXd& design, const Eigen::VectorXd& response, const Eigen::VectorXd& coef);

// log(1 + exp(x)) without overflow.
double log1p_exp(double x);

/// Maximum-likelihood binary logistic regression by iteratively reweighted
/// least squares with step halving. On (quasi-)separation or a singular
/// information matrix the fit is redone with a small ridge penalty and a
/// warning. No intercept is added; include one in `design` if wanted.
LogisticFit fit_logistic(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                         const LogisticOptions& options = {});

} // namespace ssmf
