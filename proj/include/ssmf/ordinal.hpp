#pragma once

#include "ssmf/corpus.hpp"
#include "ssmf/fit_config.hpp"
#include "ssmf/logistic.hpp"

#include <Eigen/Dense>

#include <compare>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ssmf::ordinal {

struct RecodedResponse {
    int levels = 0;
    std::vector<int> ratings;      // 1..levels
    Eigen::MatrixXd indicators;    // n x levels, column k-1 is Y_k

    Eigen::VectorXd indicator(int k) const { return indicators.col(k - 1); }
};

/// Indicator decomposition of ratings. Throws OutOfRangeRating.
RecodedResponse recode(std::span<const int> ratings, int levels);

/// Continuation-ratio rows for binary logistic regression: for each level
/// k = 1..K-1, every document with Y >= k contributes one row with response
/// 1{Y = k}. Columns are one intercept dummy per non-empty level followed by
/// the reduced design (X Lambda).
struct StackedDesign {
    Eigen::MatrixXd design;
    Eigen::VectorXd response;
    std::vector<int> level;               // level of each stacked row
    std::vector<Eigen::Index> source_row; // document of each stacked row
    std::vector<int> active_levels;       // levels with at least one row, ascending
    std::vector<int> empty_levels;        // levels with no Y >= k
};

/// Throws DegenerateLevel when there are no documents, or when some level has
/// no document with Y >= k and `drop_empty_levels` is false. With the flag set
/// such levels are left out and listed in `empty_levels`.
StackedDesign stack_for_logistic(const Eigen::MatrixXd& reduced, const RecodedResponse& rec,
                                 bool drop_empty_levels = false);

struct GroupKey {
    std::string time;
    std::string app;

    auto operator<=>(const GroupKey&) const = default;
    std::string to_string() const { return time + "|" + app; }
};

struct GroupData {
    SparseMatrix x;          // n_ta x p
    std::vector<int> ratings;
};

using GroupedData = std::map<GroupKey, GroupData>;

/// Splits a matrix into (time, app) groups using its row metadata.
GroupedData group_documents(const corpus::DocumentTermMatrix& dtm);

/// Distinct time buckets in ascending order.
std::vector<std::string> time_points(const GroupedData& data);

/// Rows used to estimate the coefficients of one (time, app) group: the
/// group's own period plus up to window-1 preceding periods of the same app.
struct WindowedGroup {
    GroupKey key;
    SparseMatrix x;
    std::vector<int> ratings;
};

std::vector<WindowedGroup> build_windows(const GroupedData& data, int window);

enum class ModelKind { constrained, saturated };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view s);

/// Intercepts (K-1) and topic coefficients for one group. Constrained models
/// hold a single coefficient column shared by all levels; saturated models
/// hold one column per level.
struct GroupParams {
    Eigen::VectorXd alpha;
    Eigen::MatrixXd beta; // m x 1 or m x (K-1)

    Eigen::VectorXd beta_for_level(int k) const { return beta.cols() == 1 ? beta.col(0) : beta.col(k - 1); }
};

struct OrdinalModel {
    ModelKind kind = ModelKind::constrained;
    int levels = 0;
    int window = 2;
    Eigen::MatrixXd lambda;
    std::map<GroupKey, GroupParams> params;
    std::vector<double> loglik_trace; // entry 0 is after the first coefficient fit
    int iterations = 0;
    bool converged = false;
    FitConfig config;

    Eigen::Index topics() const { return lambda.cols(); }
};

using DynamicOrdinalModel = OrdinalModel;
using SaturatedOrdinalModel = OrdinalModel;

/// Continuation-ratio log-likelihood of one document given its linear
/// predictors eta_k = alpha_k + x Lambda beta_k, k = 1..K-1.
double document_loglik(std::span<const double> eta, int rating);

/// Sum of document log-likelihoods over the rolling windows of `data` (with
/// window 1 this is the plain per-group likelihood).
double cr_loglik(const Eigen::MatrixXd& lambda, const std::map<GroupKey, GroupParams>& params,
                 std::span<const WindowedGroup> windows, int levels);
double cr_loglik(const OrdinalModel& model, const GroupedData& data);

/// d loglik / d Lambda over the same rows as cr_loglik.
Eigen::MatrixXd gradient_lambda_cr(const Eigen::MatrixXd& lambda, const std::map<GroupKey, GroupParams>& params,
                                   std::span<const WindowedGroup> windows, int levels);
Eigen::MatrixXd gradient_lambda_cr(const OrdinalModel& model, const GroupedData& data);

struct CoefficientStats {
    int fits = 0;      // binary logistic fits run
    int ridge = 0;     // of which fell back to the ridge penalty
    int dropped = 0;   // levels with no documents at risk
};

/// Maximum-likelihood intercepts and coefficients for every group with Lambda
/// held fixed. With `options.quiet` set, fallbacks are only counted in `stats`.
std::map<GroupKey, GroupParams> fit_coefficients(const Eigen::MatrixXd& lambda, std::span<const WindowedGroup> windows,
                                                 int levels, ModelKind kind, const LogisticOptions& options = {},
                                                 CoefficientStats* stats = nullptr);

OrdinalModel fit_dynamic(const GroupedData& data, Eigen::Index m, int levels, const FitConfig& config);
OrdinalModel fit_saturated(const GroupedData& data, Eigen::Index m, int levels, const FitConfig& config);
OrdinalModel fit_ordinal(const GroupedData& data, Eigen::Index m, int levels, ModelKind kind, const FitConfig& config);

/// Level probabilities from the K-1 continuation-ratio linear predictors.
Eigen::VectorXd rating_probs_from_eta(std::span<const double> eta, int levels);

Eigen::VectorXd predict_rating_probs(const Eigen::VectorXd& x, const Eigen::MatrixXd& lambda,
                                     const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta);
Eigen::VectorXd predict_rating_probs(const Eigen::VectorXd& x, const Eigen::MatrixXd& lambda,
                                     const GroupParams& params);
/// Same, from a reduced design row (x Lambda) directly.
Eigen::VectorXd predict_rating_probs_reduced(const Eigen::VectorXd& reduced, const GroupParams& params);

/// Most probable level; ties go to the lower level.
int argmax_level(const Eigen::VectorXd& probs);
int predict_rating(const Eigen::VectorXd& x, const Eigen::MatrixXd& lambda, const Eigen::VectorXd& alpha,
                   const Eigen::VectorXd& beta);

/// Coefficients to use for documents from (time, app): the exact group if it
/// was fitted, otherwise the most recent earlier period of the same app.
/// `pinned_time` forces a specific period. Throws UnknownGroupKey.
GroupKey resolve_key(const OrdinalModel& model, const GroupKey& wanted,
                     const std::optional<std::string>& pinned_time = std::nullopt);

struct DegreesOfFreedom {
    long constrained = 0; // topics * apps * times
    long saturated = 0;   // constrained * (levels - 1)
    long difference() const { return saturated - constrained; }
};

DegreesOfFreedom lrt_degrees_of_freedom(long topics, long apps, long times, int levels);

/// Upper tail of the chi-squared distribution; df = 0 gives 1.
double chi_squared_upper_tail(double statistic, double df);

struct LrtResult {
    double loglik_constrained = 0.0;
    double loglik_saturated = 0.0;
    double g = 0.0;
    DegreesOfFreedom df;
    double p_value = 1.0;
    bool negative_g = false;
};

/// G = 2 (l_saturated - l_constrained) evaluated on `data`. A negative G is
/// reported as is, with a warning; the p-value then uses G = 0.
LrtResult lrt(const OrdinalModel& constrained, const OrdinalModel& saturated, const GroupedData& data);

/// Saturated coefficients refitted on the constrained model's Lambda, for the
/// shared-loadings comparison.
OrdinalModel saturated_on_shared_lambda(const OrdinalModel& constrained, const GroupedData& data);

} // namespace ssmf::ordinal
