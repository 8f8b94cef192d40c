#pragma once

#include "ssmf/corpus.hpp"
#include "ssmf/fit_config.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ssmf::simgen {

struct LdaParams {
    int n = 100;
    int mu = 250;
    int p = 2000;
    int topics = 5;
    double alpha_doc = 0.8;
    double alpha_topic = 0.8;
    std::uint64_t seed = 1;

    void validate() const;
};

/// K x p matrix of topic/term distributions, rows drawn from
/// Dirichlet(alpha_topic).
Eigen::MatrixXd draw_topics(const LdaParams& params, std::uint64_t seed);

struct LdaCorpus {
    SparseMatrix counts;                       // n x p, row sums mu
    std::vector<std::vector<int>> assignments; // topic of every word, per document
    Eigen::MatrixXd theta;                     // n x K document/topic draws
    Eigen::MatrixXd proportions;               // n x K empirical assignment shares
    Eigen::MatrixXd topics;                    // K x p
};

/// Draws topics from `params.seed` and then the documents.
LdaCorpus gen_lda_corpus(const LdaParams& params);
/// Documents over the given topics, using `params.seed` for the document draws.
LdaCorpus gen_lda_corpus(const LdaParams& params, const Eigen::MatrixXd& topics);

/// TFIDF of simulated counts with document frequencies taken from `train`
/// (n_train = train rows). Columns absent from the training corpus get weight 0.
SparseMatrix sim_tfidf(const SparseMatrix& counts, const SparseMatrix& train,
                       corpus::TermFrequency tf = corpus::TermFrequency::relative);

struct SelfConsistentTruth {
    Eigen::MatrixXd lambda; // p x m, Uniform[0, 1]
    Eigen::VectorXd beta;   // m, N(0, 1)
};

struct SelfConsistentDraw {
    Eigen::VectorXd y;
    SelfConsistentTruth truth;
};

SelfConsistentTruth draw_selfconsistent_truth(Eigen::Index p, Eigen::Index m, std::uint64_t seed);
/// Y = X Lambda* beta* + N(0, noise_sd^2); noise_sd 0 gives the exact signal.
Eigen::VectorXd selfconsistent_response(const SparseMatrix& x, const SelfConsistentTruth& truth, double noise_sd,
                                        std::uint64_t seed);
SelfConsistentDraw gen_selfconsistent_response(const SparseMatrix& x, Eigen::Index m, std::uint64_t seed,
                                               double noise_sd = 1.0);

/// Y_i = eta' Z_i + N(0, sigma2). Rows of Z must sum to 1 (within 1e-9);
/// throws RowSumViolation otherwise.
Eigen::VectorXd gen_slda_response(const Eigen::MatrixXd& z, const Eigen::VectorXd& eta, double sigma2,
                                  std::uint64_t seed);

enum class Process { selfconsistent, slda };
std::string_view to_string(Process p);
Process parse_process(std::string_view s);

/// One replicate's training and test data.
struct Replicate {
    SparseMatrix x_train;
    Eigen::VectorXd y_train;
    SparseMatrix x_test;
    Eigen::VectorXd y_test;
    int topics = 0;
    std::uint64_t fit_seed = 0;
};

struct BenchmarkCell {
    Process process = Process::selfconsistent;
    int mu = 250;
    int n = 100;
};

struct BenchmarkDesign {
    std::vector<BenchmarkCell> cells;
    int replicates = 20;
    int p = 2000;
    int topics = 5;       // true topic count; the fit uses the same value
    double alpha_doc = 0.8;
    double alpha_topic = 0.8;
    double noise_sd = 1.0;
    corpus::TermFrequency tf = corpus::TermFrequency::relative;
    std::uint64_t seed = 1;
};

/// Training and an independent, equally sized test corpus over shared topics.
/// Test rows use the training document frequencies.
Replicate make_replicate(const BenchmarkDesign& design, const BenchmarkCell& cell, int replicate);

// Predicts test responses from the training data of one replicate.
using FitPredict = std::function<Eigen::VectorXd(const Replicate&)>;

struct Method {
    std::string name;
    FitPredict fit_predict;
};

/// The single-stage factorization fitted with `config` (seed replaced by the
/// replicate's fit seed).
Method ssmf_method(const FitConfig& config);

struct BenchmarkRow {
    Process process = Process::selfconsistent;
    int mu = 0;
    int n = 0;
    std::string method;
    double rmse = 0.0; // mean over replicates
    double se = 0.0;   // standard deviation / sqrt(replicates)
    int replicates = 0;
    std::vector<double> per_replicate;
};

using ProgressFn = std::function<void(const BenchmarkCell&, int replicate, const std::string& method, double rmse)>;

std::vector<BenchmarkRow> run_benchmark(const BenchmarkDesign& design, std::span<const Method> methods,
                                        const ProgressFn& progress = {});

/// `process,mu,n,method,rmse,se,replicates`
void write_results_csv(std::ostream& out, std::span<const BenchmarkRow> rows);

/// Writes every replicate of every cell as `<dir>/<process>_mu<mu>_n<n>_r<r>`
/// with x_train.csv / x_test.csv (row,col,value) and y_train.csv / y_test.csv
/// (id,y), for predictors run outside this library.
void export_replicates(const BenchmarkDesign& design, const std::filesystem::path& dir);

} // namespace ssmf::simgen
