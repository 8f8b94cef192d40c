#include "ssmf/simgen.hpp"
#include "ssmf/corpus_io.hpp"
#include "ssmf/error.hpp"
#include "ssmf/factorization.hpp"
#include "ssmf/metrics.hpp"
#include "ssmf/rng.hpp"

#include <cmath>
#include <fstream>
#include <ostream>

namespace ssmf::simgen {
namespace {

// Stream indices within one replicate.
enum Stream : std::uint64_t { topics_stream, train_docs, test_docs, truth_stream, train_noise, test_noise, fit_stream };

Eigen::VectorXd dirichlet(Rng& rng, double alpha, Eigen::Index size) {
    std::gamma_distribution<double> gamma(alpha, 1.0);
    Eigen::VectorXd v(size);
    for (Eigen::Index i = 0; i < size; ++i)
        v[i] = gamma(rng);
    const double total = v.sum();
    if (!(total > 0.0))
        fail(ErrorKind::Numerical, "Dirichlet draw underflowed");
    return v / total;
}

std::discrete_distribution<int> categorical(const Eigen::VectorXd& probs) {
    return std::discrete_distribution<int>(probs.data(), probs.data() + probs.size());
}

std::uint64_t cell_seed(std::uint64_t root, const BenchmarkCell& cell) {
    std::uint64_t s = derive_seed(root, static_cast<std::uint64_t>(cell.process));
    s = derive_seed(s, static_cast<std::uint64_t>(cell.mu));
    return derive_seed(s, static_cast<std::uint64_t>(cell.n));
}

void write_triplets(const std::filesystem::path& path, const SparseMatrix& x) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        fail(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
    out << "row,col,value\n";
    for (Eigen::Index i = 0; i < x.outerSize(); ++i)
        for (SparseMatrix::InnerIterator it(x, i); it; ++it)
            out << i << ',' << it.col() << ',' << corpus::format_double(it.value()) << '\n';
}

void write_response(const std::filesystem::path& path, const Eigen::VectorXd& y) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        fail(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
    out << "id,y\n";
    for (Eigen::Index i = 0; i < y.size(); ++i)
        out << i << ',' << corpus::format_double(y[i]) << '\n';
}

} // namespace

void LdaParams::validate() const {
    if (n < 1 || mu < 1 || p < 1 || topics < 1)
        fail(ErrorKind::Config, "n, mu, p and topics must be positive");
    if (topics > p)
        fail(ErrorKind::Config, "topics must not exceed vocabulary size");
    if (!(alpha_doc > 0.0) || !(alpha_topic > 0.0))
        fail(ErrorKind::Config, "Dirichlet concentrations must be positive");
}

Eigen::MatrixXd draw_topics(const LdaParams& params, std::uint64_t seed) {
    params.validate();
    Rng rng(seed);
    Eigen::MatrixXd topics(params.topics, params.p);
    for (int k = 0; k < params.topics; ++k)
        topics.row(k) = dirichlet(rng, params.alpha_topic, params.p).transpose();
    return topics;
}

LdaCorpus gen_lda_corpus(const LdaParams& params) {
    return gen_lda_corpus(params, draw_topics(params, derive_seed(params.seed, topics_stream)));
}

LdaCorpus gen_lda_corpus(const LdaParams& params, const Eigen::MatrixXd& topics) {
    params.validate();
    if (topics.rows() != params.topics || topics.cols() != params.p)
        fail(ErrorKind::ShapeMismatch, "topic matrix must be topics x p");
    Rng rng(params.seed);
    std::vector<std::discrete_distribution<int>> words;
    for (int k = 0; k < params.topics; ++k)
        words.push_back(categorical(topics.row(k).transpose()));

    LdaCorpus out;
    out.topics = topics;
    out.theta.resize(params.n, params.topics);
    out.proportions = Eigen::MatrixXd::Zero(params.n, params.topics);
    out.assignments.resize(static_cast<std::size_t>(params.n));
    std::vector<Eigen::Triplet<double>> triplets;
    std::vector<int> row_counts(static_cast<std::size_t>(params.p));
    for (int i = 0; i < params.n; ++i) {
        const Eigen::VectorXd theta = dirichlet(rng, params.alpha_doc, params.topics);
        out.theta.row(i) = theta.transpose();
        auto pick_topic = categorical(theta);
        std::fill(row_counts.begin(), row_counts.end(), 0);
        auto& z = out.assignments[static_cast<std::size_t>(i)];
        z.reserve(static_cast<std::size_t>(params.mu));
        for (int w = 0; w < params.mu; ++w) {
            const int k = pick_topic(rng);
            z.push_back(k);
            ++row_counts[static_cast<std::size_t>(words[static_cast<std::size_t>(k)](rng))];
            out.proportions(i, k) += 1.0;
        }
        for (int j = 0; j < params.p; ++j)
            if (row_counts[static_cast<std::size_t>(j)] > 0)
                triplets.emplace_back(i, j, row_counts[static_cast<std::size_t>(j)]);
    }
    out.proportions /= static_cast<double>(params.mu);
    out.counts.resize(params.n, params.p);
    out.counts.setFromTriplets(triplets.begin(), triplets.end());
    out.counts.makeCompressed();
    return out;
}

SparseMatrix sim_tfidf(const SparseMatrix& counts, const SparseMatrix& train, corpus::TermFrequency tf) {
    if (counts.cols() != train.cols())
        fail(ErrorKind::ShapeMismatch, "count matrices differ in vocabulary size");
    std::vector<int> df(static_cast<std::size_t>(train.cols()), 0);
    for (Eigen::Index i = 0; i < train.outerSize(); ++i)
        for (SparseMatrix::InnerIterator it(train, i); it; ++it)
            if (it.value() > 0.0)
                ++df[static_cast<std::size_t>(it.col())];
    const double n_train = static_cast<double>(train.rows());

    SparseMatrix out = counts;
    for (Eigen::Index i = 0; i < out.outerSize(); ++i) {
        double total = 1.0;
        if (tf == corpus::TermFrequency::relative) {
            total = 0.0;
            for (SparseMatrix::InnerIterator it(out, i); it; ++it)
                total += it.value();
            if (total <= 0.0)
                total = 1.0;
        }
        for (SparseMatrix::InnerIterator it(out, i); it; ++it) {
            const int d = df[static_cast<std::size_t>(it.col())];
            it.valueRef() = d > 0 ? it.value() / total * std::log(n_train / d) : 0.0;
        }
    }
    out.prune(0.0);
    return out;
}

SelfConsistentTruth draw_selfconsistent_truth(Eigen::Index p, Eigen::Index m, std::uint64_t seed) {
    if (m < 1 || m > p)
        fail(ErrorKind::InvalidRank, "topic count must lie in 1..p");
    Rng rng(seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    SelfConsistentTruth t;
    t.lambda.resize(p, m);
    for (Eigen::Index j = 0; j < p; ++j)
        for (Eigen::Index k = 0; k < m; ++k)
            t.lambda(j, k) = uniform(rng);
    t.beta.resize(m);
    for (Eigen::Index k = 0; k < m; ++k)
        t.beta[k] = normal(rng);
    return t;
}

Eigen::VectorXd selfconsistent_response(const SparseMatrix& x, const SelfConsistentTruth& truth, double noise_sd,
                                        std::uint64_t seed) {
    if (x.cols() != truth.lambda.rows())
        fail(ErrorKind::ShapeMismatch, "matrix columns do not match loadings");
    if (noise_sd < 0.0)
        fail(ErrorKind::Config, "noise standard deviation must be non-negative");
    const Eigen::VectorXd coef = truth.lambda * truth.beta;
    Eigen::VectorXd y = x * coef;
    if (noise_sd > 0.0) {
        Rng rng(seed);
        std::normal_distribution<double> noise(0.0, noise_sd);
        for (Eigen::Index i = 0; i < y.size(); ++i)
            y[i] += noise(rng);
    }
    return y;
}

SelfConsistentDraw gen_selfconsistent_response(const SparseMatrix& x, Eigen::Index m, std::uint64_t seed,
                                               double noise_sd) {
    SelfConsistentDraw d;
    d.truth = draw_selfconsistent_truth(x.cols(), m, derive_seed(seed, 0));
    d.y = selfconsistent_response(x, d.truth, noise_sd, derive_seed(seed, 1));
    return d;
}

Eigen::VectorXd gen_slda_response(const Eigen::MatrixXd& z, const Eigen::VectorXd& eta, double sigma2,
                                  std::uint64_t seed) {
    if (z.cols() != eta.size())
        fail(ErrorKind::ShapeMismatch, "proportions and eta differ in topic count");
    if (sigma2 < 0.0)
        fail(ErrorKind::Config, "sigma2 must be non-negative");
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double s = z.row(i).sum();
        if (std::abs(s - 1.0) > 1e-9 || (z.row(i).array() < 0.0).any())
            fail(ErrorKind::RowSumViolation, "row " + std::to_string(i) + " of Z is not a distribution (sum " +
                                                 std::to_string(s) + ")");
    }
    Eigen::VectorXd y = z * eta;
    if (sigma2 > 0.0) {
        Rng rng(seed);
        std::normal_distribution<double> noise(0.0, std::sqrt(sigma2));
        for (Eigen::Index i = 0; i < y.size(); ++i)
            y[i] += noise(rng);
    }
    return y;
}

std::string_view to_string(Process p) { return p == Process::selfconsistent ? "selfconsistent" : "slda"; }

Process parse_process(std::string_view s) {
    if (s == "selfconsistent" || s == "self-consistency" || s == "sc")
        return Process::selfconsistent;
    if (s == "slda")
        return Process::slda;
    fail(ErrorKind::Config, "unknown process '" + std::string(s) + "'");
}

Replicate make_replicate(const BenchmarkDesign& design, const BenchmarkCell& cell, int replicate) {
    const std::uint64_t seed = derive_seed(cell_seed(design.seed, cell), static_cast<std::uint64_t>(replicate));
    LdaParams params;
    params.n = cell.n;
    params.mu = cell.mu;
    params.p = design.p;
    params.topics = design.topics;
    params.alpha_doc = design.alpha_doc;
    params.alpha_topic = design.alpha_topic;
    const Eigen::MatrixXd topics = draw_topics(params, derive_seed(seed, topics_stream));

    params.seed = derive_seed(seed, train_docs);
    const LdaCorpus train = gen_lda_corpus(params, topics);
    params.seed = derive_seed(seed, test_docs);
    const LdaCorpus test = gen_lda_corpus(params, topics);

    Replicate r;
    r.topics = design.topics;
    r.fit_seed = derive_seed(seed, fit_stream);
    r.x_train = sim_tfidf(train.counts, train.counts, design.tf);
    r.x_test = sim_tfidf(test.counts, train.counts, design.tf);
    if (cell.process == Process::selfconsistent) {
        const auto truth = draw_selfconsistent_truth(design.p, design.topics, derive_seed(seed, truth_stream));
        r.y_train = selfconsistent_response(r.x_train, truth, design.noise_sd, derive_seed(seed, train_noise));
        r.y_test = selfconsistent_response(r.x_test, truth, design.noise_sd, derive_seed(seed, test_noise));
    } else {
        Rng rng(derive_seed(seed, truth_stream));
        std::normal_distribution<double> normal(0.0, 1.0);
        Eigen::VectorXd eta(design.topics);
        for (Eigen::Index k = 0; k < eta.size(); ++k)
            eta[k] = normal(rng);
        const double sigma2 = design.noise_sd * design.noise_sd;
        r.y_train = gen_slda_response(train.proportions, eta, sigma2, derive_seed(seed, train_noise));
        r.y_test = gen_slda_response(test.proportions, eta, sigma2, derive_seed(seed, test_noise));
    }
    return r;
}

Method ssmf_method(const FitConfig& config) {
    return {"SSMF", [config](const Replicate& r) {
                FitConfig c = config;
                c.seed = r.fit_seed;
                const NormalFit fit = fit_normal(r.x_train, r.y_train, r.topics, c);
                return predict_normal(r.x_test, fit);
            }};
}

std::vector<BenchmarkRow> run_benchmark(const BenchmarkDesign& design, std::span<const Method> methods,
                                        const ProgressFn& progress) {
    if (design.replicates < 1)
        fail(ErrorKind::Config, "replicates must be >= 1");
    std::vector<BenchmarkRow> rows;
    for (const auto& cell : design.cells) {
        std::vector<BenchmarkRow> cell_rows;
        for (const auto& m : methods)
            cell_rows.push_back({cell.process, cell.mu, cell.n, m.name, 0.0, 0.0, design.replicates, {}});
        for (int r = 0; r < design.replicates; ++r) {
            const Replicate rep = make_replicate(design, cell, r);
            for (std::size_t k = 0; k < methods.size(); ++k) {
                const Eigen::VectorXd pred = methods[k].fit_predict(rep);
                const double score = metrics::rmse({rep.y_test.data(), static_cast<std::size_t>(rep.y_test.size())},
                                                   {pred.data(), static_cast<std::size_t>(pred.size())});
                cell_rows[k].per_replicate.push_back(score);
                if (progress)
                    progress(cell, r, methods[k].name, score);
            }
        }
        for (auto& row : cell_rows) {
            const auto& v = row.per_replicate;
            const double n = static_cast<double>(v.size());
            double mean = 0.0;
            for (double x : v)
                mean += x;
            mean /= n;
            double ss = 0.0;
            for (double x : v)
                ss += (x - mean) * (x - mean);
            row.rmse = mean;
            row.se = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) / std::sqrt(n) : 0.0;
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

void write_results_csv(std::ostream& out, std::span<const BenchmarkRow> rows) {
    out << "process,mu,n,method,rmse,se,replicates\n";
    for (const auto& r : rows)
        out << to_string(r.process) << ',' << r.mu << ',' << r.n << ',' << r.method << ','
            << corpus::format_double(r.rmse) << ',' << corpus::format_double(r.se) << ',' << r.replicates << '\n';
}

void export_replicates(const BenchmarkDesign& design, const std::filesystem::path& dir) {
    for (const auto& cell : design.cells) {
        for (int r = 0; r < design.replicates; ++r) {
            const Replicate rep = make_replicate(design, cell, r);
            const auto sub = dir / (std::string(to_string(cell.process)) + "_mu" + std::to_string(cell.mu) + "_n" +
                                    std::to_string(cell.n) + "_r" + std::to_string(r));
            std::filesystem::create_directories(sub);
            write_triplets(sub / "x_train.csv", rep.x_train);
            write_triplets(sub / "x_test.csv", rep.x_test);
            write_response(sub / "y_train.csv", rep.y_train);
            write_response(sub / "y_test.csv", rep.y_test);
        }
    }
}

} // namespace ssmf::simgen
