#pragma once

#include "ssmf/corpus.hpp"
#include "ssmf/fixture.hpp"
#include "ssmf/log.hpp"
#include "ssmf/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

namespace testing {

// Hand-rolled generators for property tests.
struct Gen {
    ssmf::Rng rng;
    explicit Gen(std::uint64_t seed) : rng(seed) {}

    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
    double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
    double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(rng); }

    Eigen::MatrixXd uniform_matrix(Eigen::Index r, Eigen::Index c, double lo = 0.0, double hi = 1.0) {
        Eigen::MatrixXd m(r, c);
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < c; ++j)
                m(i, j) = uniform(lo, hi);
        return m;
    }
    Eigen::MatrixXd normal_matrix(Eigen::Index r, Eigen::Index c, double sd = 1.0) {
        Eigen::MatrixXd m(r, c);
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < c; ++j)
                m(i, j) = normal(sd);
        return m;
    }
    Eigen::VectorXd normal_vector(Eigen::Index n, double sd = 1.0) { return normal_matrix(n, 1, sd).col(0); }

    // Non-negative sparse matrix with roughly `density` nonzeros.
    ssmf::SparseMatrix sparse(Eigen::Index r, Eigen::Index c, double density = 0.5, double hi = 3.0) {
        std::vector<Eigen::Triplet<double>> t;
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < c; ++j)
                if (uniform() < density)
                    t.emplace_back(static_cast<int>(i), static_cast<int>(j), uniform(0.1, hi));
        ssmf::SparseMatrix m(r, c);
        m.setFromTriplets(t.begin(), t.end());
        m.makeCompressed();
        return m;
    }

    std::vector<int> ratings(std::size_t n, int levels) {
        std::vector<int> y(n);
        for (auto& v : y)
            v = integer(1, levels);
        return y;
    }
};

// Central finite differences of f over every entry of x.
inline Eigen::MatrixXd numeric_gradient(const std::function<double(const Eigen::MatrixXd&)>& f, Eigen::MatrixXd x,
                                        double h = 1e-5) {
    Eigen::MatrixXd g(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const double orig = x(i, j);
            x(i, j) = orig + h;
            const double up = f(x);
            x(i, j) = orig - h;
            const double down = f(x);
            x(i, j) = orig;
            g(i, j) = (up - down) / (2.0 * h);
        }
    return g;
}

inline double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const double scale = std::max({a.norm(), b.norm(), 1e-12});
    return (a - b).norm() / scale;
}

// Synthetic review corpus featurized like the prep command: tf-idf on a
// vocabulary built from training documents, with each app's last period held out.
struct FixtureSplit {
    ssmf::corpus::Vocabulary vocab;
    ssmf::corpus::DocumentTermMatrix train;
    ssmf::corpus::DocumentTermMatrix test;
};

inline FixtureSplit fixture_split(int n, std::uint64_t seed) {
    namespace c = ssmf::corpus;
    const auto reviews = ssmf::simgen::synthetic_reviews(n, seed);
    std::map<std::string, std::string> last;
    for (const auto& r : reviews)
        last[r.app] = std::max(last[r.app], r.time_bucket);
    std::vector<c::TermCounts> train_docs, test_docs;
    std::vector<c::DocumentMeta> train_meta, test_meta;
    for (const auto& r : reviews) {
        const bool held = r.time_bucket == last[r.app];
        (held ? test_docs : train_docs).push_back(c::preprocess(r.text));
        (held ? test_meta : train_meta).push_back({r.id, r.app, r.time_bucket, r.rating});
    }
    auto vocab = c::build_vocabulary(train_docs);
    auto train = c::tfidf(c::count_matrix(train_docs, vocab, std::move(train_meta)), vocab);
    auto test = c::tfidf(c::count_matrix(test_docs, vocab, std::move(test_meta)), vocab);
    return {std::move(vocab), std::move(train), std::move(test)};
}

// Collects warnings for the lifetime of the object.
class WarningCapture {
public:
    WarningCapture() {
        previous_ = ssmf::log::set_warning_sink([this](const std::string& m) { messages.push_back(m); });
    }
    ~WarningCapture() { ssmf::log::set_warning_sink(previous_); }
    WarningCapture(const WarningCapture&) = delete;
    WarningCapture& operator=(const WarningCapture&) = delete;

    std::vector<std::string> messages;

private:
    ssmf::log::Sink previous_;
};

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("ssmf_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

} // namespace testing
