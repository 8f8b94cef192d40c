#include "ssmf/metrics.hpp"
#include "ssmf/corpus_io.hpp"
#include "ssmf/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>

namespace ssmf::metrics {
namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s)
        out += (c == '"') ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

} // namespace

TopicKeywords top_keywords(const Eigen::MatrixXd& lambda, const corpus::Vocabulary& vocab, int q) {
    const auto p = static_cast<Eigen::Index>(vocab.size());
    if (lambda.rows() != p)
        fail(ErrorKind::ShapeMismatch, "loadings rows do not match vocabulary size");
    if (q < 1 || q > p)
        fail(ErrorKind::Config, "keyword count " + std::to_string(q) + " must lie in 1.." + std::to_string(p));

    TopicKeywords out;
    out.q = q;
    std::vector<std::size_t> order(static_cast<std::size_t>(p));
    for (Eigen::Index k = 0; k < lambda.cols(); ++k) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return lambda(static_cast<Eigen::Index>(a), k) > lambda(static_cast<Eigen::Index>(b), k);
        });
        std::vector<std::string> terms;
        std::vector<std::size_t> idx(order.begin(), order.begin() + q);
        std::vector<double> weights;
        for (std::size_t j : idx) {
            terms.push_back(vocab.term(j));
            weights.push_back(lambda(static_cast<Eigen::Index>(j), k));
        }
        out.terms.push_back(std::move(terms));
        out.indices.push_back(std::move(idx));
        out.weights.push_back(std::move(weights));
    }
    return out;
}

Incidence::Incidence(const SparseMatrix& x, const corpus::Vocabulary& vocab)
    : vocab_(&vocab), docs_(vocab.size()), n_docs_(x.rows()) {
    if (x.cols() != static_cast<Eigen::Index>(vocab.size()))
        fail(ErrorKind::ShapeMismatch, "matrix columns do not match vocabulary size");
    for (Eigen::Index i = 0; i < x.outerSize(); ++i)
        for (SparseMatrix::InnerIterator it(x, i); it; ++it)
            if (it.value() > 0.0)
                docs_[static_cast<std::size_t>(it.col())].push_back(i);
}

const std::vector<Eigen::Index>& Incidence::docs_of(const std::string& term) const {
    auto j = vocab_->index_of(term);
    if (!j)
        fail(ErrorKind::UnknownKeyword, "keyword '" + term + "' is not in the vocabulary");
    return docs_[*j];
}

int Incidence::doc_count(const std::string& term) const { return static_cast<int>(docs_of(term).size()); }

int Incidence::co_doc_count(const std::string& a, const std::string& b) const {
    const auto& da = docs_of(a);
    const auto& db = docs_of(b);
    int both = 0;
    auto ia = da.begin();
    auto ib = db.begin();
    while (ia != da.end() && ib != db.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            ++both;
            ++ia;
            ++ib;
        }
    }
    return both;
}

namespace {

double pair_sum(std::span<const std::string> keywords, const Incidence& incidence) {
    double sum = 0.0;
    for (std::size_t v = 0; v < keywords.size(); ++v) {
        const int dv = incidence.doc_count(keywords[v]);
        if (dv < 1)
            fail(ErrorKind::Numerical, "keyword '" + keywords[v] + "' occurs in no document");
        for (std::size_t u = v + 1; u < keywords.size(); ++u)
            sum += std::log((incidence.co_doc_count(keywords[u], keywords[v]) + kCoherenceSmoothing) / dv);
    }
    return sum;
}

} // namespace

double topic_coherence(std::span<const std::string> keywords, const Incidence& incidence) {
    const double q = static_cast<double>(keywords.size());
    if (keywords.size() < 2)
        fail(ErrorKind::Config, "coherence needs at least two keywords per topic");
    return 2.0 / (q * (q - 1.0)) * pair_sum(keywords, incidence);
}

double coherence(const TopicKeywords& keywords, const Incidence& incidence) {
    if (keywords.topics() == 0)
        fail(ErrorKind::Config, "coherence needs at least one topic");
    const double q = static_cast<double>(keywords.q);
    if (keywords.q < 2)
        fail(ErrorKind::Config, "coherence needs at least two keywords per topic");
    double sum = 0.0;
    for (const auto& list : keywords.terms) {
        if (static_cast<int>(list.size()) != keywords.q)
            fail(ErrorKind::ShapeMismatch, "keyword list length differs from q");
        sum += pair_sum(list, incidence);
    }
    return 2.0 / (static_cast<double>(keywords.topics()) * q * (q - 1.0)) * sum;
}

double uniqueness(const TopicKeywords& keywords) {
    if (keywords.topics() == 0)
        fail(ErrorKind::Config, "uniqueness needs at least one topic");
    std::vector<std::set<std::string>> sets;
    for (const auto& list : keywords.terms)
        sets.emplace_back(list.begin(), list.end());
    double total = 0.0;
    for (std::size_t k = 0; k < sets.size(); ++k) {
        int unique = 0;
        for (const auto& term : sets[k]) {
            bool shared = false;
            for (std::size_t other = 0; other < sets.size() && !shared; ++other)
                shared = other != k && sets[other].contains(term);
            if (!shared)
                ++unique;
        }
        total += static_cast<double>(unique) / keywords.q;
    }
    return total / static_cast<double>(sets.size());
}

double rmse(std::span<const double> truth, std::span<const double> predictions) {
    if (truth.size() != predictions.size() || truth.empty())
        fail(ErrorKind::LengthMismatch, "rmse: " + std::to_string(truth.size()) + " truths vs " +
                                            std::to_string(predictions.size()) + " predictions");
    double ss = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i)
        ss += (truth[i] - predictions[i]) * (truth[i] - predictions[i]);
    return std::sqrt(ss / static_cast<double>(truth.size()));
}

double mer(std::span<const int> truth, std::span<const int> predicted) {
    if (truth.size() != predicted.size() || truth.empty())
        fail(ErrorKind::LengthMismatch, "mer: " + std::to_string(truth.size()) + " truths vs " +
                                            std::to_string(predicted.size()) + " predictions");
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < truth.size(); ++i)
        wrong += truth[i] != predicted[i];
    return static_cast<double>(wrong) / static_cast<double>(truth.size());
}

std::vector<PrevalenceRow> topic_prevalence(const ordinal::GroupedData& data, const Eigen::MatrixXd& lambda) {
    std::vector<PrevalenceRow> rows;
    for (const auto& [key, g] : data) {
        if (g.x.cols() != lambda.rows())
            fail(ErrorKind::ShapeMismatch, "group " + key.to_string() + " column count does not match loadings");
        const Eigen::RowVectorXd sums = (g.x * lambda).colwise().sum();
        for (Eigen::Index k = 0; k < lambda.cols(); ++k)
            rows.push_back({key, static_cast<int>(k) + 1, sums[k]});
    }
    return rows;
}

std::vector<TopicProbabilityRow> rating_probability_by_topic(const ordinal::OrdinalModel& model) {
    std::vector<TopicProbabilityRow> rows;
    const Eigen::Index m = model.topics();
    for (const auto& [key, gp] : model.params) {
        for (Eigen::Index k = 0; k < m; ++k) {
            const Eigen::VectorXd unit = Eigen::VectorXd::Unit(m, k);
            const Eigen::VectorXd probs = ordinal::predict_rating_probs_reduced(unit, gp);
            for (Eigen::Index level = 0; level < probs.size(); ++level)
                rows.push_back({key, static_cast<int>(k) + 1, static_cast<int>(level) + 1, probs[level]});
        }
    }
    return rows;
}

void write_prevalence_csv(std::ostream& out, std::span<const PrevalenceRow> rows) {
    out << "t,a,topic,value\n";
    for (const auto& r : rows)
        out << csv_field(r.key.time) << ',' << csv_field(r.key.app) << ',' << r.topic << ','
            << corpus::format_double(r.value) << '\n';
}

void write_probability_csv(std::ostream& out, std::span<const TopicProbabilityRow> rows) {
    out << "t,a,topic,level,prob\n";
    for (const auto& r : rows)
        out << csv_field(r.key.time) << ',' << csv_field(r.key.app) << ',' << r.topic << ',' << r.level << ','
            << corpus::format_double(r.prob) << '\n';
}

void write_keywords_csv(std::ostream& out, const TopicKeywords& keywords) {
    out << "topic,rank,term,weight\n";
    for (std::size_t k = 0; k < keywords.topics(); ++k)
        for (std::size_t r = 0; r < keywords.terms[k].size(); ++r)
            out << k + 1 << ',' << r + 1 << ',' << csv_field(keywords.terms[k][r]) << ','
                << corpus::format_double(keywords.weights[k][r]) << '\n';
}

} // namespace ssmf::metrics
