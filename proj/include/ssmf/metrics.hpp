#pragma once

#include "ssmf/corpus.hpp"
#include "ssmf/ordinal.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ssmf::metrics {

inline constexpr int kMetricKeywords = 100;
inline constexpr int kDisplayKeywords = 10;

struct TopicKeywords {
    int q = 0;
    std::vector<std::vector<std::string>> terms;   // one list per topic, best first
    std::vector<std::vector<std::size_t>> indices; // vocabulary indices of `terms`
    std::vector<std::vector<double>> weights;      // Lambda entries of `terms`

    std::size_t topics() const { return terms.size(); }
};

/// Top-q terms of every Lambda column by weight, descending; equal weights
/// keep vocabulary order.
TopicKeywords top_keywords(const Eigen::MatrixXd& lambda, const corpus::Vocabulary& vocab, int q);

/// Document-presence counts for a set of terms.
class Incidence {
public:
    /// `x` is any document-term matrix whose columns follow `vocab`; an entry
    /// counts as present when it is positive.
    Incidence(const SparseMatrix& x, const corpus::Vocabulary& vocab);

    // Documents containing the term. Throws UnknownKeyword.
    int doc_count(const std::string& term) const;
    // Documents containing both terms.
    int co_doc_count(const std::string& a, const std::string& b) const;
    Eigen::Index n_docs() const { return n_docs_; }

private:
    const std::vector<Eigen::Index>& docs_of(const std::string& term) const;

    const corpus::Vocabulary* vocab_;
    std::vector<std::vector<Eigen::Index>> docs_; // sorted document ids per column
    Eigen::Index n_docs_ = 0;
};

inline constexpr double kCoherenceSmoothing = 0.01;

/// Mean over topics and keyword pairs (later u, earlier v) of
/// log((D(u, v) + 0.01) / D(v)), normalised by 2 / (K q (q - 1)).
/// Throws UnknownKeyword, and Numerical when a keyword occurs in no document.
double coherence(const TopicKeywords& keywords, const Incidence& incidence);
/// Same sum for one topic, normalised by 2 / (q (q - 1)).
double topic_coherence(std::span<const std::string> keywords, const Incidence& incidence);

/// Mean over topics of the fraction of keywords that appear in no other list.
double uniqueness(const TopicKeywords& keywords);

/// Throw LengthMismatch on unequal or empty input.
double rmse(std::span<const double> truth, std::span<const double> predictions);
double mer(std::span<const int> truth, std::span<const int> predicted);

struct PrevalenceRow {
    ordinal::GroupKey key;
    int topic = 0; // 1-based
    double value = 0.0;
};

/// Column sums of X_ta Lambda for every group.
std::vector<PrevalenceRow> topic_prevalence(const ordinal::GroupedData& data, const Eigen::MatrixXd& lambda);

struct TopicProbabilityRow {
    ordinal::GroupKey key;
    int topic = 0; // 1-based
    int level = 0; // 1-based
    double prob = 0.0;
};

/// Level probabilities of a document whose reduced design is the unit vector
/// of one topic, for every fitted group and topic.
std::vector<TopicProbabilityRow> rating_probability_by_topic(const ordinal::OrdinalModel& model);

// Tidy tables: `t,a,topic,value`, `t,a,topic,level,prob` and
// `topic,rank,term,weight`.
void write_prevalence_csv(std::ostream& out, std::span<const PrevalenceRow> rows);
void write_probability_csv(std::ostream& out, std::span<const TopicProbabilityRow> rows);
void write_keywords_csv(std::ostream& out, const TopicKeywords& keywords);

} // namespace ssmf::metrics
