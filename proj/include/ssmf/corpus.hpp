#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ssmf {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

} // namespace ssmf

namespace ssmf::corpus {

struct ReviewRecord {
    std::string id;
    std::string app;
    std::string time_bucket;
    int rating = 0;
    std::string text;
};

// Ordered term multiset for one document: term -> occurrence count.
using TermCounts = std::map<std::string, int>;

inline constexpr int kDefaultMinTokenLength = 3;
inline constexpr int kDefaultMinDocFreq = 20;

/// Lowercases, splits on every character that is not an ASCII letter or
/// digit, then drops stopwords and tokens shorter than `min_token_len`.
/// Token order is preserved.
std::vector<std::string> tokenize(std::string_view text, int min_token_len = kDefaultMinTokenLength);

/// All unigrams plus adjacent-pair bigrams ("a b") over an already filtered
/// token sequence.
TermCounts ngrams(std::span<const std::string> tokens);

inline TermCounts preprocess(std::string_view text, int min_token_len = kDefaultMinTokenLength) {
    auto tokens = tokenize(text, min_token_len);
    return ngrams(tokens);
}

const std::vector<std::string>& stoplist();
std::string_view stoplist_version();
bool is_stopword(std::string_view token);

class Vocabulary {
public:
    Vocabulary() = default;
    Vocabulary(std::vector<std::string> terms, std::vector<int> doc_freq, int n_train);

    std::size_t size() const { return terms_.size(); }
    const std::vector<std::string>& terms() const { return terms_; }
    const std::string& term(std::size_t j) const { return terms_[j]; }
    int doc_freq(std::size_t j) const { return doc_freq_[j]; }
    const std::vector<int>& doc_freqs() const { return doc_freq_; }
    int n_train() const { return n_train_; }
    std::optional<std::size_t> index_of(std::string_view term) const;

    // ln(n_train / doc_freq_j)
    double idf_weight(std::size_t j) const;

private:
    std::vector<std::string> terms_;
    std::vector<int> doc_freq_;
    int n_train_ = 0;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Keeps terms that occur in at least `min_df` documents, sorted
/// lexicographically (byte order). Throws EmptyVocabulary when nothing
/// survives.
Vocabulary build_vocabulary(std::span<const TermCounts> docs, int min_df = kDefaultMinDocFreq);

enum class Weighting { counts, tfidf };

// How raw counts enter the TFIDF product. `count` uses the word count as the
// term frequency; `relative` divides it by the document's in-vocabulary total.
enum class TermFrequency { count, relative };

std::string_view to_string(Weighting w);
Weighting parse_weighting(std::string_view s);
std::string_view to_string(TermFrequency tf);
TermFrequency parse_term_frequency(std::string_view s);

struct DocumentMeta {
    std::string id;
    std::string app;
    std::string time_bucket;
    int rating = 0;
};

struct DocumentTermMatrix {
    SparseMatrix values;
    std::vector<DocumentMeta> rows;
    Weighting weighting = Weighting::counts;

    Eigen::Index n_docs() const { return values.rows(); }
    Eigen::Index n_terms() const { return values.cols(); }
    bool is_empty_row(Eigen::Index i) const;
    std::vector<Eigen::Index> empty_rows() const;
};

/// Entry (i, j) is the count of vocabulary term j in document i. Terms outside
/// the vocabulary are dropped; documents left with no terms stay as zero rows
/// and are reported through a warning. `meta` may be empty or have one entry
/// per document.
DocumentTermMatrix count_matrix(std::span<const TermCounts> docs, const Vocabulary& vocab,
                                std::vector<DocumentMeta> meta = {});

/// TF_ij * ln(n_train / doc_freq_j) using the vocabulary's training document
/// frequencies. Rejects input that is already TFIDF-weighted.
DocumentTermMatrix tfidf(const DocumentTermMatrix& counts, const Vocabulary& vocab,
                         TermFrequency tf = TermFrequency::count);

/// TFIDF row for an unseen document using the training IDF; unseen terms are
/// ignored.
Eigen::VectorXd vectorize_new(const TermCounts& doc, const Vocabulary& vocab,
                              TermFrequency tf = TermFrequency::count);

} // namespace ssmf::corpus
