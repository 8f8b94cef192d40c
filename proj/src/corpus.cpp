#include "ssmf/corpus.hpp"
#include "ssmf/error.hpp"
#include "ssmf/log.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace ssmf::corpus {
namespace {

bool is_token_char(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

char lower(unsigned char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
}

} // namespace

std::vector<std::string> tokenize(std::string_view text, int min_token_len) {
    if (min_token_len < 1)
        fail(ErrorKind::Config, "min_token_len must be >= 1");

    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (static_cast<int>(current.size()) >= min_token_len && !is_stopword(current))
            tokens.push_back(current);
        current.clear();
    };
    for (unsigned char c : text) {
        if (is_token_char(c))
            current.push_back(lower(c));
        else
            flush();
    }
    flush();
    return tokens;
}

TermCounts ngrams(std::span<const std::string> tokens) {
    TermCounts counts;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        ++counts[tokens[i]];
        if (i + 1 < tokens.size())
            ++counts[tokens[i] + ' ' + tokens[i + 1]];
    }
    return counts;
}

Vocabulary::Vocabulary(std::vector<std::string> terms, std::vector<int> doc_freq, int n_train)
    : terms_(std::move(terms)), doc_freq_(std::move(doc_freq)), n_train_(n_train) {
    if (terms_.size() != doc_freq_.size())
        fail(ErrorKind::ShapeMismatch, "vocabulary terms and doc_freq differ in length");
    if (n_train_ < 1)
        fail(ErrorKind::Config, "vocabulary n_train must be positive");
    index_.reserve(terms_.size());
    for (std::size_t j = 0; j < terms_.size(); ++j) {
        if (doc_freq_[j] < 1 || doc_freq_[j] > n_train_)
            fail(ErrorKind::Config, "doc_freq out of range for term '" + terms_[j] + "'");
        if (!index_.emplace(terms_[j], j).second)
            fail(ErrorKind::Config, "duplicate vocabulary term '" + terms_[j] + "'");
    }
}

std::optional<std::size_t> Vocabulary::index_of(std::string_view term) const {
    auto it = index_.find(std::string(term));
    if (it == index_.end())
        return std::nullopt;
    return it->second;
}

double Vocabulary::idf_weight(std::size_t j) const {
    return std::log(static_cast<double>(n_train_) / static_cast<double>(doc_freq_[j]));
}

Vocabulary build_vocabulary(std::span<const TermCounts> docs, int min_df) {
    if (min_df < 1)
        fail(ErrorKind::Config, "min_df must be >= 1");
    if (docs.empty())
        fail(ErrorKind::EmptyVocabulary, "no documents to build a vocabulary from");

    std::map<std::string, int> df;
    for (const auto& doc : docs)
        for (const auto& [term, count] : doc)
            if (count > 0)
                ++df[term];

    std::vector<std::string> terms;
    std::vector<int> freqs;
    for (const auto& [term, f] : df) {
        if (f >= min_df) {
            terms.push_back(term);
            freqs.push_back(f);
        }
    }
    if (terms.empty())
        fail(ErrorKind::EmptyVocabulary,
             "no term occurs in at least " + std::to_string(min_df) + " documents");
    return Vocabulary(std::move(terms), std::move(freqs), static_cast<int>(docs.size()));
}

std::string_view to_string(Weighting w) { return w == Weighting::counts ? "counts" : "tfidf"; }

Weighting parse_weighting(std::string_view s) {
    if (s == "counts")
        return Weighting::counts;
    if (s == "tfidf")
        return Weighting::tfidf;
    fail(ErrorKind::Schema, "unknown weighting '" + std::string(s) + "'");
}

std::string_view to_string(TermFrequency tf) {
    return tf == TermFrequency::count ? "count" : "relative";
}

TermFrequency parse_term_frequency(std::string_view s) {
    if (s == "count")
        return TermFrequency::count;
    if (s == "relative")
        return TermFrequency::relative;
    fail(ErrorKind::Config, "unknown term frequency mode '" + std::string(s) + "'");
}

bool DocumentTermMatrix::is_empty_row(Eigen::Index i) const {
    for (SparseMatrix::InnerIterator it(values, i); it; ++it)
        if (it.value() != 0.0)
            return false;
    return true;
}

std::vector<Eigen::Index> DocumentTermMatrix::empty_rows() const {
    std::vector<Eigen::Index> out;
    for (Eigen::Index i = 0; i < values.rows(); ++i)
        if (is_empty_row(i))
            out.push_back(i);
    return out;
}

DocumentTermMatrix count_matrix(std::span<const TermCounts> docs, const Vocabulary& vocab,
                                std::vector<DocumentMeta> meta) {
    if (!meta.empty() && meta.size() != docs.size())
        fail(ErrorKind::ShapeMismatch, "document metadata length does not match document count");
    if (meta.empty())
        meta.resize(docs.size());

    std::vector<Eigen::Triplet<double>> triplets;
    for (std::size_t i = 0; i < docs.size(); ++i)
        for (const auto& [term, count] : docs[i])
            if (auto j = vocab.index_of(term); j && count > 0)
                triplets.emplace_back(static_cast<int>(i), static_cast<int>(*j), count);

    DocumentTermMatrix dtm;
    dtm.values.resize(static_cast<Eigen::Index>(docs.size()), static_cast<Eigen::Index>(vocab.size()));
    dtm.values.setFromTriplets(triplets.begin(), triplets.end());
    dtm.values.makeCompressed();
    dtm.rows = std::move(meta);
    dtm.weighting = Weighting::counts;

    auto empty = dtm.empty_rows();
    if (!empty.empty())
        log::warn(std::to_string(empty.size()) + " document(s) have no in-vocabulary terms");
    return dtm;
}

DocumentTermMatrix tfidf(const DocumentTermMatrix& counts, const Vocabulary& vocab, TermFrequency tf) {
    if (counts.weighting != Weighting::counts)
        fail(ErrorKind::Config, "tfidf expects a counts-weighted matrix");
    if (counts.values.cols() != static_cast<Eigen::Index>(vocab.size()))
        fail(ErrorKind::ShapeMismatch, "matrix columns do not match vocabulary size");

    std::vector<double> idf(vocab.size());
    for (std::size_t j = 0; j < vocab.size(); ++j)
        idf[j] = vocab.idf_weight(j);

    DocumentTermMatrix out = counts;
    for (Eigen::Index i = 0; i < out.values.outerSize(); ++i) {
        double total = 1.0;
        if (tf == TermFrequency::relative) {
            total = 0.0;
            for (SparseMatrix::InnerIterator it(out.values, i); it; ++it)
                total += it.value();
            if (total <= 0.0)
                total = 1.0;
        }
        for (SparseMatrix::InnerIterator it(out.values, i); it; ++it)
            it.valueRef() = it.value() / total * idf[static_cast<std::size_t>(it.col())];
    }
    out.weighting = Weighting::tfidf;
    return out;
}

Eigen::VectorXd vectorize_new(const TermCounts& doc, const Vocabulary& vocab, TermFrequency tf) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(vocab.size()));
    double total = 0.0;
    for (const auto& [term, count] : doc) {
        if (auto j = vocab.index_of(term); j && count > 0) {
            x[static_cast<Eigen::Index>(*j)] = count;
            total += count;
        }
    }
    const double scale = (tf == TermFrequency::relative && total > 0.0) ? 1.0 / total : 1.0;
    for (Eigen::Index j = 0; j < x.size(); ++j)
        if (x[j] != 0.0)
            x[j] *= scale * vocab.idf_weight(static_cast<std::size_t>(j));
    return x;
}

} // namespace ssmf::corpus
