#pragma once

#include "ssmf/corpus.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace ssmf::corpus {

/// Splits CSV text into records of fields (RFC 4180 quoting; embedded
/// newlines allowed inside quotes). Each record remembers the line it started on.
struct CsvRecord {
    std::size_t line = 0;
    std::vector<std::string> fields;
};
std::vector<CsvRecord> parse_csv(std::istream& in);

/// Reads `id,app,time_bucket,rating,text` (header required, column order
/// free). Ratings must be integers in 1..levels. Throws SchemaError naming
/// the missing column or offending row.
std::vector<ReviewRecord> read_reviews(std::istream& in, int levels);
std::vector<ReviewRecord> read_reviews(const std::filesystem::path& path, int levels);
void write_reviews(std::ostream& out, const std::vector<ReviewRecord>& reviews);

// "# n_train=<n>" followed by a `term,doc_freq` header and one line per term.
void write_vocabulary(std::ostream& out, const Vocabulary& vocab);
Vocabulary read_vocabulary(std::istream& in);

// A matrix is stored as `<stem>.dtm.csv` (row,col,value triplets, nonzeros
// only) plus a `<stem>.meta.json` sidecar with dimensions, weighting and one
// metadata object per row.
void write_matrix(const std::filesystem::path& dir, const std::string& stem, const DocumentTermMatrix& m);
DocumentTermMatrix read_matrix(const std::filesystem::path& dir, const std::string& stem);

// Shortest decimal text that round-trips the double exactly.
std::string format_double(double v);

} // namespace ssmf::corpus
