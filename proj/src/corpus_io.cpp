#include "ssmf/corpus_io.hpp"
#include "ssmf/error.hpp"

#include "json.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace ssmf::corpus {
namespace {

using nlohmann::json;

std::string quote_csv(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out += "\"\"";
        else
            out += c;
    }
    out += '"';
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorKind::Io, "cannot open '" + path.string() + "' for reading");
    return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        fail(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
    return out;
}

template <typename T>
T parse_number(const std::string& s, const std::string& what) {
    T value{};
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (ec != std::errc() || ptr != end)
        fail(ErrorKind::Schema, "cannot parse " + what + " '" + s + "'");
    return value;
}

} // namespace

std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

std::vector<CsvRecord> parse_csv(std::istream& in) {
    std::vector<CsvRecord> records;
    CsvRecord current;
    std::string field;
    bool in_quotes = false;
    bool record_started = false;
    std::size_t line = 1;
    current.line = line;

    auto end_field = [&] {
        current.fields.push_back(std::move(field));
        field.clear();
    };
    auto end_record = [&] {
        end_field();
        records.push_back(std::move(current));
        current = CsvRecord{};
        record_started = false;
    };

    char c;
    while (in.get(c)) {
        if (!record_started) {
            current.line = line;
            record_started = true;
        }
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field += '"';
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n')
                    ++line;
                field += c;
            }
            continue;
        }
        switch (c) {
        case '"':
            in_quotes = true;
            break;
        case ',':
            end_field();
            break;
        case '\r':
            break;
        case '\n':
            ++line;
            end_record();
            break;
        default:
            field += c;
        }
    }
    if (in_quotes)
        fail(ErrorKind::Schema, "unterminated quoted field starting near line " + std::to_string(current.line));
    if (record_started)
        end_record();
    return records;
}

std::vector<ReviewRecord> read_reviews(std::istream& in, int levels) {
    auto records = parse_csv(in);
    if (records.empty())
        fail(ErrorKind::Schema, "empty review file: missing header row");

    static const std::array<std::string, 5> required = {"id", "app", "time_bucket", "rating", "text"};
    std::map<std::string, std::size_t> column;
    const auto& header = records.front().fields;
    for (std::size_t c = 0; c < header.size(); ++c) {
        std::string name = header[c];
        if (c == 0 && name.rfind("\xEF\xBB\xBF", 0) == 0)
            name.erase(0, 3);
        column[name] = c;
    }
    for (const auto& name : required)
        if (!column.contains(name))
            fail(ErrorKind::Schema, "missing required column '" + name + "'");

    std::vector<ReviewRecord> reviews;
    reviews.reserve(records.size() - 1);
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.fields.size() == 1 && rec.fields[0].empty())
            continue;
        const std::string where = "row " + std::to_string(r) + " (line " + std::to_string(rec.line) + ")";
        if (rec.fields.size() != header.size())
            fail(ErrorKind::Schema, where + ": expected " + std::to_string(header.size()) + " fields, found " +
                                        std::to_string(rec.fields.size()));
        ReviewRecord review;
        review.id = rec.fields[column["id"]];
        review.app = rec.fields[column["app"]];
        review.time_bucket = rec.fields[column["time_bucket"]];
        review.text = rec.fields[column["text"]];
        const auto& rating = rec.fields[column["rating"]];
        int value = 0;
        auto [ptr, ec] = std::from_chars(rating.data(), rating.data() + rating.size(), value);
        if (ec != std::errc() || ptr != rating.data() + rating.size())
            fail(ErrorKind::Schema, where + ": rating '" + rating + "' is not an integer");
        if (value < 1 || value > levels)
            fail(ErrorKind::Schema, where + ": rating " + rating + " outside 1.." + std::to_string(levels));
        review.rating = value;
        if (review.time_bucket.empty())
            fail(ErrorKind::Schema, where + ": empty time_bucket");
        if (review.app.empty())
            fail(ErrorKind::Schema, where + ": empty app");
        reviews.push_back(std::move(review));
    }
    return reviews;
}

std::vector<ReviewRecord> read_reviews(const std::filesystem::path& path, int levels) {
    auto in = open_in(path);
    return read_reviews(in, levels);
}

void write_reviews(std::ostream& out, const std::vector<ReviewRecord>& reviews) {
    out << "id,app,time_bucket,rating,text\n";
    for (const auto& r : reviews)
        out << quote_csv(r.id) << ',' << quote_csv(r.app) << ',' << quote_csv(r.time_bucket) << ','
            << r.rating << ',' << quote_csv(r.text) << '\n';
}

void write_vocabulary(std::ostream& out, const Vocabulary& vocab) {
    out << "# n_train=" << vocab.n_train() << '\n';
    out << "term,doc_freq\n";
    for (std::size_t j = 0; j < vocab.size(); ++j)
        out << vocab.term(j) << ',' << vocab.doc_freq(j) << '\n';
}

Vocabulary read_vocabulary(std::istream& in) {
    std::string line;
    int n_train = -1;
    std::vector<std::string> terms;
    std::vector<int> freqs;
    bool seen_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        if (line.rfind("# n_train=", 0) == 0) {
            n_train = parse_number<int>(line.substr(10), "n_train");
            continue;
        }
        if (!seen_header) {
            if (line != "term,doc_freq")
                fail(ErrorKind::Schema, "vocabulary file lacks 'term,doc_freq' header");
            seen_header = true;
            continue;
        }
        auto comma = line.rfind(',');
        if (comma == std::string::npos)
            fail(ErrorKind::Schema, "malformed vocabulary line '" + line + "'");
        terms.push_back(line.substr(0, comma));
        freqs.push_back(parse_number<int>(line.substr(comma + 1), "doc_freq"));
    }
    if (n_train < 0)
        fail(ErrorKind::Schema, "vocabulary file lacks '# n_train=' line");
    return Vocabulary(std::move(terms), std::move(freqs), n_train);
}

void write_matrix(const std::filesystem::path& dir, const std::string& stem, const DocumentTermMatrix& m) {
    {
        auto out = open_out(dir / (stem + ".dtm.csv"));
        out << "row,col,value\n";
        for (Eigen::Index i = 0; i < m.values.outerSize(); ++i)
            for (SparseMatrix::InnerIterator it(m.values, i); it; ++it)
                if (it.value() != 0.0)
                    out << i << ',' << it.col() << ',' << format_double(it.value()) << '\n';
    }
    json meta;
    meta["format"] = "ssmf-dtm";
    meta["version"] = 1;
    meta["rows"] = m.values.rows();
    meta["cols"] = m.values.cols();
    meta["weighting"] = std::string(to_string(m.weighting));
    json docs = json::array();
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
        const auto& d = m.rows[i];
        docs.push_back({{"id", d.id},
                        {"app", d.app},
                        {"time_bucket", d.time_bucket},
                        {"rating", d.rating},
                        {"empty", m.is_empty_row(static_cast<Eigen::Index>(i))}});
    }
    meta["documents"] = std::move(docs);
    auto out = open_out(dir / (stem + ".meta.json"));
    out << meta.dump(1) << '\n';
}

DocumentTermMatrix read_matrix(const std::filesystem::path& dir, const std::string& stem) {
    json meta;
    {
        auto in = open_in(dir / (stem + ".meta.json"));
        try {
            in >> meta;
        } catch (const json::exception& e) {
            fail(ErrorKind::Schema, "malformed matrix metadata: " + std::string(e.what()));
        }
    }
    DocumentTermMatrix m;
    Eigen::Index rows = 0, cols = 0;
    try {
        rows = meta.at("rows").get<Eigen::Index>();
        cols = meta.at("cols").get<Eigen::Index>();
        m.weighting = parse_weighting(meta.at("weighting").get<std::string>());
        for (const auto& d : meta.at("documents"))
            m.rows.push_back({d.at("id").get<std::string>(), d.at("app").get<std::string>(),
                              d.at("time_bucket").get<std::string>(), d.at("rating").get<int>()});
    } catch (const json::exception& e) {
        fail(ErrorKind::Schema, "matrix metadata field error: " + std::string(e.what()));
    }
    if (static_cast<Eigen::Index>(m.rows.size()) != rows)
        fail(ErrorKind::Schema, "matrix metadata row count mismatch");

    auto in = open_in(dir / (stem + ".dtm.csv"));
    auto records = parse_csv(in);
    if (records.empty() || records.front().fields != std::vector<std::string>{"row", "col", "value"})
        fail(ErrorKind::Schema, "matrix file lacks 'row,col,value' header");
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(records.size());
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& f = records[r].fields;
        if (f.size() != 3)
            fail(ErrorKind::Schema, "matrix line " + std::to_string(records[r].line) + " is not a triplet");
        auto i = parse_number<long>(f[0], "row index");
        auto j = parse_number<long>(f[1], "column index");
        auto v = parse_number<double>(f[2], "value");
        if (i < 0 || i >= rows || j < 0 || j >= cols)
            fail(ErrorKind::Schema, "matrix entry out of bounds at line " + std::to_string(records[r].line));
        if (v < 0.0)
            fail(ErrorKind::Schema, "negative matrix entry at line " + std::to_string(records[r].line));
        triplets.emplace_back(static_cast<int>(i), static_cast<int>(j), v);
    }
    m.values.resize(rows, cols);
    m.values.setFromTriplets(triplets.begin(), triplets.end());
    m.values.makeCompressed();
    return m;
}

} // namespace ssmf::corpus
