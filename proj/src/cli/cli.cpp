#include "ssmf/cli.hpp"

#include "common.hpp"

#include "ssmf/corpus.hpp"
#include "ssmf/corpus_io.hpp"
#include "ssmf/error.hpp"
#include "ssmf/factorization.hpp"
#include "ssmf/fixture.hpp"
#include "ssmf/log.hpp"
#include "ssmf/metrics.hpp"
#include "ssmf/model_io.hpp"
#include "ssmf/ordinal.hpp"
#include "ssmf/rng.hpp"
#include "ssmf/simgen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

namespace ssmf::cli {
namespace {

using Clock = std::chrono::steady_clock;

corpus::Vocabulary load_vocabulary(const fs::path& dir) {
    std::ifstream in(dir / "vocab.csv", std::ios::binary);
    if (!in)
        fail(ErrorKind::Io, "cannot open '" + (dir / "vocab.csv").string() + "'");
    return corpus::read_vocabulary(in);
}

std::vector<int> ratings_of(const corpus::DocumentTermMatrix& m) {
    std::vector<int> r;
    r.reserve(m.rows.size());
    for (const auto& d : m.rows)
        r.push_back(d.rating);
    return r;
}

corpus::DocumentTermMatrix subset_rows(const corpus::DocumentTermMatrix& m, const std::vector<Eigen::Index>& rows) {
    corpus::DocumentTermMatrix out;
    out.weighting = m.weighting;
    std::vector<Eigen::Triplet<double>> triplets;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (SparseMatrix::InnerIterator it(m.values, rows[r]); it; ++it)
            triplets.emplace_back(static_cast<int>(r), static_cast<int>(it.col()), it.value());
        out.rows.push_back(m.rows[static_cast<std::size_t>(rows[r])]);
    }
    out.values.resize(static_cast<Eigen::Index>(rows.size()), m.values.cols());
    out.values.setFromTriplets(triplets.begin(), triplets.end());
    out.values.makeCompressed();
    return out;
}

void check_levels(const corpus::DocumentTermMatrix& m, int levels) {
    for (const auto& d : m.rows)
        if (d.rating < 1 || d.rating > levels)
            fail(ErrorKind::OutOfRangeRating, "document '" + d.id + "' has rating " + std::to_string(d.rating) +
                                                  " outside 1.." + std::to_string(levels));
}

// "2..20" or "2,3,5".
std::vector<int> parse_topic_range(const std::string& s) {
    std::vector<int> out;
    auto to_int = [&](const std::string& t) {
        int v = 0;
        auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc() || ptr != t.data() + t.size() || v < 1)
            fail(ErrorKind::Config, "bad topic count '" + t + "' in '" + s + "'");
        return v;
    };
    if (auto dots = s.find(".."); dots != std::string::npos) {
        const int lo = to_int(s.substr(0, dots));
        const int hi = to_int(s.substr(dots + 2));
        if (hi < lo)
            fail(ErrorKind::Config, "empty topic range '" + s + "'");
        for (int m = lo; m <= hi; ++m)
            out.push_back(m);
        return out;
    }
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(to_int(item));
    if (out.empty())
        fail(ErrorKind::Config, "empty topic list");
    return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& s, const std::function<T(const std::string&)>& conv) {
    std::vector<T> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty())
            out.push_back(conv(item));
    if (out.empty())
        fail(ErrorKind::Config, "empty list '" + s + "'");
    return out;
}

int to_positive_int(const std::string& t) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || v < 1)
        fail(ErrorKind::Config, "expected a positive integer, got '" + t + "'");
    return v;
}

struct OrdinalPrediction {
    std::vector<Eigen::VectorXd> probs;
    std::vector<int> levels;
    std::vector<std::string> keys;
};

OrdinalPrediction predict_ordinal(const ordinal::OrdinalModel& model, const corpus::DocumentTermMatrix& m,
                                  const std::optional<std::string>& coef_time) {
    if (m.values.cols() != model.lambda.rows())
        fail(ErrorKind::ShapeMismatch, "matrix columns do not match the model's vocabulary");
    OrdinalPrediction out;
    const Eigen::MatrixXd reduced = m.values * model.lambda;
    for (Eigen::Index i = 0; i < reduced.rows(); ++i) {
        const auto& meta = m.rows[static_cast<std::size_t>(i)];
        const auto key = ordinal::resolve_key(model, {meta.time_bucket, meta.app}, coef_time);
        const Eigen::VectorXd probs =
            ordinal::predict_rating_probs_reduced(reduced.row(i).transpose(), model.params.at(key));
        out.levels.push_back(ordinal::argmax_level(probs));
        out.probs.push_back(probs);
        out.keys.push_back(key.to_string());
    }
    return out;
}

double rounded_mer(std::span<const int> truth, const Eigen::VectorXd& pred, int levels) {
    std::vector<int> lv;
    for (Eigen::Index i = 0; i < pred.size(); ++i)
        lv.push_back(std::clamp(static_cast<int>(std::lround(pred[i])), 1, levels));
    return metrics::mer(truth, lv);
}

Eigen::VectorXd as_double(std::span<const int> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i)
        out[static_cast<Eigen::Index>(i)] = v[i];
    return out;
}

double majority_mer(std::span<const int> truth) {
    std::map<int, int> freq;
    for (int y : truth)
        ++freq[y];
    int best = 0;
    for (const auto& [level, count] : freq)
        best = std::max(best, count);
    return 1.0 - static_cast<double>(best) / static_cast<double>(truth.size());
}

ordinal::OrdinalModel fit_ordinal_matrix(const corpus::DocumentTermMatrix& m, int topics, int levels,
                                         ordinal::ModelKind kind, const FitConfig& config) {
    return ordinal::fit_ordinal(ordinal::group_documents(m), topics, levels, kind, config);
}

struct CvRow {
    int topics = 0;
    double score = 0.0;
    int scored = 0;
};

// K-fold selection of the topic count; ordinal models are scored by MER,
// the normal model by RMSE on the ratings.
std::vector<CvRow> cross_validate(const corpus::DocumentTermMatrix& m, const std::vector<int>& candidates, int folds,
                                  const std::string& model, int levels, const FitConfig& config) {
    const auto n = static_cast<Eigen::Index>(m.rows.size());
    if (folds < 2 || folds > n)
        fail(ErrorKind::Config, "folds must lie in 2..n_docs");
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Rng rng(derive_seed(config.seed, 0xCF));
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> fold_of(static_cast<std::size_t>(n));
    for (std::size_t pos = 0; pos < order.size(); ++pos)
        fold_of[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos % static_cast<std::size_t>(folds));

    std::vector<CvRow> rows;
    for (int topics : candidates) {
        double wrong_or_ss = 0.0;
        int scored = 0;
        for (int f = 0; f < folds; ++f) {
            std::vector<Eigen::Index> train_rows, test_rows;
            for (Eigen::Index i = 0; i < n; ++i)
                (fold_of[static_cast<std::size_t>(i)] == f ? test_rows : train_rows).push_back(i);
            const auto train = subset_rows(m, train_rows);
            const auto test = subset_rows(m, test_rows);
            const auto truth = ratings_of(test);
            if (model == "normal") {
                const auto fit = fit_normal(train.values, as_double(ratings_of(train)), topics, config);
                const Eigen::VectorXd pred = predict_normal(test.values, fit);
                for (std::size_t i = 0; i < truth.size(); ++i)
                    wrong_or_ss += std::pow(truth[i] - pred[static_cast<Eigen::Index>(i)], 2);
                scored += static_cast<int>(truth.size());
                continue;
            }
            const auto fit = fit_ordinal_matrix(train, topics, levels, ordinal::parse_model_kind(model), config);
            const Eigen::MatrixXd reduced = test.values * fit.lambda;
            for (std::size_t i = 0; i < truth.size(); ++i) {
                const auto& meta = test.rows[i];
                ordinal::GroupKey key;
                try {
                    key = ordinal::resolve_key(fit, {meta.time_bucket, meta.app});
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::UnknownGroupKey)
                        throw;
                    continue;
                }
                const auto probs = ordinal::predict_rating_probs_reduced(
                    reduced.row(static_cast<Eigen::Index>(i)).transpose(), fit.params.at(key));
                wrong_or_ss += ordinal::argmax_level(probs) != truth[i];
                ++scored;
            }
        }
        if (scored == 0)
            fail(ErrorKind::Config, "cross-validation scored no documents");
        const double score = model == "normal" ? std::sqrt(wrong_or_ss / scored) : wrong_or_ss / scored;
        rows.push_back({topics, score, scored});
    }
    return rows;
}

// ---------------------------------------------------------------- prep

struct PrepOptions {
    std::string input;
    std::string out;
    int levels = 5;
    int min_df = corpus::kDefaultMinDocFreq;
    int min_token_len = corpus::kDefaultMinTokenLength;
    std::string weighting = "tfidf";
    std::string tf = "count";
    std::string holdout = "last";
};

void cmd_prep(const PrepOptions& o, const json& echo, std::uint64_t seed, std::ostream& out) {
    const auto start = Clock::now();
    if (o.holdout != "last" && o.holdout != "none")
        fail(ErrorKind::Config, "holdout must be 'last' or 'none'");
    const auto weighting = corpus::parse_weighting(o.weighting);
    const auto tf = corpus::parse_term_frequency(o.tf);
    const auto reviews = corpus::read_reviews(fs::path(o.input), o.levels);
    if (reviews.empty())
        fail(ErrorKind::Schema, "review file has no data rows");
    for (std::size_t i = 0; i < reviews.size(); ++i)
        if (reviews[i].app.find('|') != std::string::npos || reviews[i].time_bucket.find('|') != std::string::npos)
            fail(ErrorKind::Schema, "row " + std::to_string(i + 1) + ": '|' is not allowed in app or time_bucket");

    // Each app's last observed period is held out; an app seen in a single
    // period stays in training.
    std::map<std::string, std::set<std::string>> periods;
    for (const auto& r : reviews)
        periods[r.app].insert(r.time_bucket);
    for (const auto& [app, times] : periods)
        if (o.holdout == "last" && times.size() == 1)
            log::warn("app '" + app + "' has a single period; all of its documents stay in training");
    std::vector<const corpus::ReviewRecord*> train, test;
    for (const auto& r : reviews) {
        const auto& times = periods.at(r.app);
        const bool held = o.holdout == "last" && times.size() > 1 && r.time_bucket == *times.rbegin();
        (held ? test : train).push_back(&r);
    }

    auto featurize = [&](const std::vector<const corpus::ReviewRecord*>& part) {
        std::vector<corpus::TermCounts> docs;
        std::vector<corpus::DocumentMeta> meta;
        for (const auto* r : part) {
            docs.push_back(corpus::preprocess(r->text, o.min_token_len));
            meta.push_back({r->id, r->app, r->time_bucket, r->rating});
        }
        return std::pair{std::move(docs), std::move(meta)};
    };
    auto [train_docs, train_meta] = featurize(train);
    const auto vocab = corpus::build_vocabulary(train_docs, o.min_df);
    auto weigh = [&](corpus::DocumentTermMatrix counts) {
        return weighting == corpus::Weighting::tfidf ? corpus::tfidf(counts, vocab, tf) : counts;
    };

    const fs::path dir(o.out);
    fs::create_directories(dir);
    std::vector<fs::path> outputs{dir / "vocab.csv"};
    {
        auto f = open_output(dir / "vocab.csv");
        corpus::write_vocabulary(f, vocab);
    }
    std::map<std::tuple<std::string, std::string, std::string>, int> group_sizes;
    const auto train_m = weigh(corpus::count_matrix(train_docs, vocab, std::move(train_meta)));
    corpus::write_matrix(dir, "train", train_m);
    outputs.insert(outputs.end(), {dir / "train.dtm.csv", dir / "train.meta.json"});
    for (const auto& d : train_m.rows)
        ++group_sizes[{"train", d.time_bucket, d.app}];
    if (!test.empty()) {
        auto [test_docs, test_meta] = featurize(test);
        const auto test_m = weigh(corpus::count_matrix(test_docs, vocab, std::move(test_meta)));
        corpus::write_matrix(dir, "test", test_m);
        outputs.insert(outputs.end(), {dir / "test.dtm.csv", dir / "test.meta.json"});
        for (const auto& d : test_m.rows)
            ++group_sizes[{"test", d.time_bucket, d.app}];
    }
    {
        auto f = open_output(dir / "groups.csv");
        f << "split,t,a,n_docs\n";
        for (const auto& [key, count] : group_sizes)
            f << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key) << ',' << count << '\n';
        outputs.push_back(dir / "groups.csv");
    }
    append_manifest(dir, {"prep", echo, {fs::path(o.input)}, seed, outputs}, start);
    out << "prep: " << train.size() << " training and " << test.size() << " test documents, " << vocab.size()
        << " terms\n";
}

// ---------------------------------------------------------------- fit

struct FitOptions {
    std::string data;
    std::string split = "train";
    std::string model = "ordinal";
    int topics = 5;
    int levels = 5;
    std::string cv_topics;
    int folds = 5;
    std::string out;
    std::string cv_out;
};

void cmd_fit(const FitOptions& o, const FitConfig& config, const json& echo, std::ostream& out) {
    const auto start = Clock::now();
    if (o.model != "normal" && o.model != "ordinal" && o.model != "constrained" && o.model != "saturated")
        fail(ErrorKind::Config, "model must be normal, ordinal or saturated");
    const fs::path dir(o.data);
    const auto m = corpus::read_matrix(dir, o.split);
    check_levels(m, o.levels);
    std::vector<fs::path> inputs{dir / (o.split + ".dtm.csv"), dir / (o.split + ".meta.json")};
    std::vector<fs::path> outputs{fs::path(o.out)};

    int topics = o.topics;
    if (!o.cv_topics.empty()) {
        const auto rows = cross_validate(m, parse_topic_range(o.cv_topics), o.folds, o.model, o.levels, config);
        auto best = std::min_element(rows.begin(), rows.end(),
                                     [](const CvRow& a, const CvRow& b) { return a.score < b.score; });
        topics = best->topics;
        const fs::path cv_path = o.cv_out.empty() ? fs::path(o.out + ".cv.csv") : fs::path(o.cv_out);
        auto f = open_output(cv_path);
        f << "topics," << (o.model == "normal" ? "rmse" : "mer") << ",scored\n";
        for (const auto& r : rows)
            f << r.topics << ',' << corpus::format_double(r.score) << ',' << r.scored << '\n';
        outputs.push_back(cv_path);
        out << "cv: selected " << topics << " topics\n";
    }

    if (o.model == "normal") {
        const auto fit = fit_normal(m.values, as_double(ratings_of(m)), topics, config);
        model_io::save(o.out, fit);
        out << "fit: normal, " << topics << " topics, " << fit.iterations << " iterations, objective "
            << fit.objective_trace.back() << (fit.converged ? "" : " (not converged)") << '\n';
    } else {
        const auto fit = fit_ordinal_matrix(m, topics, o.levels, ordinal::parse_model_kind(o.model), config);
        model_io::save(o.out, fit);
        out << "fit: " << ordinal::to_string(fit.kind) << ", " << topics << " topics, " << fit.params.size()
            << " groups, " << fit.iterations << " iterations, log-likelihood " << fit.loglik_trace.back()
            << (fit.converged ? "" : " (not converged)") << '\n';
    }
    append_manifest(parent_or_cwd(o.out), {"fit", echo, inputs, config.seed, outputs}, start);
}

// ---------------------------------------------------------------- predict / eval

struct PredictOptions {
    std::string model;
    std::string data;
    std::string split = "test";
    std::string out;
    std::string coef_time;
};

void cmd_predict(const PredictOptions& o, const json& echo, std::uint64_t seed, std::ostream& out) {
    const auto start = Clock::now();
    const fs::path dir(o.data);
    const auto m = corpus::read_matrix(dir, o.split);
    const auto model = model_io::load(o.model);
    auto f = open_output(o.out);
    if (const auto* normal = std::get_if<NormalFit>(&model)) {
        const Eigen::VectorXd pred = predict_normal(m.values, *normal);
        f << "id,app,time_bucket,rating,prediction\n";
        for (std::size_t i = 0; i < m.rows.size(); ++i) {
            const auto& d = m.rows[i];
            f << d.id << ',' << d.app << ',' << d.time_bucket << ',' << d.rating << ','
              << corpus::format_double(pred[static_cast<Eigen::Index>(i)]) << '\n';
        }
    } else {
        const auto& ord = std::get<ordinal::OrdinalModel>(model);
        const std::optional<std::string> pin = o.coef_time.empty() ? std::nullopt : std::optional(o.coef_time);
        const auto pred = predict_ordinal(ord, m, pin);
        f << "id,app,time_bucket,rating,predicted,coef_group";
        for (int k = 1; k <= ord.levels; ++k)
            f << ",p" << k;
        f << '\n';
        for (std::size_t i = 0; i < m.rows.size(); ++i) {
            const auto& d = m.rows[i];
            f << d.id << ',' << d.app << ',' << d.time_bucket << ',' << d.rating << ',' << pred.levels[i] << ','
              << pred.keys[i];
            for (Eigen::Index k = 0; k < pred.probs[i].size(); ++k)
                f << ',' << corpus::format_double(pred.probs[i][k]);
            f << '\n';
        }
    }
    f.close();
    append_manifest(parent_or_cwd(o.out),
                    {"predict", echo, {fs::path(o.model), dir / (o.split + ".dtm.csv")}, seed, {fs::path(o.out)}},
                    start);
    out << "predict: " << m.rows.size() << " documents\n";
}

struct EvalOptions {
    std::string model;
    std::string data;
    std::string split = "test";
    std::string out;
    std::string coef_time;
    int levels = 5;
};

void cmd_eval(const EvalOptions& o, const json& echo, std::uint64_t seed, std::ostream& out) {
    const auto start = Clock::now();
    const fs::path dir(o.data);
    const auto m = corpus::read_matrix(dir, o.split);
    const auto model = model_io::load(o.model);
    const auto truth = ratings_of(m);
    if (truth.empty())
        fail(ErrorKind::Config, "split '" + o.split + "' has no documents");
    json scores;
    scores["split"] = o.split;
    scores["n"] = truth.size();
    scores["baseline_mer"] = majority_mer(truth);
    const Eigen::VectorXd y = as_double(truth);
    if (const auto* normal = std::get_if<NormalFit>(&model)) {
        const Eigen::VectorXd pred = predict_normal(m.values, *normal);
        scores["model"] = "normal";
        scores["rmse"] = metrics::rmse({y.data(), truth.size()}, {pred.data(), truth.size()});
        scores["mer"] = rounded_mer(truth, pred, o.levels);
    } else {
        const auto& ord = std::get<ordinal::OrdinalModel>(model);
        const std::optional<std::string> pin = o.coef_time.empty() ? std::nullopt : std::optional(o.coef_time);
        const auto pred = predict_ordinal(ord, m, pin);
        const Eigen::VectorXd lv = as_double(pred.levels);
        scores["model"] = std::string(ordinal::to_string(ord.kind));
        scores["mer"] = metrics::mer(truth, pred.levels);
        scores["rmse"] = metrics::rmse({y.data(), truth.size()}, {lv.data(), truth.size()});
    }
    const std::string text = scores.dump(1) + "\n";
    out << text;
    std::vector<fs::path> outputs;
    if (!o.out.empty()) {
        auto f = open_output(o.out);
        f << text;
        outputs.push_back(o.out);
    }
    append_manifest(o.out.empty() ? fs::path(o.data) : parent_or_cwd(o.out),
                    {"eval", echo, {fs::path(o.model), dir / (o.split + ".dtm.csv")}, seed, outputs}, start);
}

// ---------------------------------------------------------------- report

struct ReportOptions {
    std::string model;
    std::string data;
    std::string split = "train";
    std::string out;
    int q = metrics::kDisplayKeywords;
    int metric_q = metrics::kMetricKeywords;
};

void cmd_report(const ReportOptions& o, const json& echo, std::uint64_t seed, std::ostream& out) {
    const auto start = Clock::now();
    const fs::path dir(o.data);
    const auto model_any = model_io::load(o.model);
    const auto* model = std::get_if<ordinal::OrdinalModel>(&model_any);
    if (!model)
        fail(ErrorKind::Config, "report needs an ordinal model");
    const auto vocab = load_vocabulary(dir);
    const auto m = corpus::read_matrix(dir, o.split);
    if (m.values.cols() != model->lambda.rows())
        fail(ErrorKind::ShapeMismatch, "matrix columns do not match the model's vocabulary");
    const fs::path odir(o.out);
    fs::create_directories(odir);

    const auto grouped = ordinal::group_documents(m);
    {
        auto f = open_output(odir / "prevalence.csv");
        metrics::write_prevalence_csv(f, metrics::topic_prevalence(grouped, model->lambda));
    }
    {
        auto f = open_output(odir / "probabilities.csv");
        metrics::write_probability_csv(f, metrics::rating_probability_by_topic(*model));
    }
    const auto p = static_cast<int>(vocab.size());
    const auto display = metrics::top_keywords(model->lambda, vocab, std::min(o.q, p));
    {
        auto f = open_output(odir / "keywords.csv");
        metrics::write_keywords_csv(f, display);
    }
    const auto scored = metrics::top_keywords(model->lambda, vocab, std::min(o.metric_q, p));
    const metrics::Incidence incidence(m.values, vocab);
    json summary;
    summary["topics"] = model->topics();
    summary["q"] = scored.q;
    summary["coherence"] = metrics::coherence(scored, incidence);
    summary["uniqueness"] = metrics::uniqueness(scored);
    json per_topic = json::array();
    for (const auto& list : scored.terms)
        per_topic.push_back(metrics::topic_coherence(list, incidence));
    summary["coherence_by_topic"] = std::move(per_topic);
    {
        auto f = open_output(odir / "metrics.json");
        f << summary.dump(1) << '\n';
    }
    append_manifest(odir,
                    {"report",
                     echo,
                     {fs::path(o.model), dir / "vocab.csv", dir / (o.split + ".dtm.csv")},
                     seed,
                     {odir / "prevalence.csv", odir / "probabilities.csv", odir / "keywords.csv",
                      odir / "metrics.json"}},
                    start);
    out << "report: coherence " << summary["coherence"].get<double>() << ", uniqueness "
        << summary["uniqueness"].get<double>() << " (q=" << scored.q << ")\n";
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
    std::string process = "selfconsistent";
    std::string mu = "250";
    std::string n = "100";
    int replicates = 20;
    int p = 2000;
    int topics = 5;
    double alpha_doc = 0.8;
    double alpha_topic = 0.8;
    double noise_sd = 1.0;
    std::string tf = "relative";
    std::string out;
    std::string export_dir;
    bool verbose = false;
};

void cmd_simulate(const SimulateOptions& o, const FitConfig& config, const json& echo, std::ostream& out) {
    const auto start = Clock::now();
    simgen::BenchmarkDesign design;
    design.replicates = o.replicates;
    design.p = o.p;
    design.topics = o.topics;
    design.alpha_doc = o.alpha_doc;
    design.alpha_topic = o.alpha_topic;
    design.noise_sd = o.noise_sd;
    design.tf = corpus::parse_term_frequency(o.tf);
    design.seed = config.seed;
    const auto processes =
        parse_list<simgen::Process>(o.process, [](const std::string& s) { return simgen::parse_process(s); });
    const auto mus = parse_list<int>(o.mu, to_positive_int);
    const auto ns = parse_list<int>(o.n, to_positive_int);
    for (auto pr : processes)
        for (int mu : mus)
            for (int n : ns)
                design.cells.push_back({pr, mu, n});

    std::vector<fs::path> outputs{fs::path(o.out)};
    if (!o.export_dir.empty()) {
        simgen::export_replicates(design, o.export_dir);
        outputs.emplace_back(o.export_dir);
    }
    const std::vector<simgen::Method> methods{simgen::ssmf_method(config)};
    simgen::ProgressFn progress;
    if (o.verbose)
        progress = [&out](const simgen::BenchmarkCell& c, int r, const std::string& method, double score) {
            out << simgen::to_string(c.process) << " mu=" << c.mu << " n=" << c.n << " replicate " << r << ' '
                << method << " rmse " << score << '\n';
        };
    const auto rows = simgen::run_benchmark(design, methods, progress);
    {
        auto f = open_output(o.out);
        simgen::write_results_csv(f, rows);
    }
    simgen::write_results_csv(out, rows);
    append_manifest(parent_or_cwd(o.out), {"simulate", echo, {}, config.seed, outputs}, start);
}

// ---------------------------------------------------------------- lrt

struct LrtOptions {
    std::string data;
    std::string split = "train";
    int topics = 5;
    int levels = 5;
    std::string out;
};

json lrt_json(const ordinal::LrtResult& r) {
    return {{"loglik_constrained", r.loglik_constrained},
            {"loglik_saturated", r.loglik_saturated},
            {"G", r.g},
            {"df_constrained", r.df.constrained},
            {"df_saturated", r.df.saturated},
            {"df", r.df.difference()},
            {"p_value", r.p_value},
            {"negative_G", r.negative_g}};
}

void cmd_lrt(const LrtOptions& o, const FitConfig& config, const json& echo, std::ostream& out) {
    const auto start = Clock::now();
    const fs::path dir(o.data);
    const auto m = corpus::read_matrix(dir, o.split);
    check_levels(m, o.levels);
    const auto grouped = ordinal::group_documents(m);
    const auto constrained = ordinal::fit_dynamic(grouped, o.topics, o.levels, config);
    const auto saturated = ordinal::fit_saturated(grouped, o.topics, o.levels, config);
    const auto shared = ordinal::saturated_on_shared_lambda(constrained, grouped);
    json j;
    j["independent"] = lrt_json(ordinal::lrt(constrained, saturated, grouped));
    j["shared_lambda"] = lrt_json(ordinal::lrt(constrained, shared, grouped));
    const std::string text = j.dump(1) + "\n";
    out << text;
    auto f = open_output(o.out);
    f << text;
    f.close();
    append_manifest(parent_or_cwd(o.out), {"lrt", echo, {dir / (o.split + ".dtm.csv")}, config.seed, {o.out}},
                    start);
}

// ---------------------------------------------------------------- score

struct ScoreOptions {
    std::string truth;
    std::string predictions;
    std::string truth_column = "y";
    std::string pred_column = "prediction";
    std::string metric = "rmse";
};

std::map<std::string, std::string> read_column(const std::string& path, const std::string& column) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorKind::Io, "cannot open '" + path + "'");
    const auto records = corpus::parse_csv(in);
    if (records.empty())
        fail(ErrorKind::Schema, "'" + path + "' is empty");
    const auto& header = records.front().fields;
    const auto id_col = std::find(header.begin(), header.end(), "id");
    const auto val_col = std::find(header.begin(), header.end(), column);
    if (id_col == header.end())
        fail(ErrorKind::Schema, "'" + path + "' lacks an 'id' column");
    if (val_col == header.end())
        fail(ErrorKind::Schema, "'" + path + "' lacks a '" + column + "' column");
    std::map<std::string, std::string> out;
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& f = records[r].fields;
        if (f.size() != header.size())
            fail(ErrorKind::Schema, "'" + path + "' row " + std::to_string(r) + " has the wrong field count");
        out[f[static_cast<std::size_t>(id_col - header.begin())]] = f[static_cast<std::size_t>(val_col - header.begin())];
    }
    return out;
}

double to_double(const std::string& s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        fail(ErrorKind::Schema, "cannot parse number '" + s + "'");
    return v;
}

void cmd_score(const ScoreOptions& o, std::ostream& out) {
    const auto truth = read_column(o.truth, o.truth_column);
    const auto pred = read_column(o.predictions, o.pred_column);
    if (truth.size() != pred.size())
        fail(ErrorKind::LengthMismatch, std::to_string(truth.size()) + " truths vs " + std::to_string(pred.size()) +
                                            " predictions");
    std::vector<double> t, p;
    for (const auto& [id, value] : truth) {
        auto it = pred.find(id);
        if (it == pred.end())
            fail(ErrorKind::LengthMismatch, "no prediction for id '" + id + "'");
        t.push_back(to_double(value));
        p.push_back(to_double(it->second));
    }
    json j;
    j["n"] = t.size();
    if (o.metric == "rmse") {
        j["rmse"] = metrics::rmse(t, p);
    } else if (o.metric == "mer") {
        std::vector<int> ti, pi;
        for (std::size_t i = 0; i < t.size(); ++i) {
            ti.push_back(static_cast<int>(std::lround(t[i])));
            pi.push_back(static_cast<int>(std::lround(p[i])));
        }
        j["mer"] = metrics::mer(ti, pi);
    } else {
        fail(ErrorKind::Config, "metric must be rmse or mer");
    }
    out << j.dump(1) << '\n';
}

// ---------------------------------------------------------------- make-fixture

struct FixtureOptions {
    std::string out;
    int n = 500;
};

void cmd_fixture(const FixtureOptions& o, std::uint64_t seed, const json& echo, std::ostream& out) {
    const auto start = Clock::now();
    const auto reviews = simgen::synthetic_reviews(o.n, seed);
    {
        auto f = open_output(o.out);
        corpus::write_reviews(f, reviews);
    }
    append_manifest(parent_or_cwd(o.out), {"make-fixture", echo, {}, seed, {o.out}}, start);
    out << "make-fixture: " << reviews.size() << " reviews\n";
}

std::string quoted(const std::string& s) { return json(s).dump(); }

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Supervised topic models for rated text: preprocessing, fitting, prediction and simulation"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    std::uint64_t env_seed = 1;
    try {
        env_seed = default_seed();
    } catch (const Error& e) {
        err << "error: kind=" << to_string(e.kind()) << " message=" << quoted(e.what()) << '\n';
        return exit_code(e.kind());
    }

    // prep
    PrepOptions prep;
    ConfigBinder prep_bind;
    std::string prep_config;
    std::uint64_t prep_seed = env_seed;
    auto* prep_cmd = app.add_subcommand("prep", "Tokenize reviews, build the vocabulary and document-term matrices");
    prep_cmd->add_option("--input", prep.input, "Reviews CSV (id,app,time_bucket,rating,text)")->required();
    prep_cmd->add_option("--out", prep.out, "Output directory")->required();
    prep_cmd->add_option("--config", prep_config, "JSON config file (flags take precedence)");
    prep_bind.add(prep_cmd, "--levels", prep.levels, "Number of rating levels K");
    prep_bind.add(prep_cmd, "--min-df", prep.min_df, "Minimum training document frequency");
    prep_bind.add(prep_cmd, "--min-token-len", prep.min_token_len, "Minimum token length");
    prep_bind.add(prep_cmd, "--weighting", prep.weighting, "tfidf or counts");
    prep_bind.add(prep_cmd, "--tf", prep.tf, "Term frequency inside TFIDF: count or relative");
    prep_bind.add(prep_cmd, "--holdout", prep.holdout, "last (withhold the last period as test) or none");
    prep_bind.add(prep_cmd, "--seed", prep_seed, "Recorded in the manifest (default: $SSMF_SEED or 1)");

    // fit
    FitOptions fit;
    FitConfig fit_cfg;
    fit_cfg.seed = env_seed;
    ConfigBinder fit_bind;
    std::string fit_config;
    auto* fit_cmd = app.add_subcommand("fit", "Fit a normal, ordinal or saturated model");
    fit_cmd->add_option("--data", fit.data, "Directory written by prep")->required();
    fit_cmd->add_option("--out", fit.out, "Model JSON path")->required();
    fit_cmd->add_option("--config", fit_config, "JSON config file (flags take precedence)");
    fit_bind.add(fit_cmd, "--split", fit.split, "Matrix stem to fit on");
    fit_bind.add(fit_cmd, "--model", fit.model, "normal, ordinal or saturated");
    fit_bind.add(fit_cmd, "--topics", fit.topics, "Number of topics m");
    fit_bind.add(fit_cmd, "--levels", fit.levels, "Number of rating levels K");
    fit_bind.add(fit_cmd, "--cv-topics", fit.cv_topics, "Select m by cross-validation over e.g. 2..20 or 3,5,8");
    fit_bind.add(fit_cmd, "--folds", fit.folds, "Cross-validation folds");
    fit_bind.add(fit_cmd, "--cv-out", fit.cv_out, "Cross-validation table path (default <out>.cv.csv)");
    add_fit_flags(fit_bind, fit_cmd, fit_cfg);

    // predict
    PredictOptions pred;
    ConfigBinder pred_bind;
    std::string pred_config;
    std::uint64_t pred_seed = env_seed;
    auto* pred_cmd = app.add_subcommand("predict", "Write per-document predictions");
    pred_cmd->add_option("--model", pred.model, "Model JSON")->required();
    pred_cmd->add_option("--data", pred.data, "Directory written by prep")->required();
    pred_cmd->add_option("--out", pred.out, "Predictions CSV")->required();
    pred_cmd->add_option("--config", pred_config, "JSON config file (flags take precedence)");
    pred_bind.add(pred_cmd, "--split", pred.split, "Matrix stem to predict");
    pred_bind.add(pred_cmd, "--coef-time", pred.coef_time, "Use the coefficients of this period for every document");
    pred_bind.add(pred_cmd, "--seed", pred_seed, "Recorded in the manifest");

    // eval
    EvalOptions ev;
    ConfigBinder ev_bind;
    std::string ev_config;
    std::uint64_t ev_seed = env_seed;
    auto* ev_cmd = app.add_subcommand("eval", "Score a model on a split (MER, RMSE, majority baseline)");
    ev_cmd->add_option("--model", ev.model, "Model JSON")->required();
    ev_cmd->add_option("--data", ev.data, "Directory written by prep")->required();
    ev_cmd->add_option("--out", ev.out, "Scores JSON path (optional)");
    ev_cmd->add_option("--config", ev_config, "JSON config file (flags take precedence)");
    ev_bind.add(ev_cmd, "--split", ev.split, "Matrix stem to score");
    ev_bind.add(ev_cmd, "--coef-time", ev.coef_time, "Use the coefficients of this period for every document");
    ev_bind.add(ev_cmd, "--levels", ev.levels, "Rating levels, for rounding normal-model predictions");
    ev_bind.add(ev_cmd, "--seed", ev_seed, "Recorded in the manifest");

    // report
    ReportOptions rep;
    ConfigBinder rep_bind;
    std::string rep_config;
    std::uint64_t rep_seed = env_seed;
    auto* rep_cmd = app.add_subcommand("report", "Topic prevalence, rating probabilities, keywords and topic metrics");
    rep_cmd->add_option("--model", rep.model, "Ordinal model JSON")->required();
    rep_cmd->add_option("--data", rep.data, "Directory written by prep")->required();
    rep_cmd->add_option("--out", rep.out, "Output directory")->required();
    rep_cmd->add_option("--config", rep_config, "JSON config file (flags take precedence)");
    rep_bind.add(rep_cmd, "--split", rep.split, "Matrix stem for prevalence and coherence");
    rep_bind.add(rep_cmd, "--q", rep.q, "Keywords per topic in keywords.csv");
    rep_bind.add(rep_cmd, "--metric-q", rep.metric_q, "Keywords per topic for coherence and uniqueness");
    rep_bind.add(rep_cmd, "--seed", rep_seed, "Recorded in the manifest");

    // simulate
    SimulateOptions sim;
    FitConfig sim_cfg;
    sim_cfg.seed = env_seed;
    ConfigBinder sim_bind;
    std::string sim_config;
    auto* sim_cmd = app.add_subcommand("simulate", "Run the simulation benchmark");
    sim_cmd->add_option("--out", sim.out, "Results CSV")->required();
    sim_cmd->add_option("--config", sim_config, "JSON config file (flags take precedence)");
    sim_bind.add(sim_cmd, "--process", sim.process, "Comma list of selfconsistent, slda");
    sim_bind.add(sim_cmd, "--mu", sim.mu, "Comma list of words per document");
    sim_bind.add(sim_cmd, "--n", sim.n, "Comma list of training documents");
    sim_bind.add(sim_cmd, "--replicates", sim.replicates, "Replicates per cell");
    sim_bind.add(sim_cmd, "--p", sim.p, "Vocabulary size");
    sim_bind.add(sim_cmd, "--topics", sim.topics, "True (and fitted) topic count");
    sim_bind.add(sim_cmd, "--alpha-doc", sim.alpha_doc, "Document/topic Dirichlet concentration");
    sim_bind.add(sim_cmd, "--alpha-topic", sim.alpha_topic, "Topic/term Dirichlet concentration");
    sim_bind.add(sim_cmd, "--noise-sd", sim.noise_sd, "Response noise standard deviation");
    sim_bind.add(sim_cmd, "--tf", sim.tf, "Term frequency inside TFIDF: count or relative");
    sim_bind.add(sim_cmd, "--export", sim.export_dir, "Also write every replicate's data to this directory");
    sim_cmd->add_flag("--verbose", sim.verbose, "Print each replicate's score");
    add_fit_flags(sim_bind, sim_cmd, sim_cfg);

    // lrt
    LrtOptions lr;
    FitConfig lr_cfg;
    lr_cfg.seed = env_seed;
    ConfigBinder lr_bind;
    std::string lr_config;
    auto* lr_cmd = app.add_subcommand("lrt", "Likelihood-ratio test of constrained against saturated coefficients");
    lr_cmd->add_option("--data", lr.data, "Directory written by prep")->required();
    lr_cmd->add_option("--out", lr.out, "Result JSON")->required();
    lr_cmd->add_option("--config", lr_config, "JSON config file (flags take precedence)");
    lr_bind.add(lr_cmd, "--split", lr.split, "Matrix stem");
    lr_bind.add(lr_cmd, "--topics", lr.topics, "Number of topics m");
    lr_bind.add(lr_cmd, "--levels", lr.levels, "Number of rating levels K");
    add_fit_flags(lr_bind, lr_cmd, lr_cfg);

    // score
    ScoreOptions sc;
    auto* sc_cmd = app.add_subcommand("score", "Score external predictions against truth, joined on id");
    sc_cmd->add_option("--truth", sc.truth, "CSV with id and truth columns")->required();
    sc_cmd->add_option("--predictions", sc.predictions, "CSV with id and prediction columns")->required();
    sc_cmd->add_option("--truth-column", sc.truth_column, "Truth column name")->capture_default_str();
    sc_cmd->add_option("--pred-column", sc.pred_column, "Prediction column name")->capture_default_str();
    sc_cmd->add_option("--metric", sc.metric, "rmse or mer")->capture_default_str();

    // make-fixture
    FixtureOptions fx;
    std::uint64_t fx_seed = env_seed;
    auto* fx_cmd = app.add_subcommand("make-fixture", "Write a synthetic review file in the input schema");
    fx_cmd->add_option("--out", fx.out, "Reviews CSV path")->required();
    fx_cmd->add_option("--n", fx.n, "Number of reviews")->capture_default_str();
    fx_cmd->add_option("--seed", fx_seed, "Random seed (default: $SSMF_SEED or 1)")->capture_default_str();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        try {
            app.parse(reversed);
        } catch (const CLI::CallForHelp&) {
            out << app.help();
            return 0;
        } catch (const CLI::CallForAllHelp&) {
            out << app.help("", CLI::AppFormatMode::All);
            return 0;
        } catch (const CLI::ParseError& e) {
            if (e.get_exit_code() == 0) {
                out << app.help();
                return 0;
            }
            err << "error: kind=" << to_string(ErrorKind::Config) << " message=" << quoted(e.what()) << '\n';
            return exit_code(ErrorKind::Config);
        }

        if (prep_cmd->parsed()) {
            prep_bind.apply(prep_config);
            cmd_prep(prep, prep_bind.echo(), prep_seed, out);
        } else if (fit_cmd->parsed()) {
            fit_bind.apply(fit_config);
            fit_cfg.validate();
            cmd_fit(fit, fit_cfg, fit_bind.echo(), out);
        } else if (pred_cmd->parsed()) {
            pred_bind.apply(pred_config);
            cmd_predict(pred, pred_bind.echo(), pred_seed, out);
        } else if (ev_cmd->parsed()) {
            ev_bind.apply(ev_config);
            cmd_eval(ev, ev_bind.echo(), ev_seed, out);
        } else if (rep_cmd->parsed()) {
            rep_bind.apply(rep_config);
            cmd_report(rep, rep_bind.echo(), rep_seed, out);
        } else if (sim_cmd->parsed()) {
            sim_bind.apply(sim_config);
            sim_cfg.validate();
            cmd_simulate(sim, sim_cfg, sim_bind.echo(), out);
        } else if (lr_cmd->parsed()) {
            lr_bind.apply(lr_config);
            lr_cfg.validate();
            cmd_lrt(lr, lr_cfg, lr_bind.echo(), out);
        } else if (sc_cmd->parsed()) {
            cmd_score(sc, out);
        } else if (fx_cmd->parsed()) {
            cmd_fixture(fx, fx_seed, json{{"n", fx.n}}, out);
        }
        return 0;
    } catch (const Error& e) {
        err << "error: kind=" << to_string(e.kind()) << " message=" << quoted(e.what()) << '\n';
        return exit_code(e.kind());
    } catch (const fs::filesystem_error& e) {
        err << "error: kind=" << to_string(ErrorKind::Io) << " message=" << quoted(e.what()) << '\n';
        return exit_code(ErrorKind::Io);
    } catch (const std::exception& e) {
        err << "error: kind=InternalError message=" << quoted(e.what()) << '\n';
        return 1;
    }
}

} // namespace ssmf::cli
