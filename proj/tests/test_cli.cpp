#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "support.hpp"

#include "ssmf/cli.hpp"

#include "json.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Result {
    int code = 0;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    Result r;
    r.code = ssmf::cli::run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

const std::string kTenRows = "id,app,time_bucket,rating,text\n"
                             "1,alpha,2021-01,5,great app love it\n"
                             "2,alpha,2021-01,1,crash crash terrible\n"
                             "3,alpha,2021-02,4,great features love\n"
                             "4,alpha,2021-02,2,terrible crash again\n"
                             "5,beta,2021-01,3,okay features slow\n"
                             "6,beta,2021-01,5,love great features\n"
                             "7,beta,2021-02,1,slow crash terrible\n"
                             "8,beta,2021-02,3,okay slow features\n"
                             "9,alpha,2021-02,5,love love great\n"
                             "10,beta,2021-02,2,crash slow okay\n";

fs::path fixture_csv() { return fs::path(SSMF_TEST_DATA) / "reviews_500.csv"; }

// prep + fit of the fixture corpus into `dir`.
void prep_and_fit(const fs::path& dir, const std::string& model = "ordinal") {
    REQUIRE(run({"prep", "--input", fixture_csv().string(), "--out", (dir / "prep").string()}).code == 0);
    const auto r = run({"fit", "--data", (dir / "prep").string(), "--out", (dir / "model.json").string(), "--model",
                        model, "--topics", "3"});
    REQUIRE(r.code == 0);
}

} // namespace

TEST_CASE("prep on a ten-row file") {
    testing::TempDir dir("cli_prep");
    write(dir.path() / "in.csv", kTenRows);
    const auto r = run({"prep", "--input", (dir.path() / "in.csv").string(), "--out", (dir.path() / "p").string(),
                        "--min-df", "1", "--holdout", "none"});
    REQUIRE(r.code == 0);
    for (const char* f : {"vocab.csv", "train.dtm.csv", "train.meta.json", "groups.csv", "manifest.jsonl"})
        CHECK(fs::exists(dir.path() / "p" / f));
    CHECK_FALSE(fs::exists(dir.path() / "p" / "test.dtm.csv"));
    CHECK(slurp(dir.path() / "p" / "groups.csv") ==
          "split,t,a,n_docs\ntrain,2021-01,alpha,2\ntrain,2021-01,beta,2\ntrain,2021-02,alpha,3\ntrain,2021-02,beta,3\n");
    const auto vocab = slurp(dir.path() / "p" / "vocab.csv");
    CHECK(vocab.find("crash") != std::string::npos);
    CHECK(vocab.find("great app") != std::string::npos);

    // With the last period held out.
    const auto h = run({"prep", "--input", (dir.path() / "in.csv").string(), "--out", (dir.path() / "h").string(),
                        "--min-df", "1"});
    REQUIRE(h.code == 0);
    CHECK(slurp(dir.path() / "h" / "groups.csv") ==
          "split,t,a,n_docs\ntest,2021-02,alpha,3\ntest,2021-02,beta,3\ntrain,2021-01,alpha,2\ntrain,2021-01,beta,2\n");

    // The last period is per app; an app with one period stays in training.
    write(dir.path() / "uneven.csv", "id,app,time_bucket,rating,text\n"
                                     "1,alpha,2021-01,5,great app love\n"
                                     "2,alpha,2021-02,1,crash terrible app\n"
                                     "3,beta,2021-01,3,okay slow app\n"
                                     "4,beta,2021-03,2,slow crash app\n"
                                     "5,gamma,2021-03,4,love great app\n");
    testing::WarningCapture warnings;
    REQUIRE(run({"prep", "--input", (dir.path() / "uneven.csv").string(), "--out", (dir.path() / "u").string(),
                 "--min-df", "1"})
                .code == 0);
    CHECK(slurp(dir.path() / "u" / "groups.csv") == "split,t,a,n_docs\ntest,2021-02,alpha,1\ntest,2021-03,beta,1\n"
                                                    "train,2021-01,alpha,1\ntrain,2021-01,beta,1\n"
                                                    "train,2021-03,gamma,1\n");
    CHECK(warnings.messages.size() == 1);
}

TEST_CASE("input errors exit with code 2 and one error line") {
    testing::TempDir dir("cli_err");
    write(dir.path() / "bad.csv", "id,app,time_bucket,text\n1,a,t,hello\n");
    const auto r = run({"prep", "--input", (dir.path() / "bad.csv").string(), "--out", (dir.path() / "p").string()});
    CHECK(r.code == 2);
    CHECK(r.err.rfind("error: kind=SchemaError message=", 0) == 0);
    CHECK(r.err.find("rating") != std::string::npos);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);

    const auto missing = run({"prep", "--input", (dir.path() / "none.csv").string(), "--out", "x"});
    CHECK(missing.code == 2);
    CHECK(missing.err.rfind("error: kind=IoError", 0) == 0);

    CHECK(run({"bogus"}).code == 2);
    CHECK(run({"fit", "--data", dir.path().string()}).code == 2);
    CHECK(run({"--help"}).code == 0);

    write(dir.path() / "pipe.csv", "id,app,time_bucket,rating,text\n1,a|b,t,3,hello there\n");
    CHECK(run({"prep", "--input", (dir.path() / "pipe.csv").string(), "--out", (dir.path() / "q").string()}).code == 2);
}

TEST_CASE("reruns are byte-identical apart from the manifest") {
    testing::TempDir a("cli_rerun_a"), b("cli_rerun_b");
    prep_and_fit(a.path());
    prep_and_fit(b.path());
    CHECK(slurp(a.path() / "model.json") == slurp(b.path() / "model.json"));
    for (const auto& entry : fs::directory_iterator(a.path() / "prep")) {
        const auto name = entry.path().filename();
        if (name == "manifest.jsonl")
            continue;
        CHECK_MESSAGE(slurp(entry.path()) == slurp(b.path() / "prep" / name), name.string());
    }
    const auto manifest = slurp(a.path() / "prep" / "manifest.jsonl");
    const auto first = json::parse(manifest.substr(0, manifest.find('\n')));
    CHECK(first["command"] == "prep");
    CHECK(first["inputs"][0]["fnv1a64"].get<std::string>().size() == 16);
    CHECK(first.contains("wall_time_s"));
}

TEST_CASE("ordinal model, predictions and report") {
    testing::TempDir dir("cli_ordinal");
    prep_and_fit(dir.path());
    const auto model = json::parse(slurp(dir.path() / "model.json"));
    CHECK(model["format"] == "ssmf-model");
    CHECK(model["model"] == "constrained");
    CHECK(model["levels"] == 5);
    CHECK(model["topics"] == 3);
    REQUIRE(model["alphas"].size() > 0);
    for (const auto& [key, alpha] : model["alphas"].items()) {
        CHECK(alpha.size() == 4);
        CHECK(key.find('|') != std::string::npos);
    }
    const auto& trace = model["loglik_trace"];
    for (std::size_t i = 1; i < trace.size(); ++i)
        CHECK(trace[i].get<double>() >= trace[i - 1].get<double>());

    const auto pred = run({"predict", "--model", (dir.path() / "model.json").string(), "--data",
                           (dir.path() / "prep").string(), "--out", (dir.path() / "pred.csv").string()});
    REQUIRE(pred.code == 0);
    std::istringstream lines(slurp(dir.path() / "pred.csv"));
    std::string line;
    std::getline(lines, line);
    CHECK(line == "id,app,time_bucket,rating,predicted,coef_group,p1,p2,p3,p4,p5");
    int rows = 0;
    while (std::getline(lines, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');)
            cells.push_back(c);
        REQUIRE(cells.size() == 11);
        double sum = 0.0, best = -1.0;
        int arg = 0;
        for (int k = 0; k < 5; ++k) {
            const double p = std::stod(cells[static_cast<std::size_t>(6 + k)]);
            CHECK(p >= 0.0);
            sum += p;
            if (p > best) {
                best = p;
                arg = k + 1;
            }
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
        CHECK(std::stoi(cells[4]) == arg);
        CHECK(cells[5].find(cells[1]) != std::string::npos);
        ++rows;
    }
    CHECK(rows > 0);

    const auto ev = run({"eval", "--model", (dir.path() / "model.json").string(), "--data",
                         (dir.path() / "prep").string()});
    REQUIRE(ev.code == 0);
    const auto scores = json::parse(ev.out);
    CHECK(scores["n"] == rows);
    CHECK(scores["mer"].get<double>() < scores["baseline_mer"].get<double>());

    const auto rep = run({"report", "--model", (dir.path() / "model.json").string(), "--data",
                          (dir.path() / "prep").string(), "--out", (dir.path() / "rep").string(), "--metric-q",
                          "10"});
    REQUIRE(rep.code == 0);
    for (const char* f : {"prevalence.csv", "probabilities.csv", "keywords.csv", "metrics.json"})
        CHECK(fs::exists(dir.path() / "rep" / f));
    const auto metrics = json::parse(slurp(dir.path() / "rep" / "metrics.json"));
    CHECK(metrics["q"] == 10);
    CHECK(metrics["coherence_by_topic"].size() == 3);
    CHECK(metrics["uniqueness"].get<double>() >= 0.0);
    CHECK(metrics["uniqueness"].get<double>() <= 1.0);
    CHECK(metrics["coherence"].get<double>() < 0.0);
    CHECK(slurp(dir.path() / "rep" / "probabilities.csv").rfind("t,a,topic,level,prob\n", 0) == 0);
}

TEST_CASE("normal model predictions") {
    testing::TempDir dir("cli_normal");
    prep_and_fit(dir.path(), "normal");
    CHECK(json::parse(slurp(dir.path() / "model.json"))["model"] == "normal");
    REQUIRE(run({"predict", "--model", (dir.path() / "model.json").string(), "--data", (dir.path() / "prep").string(),
                 "--out", (dir.path() / "pred.csv").string()})
                .code == 0);
    const auto text = slurp(dir.path() / "pred.csv");
    CHECK(text.substr(0, text.find('\n')) == "id,app,time_bucket,rating,prediction");
    // Report needs an ordinal model.
    CHECK(run({"report", "--model", (dir.path() / "model.json").string(), "--data", (dir.path() / "prep").string(),
               "--out", (dir.path() / "rep").string()})
              .code == 2);
}

TEST_CASE("flags override the config file") {
    testing::TempDir dir("cli_config");
    REQUIRE(run({"prep", "--input", fixture_csv().string(), "--out", (dir.path() / "prep").string()}).code == 0);
    write(dir.path() / "cfg.json", R"({"topics": 3, "max_iters": 5})");
    const auto data = (dir.path() / "prep").string(), cfg = (dir.path() / "cfg.json").string();
    REQUIRE(run({"fit", "--data", data, "--out", (dir.path() / "a.json").string(), "--config", cfg}).code == 0);
    const auto a = json::parse(slurp(dir.path() / "a.json"));
    CHECK(a["topics"] == 3);
    CHECK(a["iterations"].get<int>() <= 5);
    REQUIRE(run({"fit", "--data", data, "--out", (dir.path() / "b.json").string(), "--config", cfg, "--topics", "2"})
                .code == 0);
    CHECK(json::parse(slurp(dir.path() / "b.json"))["topics"] == 2);

    write(dir.path() / "bad.json", R"({"no_such_option": 1})");
    const auto bad = run({"fit", "--data", data, "--out", (dir.path() / "c.json").string(), "--config",
                          (dir.path() / "bad.json").string()});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("ConfigError") != std::string::npos);
}

TEST_CASE("SSMF_SEED supplies the default seed") {
    testing::TempDir dir("cli_seed");
    REQUIRE(run({"prep", "--input", fixture_csv().string(), "--out", (dir.path() / "prep").string()}).code == 0);
    const auto data = (dir.path() / "prep").string();
    auto fit = [&](const std::string& name, std::vector<std::string> extra) {
        std::vector<std::string> args{"fit", "--data", data, "--out", (dir.path() / name).string(), "--topics", "3",
                                      "--max-iters", "5"};
        args.insert(args.end(), extra.begin(), extra.end());
        REQUIRE(run(args).code == 0);
        return json::parse(slurp(dir.path() / name))["lambda"];
    };
    ::setenv("SSMF_SEED", "17", 1);
    const auto from_env = fit("env.json", {});
    ::unsetenv("SSMF_SEED");
    const auto from_flag = fit("flag.json", {"--seed", "17"});
    const auto other = fit("other.json", {"--seed", "18"});
    CHECK(from_env == from_flag);
    CHECK(from_env != other);
}

TEST_CASE("score, lrt and simulate") {
    testing::TempDir dir("cli_misc");
    write(dir.path() / "truth.csv", "id,y\na,1\nb,2\n");
    write(dir.path() / "pred.csv", "id,prediction\nb,4\na,1\n");
    const auto sc = run({"score", "--truth", (dir.path() / "truth.csv").string(), "--predictions",
                         (dir.path() / "pred.csv").string()});
    REQUIRE(sc.code == 0);
    const auto s = json::parse(sc.out);
    CHECK(s["n"] == 2);
    CHECK(s["rmse"].get<double>() == doctest::Approx(std::sqrt(2.0)));
    write(dir.path() / "short.csv", "id,prediction\na,1\n");
    CHECK(run({"score", "--truth", (dir.path() / "truth.csv").string(), "--predictions",
               (dir.path() / "short.csv").string()})
              .code == 2);

    REQUIRE(run({"prep", "--input", fixture_csv().string(), "--out", (dir.path() / "prep").string()}).code == 0);
    testing::WarningCapture warnings;
    REQUIRE(run({"lrt", "--data", (dir.path() / "prep").string(), "--out", (dir.path() / "lrt.json").string(),
                 "--topics", "3", "--max-iters", "20"})
                .code == 0);
    const auto lrt = json::parse(slurp(dir.path() / "lrt.json"));
    for (const char* block : {"independent", "shared_lambda"}) {
        CHECK(lrt[block]["df_constrained"] == 3 * 2 * 3);
        CHECK(lrt[block]["df_saturated"] == 3 * 2 * 3 * 4);
        CHECK(lrt[block]["df"] == 3 * 2 * 3 * 3);
        const double p = lrt[block]["p_value"];
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
    }
    CHECK(lrt["shared_lambda"]["G"].get<double>() >= -1e-6);

    REQUIRE(run({"simulate", "--out", (dir.path() / "sim.csv").string(), "--p", "100", "--replicates", "2", "--mu",
                 "30", "--n", "20", "--process", "slda"})
                .code == 0);
    const auto sim = slurp(dir.path() / "sim.csv");
    CHECK(sim.rfind("process,mu,n,method,rmse,se,replicates\nslda,30,20,", 0) == 0);
}

TEST_CASE("make-fixture reproduces the checked-in corpus") {
    testing::TempDir dir("cli_fixture");
    REQUIRE(run({"make-fixture", "--out", (dir.path() / "r.csv").string(), "--n", "500", "--seed", "7"}).code == 0);
    CHECK(slurp(dir.path() / "r.csv") == slurp(fixture_csv()));
}
