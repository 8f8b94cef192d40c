#include "common.hpp"

#include "ssmf/error.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>

namespace ssmf::cli {

std::string ConfigBinder::key_of(const std::string& flag) {
    std::string key = flag.substr(flag.find_first_not_of('-'));
    for (char& c : key)
        if (c == '-')
            c = '_';
    return key;
}

void ConfigBinder::apply(const std::string& path) const {
    if (path.empty())
        return;
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorKind::Io, "cannot open config file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail(ErrorKind::Config, "malformed config file: " + std::string(e.what()));
    }
    if (!j.is_object())
        fail(ErrorKind::Config, "config file must hold a JSON object");
    for (const auto& [key, value] : j.items()) {
        const Entry* found = nullptr;
        for (const auto& e : entries_)
            if (e.key == key)
                found = &e;
        if (!found)
            fail(ErrorKind::Config, "unknown config key '" + key + "'");
        if (found->option->count() > 0)
            continue;
        try {
            found->set(value);
        } catch (const json::exception& e) {
            fail(ErrorKind::Config, "config key '" + key + "' has the wrong type");
        }
    }
}

json ConfigBinder::echo() const {
    json j = json::object();
    for (const auto& e : entries_)
        j[e.key] = e.get();
    return j;
}

void add_fit_flags(ConfigBinder& binder, CLI::App* app, FitConfig& config) {
    binder.add(app, "--sigma", config.sigma, "Sufficient-change constant in (0,1)");
    binder.add(app, "--gamma", config.gamma_shrink, "Step multiplier in (0,1)");
    binder.add(app, "--rel-tol", config.rel_tol, "Stop when the relative objective change is below this");
    binder.add(app, "--max-iters", config.max_iters, "Maximum outer iterations");
    binder.add(app, "--max-substeps", config.max_substeps, "Maximum step-size trials per iteration");
    binder.add(app, "--initial-step", config.initial_step, "First trial step size");
    binder.add(app, "--window", config.window, "Periods per rolling window (ordinal models)");
    binder.add(app, "--warm-start-beta", config.warm_start_beta,
               "Solve coefficients for the initial loadings before the first step (normal model)");
    binder.add(app, "--seed", config.seed, "Random seed (default: $SSMF_SEED or 1)");
}

std::uint64_t default_seed() {
    const char* env = std::getenv("SSMF_SEED");
    if (!env || !*env)
        return 1;
    std::uint64_t seed = 0;
    const char* end = env + std::char_traits<char>::length(env);
    auto [ptr, ec] = std::from_chars(env, end, seed);
    if (ec != std::errc() || ptr != end)
        fail(ErrorKind::Config, std::string("SSMF_SEED is not an unsigned integer: '") + env + "'");
    return seed;
}

std::string fnv1a_hex(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorKind::Io, "cannot open '" + path.string() + "' for hashing");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 14];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

void append_manifest(const fs::path& dir, const Manifest& manifest, std::chrono::steady_clock::time_point start) {
    json j;
    j["command"] = manifest.command;
    j["config"] = manifest.config;
    json inputs = json::array();
    for (const auto& p : manifest.inputs)
        inputs.push_back({{"path", p.string()}, {"fnv1a64", fnv1a_hex(p)}});
    j["inputs"] = std::move(inputs);
    j["seed"] = manifest.seed;
    json outputs = json::array();
    for (const auto& p : manifest.outputs)
        outputs.push_back(p.string());
    j["outputs"] = std::move(outputs);
    j["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    fs::create_directories(dir);
    std::ofstream out(dir / "manifest.jsonl", std::ios::binary | std::ios::app);
    if (!out)
        fail(ErrorKind::Io, "cannot append to manifest in '" + dir.string() + "'");
    out << j.dump() << '\n';
}

std::ofstream open_output(const fs::path& path) {
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        fail(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
    return out;
}

fs::path parent_or_cwd(const fs::path& path) { return path.has_parent_path() ? path.parent_path() : fs::path("."); }

} // namespace ssmf::cli
