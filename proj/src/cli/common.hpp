#pragma once

#include "ssmf/fit_config.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace ssmf::cli {

using nlohmann::json;
namespace fs = std::filesystem;

/// Options that may also come from a JSON config file. A key applies only
/// when the matching flag was not given on the command line.
class ConfigBinder {
public:
    template <typename T>
    CLI::Option* add(CLI::App* app, const std::string& flag, T& var, const std::string& help) {
        CLI::Option* opt = app->add_option(flag, var, help)->capture_default_str();
        entries_.push_back({key_of(flag), opt, [&var](const json& j) { var = j.get<T>(); },
                            [&var] { return json(var); }});
        return opt;
    }

    /// Reads `path` (if non-empty) and fills options that were not set by flags.
    void apply(const std::string& path) const;
    json echo() const;

private:
    static std::string key_of(const std::string& flag);

    struct Entry {
        std::string key;
        CLI::Option* option;
        std::function<void(const json&)> set;
        std::function<json()> get;
    };
    std::vector<Entry> entries_;
};

/// Registers the optimizer flags on `app`.
void add_fit_flags(ConfigBinder& binder, CLI::App* app, FitConfig& config);

/// Seed default: SSMF_SEED when set, else 1.
std::uint64_t default_seed();

std::string fnv1a_hex(const fs::path& path);

struct Manifest {
    std::string command;
    json config;
    std::vector<fs::path> inputs;
    std::uint64_t seed = 0;
    std::vector<fs::path> outputs;
};

/// Appends one JSON line to `<dir>/manifest.jsonl`.
void append_manifest(const fs::path& dir, const Manifest& manifest, std::chrono::steady_clock::time_point start);

std::ofstream open_output(const fs::path& path);
fs::path parent_or_cwd(const fs::path& path);

} // namespace ssmf::cli
