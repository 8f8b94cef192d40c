#include "ssmf/fixture.hpp"
#include "ssmf/error.hpp"
#include "ssmf/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>

namespace ssmf::simgen {
namespace {

constexpr std::array<const char*, 2> kApps = {"atlas", "beacon"};
constexpr std::array<const char*, 4> kTimes = {"2020Q1", "2020Q2", "2020Q3", "2020Q4"};

constexpr std::array<std::array<const char*, 10>, 5> kThemes = {{
    {"crash", "freezes", "bug", "error", "loading", "screen", "restart", "slow", "battery", "drains"},
    {"love", "great", "awesome", "useful", "simple", "helpful", "recommend", "perfect", "friendly", "amazing"},
    {"price", "subscription", "expensive", "refund", "charged", "payment", "premium", "money", "trial", "cancel"},
    {"update", "feature", "design", "layout", "option", "widget", "dark", "mode", "settings", "interface"},
    {"login", "account", "password", "sync", "email", "verify", "reset", "support", "contact", "logged"},
}};

constexpr std::array<const char*, 8> kFiller = {"the", "and", "it", "is", "this", "app", "i", "very"};

// Rating shift per unit of theme share.
constexpr std::array<double, 5> kEffect = {-2.5, 2.5, -1.5, 0.5, -1.0};

} // namespace

std::vector<corpus::ReviewRecord> synthetic_reviews(int n, std::uint64_t seed) {
    if (n < 1)
        fail(ErrorKind::Config, "fixture size must be positive");
    Rng rng(seed);
    std::gamma_distribution<double> gamma(0.5, 1.0);
    std::uniform_int_distribution<int> pick_app(0, static_cast<int>(kApps.size()) - 1);
    std::uniform_int_distribution<int> pick_time(0, static_cast<int>(kTimes.size()) - 1);
    std::uniform_int_distribution<int> length(8, 25);
    std::uniform_int_distribution<int> pick_word(0, 9);
    std::uniform_int_distribution<int> pick_filler(0, static_cast<int>(kFiller.size()) - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 0.6);

    std::vector<corpus::ReviewRecord> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int app = pick_app(rng);
        const int time = pick_time(rng);
        std::array<double, 5> theta{};
        double total = 0.0;
        for (double& t : theta) {
            t = gamma(rng) + 1e-12;
            total += t;
        }
        for (double& t : theta)
            t /= total;

        double score = 0.0;
        for (std::size_t k = 0; k < theta.size(); ++k)
            score += kEffect[k] * theta[k];
        // Stability complaints weigh more heavily over time for the second app.
        if (app == 1)
            score += -0.5 * time * theta[0];
        const double latent = 3.0 + score + noise(rng);
        const int rating = std::clamp(static_cast<int>(std::lround(latent)), 1, 5);

        std::discrete_distribution<int> pick_theme(theta.begin(), theta.end());
        std::string text;
        const int words = length(rng);
        for (int w = 0; w < words; ++w) {
            if (!text.empty())
                text += ' ';
            if (unit(rng) < 0.2)
                text += kFiller[static_cast<std::size_t>(pick_filler(rng))];
            else
                text += kThemes[static_cast<std::size_t>(pick_theme(rng))][static_cast<std::size_t>(pick_word(rng))];
        }
        char id[16];
        std::snprintf(id, sizeof id, "r%04d", i + 1);
        out.push_back({id, kApps[static_cast<std::size_t>(app)], kTimes[static_cast<std::size_t>(time)], rating,
                       std::move(text)});
    }
    return out;
}

} // namespace ssmf::simgen
