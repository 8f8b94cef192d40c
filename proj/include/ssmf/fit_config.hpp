#pragma once

#include <cstdint>

namespace ssmf {

// Optimizer constants shared by the normal and ordinal fits. Defaults:
// sigma 0.01, gamma 0.9, relative tolerance 1e-4.
struct FitConfig {
    double sigma = 0.01;         // sufficient-change constant, in (0, 1)
    double gamma_shrink = 0.9;   // step multiplier, in (0, 1)
    double rel_tol = 1e-4;       // stop when |relative objective change| < rel_tol
    int max_iters = 500;
    int max_substeps = 60;
    double initial_step = 1.0;
    std::uint64_t seed = 1;
    int window = 2;              // periods per rolling window (ordinal fits)
    bool warm_start_beta = true; // solve coefficients for the initial loadings before the first step

    void validate() const;
};

} // namespace ssmf
