#pragma once

#include "ssmf/error.hpp"
#include "ssmf/fit_config.hpp"

#include <Eigen/Dense>

#include <string>

namespace ssmf {

struct StepCandidate {
    Eigen::MatrixXd lambda;
    double value = 0.0;  // objective (or log-likelihood) at `lambda`
    bool accepted = false;
};

struct StepOutcome {
    StepCandidate candidate;
    double step = 0.0;
    int substeps = 0;
};

/// Step-size search shared by the descent (normal) and ascent (ordinal)
/// updates. Starting from `step0`, the step grows by 1/gamma_shrink while the
/// sufficient-change test keeps passing and the last passing step is used;
/// otherwise it shrinks by gamma_shrink until the test passes. `trial(step)`
/// returns the projected candidate and whether it passes.
template <typename Trial>
StepOutcome armijo_search(double step0, const FitConfig& config, Trial&& trial) {
    StepOutcome out;
    double step = step0;
    StepCandidate cand = trial(step);
    out.substeps = 1;
    if (cand.accepted) {
        while (out.substeps < config.max_substeps) {
            const double bigger = step / config.gamma_shrink;
            StepCandidate next = trial(bigger);
            ++out.substeps;
            if (!next.accepted)
                break;
            step = bigger;
            cand = std::move(next);
        }
        out.candidate = std::move(cand);
        out.step = step;
        return out;
    }
    while (out.substeps < config.max_substeps) {
        step *= config.gamma_shrink;
        cand = trial(step);
        ++out.substeps;
        if (cand.accepted) {
            out.candidate = std::move(cand);
            out.step = step;
            return out;
        }
    }
    fail(ErrorKind::StepSearchExhausted,
         "no step satisfied the sufficient-change condition within " + std::to_string(config.max_substeps) +
             " substeps");
}

} // namespace ssmf
