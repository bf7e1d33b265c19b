// SPDX-License-Identifier: Apache-2.0
//
// Cheap degeneracy filters run before any fitness evaluation.
#pragma once

#include <cstdint>
#include <vector>

#include "nos/genome.hpp"

namespace nos {

/// Shifted sphere f(x) = sum_i (x_i - shift_i)^2 minimized from a fixed start.
struct SphereConfig {
    int n = 100;
    std::uint64_t shift_seed = 0;
    double shift_range = 2.0;  // shifts ~ uniform[-range, range]
    double x0 = 0.0;
    int iters = 200;
    std::vector<double> lrs = {10.0, 1.0, 0.1, 0.01, 1e-3, 1e-4, 1e-5};
    double pass_ratio = 0.1;
    std::uint64_t state_seed = 0;  // drives drop ops

    /// Throws ConfigError when a field is out of range.
    void check() const;
};

struct IntegrityVerdict {
    bool passed = false;
    double initial_loss = 0.0;
    double best_final_loss = 0.0;  // +inf if every lr went nonfinite
    double best_lr = 0.0;
    std::vector<double> final_losses;  // one per lr, non-finite when the run diverged
};

std::vector<double> sphere_shifts(const SphereConfig& cfg);

IntegrityVerdict sphere_check(const OptimizerGenome& genome, const SphereConfig& cfg = {});

inline constexpr int kDefaultRangeGrid = 1000;

/// True iff the decay graph stays in [0, 1] at every t in {0, ..., grid} with T = grid.
bool decay_range_check(const DecayGraph& graph, int grid = kDefaultRangeGrid);

/// Every decay graph attached to the genome passes decay_range_check.
bool decays_in_range(const OptimizerGenome& genome, int grid = kDefaultRangeGrid);

/// decays_in_range and sphere_check both pass.
bool integrity_check(const OptimizerGenome& genome, const SphereConfig& cfg = {}, int grid = kDefaultRangeGrid);

}  // namespace nos
