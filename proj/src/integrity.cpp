// SPDX-License-Identifier: Apache-2.0
#include "nos/integrity.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "nos/engine.hpp"
#include "nos/error.hpp"
#include "nos/random.hpp"

namespace nos {

namespace {

double sphere_loss(std::span<const double> x, std::span<const double> shift) {
    double f = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) f += (x[i] - shift[i]) * (x[i] - shift[i]);
    return f;
}

}  // namespace

void SphereConfig::check() const {
    if (n < 1) throw ConfigError("sphere: n must be >= 1");
    if (iters < 1) throw ConfigError("sphere: iters must be >= 1");
    if (lrs.empty()) throw ConfigError("sphere: lr set must be non-empty");
    for (double lr : lrs)
        if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("sphere: learning rates must be finite and >= 0");
    if (!(pass_ratio > 0.0 && pass_ratio < 1.0)) throw ConfigError("sphere: pass_ratio must lie in (0, 1)");
}

std::vector<double> sphere_shifts(const SphereConfig& cfg) {
    Rng rng(cfg.shift_seed);
    std::vector<double> shift(static_cast<std::size_t>(cfg.n));
    for (auto& b : shift) b = rng.uniform(-cfg.shift_range, cfg.shift_range);
    return shift;
}

IntegrityVerdict sphere_check(const OptimizerGenome& genome, const SphereConfig& cfg) {
    cfg.check();
    const auto shift = sphere_shifts(cfg);
    const std::size_t n = shift.size();
    const Tensor start(n, cfg.x0);

    IntegrityVerdict verdict;
    verdict.initial_loss = sphere_loss(start, shift);
    verdict.best_final_loss = std::numeric_limits<double>::infinity();

    Tensor grad(n);
    for (double lr : cfg.lrs) {
        Tensor x = start;
        OptimizerState state = init_state(genome, n, cfg.state_seed);
        bool finite = true;
        for (int t = 0; t < cfg.iters && finite; ++t) {
            for (std::size_t i = 0; i < n; ++i) grad[i] = 2.0 * (x[i] - shift[i]);
            apply_step(genome, state, x, grad, lr, Clock{t, cfg.iters});
            for (double v : x) finite = finite && std::isfinite(v);
        }
        const double loss = finite ? sphere_loss(x, shift) : std::numeric_limits<double>::quiet_NaN();
        verdict.final_losses.push_back(loss);
        if (std::isfinite(loss) && loss < verdict.best_final_loss) {
            verdict.best_final_loss = loss;
            verdict.best_lr = lr;
        }
    }
    verdict.passed = verdict.best_final_loss < cfg.pass_ratio * verdict.initial_loss;
    return verdict;
}

bool decay_range_check(const DecayGraph& graph, int grid) {
    if (grid < 2) throw ConfigError("decay range check: grid must be >= 2, got " + std::to_string(grid));
    for (int t = 0; t <= grid; ++t) {
        const double v = eval_decay_graph(graph, Clock{t, grid});
        if (!(v >= 0.0 && v <= 1.0)) return false;
    }
    return true;
}

bool decays_in_range(const OptimizerGenome& genome, int grid) {
    for (int id = 0; id < genome.graph.node_count(); ++id)
        for (const auto& e : genome.graph.node(id).inputs)
            if (e.decay && !decay_range_check(*e.decay, grid)) return false;
    return true;
}

bool integrity_check(const OptimizerGenome& genome, const SphereConfig& cfg, int grid) {
    return decays_in_range(genome, grid) && sphere_check(genome, cfg).passed;
}

}  // namespace nos
