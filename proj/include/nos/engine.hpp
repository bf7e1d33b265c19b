// SPDX-License-Identifier: Apache-2.0
//
// Interpreter that runs an OptimizerGenome as a stateful optimizer over a
// flat parameter tensor.
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "nos/genome.hpp"
#include "nos/schedules.hpp"

namespace nos {

using Tensor = std::vector<double>;

inline constexpr double kBeta1 = 0.9;
inline constexpr double kBeta2 = 0.99;
inline constexpr double kBeta3 = 0.999;
inline constexpr std::array<double, 3> kBankBetasV = {0.0, 0.9, 0.999};
inline constexpr std::array<double, 3> kBankBetasS = {0.0, 0.99, 0.999};
inline constexpr std::array<double, 3> kBankBetasL = {0.0, 0.999, 0.9999};

/// Everything an optimizer carries between steps for one parameter tensor.
struct OptimizerState {
    Tensor vhat, shat, lhat;
    std::array<Tensor, 3> v_bank, s_bank, l_bank;
    std::map<int, Tensor> node_regs;  // state-saving node id -> register
    Tensor momentum_slot;
    std::int64_t step = 0;
    std::uint64_t rng_seed = 0;

    std::size_t size() const { return vhat.size(); }
};

struct DecayValue {
    int node;
    int slot;
    double value;
};

struct StepReport {
    double update_norm = 0.0;
    bool nonfinite = false;
    std::vector<DecayValue> decay_values;
};

struct UpdateResult {
    Tensor update;
    StepReport report;
};

/// Zeroed state sized for `size` elements; throws std::invalid_argument on size 0.
OptimizerState init_state(const OptimizerGenome& genome, std::size_t size, std::uint64_t rng_seed = 0);

/// v <- b v + (1 - b) g on the three main averages and all nine bank entries.
void update_emas(OptimizerState& state, std::span<const double> g);

/// Value of one operand given the current gradient, weights and averages.
Tensor operand_value(OperandId id, std::span<const double> g, std::span<const double> w, const OptimizerState& state);

/// Stream of Bernoulli draws for drop ops, keyed by (state seed, step,
/// position of the node among the active nodes).
std::uint64_t drop_seed(const OptimizerState& state, int active_rank);

Tensor eval_unary(OpCode op, std::span<const double> x, std::uint64_t drop_seed = 0);
Tensor eval_binary(OpCode op, std::span<const double> x1, std::span<const double> x2);
/// Advances `reg` in place and returns the new register value.
Tensor eval_state(OpCode op, std::span<const double> x, Tensor& reg);

/// Evaluates U for the current step. EMAs must already include g. Advances
/// state-saving registers of active nodes exactly once.
UpdateResult compute_update(const OptimizerGenome& genome, OptimizerState& state, std::span<const double> g,
                            std::span<const double> w, Clock clock);

/// Momentum coefficient, cosine-cycled in [0.85, 0.95] over the horizon,
/// 0.95 at t = 0.
double momentum_beta(Clock clock);

/// Applies U with the given momentum form to w (and the momentum slot z).
void apply_momentum(Momentum momentum, std::span<double> w, std::span<double> z, std::span<const double> update,
                    double alpha, double beta);

/// One full optimizer step: averages, U, momentum form, step counter.
StepReport apply_step(const OptimizerGenome& genome, OptimizerState& state, std::span<double> w,
                      std::span<const double> g, double alpha, Clock clock);

}  // namespace nos
