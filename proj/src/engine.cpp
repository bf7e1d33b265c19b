// SPDX-License-Identifier: Apache-2.0
#include "nos/engine.hpp"

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>

#include "nos/random.hpp"

namespace nos {

namespace {

void ema(Tensor& avg, double beta, std::span<const double> x, int power) {
    for (std::size_t i = 0; i < avg.size(); ++i) {
        const double term = power == 1 ? x[i] : power == 2 ? x[i] * x[i] : x[i] * x[i] * x[i];
        avg[i] = beta * avg[i] + (1.0 - beta) * term;
    }
}

Tensor bank_average(const std::array<Tensor, 3>& bank, const std::array<double, 3>& betas,
                    std::span<const double> g, int power) {
    Tensor out(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < 3; ++j) sum += betas[j] * bank[j][i];
        const double raw = power == 1 ? g[i] : power == 2 ? g[i] * g[i] : g[i] * g[i] * g[i];
        out[i] = sum / 3.0 - raw;
    }
    return out;
}

double sign(double x) { return x > 0.0 ? 1.0 : x < 0.0 ? -1.0 : 0.0; }

}  // namespace

OptimizerState init_state(const OptimizerGenome& genome, std::size_t size, std::uint64_t rng_seed) {
    if (size == 0) throw std::invalid_argument("init_state: parameter tensor must be non-empty");
    OptimizerState s;
    s.vhat.assign(size, 0.0);
    s.shat.assign(size, 0.0);
    s.lhat.assign(size, 0.0);
    for (auto* bank : {&s.v_bank, &s.s_bank, &s.l_bank})
        for (auto& t : *bank) t.assign(size, 0.0);
    for (int id = 0; id < genome.graph.node_count(); ++id)
        if (is_state(genome.graph.node(id).op)) s.node_regs.emplace(id, Tensor(size, 0.0));
    s.momentum_slot.assign(size, 0.0);
    s.rng_seed = rng_seed;
    return s;
}

void update_emas(OptimizerState& state, std::span<const double> g) {
    if (g.size() != state.size()) throw std::invalid_argument("update_emas: gradient size mismatch");
    ema(state.vhat, kBeta1, g, 1);
    ema(state.shat, kBeta2, g, 2);
    ema(state.lhat, kBeta3, g, 3);
    for (std::size_t j = 0; j < 3; ++j) {
        ema(state.v_bank[j], kBankBetasV[j], g, 1);
        ema(state.s_bank[j], kBankBetasS[j], g, 2);
        ema(state.l_bank[j], kBankBetasL[j], g, 3);
    }
}

Tensor operand_value(OperandId id, std::span<const double> grad, std::span<const double> w, const OptimizerState& s) {
    const std::size_t n = grad.size();
    Tensor out(n);
    auto fill = [&](auto&& f) {
        for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
    };
    using enum OperandId;
    switch (id) {
        case OperandId::g: fill([&](auto i) { return grad[i]; }); break;
        case g2: fill([&](auto i) { return grad[i] * grad[i]; }); break;
        case g3: fill([&](auto i) { return grad[i] * grad[i] * grad[i]; }); break;
        case vhat: out = s.vhat; break;
        case shat: out = s.shat; break;
        case lhat: out = s.lhat; break;
        case sign_g: fill([&](auto i) { return sign(grad[i]); }); break;
        case sign_vhat: fill([&](auto i) { return sign(s.vhat[i]); }); break;
        case const1: out.assign(n, 1.0); break;
        case const2: out.assign(n, 2.0); break;
        case w_1e6: fill([&](auto i) { return 1e-6 * w[i]; }); break;
        case w_1e5: fill([&](auto i) { return 1e-5 * w[i]; }); break;
        case w_1e4: fill([&](auto i) { return 1e-4 * w[i]; }); break;
        case w_1e3: fill([&](auto i) { return 1e-3 * w[i]; }); break;
        case qhm_v: fill([&](auto i) { return 0.3 * grad[i] + 0.7 * s.vhat[i]; }); break;
        case qhm_s: fill([&](auto i) { return 0.05 * grad[i] * grad[i] + 0.95 * s.shat[i]; }); break;
        case qhm_l: fill([&](auto i) { return 0.01 * grad[i] * grad[i] * grad[i] + 0.99 * s.lhat[i]; }); break;
        case aggmo_v: out = bank_average(s.v_bank, kBankBetasV, grad, 1); break;
        case aggmo_s: out = bank_average(s.s_bank, kBankBetasS, grad, 2); break;
        case aggmo_l: out = bank_average(s.l_bank, kBankBetasL, grad, 3); break;
    }
    return out;
}

std::uint64_t drop_seed(const OptimizerState& state, int active_rank) {
    return derive_seed(state.rng_seed, {static_cast<std::uint64_t>(state.step), static_cast<std::uint64_t>(active_rank)});
}

Tensor eval_unary(OpCode op, std::span<const double> x, std::uint64_t seed) {
    Tensor out(x.begin(), x.end());
    if (op == OpCode::norm) {
        double sq = 0.0;
        for (double v : x) sq += v * v;
        const double denom = std::sqrt(sq) + kEpsilon;
        for (auto& v : out) v /= denom;
    } else if (const double p = drop_probability(op); p > 0.0) {
        // Inverted dropout: survivors are rescaled to keep the expectation.
        Rng rng(seed);
        const double keep = 1.0 / (1.0 - p);
        for (auto& v : out) v = rng.bernoulli(p) ? 0.0 : v * keep;
    } else {
        for (auto& v : out) v = apply_unary(op, v);
    }
    return out;
}

Tensor eval_binary(OpCode op, std::span<const double> x1, std::span<const double> x2) {
    Tensor out(x1.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = apply_binary(op, x1[i], x2[i]);
    return out;
}

Tensor eval_state(OpCode op, std::span<const double> x, Tensor& reg) {
    for (std::size_t i = 0; i < reg.size(); ++i) reg[i] = apply_state(op, x[i], reg[i]);
    return reg;
}

UpdateResult compute_update(const OptimizerGenome& genome, OptimizerState& state, std::span<const double> g,
                            std::span<const double> w, Clock clock) {
    const auto& graph = genome.graph;
    if (g.size() != state.size() || w.size() != state.size())
        throw std::invalid_argument("compute_update: tensor size mismatch");

    UpdateResult result;
    std::array<std::optional<Tensor>, kOperandCount> operands;
    std::vector<Tensor> values(static_cast<std::size_t>(graph.node_count()));

    auto read = [&](const Ref& r) -> const Tensor& {
        if (r.is_node()) return values[static_cast<std::size_t>(r.index)];
        auto& slot = operands[static_cast<std::size_t>(r.index)];
        if (!slot) slot = operand_value(static_cast<OperandId>(r.index), g, w, state);
        return *slot;
    };
    auto input = [&](int node_id, int slot_index, const Edge& e) -> Tensor {
        const Tensor& src = read(e.source);
        if (!e.decay) return src;
        const double scale = eval_decay_graph(*e.decay, clock);
        result.report.decay_values.push_back({node_id, slot_index, scale});
        Tensor scaled(src);
        for (auto& v : scaled) v *= scale;
        return scaled;
    };

    // Drop streams are keyed by position among active nodes, so removing
    // inactive nodes does not change them.
    const auto active = resolve_active(graph);
    for (std::size_t rank = 0; rank < active.size(); ++rank) {
        const int id = active[rank];
        const auto& node = graph.node(id);
        Tensor x1 = input(id, 0, node.inputs[0]);
        Tensor out;
        switch (op_kind(node.op)) {
            case OpKind::binary: out = eval_binary(node.op, x1, input(id, 1, node.inputs[1])); break;
            case OpKind::state_unary: out = eval_state(node.op, x1, state.node_regs.at(id)); break;
            case OpKind::scalar_unary: out = eval_unary(node.op, x1, drop_seed(state, static_cast<int>(rank))); break;
        }
        values[static_cast<std::size_t>(id)] = std::move(out);
    }

    result.update = std::move(values.back());
    double sq = 0.0;
    for (double v : result.update) {
        if (!std::isfinite(v)) result.report.nonfinite = true;
        sq += v * v;
    }
    result.report.update_norm = std::sqrt(sq);
    return result;
}

double momentum_beta(Clock clock) {
    return 0.90 + 0.05 * std::cos(2.0 * std::numbers::pi * clock.fraction());
}

void apply_momentum(Momentum momentum, std::span<double> w, std::span<double> z, std::span<const double> update,
                    double alpha, double beta) {
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double step = alpha * update[i];
        switch (momentum) {
            case Momentum::none: w[i] -= step; break;
            case Momentum::momentum:
                z[i] = beta * z[i] - step;
                w[i] += z[i];
                break;
            case Momentum::nesterov:
                z[i] = beta * z[i] - step;
                w[i] += beta * z[i] - step;
                break;
        }
    }
}

StepReport apply_step(const OptimizerGenome& genome, OptimizerState& state, std::span<double> w,
                      std::span<const double> g, double alpha, Clock clock) {
    if (alpha < 0.0) throw std::invalid_argument("apply_step: learning rate must be non-negative");
    update_emas(state, g);
    auto [update, report] = compute_update(genome, state, g, w, clock);
    apply_momentum(genome.momentum, w, state.momentum_slot, update, alpha, momentum_beta(clock));
    ++state.step;
    return report;
}

}  // namespace nos
