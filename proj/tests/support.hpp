// SPDX-License-Identifier: Apache-2.0
//
// Small genome builders and numeric helpers shared by the unit tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "nos/engine.hpp"
#include "nos/genome.hpp"
#include "nos/random.hpp"

namespace nos::testing {

inline Edge edge(OperandId id) { return Edge{Ref::operand(id), std::nullopt}; }
inline Edge edge_node(int id) { return Edge{Ref::node(id), std::nullopt}; }
inline Edge decayed(Edge e, DecayGraph d) {
    e.decay = std::move(d);
    return e;
}

/// U = op(x) with no hidden nodes.
inline OptimizerGenome unary_genome(OpCode op, OperandId x, Momentum m = Momentum::none) {
    OptimizerGenome g;
    g.graph.output = UpdateNode{op, {edge(x)}};
    g.momentum = m;
    g.uid = "test";
    return g;
}

inline OptimizerGenome binary_genome(OpCode op, OperandId a, OperandId b) {
    OptimizerGenome g;
    g.graph.output = UpdateNode{op, {edge(a), edge(b)}};
    g.uid = "test";
    return g;
}

/// Decay graph: out = op(schedule).
inline DecayGraph decay_unary(OpCode op, ScheduleId s) {
    DecayGraph d;
    d.output = DecayNode{op, {Ref::operand(s)}};
    return d;
}

inline DecayGraph decay_binary(OpCode op, ScheduleId a, ScheduleId b) {
    DecayGraph d;
    d.output = DecayNode{op, {Ref::operand(a), Ref::operand(b)}};
    return d;
}

/// Closed-form schedule values, written independently of the library.
inline double schedule_oracle(ScheduleId id, double t, double T) {
    const double pi = M_PI;
    const double r = std::fmod(2 * t, T);
    const double lin = 1 - t / T;
    switch (id) {
        case ScheduleId::ld: return 1 - t / T;
        case ScheduleId::li: return t / T;
        case ScheduleId::ldr: return 1 - r / T;
        case ScheduleId::lir: return r / T;
        case ScheduleId::cd: return 0.5 * (1 + std::cos(t * pi / T));
        case ScheduleId::ci: return 0.5 * (1 - std::cos(t * pi / T));
        case ScheduleId::cdr: return 0.5 * (1 + std::cos(pi * r / T));
        case ScheduleId::cir: return 0.5 * (1 - std::cos(pi * r / T));
        case ScheduleId::ccd: return 0.5 * (1 + std::cos(2 * t * pi / T));
        case ScheduleId::cci: return 0.5 * (1 - std::cos(2 * t * pi / T));
        case ScheduleId::ed: return std::pow(0.01, t / T);
        case ScheduleId::ei: return 1 - std::pow(0.01, t / T);
        case ScheduleId::dd: return 0.95 * lin / (0.05 + 0.95 * lin);
        case ScheduleId::di: return 0.95 - 0.95 * lin / (0.05 + 0.95 * lin);
    }
    return NAN;
}

inline Tensor random_tensor(Rng& rng, std::size_t n, double lo, double hi) {
    Tensor t(n);
    for (auto& x : t) x = rng.uniform(lo, hi);
    return t;
}

inline double rel_err(double a, double b) {
    if (a == b) return 0.0;
    return std::fabs(a - b) / std::max(std::fabs(a), std::fabs(b));
}

inline double max_rel_err(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, rel_err(a[i], b[i]));
    return m;
}

}  // namespace nos::testing
