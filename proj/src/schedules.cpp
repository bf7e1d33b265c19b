// SPDX-License-Identifier: Apache-2.0
#include "nos/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace nos {

namespace {

constexpr double kClampGuard = 1e-12;

double clamp_unit(double x) {
    if (x < 0.0 && x >= -kClampGuard) return 0.0;
    if (x > 1.0 && x <= 1.0 + kClampGuard) return 1.0;
    return x;
}

double demon(double frac) {
    const double rest = 1.0 - frac;
    return 0.95 * rest / (0.05 + 0.95 * rest);
}

// Scalar helpers for the learning-rate closed forms.
double sigmoid(double x) { return apply_unary(OpCode::sigmoid, x); }
double softsign(double x) { return apply_unary(OpCode::softsign, x); }
double softsign_grad(double x) { return apply_unary(OpCode::softsign_grad, x); }
double tanh_grad(double x) { return apply_unary(OpCode::tanh_grad, x); }

}  // namespace

double eval_schedule(ScheduleId id, Clock clock) noexcept {
    constexpr double pi = std::numbers::pi;
    const double u = clock.fraction();
    const double r = clock.restart_fraction();
    double v = 0.0;
    switch (id) {
        case ScheduleId::ld: v = 1.0 - u; break;
        case ScheduleId::li: v = u; break;
        case ScheduleId::ldr: v = 1.0 - r; break;
        case ScheduleId::lir: v = r; break;
        case ScheduleId::cd: v = 0.5 * (1.0 + std::cos(u * pi)); break;
        case ScheduleId::ci: v = 0.5 * (1.0 - std::cos(u * pi)); break;
        case ScheduleId::cdr: v = 0.5 * (1.0 + std::cos(pi * r)); break;
        case ScheduleId::cir: v = 0.5 * (1.0 - std::cos(pi * r)); break;
        case ScheduleId::ccd: v = 0.5 * (1.0 + std::cos(2.0 * u * pi)); break;
        case ScheduleId::cci: v = 0.5 * (1.0 - std::cos(2.0 * u * pi)); break;
        case ScheduleId::ed: v = std::pow(0.01, u); break;
        case ScheduleId::ei: v = 1.0 - std::pow(0.01, u); break;
        case ScheduleId::dd: v = demon(u); break;
        case ScheduleId::di: v = 0.95 - demon(u); break;
    }
    return clamp_unit(v);
}

double eval_decay_graph(const DecayGraph& graph, Clock clock) {
    std::vector<double> values(static_cast<std::size_t>(graph.node_count()), 0.0);
    auto read = [&](const Ref& r) {
        return r.is_node() ? values[static_cast<std::size_t>(r.index)]
                           : eval_schedule(static_cast<ScheduleId>(r.index), clock);
    };
    for (int id : resolve_active(graph)) {
        const auto& node = graph.node(id);
        const double x1 = read(node.inputs[0]);
        values[static_cast<std::size_t>(id)] =
            is_binary(node.op) ? apply_binary(node.op, x1, read(node.inputs[1])) : apply_unary(node.op, x1);
    }
    return values.back();
}

double one_cycle(Clock clock, double warm_frac, double hold_frac) {
    if (warm_frac < 0.0 || hold_frac < 0.0 || warm_frac + hold_frac > 1.0)
        throw std::invalid_argument("one_cycle: warm and hold fractions must be non-negative and sum to at most 1");
    const double T = static_cast<double>(clock.T);
    const double t = static_cast<double>(clock.t);
    const double warm_end = warm_frac * T;
    const double hold_end = (warm_frac + hold_frac) * T;
    if (t < warm_end) return t / warm_end;
    if (t <= hold_end || hold_end >= T) return 1.0;
    const double progress = (t - hold_end) / (T - hold_end);
    return clamp_unit(0.5 * (1.0 + std::cos(std::numbers::pi * std::min(progress, 1.0))));
}

double catalog_lr_shape(int index, Clock clock) {
    auto s = [&](ScheduleId id) { return eval_schedule(id, clock); };
    using enum ScheduleId;
    switch (index) {
        case 1: return std::erfc(std::erfc(s(ci))) / tanh_grad(s(cir));
        case 2: return std::erfc(std::erfc(s(ci))) / (tanh_grad(s(cir)) * tanh_grad(s(ci)));
        case 3: return std::atan(s(li)) / (tanh_grad(s(lir)) * std::sqrt(softsign_grad(s(di))));
        case 4: {
            const double num = sigmoid(s(li));
            return num * num / sigmoid(2.0 * softsign(s(ld)));
        }
        case 5: return 1.0 / std::sqrt(std::erf(s(ed)));
        case 6: return std::atan(s(li)) * std::erfc(s(cci)) / std::sqrt(softsign_grad(s(cci)));
        case 7: return 1.0 / std::sqrt(softsign_grad(s(lir)));
        case 8: return 1.0 / std::sqrt(softsign(std::atan(s(ei))));
        case 9: return std::tanh(std::fmax(s(cci), s(lir)));
        default: throw std::out_of_range("catalog_lr: index must be in 1..9, got " + std::to_string(index));
    }
}

double catalog_lr(int index, Clock clock) {
    const double base = one_cycle(clock);
    const double shape = catalog_lr_shape(index, clock);
    if (base == 0.0) return 0.0;
    return shape * base;
}

std::optional<int> parse_lr_name(std::string_view name) noexcept {
    if (name.size() != 3 || name[0] != 'L' || name[1] != 'R' || name[2] < '1' || name[2] > '9') return std::nullopt;
    return name[2] - '0';
}

double catalog_lr(std::string_view name, Clock clock) {
    const auto index = parse_lr_name(name);
    if (!index) throw std::out_of_range("unknown learning-rate schedule '" + std::string(name) + "'");
    return catalog_lr(*index, clock);
}

}  // namespace nos
