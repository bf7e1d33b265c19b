// SPDX-License-Identifier: Apache-2.0
#include "nos/ops.hpp"

#include <algorithm>
#include <cmath>

namespace nos {

namespace {

constexpr std::array<std::string_view, kOpCodeCount> kOpNames = {
    "identity", "neg",      "ln_abs",    "sqrt_abs",   "exp",       "abs",       "sigmoid",
    "sigmoid_grad", "softsign", "softsign_grad", "softplus", "erf", "tanh",     "arctanh",
    "bessel_i1e", "arcsinh", "max0",     "min0",       "drop_0_5",  "drop_0_3",  "drop_0_1",
    "norm",     "erfc",     "arctan",    "square",     "sqrt",      "tanh_grad", "add",
    "mul",      "sub",      "div",       "div_sqrt",   "max",       "min",       "lerp_95",
    "clip",     "pow_abs",  "state_ema", "state_diff", "state_max",
};

constexpr std::array<std::string_view, kOperandCount> kOperandNames = {
    "g",      "g2",     "g3",     "vhat",   "shat",   "lhat",  "sign_g",
    "sign_vhat", "const1", "const2", "w_1e-6", "w_1e-5", "w_1e-4", "w_1e-3",
    "qhm_v",  "qhm_s",  "qhm_l",  "aggmo_v", "aggmo_s", "aggmo_l",
};

constexpr std::array<std::string_view, kScheduleCount> kScheduleNames = {
    "ld", "li", "ldr", "lir", "cd", "ci", "cdr", "cir", "ccd", "cci", "ed", "ei", "dd", "di",
};

using enum OpCode;

constexpr std::array kUpdateUnary = {
    identity, neg,  ln_abs,     sqrt_abs, exp,  abs,      sigmoid,  sigmoid_grad, softsign,
    softsign_grad, softplus, erf, OpCode::tanh, arctanh, bessel_i1e, arcsinh, max0, min0,
    drop_0_5, drop_0_3, drop_0_1, norm, OpCode::erfc, state_ema, state_diff, state_max,
};
constexpr std::array kBinary = {add, mul, sub, div, div_sqrt, max, min, lerp_95, clip, pow_abs};
constexpr std::array kUpdateAll = {
    identity, neg,  ln_abs,     sqrt_abs, exp,  abs,      sigmoid,  sigmoid_grad, softsign,
    softsign_grad, softplus, erf, OpCode::tanh, arctanh, bessel_i1e, arcsinh, max0, min0,
    drop_0_5, drop_0_3, drop_0_1, norm, OpCode::erfc, state_ema, state_diff, state_max,
    add, mul, sub, div, div_sqrt, max, min, lerp_95, clip, pow_abs,
};
constexpr std::array kDecayUnary = {
    identity, sigmoid, sigmoid_grad, erf, OpCode::erfc, OpCode::tanh, arctan,
    bessel_i1e, square, OpCode::sqrt, softsign, softsign_grad, tanh_grad,
};
constexpr std::array kDecayAll = {
    identity, sigmoid, sigmoid_grad, erf, OpCode::erfc, OpCode::tanh, arctan, bessel_i1e,
    square, OpCode::sqrt, softsign, softsign_grad, tanh_grad,
    add, mul, sub, div, div_sqrt, max, min, lerp_95, clip, pow_abs,
};

static_assert(kUpdateUnary.size() == 26);
static_assert(kUpdateAll.size() == 36);
static_assert(kDecayUnary.size() == 13);
static_assert(kDecayAll.size() == 23);

template <std::size_t N>
constexpr bool contains(const std::array<OpCode, N>& set, OpCode op) {
    return std::find(set.begin(), set.end(), op) != set.end();
}

double sigmoid_fn(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

OpKind op_kind(OpCode op) noexcept {
    const auto i = static_cast<int>(op);
    if (i >= static_cast<int>(state_ema)) return OpKind::state_unary;
    if (i >= static_cast<int>(add)) return OpKind::binary;
    return OpKind::scalar_unary;
}

int arity(OpCode op) noexcept { return is_binary(op) ? 2 : 1; }

bool is_tensor_level(OpCode op) noexcept {
    return op == drop_0_5 || op == drop_0_3 || op == drop_0_1 || op == norm;
}

std::string_view op_name(OpCode op) noexcept { return kOpNames[static_cast<std::size_t>(op)]; }

std::optional<OpCode> parse_op(std::string_view name) noexcept {
    for (std::size_t i = 0; i < kOpNames.size(); ++i)
        if (kOpNames[i] == name) return static_cast<OpCode>(i);
    return std::nullopt;
}

std::string_view operand_name(OperandId id) noexcept { return kOperandNames[static_cast<std::size_t>(id)]; }

std::optional<OperandId> parse_operand(std::string_view name) noexcept {
    for (std::size_t i = 0; i < kOperandNames.size(); ++i)
        if (kOperandNames[i] == name) return static_cast<OperandId>(i);
    return std::nullopt;
}

std::string_view schedule_name(ScheduleId id) noexcept { return kScheduleNames[static_cast<std::size_t>(id)]; }

std::optional<ScheduleId> parse_schedule(std::string_view name) noexcept {
    for (std::size_t i = 0; i < kScheduleNames.size(); ++i)
        if (kScheduleNames[i] == name) return static_cast<ScheduleId>(i);
    return std::nullopt;
}

std::span<const OpCode> update_unary_ops() noexcept { return kUpdateUnary; }
std::span<const OpCode> update_binary_ops() noexcept { return kBinary; }
std::span<const OpCode> update_ops() noexcept { return kUpdateAll; }
std::span<const OpCode> decay_unary_ops() noexcept { return kDecayUnary; }
std::span<const OpCode> decay_binary_ops() noexcept { return kBinary; }
std::span<const OpCode> decay_ops() noexcept { return kDecayAll; }

bool allowed_in_update(OpCode op) noexcept { return contains(kUpdateAll, op); }
bool allowed_in_decay(OpCode op) noexcept { return contains(kDecayAll, op); }

double drop_probability(OpCode op) noexcept {
    switch (op) {
        case drop_0_5: return 0.5;
        case drop_0_3: return 0.3;
        case drop_0_1: return 0.1;
        default: return 0.0;
    }
}

double bessel_i1e(double x) noexcept {
    if (std::isnan(x)) return x;
    const double ax = std::fabs(x);
    double r;
    if (ax == 0.0) {
        r = 0.0;
    } else if (ax < 600.0) {
        r = std::exp(-ax) * std::cyl_bessel_i(1.0, ax);
    } else {
        // Hankel expansion: e^{-x} I1(x) ~ (2 pi x)^{-1/2} sum_k (-1)^k a_k(1) / x^k
        const double inv = 1.0 / ax;
        double term = 1.0;
        double sum = 1.0;
        for (int k = 1; k <= 6; ++k) {
            const double m = 2.0 * k - 1.0;
            term *= -(4.0 - m * m) / (8.0 * k) * inv;
            sum += term;
        }
        r = sum / std::sqrt(6.283185307179586 * ax);
    }
    return x < 0 ? -r : r;
}

double apply_unary(OpCode op, double x) noexcept {
    switch (op) {
        case identity: return x;
        case neg: return -x;
        case ln_abs: return std::log(std::fabs(x) + kEpsilon);
        case sqrt_abs: return std::sqrt(std::fabs(x));
        case exp: return std::exp(x);
        case abs: return std::fabs(x);
        case sigmoid: return sigmoid_fn(x);
        case sigmoid_grad: {
            const double s = sigmoid_fn(x);
            return s * (1.0 - s);
        }
        case softsign: return x / (1.0 + std::fabs(x));
        case softsign_grad: {
            const double d = 1.0 + std::fabs(x);
            return 1.0 / (d * d);
        }
        case softplus: return x > 30.0 ? x : std::log1p(std::exp(x));
        case erf: return std::erf(x);
        case OpCode::tanh: return std::tanh(x);
        case arctanh: return std::atanh(std::clamp(x, -kArctanhBound, kArctanhBound));
        case OpCode::bessel_i1e: return nos::bessel_i1e(x);
        case arcsinh: return std::asinh(x);
        case max0: return x > 0.0 ? x : 0.0;
        case min0: return x < 0.0 ? x : 0.0;
        case OpCode::erfc: return std::erfc(x);
        case arctan: return std::atan(x);
        case square: return x * x;
        case OpCode::sqrt: return std::sqrt(std::fabs(x));
        case tanh_grad: {
            const double t = std::tanh(x);
            return 1.0 - t * t;
        }
        case drop_0_5:
        case drop_0_3:
        case drop_0_1:
        case norm:
        default: return x;
    }
}

double apply_binary(OpCode op, double x1, double x2) noexcept {
    switch (op) {
        case add: return x1 + x2;
        case mul: return x1 * x2;
        case sub: return x1 - x2;
        case div: return x1 / (x2 + kEpsilon);
        case div_sqrt: return x1 / std::sqrt(1.0 + x2 * x2);
        case max: return std::fmax(x1, x2);
        case min: return std::fmin(x1, x2);
        case lerp_95: return 0.95 * x1 + 0.05 * x2;
        case clip: {
            const double bound = std::fabs(x2);
            if (std::isnan(x1) || std::isnan(bound)) return x1 + bound;
            return std::clamp(x1, -bound, bound);
        }
        case pow_abs: return std::exp(x2 * std::log(std::fabs(x1) + kEpsilon));
        default: return x1;
    }
}

double apply_state(OpCode op, double x, double z) noexcept {
    switch (op) {
        case state_ema: return 0.95 * x + 0.05 * z;
        case state_diff: return x - z;
        case state_max: return std::fmax(x, z);
        default: return x;
    }
}

}  // namespace nos
