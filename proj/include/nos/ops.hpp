// SPDX-License-Identifier: Apache-2.0
//
// Primitive vocabulary of the two search spaces: weight-update operands,
// decay-schedule operands and the operation codes shared by both graphs.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

namespace nos {

/// Leaf inputs of the weight-update graph.
enum class OperandId : std::uint8_t {
    g,
    g2,
    g3,
    vhat,
    shat,
    lhat,
    sign_g,
    sign_vhat,
    const1,
    const2,
    w_1e6,
    w_1e5,
    w_1e4,
    w_1e3,
    qhm_v,    // 0.3g + 0.7v
    qhm_s,    // 0.05g^2 + 0.95s
    qhm_l,    // 0.01g^3 + 0.99lambda
    aggmo_v,  // (1/3) sum_j beta_j v_j - g
    aggmo_s,
    aggmo_l,
};
inline constexpr int kOperandCount = 20;

/// Leaf inputs of a decay graph: the time schedules.
enum class ScheduleId : std::uint8_t { ld, li, ldr, lir, cd, ci, cdr, cir, ccd, cci, ed, ei, dd, di };
inline constexpr int kScheduleCount = 14;

enum class OpCode : std::uint8_t {
    // scalar unary, weight-update space
    identity,
    neg,
    ln_abs,
    sqrt_abs,
    exp,
    abs,
    sigmoid,
    sigmoid_grad,
    softsign,
    softsign_grad,
    softplus,
    erf,
    tanh,
    arctanh,
    bessel_i1e,
    arcsinh,
    max0,
    min0,
    drop_0_5,
    drop_0_3,
    drop_0_1,
    norm,
    erfc,
    // scalar unary, decay space only
    arctan,
    square,
    sqrt,
    tanh_grad,
    // binary
    add,
    mul,
    sub,
    div,
    div_sqrt,
    max,
    min,
    lerp_95,
    clip,
    pow_abs,
    // state-saving unary
    state_ema,
    state_diff,
    state_max,
};
inline constexpr int kOpCodeCount = 40;

enum class OpKind : std::uint8_t { scalar_unary, binary, state_unary };

OpKind op_kind(OpCode op) noexcept;
int arity(OpCode op) noexcept;
inline bool is_state(OpCode op) noexcept { return op_kind(op) == OpKind::state_unary; }
inline bool is_binary(OpCode op) noexcept { return op_kind(op) == OpKind::binary; }
/// True for drop and norm: ops whose result is not a per-element function.
bool is_tensor_level(OpCode op) noexcept;

std::string_view op_name(OpCode op) noexcept;
std::optional<OpCode> parse_op(std::string_view name) noexcept;

std::string_view operand_name(OperandId id) noexcept;
std::optional<OperandId> parse_operand(std::string_view name) noexcept;

std::string_view schedule_name(ScheduleId id) noexcept;
std::optional<ScheduleId> parse_schedule(std::string_view name) noexcept;

/// Ops available to weight-update nodes, split by arity (unary includes
/// the state-saving ops). 26 + 10 = 36.
std::span<const OpCode> update_unary_ops() noexcept;
std::span<const OpCode> update_binary_ops() noexcept;
std::span<const OpCode> update_ops() noexcept;

/// Reduced unary set (13) and the binary set (10) of decay graphs.
std::span<const OpCode> decay_unary_ops() noexcept;
std::span<const OpCode> decay_binary_ops() noexcept;
std::span<const OpCode> decay_ops() noexcept;

bool allowed_in_update(OpCode op) noexcept;
bool allowed_in_decay(OpCode op) noexcept;

inline constexpr double kEpsilon = 1e-8;
inline constexpr double kArctanhBound = 1.0 - 1e-7;

/// Element-wise semantics of every scalar unary op (drop and norm are
/// handled at tensor level by the engine; here they act as identity).
double apply_unary(OpCode op, double x) noexcept;
double apply_binary(OpCode op, double x1, double x2) noexcept;
/// Next register value of a state-saving op; the node outputs this value.
double apply_state(OpCode op, double x, double z) noexcept;

double bessel_i1e(double x) noexcept;
double drop_probability(OpCode op) noexcept;

}  // namespace nos
