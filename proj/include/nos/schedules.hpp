// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

#include "nos/genome.hpp"

namespace nos {

/// Current step t of a horizon T, 0 <= t <= T, T > 0.
struct Clock {
    std::int64_t t = 0;
    std::int64_t T = 1;

    double fraction() const { return static_cast<double>(t) / static_cast<double>(T); }
    /// mod(2t, T) / T, computed exactly in integers; 0 at t = T/2 and t = T.
    double restart_fraction() const { return static_cast<double>((2 * t) % T) / static_cast<double>(T); }
};

double eval_schedule(ScheduleId id, Clock clock) noexcept;

double eval_decay_graph(const DecayGraph& graph, Clock clock);

inline constexpr double kWarmFraction = 6400.0 / 96000.0;
inline constexpr double kHoldFraction = 12800.0 / 96000.0;

/// Linear warmup 0 -> 1, hold at 1, then cosine decay 1 -> 0 at t = T.
double one_cycle(Clock clock, double warm_frac = kWarmFraction, double hold_frac = kHoldFraction);

inline constexpr int kLearningRateScheduleCount = 9;

/// LR1..LR9 as closed forms, multiplied by one_cycle(clock). When the
/// one-cycle factor is zero the result is zero even where the closed form
/// has a pole (LR8 at t = 0).
double catalog_lr(int index, Clock clock);
double catalog_lr(std::string_view name, Clock clock);
/// The closed form alone, without the one-cycle factor.
double catalog_lr_shape(int index, Clock clock);
std::optional<int> parse_lr_name(std::string_view name) noexcept;

}  // namespace nos
