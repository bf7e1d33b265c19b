// SPDX-License-Identifier: Apache-2.0
//
// Random genome construction and the six-way mutation operator. Every
// function takes an explicit generator; nothing reads global state.
#pragma once

#include <string>
#include <string_view>

#include "nos/genome.hpp"
#include "nos/integrity.hpp"
#include "nos/random.hpp"

namespace nos {

struct InitConfig {
    double p_decay = 0.2;
    int hidden = 4;
    int decay_hidden = 1;
    int decay_attempt_cap = 1000;
    int range_grid = kDefaultRangeGrid;

    void check() const;
};

/// Structurally valid decay graph with `hidden` hidden nodes; no range check.
DecayGraph random_decay_graph(Rng& rng, int hidden);

/// Re-samples random_decay_graph until it passes decay_range_check.
/// Throws ConfigError after cfg.decay_attempt_cap failures.
DecayGraph random_valid_decay_graph(Rng& rng, const InitConfig& cfg);

OptimizerGenome random_init(Rng& rng, const InitConfig& cfg = {});

enum class MutationMask { full, decay_only };

std::string_view mask_name(MutationMask m) noexcept;
MutationMask parse_mask(std::string_view name);

struct MutateConfig {
    MutationMask mask = MutationMask::full;
    InitConfig init;  // used when a decay graph is created
};

/// One of the six mutation classes. Decay edits carry a detail suffix in the
/// lineage tag ("decay_add", "decay_delete", "decay_op", ...).
enum class MutationClass { op, connection, arity, swap, momentum, decay };

std::string_view mutation_class_name(MutationClass c) noexcept;
/// Class of a lineage tag written by mutate.
MutationClass mutation_class_of(std::string_view tag);

/// Child differing from `parent` by exactly one mutation. The child gets a
/// fresh uid and lineage {parent.uid, tag}. Mutated decay graphs are not
/// range checked here; the search's integrity loop rejects them.
OptimizerGenome mutate(const OptimizerGenome& parent, Rng& rng, const MutateConfig& cfg = {});

}  // namespace nos
