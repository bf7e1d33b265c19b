// SPDX-License-Identifier: Apache-2.0
//
// Published optimizers, Adam variants, standard baselines and decay-stripped
// ablations, each as a genome plus a closed-form oracle that does not go
// through the graph interpreter.
#pragma once

#include <span>
#include <string>
#include <string_view>

#include "nos/engine.hpp"

namespace nos {

struct CatalogEntry {
    std::string name;
    std::string family;  // discovered | adam_variant | baseline | ablation
    OptimizerGenome genome;
    std::string notes;
};

/// All entry names in a fixed order.
std::span<const std::string_view> catalog_names() noexcept;
bool in_catalog(std::string_view name) noexcept;

/// Throws ConfigError for unknown names.
CatalogEntry catalog_entry(std::string_view name);

/// Running averages the oracle reads (v, s, lambda of g, g^2, g^3).
struct Moments {
    Tensor v, s, l;
};

/// Straight-line evaluation of the entry's update formula.
Tensor oracle_update(std::string_view name, std::span<const double> g, std::span<const double> w, const Moments& m,
                     Clock clock);

}  // namespace nos
