// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "nos/genome.hpp"

namespace nos {

/// Infix formula of the active update subgraph on the first line. Decayed
/// edges render as t1*(x), t2*(x), ... numbered in the order they are met
/// from the output; one "tK = ..." legend line per decay follows, then a
/// "momentum: ..." line unless the momentum type is none.
std::string pretty_print(const OptimizerGenome& genome);

struct LabeledDecay {
    std::string label;  // "t1", "t2", ... as in pretty_print
    int node = 0;
    int slot = 0;
    DecayGraph graph;
};

/// Decays on active edges, in pretty_print numbering order.
std::vector<LabeledDecay> labeled_decays(const OptimizerGenome& genome);

/// Infix formula of a decay graph over schedule names.
std::string pretty_print(const DecayGraph& graph);

}  // namespace nos
