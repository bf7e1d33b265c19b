// SPDX-License-Identifier: Apache-2.0
//
// Canonical JSON text for genomes. Node references are written as "n<id>",
// operands and schedules by name.
#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "nos/genome.hpp"

namespace nos {

using Json = nlohmann::ordered_json;

Json to_json(const OptimizerGenome& genome);
Json to_json(const DecayGraph& graph);

/// Throws ParseError naming the JSON pointer of the offending field.
OptimizerGenome genome_from_json(const Json& j);
DecayGraph decay_from_json(const Json& j, const std::string& pointer = "");

/// Pretty-printed canonical text (two-space indent, trailing newline).
std::string serialize(const OptimizerGenome& genome);
/// Single-line form used in history files.
std::string serialize_compact(const OptimizerGenome& genome);

/// Parses and validates; malformed text reports the byte offset.
OptimizerGenome deserialize(std::string_view text);

}  // namespace nos
