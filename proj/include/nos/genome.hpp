// SPDX-License-Identifier: Apache-2.0
//
// The dual-graph genome: a weight-update graph whose argument connections
// may each carry a decay graph, plus a momentum type.
//
// Both graphs share one layout. Hidden nodes are numbered 0..H-1 and the
// output node has id H. A node may only read operands or hidden nodes with
// a smaller id, so every graph is a DAG by construction.
#pragma once

#include <compare>
#include <optional>
#include <string>
#include <vector>

#include "nos/ops.hpp"

namespace nos {

enum class RefKind : std::uint8_t { operand, node };

/// Input reference: an operand (OperandId or ScheduleId, depending on the
/// graph) or an earlier node.
struct Ref {
    RefKind kind = RefKind::operand;
    int index = 0;

    static constexpr Ref operand(int i) { return {RefKind::operand, i}; }
    static constexpr Ref operand(OperandId id) { return {RefKind::operand, static_cast<int>(id)}; }
    static constexpr Ref operand(ScheduleId id) { return {RefKind::operand, static_cast<int>(id)}; }
    static constexpr Ref node(int id) { return {RefKind::node, id}; }

    bool is_node() const { return kind == RefKind::node; }
    auto operator<=>(const Ref&) const = default;
};

template <class EdgeT>
struct BasicNode {
    OpCode op = OpCode::identity;
    std::vector<EdgeT> inputs;

    bool operator==(const BasicNode&) const = default;
};

template <class EdgeT>
struct BasicGraph {
    using Node = BasicNode<EdgeT>;
    using Edge = EdgeT;

    std::vector<Node> hidden;
    Node output;

    int output_id() const { return static_cast<int>(hidden.size()); }
    int node_count() const { return static_cast<int>(hidden.size()) + 1; }
    const Node& node(int id) const { return id == output_id() ? output : hidden[static_cast<std::size_t>(id)]; }
    Node& node(int id) { return id == output_id() ? output : hidden[static_cast<std::size_t>(id)]; }

    bool operator==(const BasicGraph&) const = default;
};

using DecayNode = BasicNode<Ref>;
/// Time-dependent scalar over the schedule operands; operand refs index ScheduleId.
using DecayGraph = BasicGraph<Ref>;

/// Argument connection of a weight-update node.
struct Edge {
    Ref source;
    std::optional<DecayGraph> decay;

    bool operator==(const Edge&) const = default;
};

using UpdateNode = BasicNode<Edge>;
/// Operand refs index OperandId.
using OptimizerGraph = BasicGraph<Edge>;

inline const Ref& source_of(const Ref& r) { return r; }
inline const Ref& source_of(const Edge& e) { return e.source; }
inline Ref& source_of(Ref& r) { return r; }
inline Ref& source_of(Edge& e) { return e.source; }

enum class Momentum : std::uint8_t { none, momentum, nesterov };
inline constexpr int kMomentumCount = 3;

std::string_view momentum_name(Momentum m) noexcept;
std::optional<Momentum> parse_momentum(std::string_view name) noexcept;

struct Lineage {
    std::string parent_uid;
    std::string mutation;

    bool operator==(const Lineage&) const = default;
};

struct OptimizerGenome {
    OptimizerGraph graph;
    Momentum momentum = Momentum::none;
    std::string uid;
    Lineage lineage;

    bool operator==(const OptimizerGenome&) const = default;
};

/// Ids of the nodes from which the output is reachable, ascending; the
/// output id is always last.
template <class EdgeT>
std::vector<int> resolve_active(const BasicGraph<EdgeT>& graph) {
    std::vector<char> active(static_cast<std::size_t>(graph.node_count()), 0);
    active.back() = 1;
    for (int id = graph.output_id(); id >= 0; --id) {
        if (!active[static_cast<std::size_t>(id)]) continue;
        for (const auto& e : graph.node(id).inputs) {
            const Ref& r = source_of(e);
            if (r.is_node()) active[static_cast<std::size_t>(r.index)] = 1;
        }
    }
    std::vector<int> ids;
    for (int id = 0; id < graph.node_count(); ++id)
        if (active[static_cast<std::size_t>(id)]) ids.push_back(id);
    return ids;
}

/// Empty string when the genome is structurally valid, otherwise the first
/// violation found.
std::string validation_error(const OptimizerGenome& genome);
std::string validation_error(const DecayGraph& graph);
void validate(const OptimizerGenome& genome);

/// Drops inactive nodes (update graph and decay graphs) and renumbers refs.
OptimizerGenome prune_inactive(const OptimizerGenome& genome);
DecayGraph prune_inactive(const DecayGraph& graph);

/// Number of argument connections, and how many carry a decay graph.
int edge_count(const OptimizerGenome& genome);
int decayed_edge_count(const OptimizerGenome& genome);

}  // namespace nos
