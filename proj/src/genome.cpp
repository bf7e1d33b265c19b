// SPDX-License-Identifier: Apache-2.0
#include "nos/genome.hpp"

#include <array>

#include "nos/error.hpp"

namespace nos {

namespace {

constexpr std::array<std::string_view, kMomentumCount> kMomentumNames = {"none", "momentum", "nesterov"};

template <class EdgeT, class OpCheck>
std::string structure_error(const BasicGraph<EdgeT>& graph, int operand_count, OpCheck allowed,
                            std::string_view what) {
    for (int id = 0; id < graph.node_count(); ++id) {
        const auto& node = graph.node(id);
        const std::string where = std::string(what) + " node " + std::to_string(id);
        if (!allowed(node.op)) return where + ": op '" + std::string(op_name(node.op)) + "' not allowed";
        if (static_cast<int>(node.inputs.size()) != arity(node.op))
            return where + ": expected " + std::to_string(arity(node.op)) + " inputs, got " +
                   std::to_string(node.inputs.size());
        for (const auto& e : node.inputs) {
            const Ref& r = source_of(e);
            if (r.is_node()) {
                if (r.index < 0 || r.index >= id || r.index >= graph.output_id())
                    return where + ": reference to node " + std::to_string(r.index) + " is not an earlier hidden node";
            } else if (r.index < 0 || r.index >= operand_count) {
                return where + ": operand index " + std::to_string(r.index) + " out of range";
            }
        }
    }
    return {};
}

template <class EdgeT>
BasicGraph<EdgeT> prune_graph(const BasicGraph<EdgeT>& graph) {
    const auto active = resolve_active(graph);
    std::vector<int> remap(static_cast<std::size_t>(graph.node_count()), -1);
    for (std::size_t i = 0; i < active.size(); ++i) remap[static_cast<std::size_t>(active[i])] = static_cast<int>(i);

    auto rewrite = [&](BasicNode<EdgeT> node) {
        for (auto& e : node.inputs) {
            Ref& r = source_of(e);
            if (r.is_node()) r.index = remap[static_cast<std::size_t>(r.index)];
        }
        return node;
    };
    BasicGraph<EdgeT> out;
    for (int id : active)
        if (id != graph.output_id()) out.hidden.push_back(rewrite(graph.node(id)));
    out.output = rewrite(graph.output);
    return out;
}

}  // namespace

std::string_view momentum_name(Momentum m) noexcept { return kMomentumNames[static_cast<std::size_t>(m)]; }

std::optional<Momentum> parse_momentum(std::string_view name) noexcept {
    for (std::size_t i = 0; i < kMomentumNames.size(); ++i)
        if (kMomentumNames[i] == name) return static_cast<Momentum>(i);
    return std::nullopt;
}

std::string validation_error(const DecayGraph& graph) {
    return structure_error(graph, kScheduleCount, allowed_in_decay, "decay");
}

std::string validation_error(const OptimizerGenome& genome) {
    const auto& graph = genome.graph;
    if (auto err = structure_error(graph, kOperandCount, allowed_in_update, "update"); !err.empty()) return err;
    for (int id = 0; id < graph.node_count(); ++id) {
        const auto& node = graph.node(id);
        for (std::size_t slot = 0; slot < node.inputs.size(); ++slot) {
            const auto& decay = node.inputs[slot].decay;
            if (!decay) continue;
            if (auto err = validation_error(*decay); !err.empty())
                return "update node " + std::to_string(id) + " slot " + std::to_string(slot) + ": " + err;
        }
    }
    if (static_cast<int>(genome.momentum) >= kMomentumCount) return "momentum out of range";
    return {};
}

void validate(const OptimizerGenome& genome) {
    if (auto err = validation_error(genome); !err.empty()) throw InvalidGenome(err);
}

DecayGraph prune_inactive(const DecayGraph& graph) { return prune_graph(graph); }

OptimizerGenome prune_inactive(const OptimizerGenome& genome) {
    OptimizerGenome out = genome;
    out.graph = prune_graph(genome.graph);
    for (int id = 0; id < out.graph.node_count(); ++id)
        for (auto& e : out.graph.node(id).inputs)
            if (e.decay) e.decay = prune_graph(*e.decay);
    return out;
}

int edge_count(const OptimizerGenome& genome) {
    int n = 0;
    for (int id = 0; id < genome.graph.node_count(); ++id) n += static_cast<int>(genome.graph.node(id).inputs.size());
    return n;
}

int decayed_edge_count(const OptimizerGenome& genome) {
    int n = 0;
    for (int id = 0; id < genome.graph.node_count(); ++id)
        for (const auto& e : genome.graph.node(id).inputs) n += e.decay ? 1 : 0;
    return n;
}

}  // namespace nos
