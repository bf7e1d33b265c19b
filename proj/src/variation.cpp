// SPDX-License-Identifier: Apache-2.0
#include "nos/variation.hpp"

#include <span>
#include <string>
#include <vector>

#include "nos/error.hpp"

namespace nos {

namespace {

OpCode pick_op(Rng& rng, std::span<const OpCode> set) { return set[static_cast<std::size_t>(rng.index(set.size()))]; }

OpCode other_op(Rng& rng, std::span<const OpCode> set, OpCode current) {
    std::vector<OpCode> rest;
    for (OpCode op : set)
        if (op != current) rest.push_back(op);
    return pick_op(rng, rest);
}

/// Sources a node may read: operands, then hidden nodes below `limit`.
template <class EdgeT>
int source_limit(const BasicGraph<EdgeT>& graph, int id) {
    return id == graph.output_id() ? graph.output_id() : id;
}

Ref source_at(int k, int operand_count) {
    return k < operand_count ? Ref::operand(k) : Ref::node(k - operand_count);
}

Ref random_source(Rng& rng, int operand_count, int limit) {
    return source_at(static_cast<int>(rng.index(static_cast<std::uint64_t>(operand_count + limit))), operand_count);
}

Ref other_source(Rng& rng, int operand_count, int limit, const Ref& current) {
    const int skip = current.is_node() ? operand_count + current.index : current.index;
    auto k = static_cast<int>(rng.index(static_cast<std::uint64_t>(operand_count + limit - 1)));
    if (k >= skip) ++k;
    return source_at(k, operand_count);
}

Edge make_edge(const Ref& r, const Edge*) { return Edge{r, std::nullopt}; }
Ref make_edge(const Ref& r, const Ref*) { return r; }

/// Search-space description shared by the two graph kinds.
struct Space {
    int operand_count;
    std::span<const OpCode> unary;
    std::span<const OpCode> binary;
};

const Space kUpdateSpace{kOperandCount, update_unary_ops(), update_binary_ops()};
const Space kDecaySpace{kScheduleCount, decay_unary_ops(), decay_binary_ops()};

enum class Structural { op, connection, arity, swap };
constexpr std::string_view kStructuralNames[] = {"op", "connection", "arity", "swap"};

template <class EdgeT>
std::vector<Structural> structural_choices(const BasicNode<EdgeT>& node) {
    std::vector<Structural> out = {Structural::op, Structural::connection, Structural::arity};
    if (node.inputs.size() == 2 && !(node.inputs[0] == node.inputs[1])) out.push_back(Structural::swap);
    return out;
}

template <class EdgeT>
void apply_structural(BasicGraph<EdgeT>& graph, int id, Structural kind, const Space& space, Rng& rng) {
    auto& node = graph.node(id);
    const int limit = source_limit(graph, id);
    switch (kind) {
        case Structural::op:
            node.op = other_op(rng, is_binary(node.op) ? space.binary : space.unary, node.op);
            break;
        case Structural::connection: {
            auto& edge = node.inputs[static_cast<std::size_t>(rng.index(node.inputs.size()))];
            source_of(edge) = other_source(rng, space.operand_count, limit, source_of(edge));
            break;
        }
        case Structural::arity:
            if (is_binary(node.op)) {
                node.op = pick_op(rng, space.unary);
                node.inputs.erase(node.inputs.begin() + static_cast<std::ptrdiff_t>(rng.index(2)));
            } else {
                node.op = pick_op(rng, space.binary);
                node.inputs.push_back(
                    make_edge(random_source(rng, space.operand_count, limit), static_cast<const EdgeT*>(nullptr)));
            }
            break;
        case Structural::swap: std::swap(node.inputs[0], node.inputs[1]); break;
    }
}

template <class EdgeT>
BasicNode<EdgeT> random_node(Rng& rng, const Space& space, std::span<const OpCode> ops, int limit) {
    BasicNode<EdgeT> node;
    node.op = pick_op(rng, ops);
    for (int i = 0; i < arity(node.op); ++i)
        node.inputs.push_back(
            make_edge(random_source(rng, space.operand_count, limit), static_cast<const EdgeT*>(nullptr)));
    return node;
}

template <class T>
T pick_from(Rng& rng, const std::vector<T>& items) {
    return items[static_cast<std::size_t>(rng.index(items.size()))];
}

}  // namespace

void InitConfig::check() const {
    if (!(p_decay >= 0.0 && p_decay <= 1.0)) throw ConfigError("init: p_decay must lie in [0, 1]");
    if (hidden < 0) throw ConfigError("init: hidden node count must be >= 0");
    if (decay_hidden < 0) throw ConfigError("init: decay hidden node count must be >= 0");
    if (decay_attempt_cap < 1) throw ConfigError("init: decay attempt cap must be >= 1");
    if (range_grid < 2) throw ConfigError("init: range grid must be >= 2");
}

DecayGraph random_decay_graph(Rng& rng, int hidden) {
    DecayGraph graph;
    for (int id = 0; id < hidden; ++id) graph.hidden.push_back(random_node<Ref>(rng, kDecaySpace, decay_ops(), id));
    graph.output = random_node<Ref>(rng, kDecaySpace, decay_ops(), hidden);
    return graph;
}

DecayGraph random_valid_decay_graph(Rng& rng, const InitConfig& cfg) {
    for (int attempt = 0; attempt < cfg.decay_attempt_cap; ++attempt) {
        DecayGraph graph = random_decay_graph(rng, cfg.decay_hidden);
        if (decay_range_check(graph, cfg.range_grid)) return graph;
    }
    throw ConfigError("no in-range decay graph after " + std::to_string(cfg.decay_attempt_cap) + " attempts");
}

OptimizerGenome random_init(Rng& rng, const InitConfig& cfg) {
    cfg.check();
    OptimizerGenome genome;
    auto& graph = genome.graph;
    for (int id = 0; id < cfg.hidden; ++id) graph.hidden.push_back(random_node<Edge>(rng, kUpdateSpace, update_ops(), id));
    graph.output = random_node<Edge>(rng, kUpdateSpace, update_ops(), cfg.hidden);
    genome.momentum = static_cast<Momentum>(rng.index(kMomentumCount));
    for (int id = 0; id < graph.node_count(); ++id)
        for (auto& edge : graph.node(id).inputs)
            if (rng.bernoulli(cfg.p_decay)) edge.decay = random_valid_decay_graph(rng, cfg);
    genome.uid = rng.hex_id();
    return genome;
}

std::string_view mask_name(MutationMask m) noexcept { return m == MutationMask::full ? "full" : "decay_only"; }

MutationMask parse_mask(std::string_view name) {
    if (name == "full") return MutationMask::full;
    if (name == "decay_only") return MutationMask::decay_only;
    throw ConfigError("unknown mutation mask '" + std::string(name) + "' (expected full or decay_only)");
}

std::string_view mutation_class_name(MutationClass c) noexcept {
    constexpr std::string_view names[] = {"op", "connection", "arity", "swap", "momentum", "decay"};
    return names[static_cast<int>(c)];
}

MutationClass mutation_class_of(std::string_view tag) {
    if (tag.starts_with("decay")) return MutationClass::decay;
    for (int c = 0; c < 5; ++c)
        if (tag == mutation_class_name(static_cast<MutationClass>(c))) return static_cast<MutationClass>(c);
    throw std::invalid_argument("unknown mutation tag '" + std::string(tag) + "'");
}

OptimizerGenome mutate(const OptimizerGenome& parent, Rng& rng, const MutateConfig& cfg) {
    OptimizerGenome child = parent;
    auto& graph = child.graph;
    const auto active = resolve_active(graph);
    const int id = pick_from(rng, active);
    auto& node = graph.node(id);

    std::vector<MutationClass> choices;
    if (cfg.mask == MutationMask::full) {
        for (auto s : structural_choices(node)) choices.push_back(static_cast<MutationClass>(s));
        choices.push_back(MutationClass::momentum);
    }
    choices.push_back(MutationClass::decay);

    std::string tag;
    const MutationClass cls = pick_from(rng, choices);
    switch (cls) {
        case MutationClass::op:
        case MutationClass::connection:
        case MutationClass::arity:
        case MutationClass::swap:
            apply_structural(graph, id, static_cast<Structural>(cls), kUpdateSpace, rng);
            tag = mutation_class_name(cls);
            break;
        case MutationClass::momentum: {
            auto k = static_cast<int>(rng.index(kMomentumCount - 1));
            if (k >= static_cast<int>(child.momentum)) ++k;
            child.momentum = static_cast<Momentum>(k);
            tag = "momentum";
            break;
        }
        case MutationClass::decay: {
            auto& edge = node.inputs[static_cast<std::size_t>(rng.index(node.inputs.size()))];
            if (!edge.decay) {
                edge.decay = random_valid_decay_graph(rng, cfg.init);
                tag = "decay_add";
            } else if (rng.bernoulli(0.5)) {
                edge.decay.reset();
                tag = "decay_delete";
            } else {
                auto& decay = *edge.decay;
                const int target = pick_from(rng, resolve_active(decay));
                const Structural kind = pick_from(rng, structural_choices(decay.node(target)));
                apply_structural(decay, target, kind, kDecaySpace, rng);
                tag = "decay_" + std::string(kStructuralNames[static_cast<int>(kind)]);
            }
            break;
        }
    }
    child.uid = rng.hex_id();
    child.lineage = Lineage{parent.uid, std::move(tag)};
    return child;
}

}  // namespace nos
