// SPDX-License-Identifier: Apache-2.0
#include "nos/serialize.hpp"

#include <functional>

#include "nos/error.hpp"

namespace nos {

namespace {

std::string ref_text(const Ref& r, bool decay_space) {
    if (r.is_node()) return "n" + std::to_string(r.index);
    return std::string(decay_space ? schedule_name(static_cast<ScheduleId>(r.index))
                                   : operand_name(static_cast<OperandId>(r.index)));
}

Json node_json(int id, const DecayNode& node) {
    Json j;
    j["id"] = id;
    j["op"] = op_name(node.op);
    Json inputs = Json::array();
    for (const auto& r : node.inputs) inputs.push_back(ref_text(r, true));
    j["inputs"] = std::move(inputs);
    return j;
}

Json node_json(int id, const UpdateNode& node) {
    Json j;
    j["id"] = id;
    j["op"] = op_name(node.op);
    Json inputs = Json::array();
    Json decays = Json::array();
    for (const auto& e : node.inputs) {
        inputs.push_back(ref_text(e.source, false));
        decays.push_back(e.decay ? to_json(*e.decay) : Json(nullptr));
    }
    j["inputs"] = std::move(inputs);
    j["decays"] = std::move(decays);
    return j;
}

template <class EdgeT>
void write_graph(Json& j, const BasicGraph<EdgeT>& graph) {
    Json nodes = Json::array();
    for (int id = 0; id < graph.output_id(); ++id) nodes.push_back(node_json(id, graph.node(id)));
    j["nodes"] = std::move(nodes);
    j["output"] = node_json(graph.output_id(), graph.output);
}

const Json& field(const Json& j, const char* key, const std::string& ptr) {
    if (!j.is_object()) throw ParseError(ptr.empty() ? "/" : ptr, "expected an object");
    const auto it = j.find(key);
    if (it == j.end()) throw ParseError(ptr.empty() ? "/" : ptr, std::string("missing field '") + key + "'");
    return *it;
}

std::string string_at(const Json& j, const std::string& ptr) {
    if (!j.is_string()) throw ParseError(ptr, "expected a string");
    return j.get<std::string>();
}

Ref parse_ref(const std::string& text, bool decay_space, int node_id, const std::string& ptr) {
    if (text.size() > 1 && text[0] == 'n' && text.find_first_not_of("0123456789", 1) == std::string::npos) {
        const int target = text.size() > 8 ? node_id : std::stoi(text.substr(1));
        if (target >= node_id) throw ParseError(ptr, "reference '" + text + "' is not an earlier node");
        return Ref::node(target);
    }
    if (decay_space) {
        if (auto s = parse_schedule(text)) return Ref::operand(*s);
        throw ParseError(ptr, "unknown schedule '" + text + "'");
    }
    if (auto o = parse_operand(text)) return Ref::operand(*o);
    throw ParseError(ptr, "unknown operand '" + text + "'");
}

template <class EdgeT>
BasicNode<EdgeT> parse_node(const Json& j, int expected_id, const std::string& ptr) {
    const auto& id = field(j, "id", ptr);
    if (!id.is_number_integer() || id.get<int>() != expected_id)
        throw ParseError(ptr + "/id", "expected node id " + std::to_string(expected_id));
    const std::string op_text = string_at(field(j, "op", ptr), ptr + "/op");
    const auto op = parse_op(op_text);
    if (!op) throw ParseError(ptr + "/op", "unknown op '" + op_text + "'");

    constexpr bool decay_space = std::is_same_v<EdgeT, Ref>;
    if (decay_space ? !allowed_in_decay(*op) : !allowed_in_update(*op))
        throw ParseError(ptr + "/op", "op '" + op_text + "' is not allowed in this graph");

    const auto& inputs = field(j, "inputs", ptr);
    if (!inputs.is_array() || static_cast<int>(inputs.size()) != arity(*op))
        throw ParseError(ptr + "/inputs", "op '" + op_text + "' takes " + std::to_string(arity(*op)) + " inputs");

    BasicNode<EdgeT> node;
    node.op = *op;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const std::string p = ptr + "/inputs/" + std::to_string(i);
        const Ref r = parse_ref(string_at(inputs[i], p), decay_space, expected_id, p);
        if constexpr (decay_space) {
            node.inputs.push_back(r);
        } else {
            node.inputs.push_back(Edge{r, std::nullopt});
        }
    }
    if constexpr (!decay_space) {
        const auto& decays = field(j, "decays", ptr);
        if (!decays.is_array() || decays.size() != inputs.size())
            throw ParseError(ptr + "/decays", "expected one entry per input");
        for (std::size_t i = 0; i < decays.size(); ++i)
            if (!decays[i].is_null())
                node.inputs[i].decay = decay_from_json(decays[i], ptr + "/decays/" + std::to_string(i));
    }
    return node;
}

template <class EdgeT>
BasicGraph<EdgeT> parse_graph(const Json& j, const std::string& ptr) {
    const auto& nodes = field(j, "nodes", ptr);
    if (!nodes.is_array()) throw ParseError(ptr + "/nodes", "expected an array");
    BasicGraph<EdgeT> graph;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        graph.hidden.push_back(
            parse_node<EdgeT>(nodes[i], static_cast<int>(i), ptr + "/nodes/" + std::to_string(i)));
    graph.output = parse_node<EdgeT>(field(j, "output", ptr), graph.output_id(), ptr + "/output");
    return graph;
}

}  // namespace

Json to_json(const DecayGraph& graph) {
    Json j;
    write_graph(j, graph);
    return j;
}

Json to_json(const OptimizerGenome& genome) {
    Json j;
    j["uid"] = genome.uid;
    j["momentum"] = momentum_name(genome.momentum);
    j["lineage"] = Json{{"parent", genome.lineage.parent_uid}, {"mutation", genome.lineage.mutation}};
    write_graph(j, genome.graph);
    return j;
}

DecayGraph decay_from_json(const Json& j, const std::string& pointer) { return parse_graph<Ref>(j, pointer); }

OptimizerGenome genome_from_json(const Json& j) {
    OptimizerGenome genome;
    genome.uid = string_at(field(j, "uid", ""), "/uid");
    const std::string m = string_at(field(j, "momentum", ""), "/momentum");
    const auto momentum = parse_momentum(m);
    if (!momentum) throw ParseError("/momentum", "unknown momentum type '" + m + "'");
    genome.momentum = *momentum;
    if (j.contains("lineage")) {
        const auto& lin = j["lineage"];
        genome.lineage.parent_uid = string_at(field(lin, "parent", "/lineage"), "/lineage/parent");
        genome.lineage.mutation = string_at(field(lin, "mutation", "/lineage"), "/lineage/mutation");
    }
    genome.graph = parse_graph<Edge>(j, "");
    return genome;
}

std::string serialize(const OptimizerGenome& genome) { return to_json(genome).dump(2) + "\n"; }

std::string serialize_compact(const OptimizerGenome& genome) { return to_json(genome).dump(); }

OptimizerGenome deserialize(std::string_view text) {
    Json j;
    try {
        j = Json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("byte " + std::to_string(e.byte), e.what());
    }
    return genome_from_json(j);
}

}  // namespace nos
