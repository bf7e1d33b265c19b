// SPDX-License-Identifier: Apache-2.0
#include "nos/pretty.hpp"

#include <map>
#include <utility>
#include <vector>

namespace nos {

namespace {

// Binding strength of a rendered term: sums bind loosest.
enum Prec { kSum = 1, kProduct = 2, kAtom = 3 };

struct Term {
    std::string text;
    int prec;
};

std::string wrap(const Term& t, int min_prec) { return t.prec < min_prec ? "(" + t.text + ")" : t.text; }

Term operand_term(OperandId id) {
    switch (id) {
        case OperandId::g: return {"g", kAtom};
        case OperandId::g2: return {"g^2", kAtom};
        case OperandId::g3: return {"g^3", kAtom};
        case OperandId::vhat: return {"v", kAtom};
        case OperandId::shat: return {"s", kAtom};
        case OperandId::lhat: return {"l", kAtom};
        case OperandId::sign_g: return {"sign(g)", kAtom};
        case OperandId::sign_vhat: return {"sign(v)", kAtom};
        case OperandId::const1: return {"1", kAtom};
        case OperandId::const2: return {"2", kAtom};
        case OperandId::w_1e6: return {"1e-6w", kAtom};
        case OperandId::w_1e5: return {"1e-5w", kAtom};
        case OperandId::w_1e4: return {"1e-4w", kAtom};
        case OperandId::w_1e3: return {"1e-3w", kAtom};
        case OperandId::qhm_v: return {"0.3g+0.7v", kSum};
        case OperandId::qhm_s: return {"0.05g^2+0.95s", kSum};
        case OperandId::qhm_l: return {"0.01g^3+0.99l", kSum};
        case OperandId::aggmo_v: return {"avg3(v)-g", kSum};
        case OperandId::aggmo_s: return {"avg3(s)-g^2", kSum};
        case OperandId::aggmo_l: return {"avg3(l)-g^3", kSum};
    }
    return {"?", kAtom};
}

Term call(std::string_view f, const Term& x) { return {std::string(f) + "(" + x.text + ")", kAtom}; }

Term unary_term(OpCode op, const Term& x) {
    switch (op) {
        case OpCode::identity: return x;
        case OpCode::neg: return {"-" + wrap(x, kAtom), kProduct};
        case OpCode::ln_abs: return {"ln|" + x.text + "|", kAtom};
        case OpCode::sqrt_abs: return {"sqrt|" + x.text + "|", kAtom};
        case OpCode::abs: return {"|" + x.text + "|", kAtom};
        case OpCode::sigmoid_grad: return call("sigmoid'", x);
        case OpCode::softsign_grad: return call("softsign'", x);
        case OpCode::tanh_grad: return call("tanh'", x);
        case OpCode::max0: return {"max(" + x.text + ", 0)", kAtom};
        case OpCode::min0: return {"min(" + x.text + ", 0)", kAtom};
        case OpCode::drop_0_5: return {"drop(" + x.text + ", 0.5)", kAtom};
        case OpCode::drop_0_3: return {"drop(" + x.text + ", 0.3)", kAtom};
        case OpCode::drop_0_1: return {"drop(" + x.text + ", 0.1)", kAtom};
        case OpCode::square: return {wrap(x, kAtom) + "^2", kAtom};
        case OpCode::state_ema: return call("ema", x);
        case OpCode::state_diff: return call("diff", x);
        case OpCode::state_max: return call("runmax", x);
        default: return call(op_name(op), x);
    }
}

Term binary_term(OpCode op, const Term& a, const Term& b) {
    switch (op) {
        case OpCode::add: return {a.text + "+" + b.text, kSum};
        case OpCode::sub: return {a.text + "-" + wrap(b, kProduct), kSum};
        case OpCode::mul: return {wrap(a, kProduct) + "*" + wrap(b, kProduct), kProduct};
        case OpCode::div: return {wrap(a, kProduct) + "/" + wrap(b, kAtom), kProduct};
        case OpCode::div_sqrt: return {wrap(a, kProduct) + "/sqrt(1+" + wrap(b, kAtom) + "^2)", kProduct};
        case OpCode::max: return {"max(" + a.text + ", " + b.text + ")", kAtom};
        case OpCode::min: return {"min(" + a.text + ", " + b.text + ")", kAtom};
        case OpCode::lerp_95: return {"0.95*" + wrap(a, kProduct) + "+0.05*" + wrap(b, kProduct), kSum};
        case OpCode::clip: return {"clip(" + a.text + ", " + b.text + ")", kAtom};
        case OpCode::pow_abs: return {"|" + a.text + "|^" + wrap(b, kAtom), kAtom};
        default: return {op_name(op).data(), kAtom};
    }
}

template <class Leaf, class Input>
Term render(const auto& graph, int id, Leaf&& leaf, Input&& input) {
    const auto& node = graph.node(id);
    auto arg = [&](std::size_t slot) -> Term {
        return input(id, slot, [&](const Ref& r) { return r.is_node() ? render(graph, r.index, leaf, input) : leaf(r); });
    };
    Term first = arg(0);
    if (!is_binary(node.op)) return unary_term(node.op, first);
    Term second = arg(1);
    return binary_term(node.op, first, second);
}

}  // namespace

std::string pretty_print(const DecayGraph& graph) {
    auto leaf = [](const Ref& r) { return Term{std::string(schedule_name(static_cast<ScheduleId>(r.index))), kAtom}; };
    auto input = [&](int id, std::size_t slot, auto&& resolve) { return resolve(graph.node(id).inputs[slot]); };
    return render(graph, graph.output_id(), leaf, input).text;
}

namespace {

struct Rendered {
    std::string formula;
    std::vector<LabeledDecay> decays;
};

Rendered render_genome(const OptimizerGenome& genome) {
    const auto& graph = genome.graph;
    std::map<std::pair<int, std::size_t>, int> numbering;
    std::vector<LabeledDecay> decays;

    auto leaf = [](const Ref& r) { return operand_term(static_cast<OperandId>(r.index)); };
    auto input = [&](int id, std::size_t slot, auto&& resolve) -> Term {
        const Edge& edge = graph.node(id).inputs[slot];
        if (!edge.decay) return resolve(edge.source);
        // Number the edge before descending so numbering is pre-order.
        auto [it, fresh] = numbering.try_emplace({id, slot}, static_cast<int>(decays.size()) + 1);
        if (fresh)
            decays.push_back(LabeledDecay{"t" + std::to_string(it->second), id, static_cast<int>(slot), *edge.decay});
        const Term x = resolve(edge.source);
        return {"t" + std::to_string(it->second) + "*" + wrap(x, kAtom), kProduct};
    };
    std::string formula = render(graph, graph.output_id(), leaf, input).text;
    return {std::move(formula), std::move(decays)};
}

}  // namespace

std::vector<LabeledDecay> labeled_decays(const OptimizerGenome& genome) { return render_genome(genome).decays; }

std::string pretty_print(const OptimizerGenome& genome) {
    const Rendered r = render_genome(genome);
    std::string out = r.formula;
    for (const auto& d : r.decays) out += "\n" + d.label + " = " + pretty_print(d.graph);
    if (genome.momentum != Momentum::none) out += "\nmomentum: " + std::string(momentum_name(genome.momentum));
    return out;
}

}  // namespace nos
