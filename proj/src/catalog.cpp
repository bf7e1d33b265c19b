// SPDX-License-Identifier: Apache-2.0
#include "nos/catalog.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>

#include "nos/error.hpp"

namespace nos {

namespace {

constexpr std::array<std::string_view, 30> kNames = {
    "Opt1",   "Opt2",     "Opt3",   "Opt4",   "Opt5",    "Opt6",    "Opt7",         "Opt8",
    "Opt9",   "Opt10",    "A1",     "A2",     "A3",      "A4",      "A5",           "SGD",
    "Momentum", "Nesterov", "Adam", "RMSProp", "QHM",    "PowerSign-ld", "AddSign-ld", "Opt4_1",
    "Opt4_2", "Opt6_1",   "Opt7_1", "Opt8_1", "Opt9_1",  "Opt10_1",
};

using enum OperandId;
using S = ScheduleId;

DecayGraph decay_unary(OpCode op, S s) { return DecayGraph{{}, {op, {Ref::operand(s)}}}; }
DecayGraph decay_binary(OpCode op, S a, S b) { return DecayGraph{{}, {op, {Ref::operand(a), Ref::operand(b)}}}; }
DecayGraph decay_erfc_erfc_ci() {
    return DecayGraph{{{OpCode::erfc, {Ref::operand(S::ci)}}}, {OpCode::erfc, {Ref::node(0)}}};
}

Edge in(OperandId id) { return Edge{Ref::operand(id), std::nullopt}; }
Edge in(int node) { return Edge{Ref::node(node), std::nullopt}; }
template <class Src>
Edge in(Src src, std::optional<DecayGraph> decay) {
    Edge e = in(src);
    e.decay = std::move(decay);
    return e;
}

class Builder {
public:
    int node(OpCode op, std::vector<Edge> inputs) {
        genome_.graph.hidden.push_back({op, std::move(inputs)});
        return genome_.graph.output_id() - 1;
    }
    OptimizerGenome output(OpCode op, std::vector<Edge> inputs, Momentum m, std::string_view name) {
        genome_.graph.output = {op, std::move(inputs)};
        genome_.momentum = m;
        genome_.uid = "catalog-" + std::string(name);
        return std::move(genome_);
    }

private:
    OptimizerGenome genome_;
};

using Decay = std::optional<DecayGraph>;

OptimizerGenome qhm_softsign(std::string_view name, OpCode combine, OperandId moment) {
    Builder b;
    const int diff = b.node(OpCode::sub, {in(w_1e5), in(moment)});
    const int inner = b.node(combine, {in(w_1e5), in(diff)});
    const int soft = b.node(OpCode::softsign, {in(inner)});
    return b.output(OpCode::add, {in(qhm_v), in(soft)}, Momentum::none, name);
}

// (t1 qhm_v) / (t2 clip(2, t3 e^v))
OptimizerGenome qhm_over_clip(std::string_view name, Decay t1, Decay t2, Decay t3) {
    Builder b;
    const int e = b.node(OpCode::exp, {in(vhat)});
    const int c = b.node(OpCode::clip, {in(const2), in(e, std::move(t3))});
    return b.output(OpCode::div, {in(qhm_v, std::move(t1)), in(c, std::move(t2))}, Momentum::none, name);
}

// (t1 qhm_v) / (t2 |t3 e^{1e-4 w}|)
OptimizerGenome qhm_over_weight(std::string_view name, Decay t1, Decay t2, Decay t3) {
    Builder b;
    const int e = b.node(OpCode::exp, {in(w_1e4)});
    const int a = b.node(OpCode::abs, {in(e, std::move(t3))});
    return b.output(OpCode::div, {in(qhm_v, std::move(t1)), in(a, std::move(t2))}, Momentum::none, name);
}

OptimizerGenome squashed_qhm(std::string_view name, OpCode outer, Decay t1) {
    Builder b;
    const int h = b.node(OpCode::arcsinh, {in(qhm_v)});
    return b.output(outer, {in(h, std::move(t1))}, Momentum::none, name);
}

OptimizerGenome scaled_exp_gradient(std::string_view name, Decay t1) {
    Builder b;
    const int a = b.node(OpCode::arctanh, {in(qhm_s)});
    const int e = b.node(OpCode::exp, {in(a)});
    return b.output(OpCode::mul, {in(g, std::move(t1)), in(e)}, Momentum::nesterov, name);
}

OptimizerGenome double_bessel(std::string_view name, Decay t1) {
    Builder b;
    const int h = b.node(OpCode::bessel_i1e, {in(g, std::move(t1))});
    return b.output(OpCode::bessel_i1e, {in(h)}, Momentum::nesterov, name);
}

// clip(v, bound(s)) where bound is a chain of unary ops on s.
OptimizerGenome clipped_moment(std::string_view name, std::initializer_list<OpCode> bound_chain, bool normalize) {
    Builder b;
    Edge src = in(shat);
    for (OpCode op : bound_chain) src = in(b.node(op, {src}));
    if (!normalize) return b.output(OpCode::clip, {in(vhat), src}, Momentum::none, name);
    const int c = b.node(OpCode::clip, {in(vhat), src});
    return b.output(OpCode::norm, {in(c)}, Momentum::none, name);
}

OptimizerGenome plain(std::string_view name, OperandId operand, Momentum m) {
    return Builder{}.output(OpCode::identity, {in(operand)}, m, name);
}

OptimizerGenome over_root_s(std::string_view name, OperandId numerator) {
    Builder b;
    const int r = b.node(OpCode::sqrt_abs, {in(shat)});
    return b.output(OpCode::div, {in(numerator), in(r)}, Momentum::none, name);
}

OptimizerGenome sign_agreement(std::string_view name, bool additive) {
    Builder b;
    const int agree = b.node(OpCode::mul, {in(sign_g, decay_unary(OpCode::identity, S::ld)), in(sign_vhat)});
    const int scale = additive ? b.node(OpCode::add, {in(const1), in(agree)}) : b.node(OpCode::exp, {in(agree)});
    return b.output(OpCode::mul, {in(scale), in(g)}, Momentum::none, name);
}

Decay t_erfc_erfc_ci() { return decay_erfc_erfc_ci(); }
Decay t_tanh_grad(S s) { return decay_unary(OpCode::tanh_grad, s); }
Decay t_max_cci_lir() { return decay_binary(OpCode::max, S::cci, S::lir); }

OptimizerGenome build_genome(std::string_view n) {
    if (n == "Opt1") return qhm_softsign(n, OpCode::clip, qhm_s);
    if (n == "Opt2") return qhm_softsign(n, OpCode::div_sqrt, qhm_s);
    if (n == "Opt3") return qhm_softsign(n, OpCode::div_sqrt, qhm_l);
    if (n == "Opt4")
        return qhm_over_clip(n, t_erfc_erfc_ci(), t_tanh_grad(S::cir), decay_unary(OpCode::arctan, S::dd));
    if (n == "Opt5") return qhm_over_clip(n, t_erfc_erfc_ci(), t_tanh_grad(S::cir), std::nullopt);
    if (n == "Opt6") return qhm_over_weight(n, t_erfc_erfc_ci(), t_tanh_grad(S::cir), t_tanh_grad(S::ci));
    if (n == "Opt7") return squashed_qhm(n, OpCode::tanh, t_max_cci_lir());
    if (n == "Opt8") return squashed_qhm(n, OpCode::arcsinh, t_max_cci_lir());
    if (n == "Opt9") return scaled_exp_gradient(n, decay_unary(OpCode::erfc, S::ed));
    if (n == "Opt10") return double_bessel(n, decay_binary(OpCode::mul, S::dd, S::li));
    if (n == "A1") return clipped_moment(n, {OpCode::sqrt_abs}, false);
    if (n == "A2") return clipped_moment(n, {OpCode::ln_abs, OpCode::abs}, false);
    if (n == "A3") return clipped_moment(n, {OpCode::ln_abs, OpCode::abs, OpCode::sqrt_abs}, false);
    if (n == "A4") return clipped_moment(n, {OpCode::sigmoid}, false);
    if (n == "A5") return clipped_moment(n, {OpCode::sqrt_abs}, true);
    if (n == "SGD") return plain(n, g, Momentum::none);
    if (n == "Momentum") return plain(n, g, Momentum::momentum);
    if (n == "Nesterov") return plain(n, g, Momentum::nesterov);
    if (n == "Adam") return over_root_s(n, vhat);
    if (n == "RMSProp") return over_root_s(n, g);
    if (n == "QHM") return plain(n, qhm_v, Momentum::none);
    if (n == "PowerSign-ld") return sign_agreement(n, false);
    if (n == "AddSign-ld") return sign_agreement(n, true);
    if (n == "Opt4_1") return qhm_over_clip(n, std::nullopt, std::nullopt, decay_unary(OpCode::arctan, S::dd));
    if (n == "Opt4_2") return qhm_over_clip(n, std::nullopt, std::nullopt, std::nullopt);
    if (n == "Opt6_1") return qhm_over_weight(n, std::nullopt, std::nullopt, std::nullopt);
    if (n == "Opt7_1") return squashed_qhm(n, OpCode::tanh, std::nullopt);
    if (n == "Opt8_1") return squashed_qhm(n, OpCode::arcsinh, std::nullopt);
    if (n == "Opt9_1") return scaled_exp_gradient(n, std::nullopt);
    if (n == "Opt10_1") return double_bessel(n, std::nullopt);
    throw ConfigError("unknown catalog entry '" + std::string(n) + "'");
}

std::string family_of(std::string_view n) {
    if (n.find('_') != std::string_view::npos) return "ablation";
    if (n.starts_with("Opt")) return "discovered";
    if (n.size() == 2 && n[0] == 'A') return "adam_variant";
    return "baseline";
}

std::string notes_of(std::string_view n) {
    if (n == "Opt9") return "inner arctan realized with arctanh, the only inverse trigonometric op of the update space";
    if (n == "Opt4_1") return "Opt4 without t1 and t2";
    if (n.find('_') != std::string_view::npos) return std::string(n.substr(0, n.find('_'))) + " without decay functions";
    if (n == "Adam") return "v/(sqrt(s)+eps), no bias correction";
    if (n == "RMSProp") return "g/(sqrt(s)+eps)";
    if (n == "PowerSign-ld") return "exp(ld*sign(g)*sign(v))*g";
    if (n == "AddSign-ld") return "(1+ld*sign(g)*sign(v))*g";
    return {};
}

// ---- oracle ----------------------------------------------------------------

struct Sched {
    double u, r;  // t/T and mod(2t, T)/T
    double ld() const { return 1.0 - u; }
    double li() const { return u; }
    double lir() const { return r; }
    double ci() const { return 0.5 * (1.0 - std::cos(std::numbers::pi * u)); }
    double cir() const { return 0.5 * (1.0 - std::cos(std::numbers::pi * r)); }
    double cci() const { return 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * u)); }
    double ed() const { return std::pow(0.01, u); }
    double dd() const { return 0.95 * (1.0 - u) / (0.05 + 0.95 * (1.0 - u)); }
};

double softsign(double x) { return x / (1.0 + std::fabs(x)); }
double dtanh(double x) { return 1.0 - std::tanh(x) * std::tanh(x); }
double clip(double x, double b) { return std::clamp(x, -std::fabs(b), std::fabs(b)); }
double sgn(double x) { return x > 0 ? 1.0 : x < 0 ? -1.0 : 0.0; }
double i1e(double x) { return x == 0.0 ? 0.0 : sgn(x) * std::exp(-std::fabs(x)) * std::cyl_bessel_i(1.0, std::fabs(x)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double eps_div(double a, double b) { return a / (b + 1e-8); }
double atanh_clamped(double x) { return std::atanh(std::clamp(x, -(1.0 - 1e-7), 1.0 - 1e-7)); }

struct Point {
    double g, w, v, s, l;
    double q() const { return 0.3 * g + 0.7 * v; }
    double qs() const { return 0.05 * g * g + 0.95 * s; }
    double ql() const { return 0.01 * g * g * g + 0.99 * l; }
};

using Formula = std::function<double(const Point&, const Sched&)>;

Formula formula(std::string_view n) {
    auto opt1 = [](const Point& p, const Sched&) {
        const double x = 1e-5 * p.w;
        return p.q() + softsign(clip(x, x - p.qs()));
    };
    auto opt23 = [](bool cubic) {
        return [cubic](const Point& p, const Sched&) {
            const double x = 1e-5 * p.w;
            const double d = x - (cubic ? p.ql() : p.qs());
            return p.q() + softsign(x / std::sqrt(1.0 + d * d));
        };
    };
    auto opt45 = [](bool t12, bool t3) {
        return [=](const Point& p, const Sched& c) {
            const double t1 = t12 ? std::erfc(std::erfc(c.ci())) : 1.0;
            const double t2 = t12 ? dtanh(c.cir()) : 1.0;
            const double scaled = t3 ? std::atan(c.dd()) * std::exp(p.v) : std::exp(p.v);
            return eps_div(t1 * p.q(), t2 * clip(2.0, scaled));
        };
    };
    auto opt6 = [](bool decays) {
        return [=](const Point& p, const Sched& c) {
            const double t1 = decays ? std::erfc(std::erfc(c.ci())) : 1.0;
            const double t2 = decays ? dtanh(c.cir()) : 1.0;
            const double t3 = decays ? dtanh(c.ci()) : 1.0;
            return eps_div(t1 * p.q(), t2 * std::fabs(t3 * std::exp(1e-4 * p.w)));
        };
    };
    auto opt78 = [](bool tanh_outer, bool decays) {
        return [=](const Point& p, const Sched& c) {
            const double t1 = decays ? std::max(c.cci(), c.lir()) : 1.0;
            const double inner = t1 * std::asinh(p.q());
            return tanh_outer ? std::tanh(inner) : std::asinh(inner);
        };
    };
    auto opt9 = [](bool decays) {
        return [=](const Point& p, const Sched& c) {
            const double t1 = decays ? std::erfc(c.ed()) : 1.0;
            return t1 * p.g * std::exp(atanh_clamped(p.qs()));
        };
    };
    auto opt10 = [](bool decays) {
        return [=](const Point& p, const Sched& c) {
            const double t1 = decays ? c.dd() * c.li() : 1.0;
            return i1e(i1e(t1 * p.g));
        };
    };
    auto a1 = [](const Point& p, const Sched&) { return clip(p.v, std::sqrt(std::fabs(p.s))); };

    if (n == "Opt1") return opt1;
    if (n == "Opt2") return opt23(false);
    if (n == "Opt3") return opt23(true);
    if (n == "Opt4") return opt45(true, true);
    if (n == "Opt5") return opt45(true, false);
    if (n == "Opt4_1") return opt45(false, true);
    if (n == "Opt4_2") return opt45(false, false);
    if (n == "Opt6") return opt6(true);
    if (n == "Opt6_1") return opt6(false);
    if (n == "Opt7") return opt78(true, true);
    if (n == "Opt7_1") return opt78(true, false);
    if (n == "Opt8") return opt78(false, true);
    if (n == "Opt8_1") return opt78(false, false);
    if (n == "Opt9") return opt9(true);
    if (n == "Opt9_1") return opt9(false);
    if (n == "Opt10") return opt10(true);
    if (n == "Opt10_1") return opt10(false);
    if (n == "A1" || n == "A5") return a1;
    if (n == "A2") return [](const Point& p, const Sched&) { return clip(p.v, std::log(std::fabs(p.s) + 1e-8)); };
    if (n == "A3")
        return [](const Point& p, const Sched&) {
            return clip(p.v, std::sqrt(std::fabs(std::log(std::fabs(p.s) + 1e-8))));
        };
    if (n == "A4") return [](const Point& p, const Sched&) { return clip(p.v, sigmoid(p.s)); };
    if (n == "SGD" || n == "Momentum" || n == "Nesterov") return [](const Point& p, const Sched&) { return p.g; };
    if (n == "Adam") return [](const Point& p, const Sched&) { return eps_div(p.v, std::sqrt(std::fabs(p.s))); };
    if (n == "RMSProp") return [](const Point& p, const Sched&) { return eps_div(p.g, std::sqrt(std::fabs(p.s))); };
    if (n == "QHM") return [](const Point& p, const Sched&) { return p.q(); };
    if (n == "PowerSign-ld")
        return [](const Point& p, const Sched& c) { return std::exp(c.ld() * sgn(p.g) * sgn(p.v)) * p.g; };
    if (n == "AddSign-ld")
        return [](const Point& p, const Sched& c) { return (1.0 + c.ld() * sgn(p.g) * sgn(p.v)) * p.g; };
    throw ConfigError("unknown catalog entry '" + std::string(n) + "'");
}

}  // namespace

std::span<const std::string_view> catalog_names() noexcept { return kNames; }

bool in_catalog(std::string_view name) noexcept {
    return std::find(kNames.begin(), kNames.end(), name) != kNames.end();
}

CatalogEntry catalog_entry(std::string_view name) {
    return CatalogEntry{std::string(name), family_of(name), build_genome(name), notes_of(name)};
}

Tensor oracle_update(std::string_view name, std::span<const double> g, std::span<const double> w, const Moments& m,
                     Clock clock) {
    const Formula f = formula(name);
    const Sched sched{clock.fraction(), static_cast<double>((2 * clock.t) % clock.T) / static_cast<double>(clock.T)};
    Tensor out(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = f(Point{g[i], w[i], m.v[i], m.s[i], m.l[i]}, sched);
    if (name == "A5") {
        double sq = 0.0;
        for (double x : out) sq += x * x;
        const double norm = std::sqrt(sq);
        for (auto& x : out) x /= norm + 1e-8;
    }
    return out;
}

}  // namespace nos
