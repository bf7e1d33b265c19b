// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <functional>
#include <sstream>

#include "nos/catalog.hpp"
#include "nos/error.hpp"
#include "nos/pretty.hpp"
#include "nos/serialize.hpp"
#include "nos/variation.hpp"
#include "support.hpp"

using namespace nos;
using namespace nos::testing;

namespace {

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

std::string parse_error_where(const std::string& text) {
    try {
        deserialize(text);
    } catch (const ParseError& e) {
        return e.where();
    }
    return "<no error>";
}

std::string edited(const OptimizerGenome& g, const std::function<void(Json&)>& edit) {
    Json j = to_json(g);
    edit(j);
    return j.dump();
}

}  // namespace

TEST_CASE("random genomes round-trip") {
    Rng rng(2024);
    InitConfig init;
    init.p_decay = 0.5;
    for (int k = 0; k < 10000; ++k) {
        auto g = random_init(rng, init);
        if (k % 2) g = mutate(g, rng);
        const std::string text = serialize(g);
        const auto back = deserialize(text);
        REQUIRE(back == g);
        CHECK(serialize(back) == text);
        CHECK(deserialize(serialize_compact(g)) == g);
    }
}

TEST_CASE("catalog genomes round-trip") {
    for (auto name : catalog_names()) {
        const auto g = catalog_entry(name).genome;
        CHECK(deserialize(serialize(g)) == g);
        CHECK(serialize_compact(g).find('\n') == std::string::npos);
    }
}

TEST_CASE("parse errors name the offending field") {
    const auto g = catalog_entry("Opt6").genome;

    const std::string unknown_op = edited(g, [](Json& j) { j["nodes"][0]["op"] = "frobnicate"; });
    CHECK(parse_error_where(unknown_op) == "/nodes/0/op");
    CHECK_THROWS_WITH_AS(deserialize(unknown_op), doctest::Contains("frobnicate"), ParseError);

    CHECK(parse_error_where(edited(g, [](Json& j) { j["output"]["inputs"][0] = "q"; })) == "/output/inputs/0");
    CHECK(parse_error_where(edited(g, [](Json& j) { j["nodes"][0]["inputs"][0] = "n0"; })) == "/nodes/0/inputs/0");
    CHECK(parse_error_where(edited(g, [](Json& j) { j["nodes"][1]["op"] = "add"; })) == "/nodes/1/inputs");
    CHECK(parse_error_where(edited(g, [](Json& j) { j["momentum"] = "adam"; })) == "/momentum");
    CHECK(parse_error_where(edited(g, [](Json& j) { j.erase("uid"); })) == "/");
    CHECK(parse_error_where(edited(g, [](Json& j) { j["nodes"][0]["id"] = 3; })) == "/nodes/0/id");
    CHECK(parse_error_where(edited(g, [](Json& j) { j["output"]["decays"] = Json::array(); })) == "/output/decays");
    CHECK(parse_error_where(edited(g, [](Json& j) { j["output"]["op"] = "arctan"; })) == "/output/op");
    CHECK(parse_error_where(edited(g, [](Json& j) { j["output"]["decays"][0]["output"]["op"] = "exp"; })) ==
          "/output/decays/0/output/op");
    CHECK(parse_error_where(edited(g, [](Json& j) { j["output"]["decays"][1]["output"]["inputs"][0] = "g"; })) ==
          "/output/decays/1/output/inputs/0");
}

TEST_CASE("malformed text reports a byte offset") {
    const std::string text = serialize(catalog_entry("SGD").genome);
    const std::string truncated = text.substr(0, 40);
    const std::string where = parse_error_where(truncated);
    CHECK(where.rfind("byte ", 0) == 0);
    const auto byte = std::stoul(where.substr(5));
    CHECK(byte >= 1);
    CHECK(byte <= truncated.size() + 1);
    CHECK(parse_error_where("{\"uid\": }") == "byte 9");
}

TEST_CASE("pretty printing examples") {
    CHECK(pretty_print(catalog_entry("SGD").genome) == "g");

    const auto opt6 = lines(pretty_print(catalog_entry("Opt6").genome));
    REQUIRE(opt6.size() == 4);
    CHECK(opt6[0].find("0.3g+0.7v") != std::string::npos);
    CHECK(opt6[1].rfind("t1 = ", 0) == 0);
    CHECK(opt6[2].rfind("t2 = ", 0) == 0);
    CHECK(opt6[3].rfind("t3 = ", 0) == 0);
    CHECK(opt6[1] == "t1 = erfc(erfc(ci))");

    CHECK(pretty_print(catalog_entry("A1").genome).find("clip") != std::string::npos);
    const auto opt3 = pretty_print(catalog_entry("Opt3").genome);
    CHECK(opt3.find("softsign") != std::string::npos);
    CHECK(opt3.find("0.01g^3+0.99l") != std::string::npos);

    auto m = unary_genome(OpCode::sigmoid, OperandId::vhat, Momentum::nesterov);
    const auto ml = lines(pretty_print(m));
    REQUIRE(ml.size() == 2);
    CHECK(ml[0] == "sigmoid(v)");
    CHECK(ml[1] == "momentum: nesterov");

    CHECK(pretty_print(decay_binary(OpCode::max, ScheduleId::cci, ScheduleId::lir)) == "max(cci, lir)");
}

TEST_CASE("labeled decays follow the legend") {
    for (auto name : catalog_names()) {
        const auto g = catalog_entry(name).genome;
        const auto text = lines(pretty_print(g));
        const auto decays = labeled_decays(g);
        CAPTURE(name);
        for (std::size_t i = 0; i < decays.size(); ++i) {
            CHECK(decays[i].label == "t" + std::to_string(i + 1));
            REQUIRE(i + 1 < text.size());
            CHECK(text[i + 1] == decays[i].label + " = " + pretty_print(decays[i].graph));
            const auto& e = g.graph.node(decays[i].node).inputs.at(static_cast<std::size_t>(decays[i].slot));
            REQUIRE(e.decay.has_value());
            CHECK(*e.decay == decays[i].graph);
        }
        CHECK(static_cast<int>(decays.size()) <= decayed_edge_count(g));
    }
}
