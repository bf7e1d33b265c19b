// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "nos/catalog.hpp"
#include "nos/search.hpp"
#include "nos/serialize.hpp"

using namespace nos;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out;
};

/// Runs the CLI with `args` (shell syntax), capturing stdout; stderr is dropped.
Result nos_cli(const std::string& args) {
    const std::string cmd = std::string(NOS_CLI) + " " + args + " 2>/dev/null";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    Result r;
    char buf[4096];
    for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, pipe)) > 0;) r.out.append(buf, n);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

std::size_t columns(const std::string& line) { return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1; }

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("nos_cli_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("help is available for every command") {
    for (const char* cmd : {"", "search", "search run", "search resume", "search eliminate", "search seed-from-catalog",
                            "check", "eval", "bench", "catalog", "catalog list", "catalog export", "plot",
                            "plot schedules", "plot lr", "plot decay", "plot surface", "fmt"}) {
        CAPTURE(cmd);
        const auto r = nos_cli(std::string(cmd) + " --help");
        CHECK(r.code == 0);
        CHECK(r.out.find("Usage") != std::string::npos);
    }
    CHECK(nos_cli("--version").out == "0.1.0\n");
}

TEST_CASE("exit codes") {
    CHECK(nos_cli("").code == 1);
    CHECK(nos_cli("catalog list --bogus").code == 1);
    CHECK(nos_cli("search run --out /tmp/x").code == 1);  // --seed is required
    CHECK(nos_cli("fmt catalog:NoSuchThing").code == 2);

    TempDir tmp("codes");
    std::ofstream(tmp.path / "broken.json") << "{\"uid\": ";
    CHECK(nos_cli("fmt " + (tmp.path / "broken.json").string()).code == 2);
    std::ofstream(tmp.path / "bad.json") << "{\"n\": 0}";
    CHECK(nos_cli("search run --seed 1 --config " + (tmp.path / "bad.json").string() + " --out " +
                  (tmp.path / "run").string())
              .code == 2);
}

TEST_CASE("catalog commands") {
    const auto list = lines(nos_cli("catalog list").out);
    REQUIRE(list.size() == 31);
    CHECK(list[0] == "name,family,momentum,decays,notes");
    CHECK(list[1].rfind("Opt1,discovered,none,0", 0) == 0);

    for (const char* n : {"Opt6", "SGD", "Opt10_1"}) {
        const auto r = nos_cli(std::string("catalog export ") + n);
        CHECK(r.code == 0);
        CHECK(r.out == serialize(catalog_entry(n).genome));
    }
    CHECK(nos_cli("fmt catalog:SGD").out == "g\n");
}

TEST_CASE("outputs never overwrite files") {
    TempDir tmp("overwrite");
    const auto target = tmp.path / "opt6.json";
    CHECK(nos_cli("catalog export Opt6 --out " + target.string()).code == 0);
    CHECK(deserialize(slurp(target)) == catalog_entry("Opt6").genome);
    CHECK(nos_cli("catalog export SGD --out " + target.string()).code != 0);
    CHECK(deserialize(slurp(target)) == catalog_entry("Opt6").genome);

    // An exported file loads back as a genome argument.
    CHECK(nos_cli("fmt " + target.string()).out == nos_cli("fmt catalog:Opt6").out);
}

TEST_CASE("plot tables") {
    const auto sched = lines(nos_cli("plot schedules --T 1000").out);
    REQUIRE(sched.size() == 1002);
    CHECK(columns(sched[0]) == 15);
    CHECK(sched[0].rfind("t,", 0) == 0);
    CHECK(sched.back().rfind("1000,", 0) == 0);

    const auto lr = lines(nos_cli("plot lr --T 1000 --stride 10").out);
    REQUIRE(lr.size() == 102);
    CHECK(lr[0] == "t,one_cycle,LR1,LR2,LR3,LR4,LR5,LR6,LR7,LR8,LR9");

    const auto decay = lines(nos_cli("plot decay catalog:Opt6 --T 100").out);
    REQUIRE(decay.size() == 102);
    CHECK(decay[0] == "t,t1,t2,t3");

    const auto surf = lines(nos_cli("plot surface catalog:Opt7 --points 5 --slice 10 --slice 20 --T 100").out);
    REQUIRE(surf.size() == 1 + 2 * 25);
    CHECK(surf[0] == "t,g,vhat,u");
}

TEST_CASE("eval feeds a gradient trace through a genome") {
    TempDir tmp("eval");
    const auto trace = tmp.path / "trace.csv";
    std::ofstream(trace) << "step,g0,g1\n0,1,2\n1,-1,0.5\n2,0.25,-4\n";
    const auto sgd = lines(nos_cli("eval catalog:SGD " + trace.string()).out);
    REQUIRE(sgd.size() == 4);
    CHECK(sgd[0] == "step,u0,u1");
    CHECK(sgd[1] == "0,1,2");
    CHECK(sgd[3] == "2,0.25,-4");

    // QHM: 0.3 g + 0.7 v with v <- 0.9 v + 0.1 g.
    const auto qhm = lines(nos_cli("eval catalog:QHM " + trace.string()).out);
    REQUIRE(qhm.size() == 4);
    double v = 0.0;
    const double g0[] = {1, -1, 0.25};
    for (int s = 0; s < 3; ++s) {
        v = 0.9 * v + 0.1 * g0[s];
        const auto& row = qhm[static_cast<std::size_t>(s + 1)];
        const double u0 = std::stod(row.substr(row.find(',') + 1));
        CHECK(u0 == doctest::Approx(0.3 * g0[s] + 0.7 * v).epsilon(1e-15));
    }

    std::ofstream(tmp.path / "ragged.csv") << "step,g0\n0,1,2\n";
    CHECK(nos_cli("eval catalog:SGD " + (tmp.path / "ragged.csv").string()).code == 2);
}

TEST_CASE("integrity check command") {
    const auto rows = lines(nos_cli("check catalog:Adam").out);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0] == "name,uid,decay_range,sphere,initial_loss,best_final_loss,best_lr,integrity");
    CHECK(rows[1].rfind("Adam,catalog-Adam,1,1,", 0) == 0);
    CHECK(rows[1].back() == '1');
}

TEST_CASE("a tiny search through the command line") {
    TempDir tmp("search");
    SearchConfig c;
    c.n = 2;
    c.k = 2;
    c.t = 2;
    c.init_factor = 1;
    c.dataset.n = 120;
    c.fitness.lrs = {0.1, 0.01};
    c.fitness.sweep_steps = 30;
    c.fitness.full_steps = 60;
    c.fitness.grace = 10;
    c.fitness.window = 10;
    c.fitness.eval_every = 20;
    c.fitness.classifier.base = 4;
    c.init_full_steps = 40;
    c.stages = {{1, 4, 60, 1}};
    const auto cfg_path = tmp.path / "config.json";
    std::ofstream(cfg_path) << to_json(c).dump(2);

    const auto run = tmp.path / "run";
    const std::string common = " --config " + cfg_path.string() + " --seed 5 --out ";
    const auto partial = nos_cli("search run" + common + run.string() + " --stop-after 1");
    CHECK(partial.code == 0);
    CHECK(partial.out.empty());
    CHECK(fs::exists(run / "checkpoint.json"));
    CHECK_FALSE(fs::exists(run / "ranking.csv"));

    const auto resumed = nos_cli("search resume " + run.string() + " --jobs 2");
    CHECK(resumed.code == 0);
    CHECK(resumed.out == slurp(run / "ranking.csv"));
    CHECK(fs::exists(run / "manifest.json"));
    const Json manifest = Json::parse(slurp(run / "manifest.json"));
    CHECK(manifest["invocations"].size() == 2);

    const auto whole = tmp.path / "whole";
    const auto straight = nos_cli("search run" + common + whole.string());
    CHECK(straight.code == 0);
    CHECK(straight.out == resumed.out);

    // Refuses to reuse a run directory.
    CHECK(nos_cli("search run" + common + whole.string()).code == 2);
    CHECK(nos_cli("search resume " + whole.string()).code == 2);

    // Particles of a finished run feed elimination and bench.
    const auto elim = lines(nos_cli("search eliminate " + whole.string() + " catalog:Adam --config " + cfg_path.string() +
                                    " --seed 1 --stage 2:4:60:1")
                                .out);
    REQUIRE(elim.size() == 4);
    CHECK(elim[0] == "rank,name,uid,survived,stage1_mean");

    const auto bench = lines(nos_cli("bench catalog:Adam catalog:SGD --config " + cfg_path.string()).out);
    REQUIRE(bench.size() == 3);
    CHECK(bench[0] == "name,uid,dataset,chance,stage,best_lr,best_val_acc,steps_run");
    CHECK(bench[1].rfind("Adam,catalog-Adam,two_moons,", 0) == 0);
}
