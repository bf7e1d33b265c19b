// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <unistd.h>

#include "nos/catalog.hpp"
#include "nos/error.hpp"
#include "nos/search.hpp"
#include "support.hpp"

using namespace nos;
using namespace nos::testing;
namespace fs = std::filesystem;

namespace {

SearchConfig tiny_config() {
    SearchConfig c;
    c.n = 2;
    c.k = 2;
    c.t = 2;
    c.init_factor = 2;
    c.seed = 7;
    c.dataset.n = 200;
    c.fitness.lrs = {1.0, 0.1, 0.01};
    c.fitness.sweep_steps = 40;
    c.fitness.full_steps = 80;
    c.fitness.grace = 20;
    c.fitness.window = 10;
    c.fitness.eval_every = 20;
    c.fitness.classifier.base = 4;
    c.init_full_steps = 60;
    c.stages = {{1, 4, 80, 1}};
    return c;
}

const Dataset& tiny_data() {
    static const Dataset d = make_dataset(tiny_config().dataset);
    return d;
}

SearchRun full_run(const SearchConfig& cfg) {
    SearchRun run = start_search(cfg, tiny_data());
    continue_search(run, tiny_data());
    return run;
}

ChildRecord fake_child(double acc, bool skipped = false) {
    ChildRecord c;
    c.fitness.best_val_acc = acc;
    c.skipped = skipped;
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("nos_test_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::vector<std::pair<std::string, OptimizerGenome>> named(std::initializer_list<const char*> names) {
    std::vector<std::pair<std::string, OptimizerGenome>> out;
    for (auto n : names) out.emplace_back(n, catalog_entry(n).genome);
    return out;
}

}  // namespace

TEST_CASE("rank_desc orders by score with stable ties") {
    CHECK(rank_desc({0.6, 0.7, 0.5}) == std::vector<int>{1, 0, 2});
    CHECK(rank_desc({0.5, 0.5, 0.9}) == std::vector<int>{2, 0, 1});
    CHECK(rank_desc({}).empty());
}

TEST_CASE("select_child") {
    CHECK(select_child({fake_child(.6), fake_child(.7), fake_child(.5)}) == 1);
    CHECK(select_child({fake_child(.7), fake_child(.7), fake_child(.5)}) == 0);
    CHECK(select_child({fake_child(.3)}) == 0);
    CHECK(select_child({fake_child(.9, true), fake_child(.2)}) == 1);
    CHECK_FALSE(select_child({fake_child(.9, true), fake_child(.2, true)}).has_value());
}

TEST_CASE("parallel_for covers every index once") {
    for (int jobs : {1, 3, 8}) {
        std::vector<std::atomic<int>> hits(50);
        parallel_for(50, jobs, [&](int i) { ++hits[static_cast<std::size_t>(i)]; });
        for (auto& h : hits) CHECK(h.load() == 1);
    }
    int calls = 0;
    parallel_for(0, 4, [&](int) { ++calls; });
    CHECK(calls == 0);
    CHECK_THROWS_AS(parallel_for(10, 3, [](int i) {
                        if (i == 6) throw ConfigError("boom");
                    }),
                    ConfigError);
}

TEST_CASE("config JSON round-trip and strictness") {
    SearchConfig c = tiny_config();
    c.mask = MutationMask::decay_only;
    c.stages = {{4, 16, 100, 2}, {2, 32, 200, 3}};
    c.fitness.classifier.activation = Activation::tanh;
    c.jobs = 5;
    const Json j = to_json(c);
    CHECK_FALSE(j.contains("jobs"));
    const SearchConfig back = search_config_from_json(j);
    CHECK(to_json(back) == j);
    CHECK(back.jobs == 1);
    CHECK(back.mask == MutationMask::decay_only);
    CHECK(back.stages.size() == 2);
    CHECK(back.fitness.classifier.activation == Activation::tanh);

    // Absent fields keep the base values.
    const SearchConfig partial = search_config_from_json(Json{{"n", 9}}, c);
    CHECK(partial.n == 9);
    CHECK(partial.k == c.k);
    CHECK(partial.fitness.lrs == c.fitness.lrs);

    CHECK_THROWS_AS(search_config_from_json(Json{{"particles", 3}}), ConfigError);
    CHECK_THROWS_AS(search_config_from_json(Json{{"fitness", {{"lr", 1}}}}), ConfigError);
    CHECK_THROWS_AS(search_config_from_json(Json{{"n", "four"}}), ConfigError);
    CHECK_THROWS_AS(search_config_from_json(Json{{"mask", "partial"}}), ConfigError);
    CHECK_THROWS_AS(search_config_from_json(Json{{"stages", 3}}), ConfigError);
}

TEST_CASE("config validation") {
    auto bad = [](auto edit) {
        SearchConfig c = tiny_config();
        edit(c);
        return c;
    };
    CHECK_NOTHROW(tiny_config().check());
    CHECK_THROWS_AS(bad([](SearchConfig& c) { c.n = 0; }).check(), ConfigError);
    CHECK_THROWS_AS(bad([](SearchConfig& c) { c.t = 0; }).check(), ConfigError);
    CHECK_THROWS_AS(bad([](SearchConfig& c) { c.init_factor = 0; }).check(), ConfigError);
    CHECK_THROWS_AS(bad([](SearchConfig& c) { c.child_attempt_cap = 0; }).check(), ConfigError);
    CHECK_THROWS_AS(bad([](SearchConfig& c) { c.jobs = 0; }).check(), ConfigError);
    CHECK_THROWS_AS(bad([](SearchConfig& c) { c.seed_genome = "Opt99"; }).check(), ConfigError);
    CHECK_THROWS_AS(bad([](SearchConfig& c) { c.stages = {{2, 4, 10, 1}, {2, 4, 10, 1}}; }).check(), ConfigError);
    CHECK_THROWS_AS(bad([](SearchConfig& c) { c.sphere.iters = 0; }).check(), ConfigError);
    CHECK_THROWS_AS(bad([](SearchConfig& c) { c.fitness.lrs = {}; }).check(), ConfigError);
}

TEST_CASE("enlarged initialization") {
    SearchConfig c = tiny_config();
    c.init_factor = 1;
    const auto init = enlarged_init(c, tiny_data());
    REQUIRE(init.size() == 2);
    for (int i = 0; i < 2; ++i) {
        CHECK(init[static_cast<std::size_t>(i)].candidate == i);
        CHECK(integrity_check(init[static_cast<std::size_t>(i)].genome, c.sphere, c.init.range_grid));
        CHECK(init[static_cast<std::size_t>(i)].fitness.sweep.size() == c.fitness.lrs.size());
    }
    const auto again = enlarged_init(c, tiny_data());
    CHECK(again[0].genome == init[0].genome);
    CHECK(again[1].fitness.best_val_acc == init[1].fitness.best_val_acc);

    // Initial particles are the best n candidates by fitness.
    c.init_factor = 2;
    c.n = 1;
    const auto pool = enlarged_init(c, tiny_data());
    const auto parts = initial_particles(c, pool, tiny_data());
    REQUIRE(parts.size() == 1);
    for (const auto& r : pool) CHECK(parts[0].fitness.best_val_acc >= r.fitness.best_val_acc);

    // An unsatisfiable filter exhausts the rejection loop.
    c.sphere.pass_ratio = 1e-300;
    c.init_attempt_cap = 3;
    CHECK_THROWS_AS(enlarged_init(c, tiny_data()), ConfigError);
}

TEST_CASE("a short search run") {
    SearchConfig c = tiny_config();
    c.t = 1;
    SearchRun run = start_search(c, tiny_data());
    CHECK(run.init.size() == 4);
    REQUIRE(run.particles.size() == 2);
    const auto parents = run.particles;
    continue_search(run, tiny_data());
    CHECK(run.timesteps_done == 1);
    REQUIRE(run.history.size() == 4);
    for (int p = 0; p < 2; ++p) {
        std::vector<ChildRecord> mine;
        for (const auto& h : run.history)
            if (h.particle == p) mine.push_back(h);
        REQUIRE(mine.size() == 2);
        const auto best = select_child(mine);
        const auto& now = run.particles[static_cast<std::size_t>(p)];
        if (best) {
            CHECK(now.genome == mine[static_cast<std::size_t>(*best)].genome);
            CHECK(now.genome.lineage.parent_uid == parents[static_cast<std::size_t>(p)].genome.uid);
        } else {
            CHECK(now.genome == parents[static_cast<std::size_t>(p)].genome);
        }
        for (const auto& h : mine) {
            CHECK(h.attempts >= 1);
            CHECK(h.attempts <= c.child_attempt_cap);
            if (!h.skipped) {
                CHECK(h.fitness.passed_sweep());
                CHECK(integrity_check(h.genome, c.sphere, c.init.range_grid));
            }
        }
    }
    // Nothing more happens once every timestep is done.
    continue_search(run, tiny_data());
    CHECK(run.history.size() == 4);

    const std::string csv = ranking_csv(run);
    CHECK(csv.rfind("rank,particle,uid,fitness,stage,best_lr,steps_run,momentum,parent_uid,mutation\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("resumed runs equal uninterrupted ones") {
    const SearchConfig c = tiny_config();
    const SearchRun whole = full_run(c);

    SearchRun part = start_search(c, tiny_data());
    int checkpoints = 0;
    continue_search(part, tiny_data(), 1, [&](const SearchRun&) { ++checkpoints; });
    CHECK(checkpoints == 1);
    CHECK(part.timesteps_done == 1);
    SearchRun resumed = search_run_from_json(Json::parse(to_json(part).dump()));
    continue_search(resumed, tiny_data());
    CHECK(to_json(resumed) == to_json(whole));
}

TEST_CASE("history replays to the final particles") {
    const SearchRun run = full_run(tiny_config());
    std::vector<std::string> uids;
    for (const auto& p : run.particles) uids.push_back(p.genome.uid);
    CHECK(replay_selection(run) == uids);
}

TEST_CASE("results do not depend on the number of jobs") {
    SearchConfig one = tiny_config(), many = tiny_config();
    many.jobs = 3;
    CHECK(to_json(full_run(one)).dump() == to_json(full_run(many)).dump());
}

TEST_CASE("children do not depend on evaluation order") {
    const SearchConfig c = tiny_config();
    SearchRun run = start_search(c, tiny_data());
    const auto parents = run.particles;
    continue_search(run, tiny_data(), 1);

    // Evaluate the same slots in reverse order, one at a time.
    std::vector<ChildRecord> reversed;
    for (int idx = c.n * c.k - 1; idx >= 0; --idx)
        reversed.push_back(make_child(c, tiny_data(), parents[static_cast<std::size_t>(idx / c.k)], idx / c.k, 0, idx % c.k));
    std::reverse(reversed.begin(), reversed.end());
    REQUIRE(reversed.size() == run.history.size());
    for (std::size_t i = 0; i < reversed.size(); ++i) {
        CHECK(reversed[i].genome == run.history[i].genome);
        CHECK(reversed[i].skipped == run.history[i].skipped);
        CHECK(reversed[i].fitness.best_val_acc == run.history[i].fitness.best_val_acc);
        CHECK(reversed[i].attempts == run.history[i].attempts);
    }
}

TEST_CASE("different seeds give different runs") {
    SearchConfig a = tiny_config(), b = tiny_config();
    a.t = b.t = 1;
    b.seed = 8;
    CHECK(to_json(full_run(a)) != to_json(full_run(b)));
}

TEST_CASE("seeding from a catalog genome") {
    SearchConfig c = tiny_config();
    c.t = 1;
    c.seed_genome = "Adam";
    const SearchRun run = full_run(c);
    CHECK(run.init.empty());
    for (const auto& h : run.history) CHECK(h.genome.lineage.parent_uid == "catalog-Adam");
    CHECK(replay_selection(run).size() == 2);
}

TEST_CASE("decay-only mask keeps the update structure") {
    SearchConfig c = tiny_config();
    c.t = 1;
    c.seed_genome = "Opt7";
    c.mask = MutationMask::decay_only;
    const SearchRun run = full_run(c);
    for (const auto& h : run.history) CHECK(h.genome.lineage.mutation.rfind("decay", 0) == 0);
}

TEST_CASE("run directories") {
    TempDir tmp("rundir");
    const SearchConfig c = tiny_config();
    const SearchRun partial = run_search_dir(c, tmp.path, 1);
    CHECK(partial.timesteps_done == 1);
    CHECK(fs::exists(tmp.path / "config.json"));
    CHECK(fs::exists(tmp.path / "checkpoint.json"));
    CHECK(fs::exists(tmp.path / "history" / "init.jsonl"));
    CHECK(fs::exists(tmp.path / "history" / "t0000.jsonl"));
    CHECK_FALSE(fs::exists(tmp.path / "ranking.csv"));
    CHECK(search_config_from_json(Json::parse(slurp(tmp.path / "config.json"))).seed == c.seed);

    const SearchRun done = resume_search_dir(tmp.path, -1, 2);
    CHECK(done.timesteps_done == 2);
    CHECK(fs::exists(tmp.path / "history" / "t0001.jsonl"));
    CHECK(slurp(tmp.path / "ranking.csv") == ranking_csv(full_run(c)));
    CHECK(deserialize(slurp(tmp.path / "particles" / "p0.json")) == done.particles[0].genome);
    for (const auto& e : fs::directory_iterator(tmp.path)) CHECK(e.path().extension() != ".tmp");

    CHECK_THROWS_AS(resume_search_dir(tmp.path), ConfigError);
    CHECK_THROWS_AS(run_search_dir(c, tmp.path), ConfigError);
    CHECK_THROWS_AS(resume_search_dir(tmp.path / "missing"), ConfigError);
}

TEST_CASE("write_atomic") {
    TempDir tmp("atomic");
    fs::create_directories(tmp.path);
    write_atomic(tmp.path / "a.txt", "one");
    write_atomic(tmp.path / "a.txt", "two");
    CHECK(slurp(tmp.path / "a.txt") == "two");
    int files = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(tmp.path)) ++files;
    CHECK(files == 1);
}

TEST_CASE("staged elimination") {
    FitnessConfig base = tiny_config().fitness;
    const auto pool = named({"SGD", "Adam", "RMSProp", "QHM", "Opt1", "Opt7", "A1", "Momentum"});
    const std::vector<EliminationStage> stages = {{4, 4, 80, 2}, {2, 4, 80, 1}};
    const auto res = eliminate(pool, stages, tiny_data(), base, 3, 2);
    REQUIRE(res.ranking.size() == 2);
    REQUIRE(res.eliminated.size() == 6);
    CHECK(res.eliminated[0].stage_means.size() == 2);
    CHECK(res.eliminated[1].stage_means.size() == 2);
    for (std::size_t i = 2; i < 6; ++i) CHECK(res.eliminated[i].stage_means.size() == 1);

    // Stage means are the means of the recorded repeats, and each cut keeps the best.
    std::vector<const EliminationEntry*> all;
    for (const auto& e : res.ranking) all.push_back(&e);
    for (const auto& e : res.eliminated) all.push_back(&e);
    for (const auto* e : all) {
        REQUIRE(e->stage_scores.size() == e->stage_means.size());
        CHECK(e->stage_scores[0].size() == 2);
        for (std::size_t s = 0; s < e->stage_means.size(); ++s) {
            const auto& sc = e->stage_scores[s];
            CHECK(e->stage_means[s] == doctest::Approx(std::accumulate(sc.begin(), sc.end(), 0.0) / static_cast<double>(sc.size())));
        }
    }
    for (std::size_t i = 2; i < 6; ++i)
        for (int s = 0; s < 4; ++s) {
            const EliminationEntry* kept = s < 2 ? &res.ranking[static_cast<std::size_t>(s)] : &res.eliminated[static_cast<std::size_t>(s - 2)];
            CHECK(kept->stage_means[0] >= res.eliminated[i].stage_means[0]);
        }
    CHECK(res.ranking[0].stage_means[1] >= res.ranking[1].stage_means[1]);

    const std::string csv = elimination_csv(res, stages.size());
    CHECK(csv.rfind("rank,name,uid,survived,stage1_mean,stage2_mean\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);
}

TEST_CASE("elimination uses common random numbers") {
    FitnessConfig base = tiny_config().fitness;
    auto pool = named({"Adam", "SGD"});
    pool.emplace_back("Adam-again", catalog_entry("Adam").genome);
    const auto res = eliminate(pool, {{3, 4, 80, 3}}, tiny_data(), base, 11);
    REQUIRE(res.ranking.size() == 3);
    CHECK(res.eliminated.empty());
    std::map<std::string, std::vector<double>> scores;
    for (const auto& e : res.ranking) scores[e.name] = e.stage_scores[0];
    CHECK(scores["Adam"] == scores["Adam-again"]);
    CHECK(scores["Adam"].size() == 3);
    for (std::size_t i = 0; i + 1 < res.ranking.size(); ++i)
        CHECK(res.ranking[i].stage_means[0] >= res.ranking[i + 1].stage_means[0]);
}

TEST_CASE("elimination argument errors") {
    const FitnessConfig base = tiny_config().fitness;
    const auto pool = named({"Adam", "SGD"});
    CHECK_THROWS_AS(eliminate({}, {{1, 4, 10, 1}}, tiny_data(), base, 0), ConfigError);
    CHECK_THROWS_AS(eliminate(pool, {}, tiny_data(), base, 0), ConfigError);
    CHECK_THROWS_AS(eliminate(pool, {{3, 4, 10, 1}}, tiny_data(), base, 0), ConfigError);
    CHECK_THROWS_AS(eliminate(pool, {{2, 4, 10, 1}, {2, 4, 10, 1}}, tiny_data(), base, 0), ConfigError);
    CHECK_THROWS_AS(eliminate(pool, {{1, 4, 10, 0}}, tiny_data(), base, 0), ConfigError);
}
