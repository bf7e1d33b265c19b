// SPDX-License-Identifier: Apache-2.0
#include "nos/search.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "nos/catalog.hpp"
#include "nos/error.hpp"

namespace nos {

namespace {

// Stream tags that keep the init, child and elimination seed spaces apart.
constexpr std::uint64_t kInitStream = 0x1111;
constexpr std::uint64_t kChildStream = 0x2222;
constexpr std::uint64_t kElimStream = 0x3333;

std::string fmt17(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

// ---- JSON helpers -----------------------------------------------------------

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, _] : j.items())
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            throw ConfigError(where + ": unknown key '" + key + "'");
}

template <class T>
void read(const Json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(where + "/" + key + ": wrong type");
    }
}

Json to_json(const InitConfig& c) {
    return Json{{"p_decay", c.p_decay},
                {"hidden", c.hidden},
                {"decay_hidden", c.decay_hidden},
                {"decay_attempt_cap", c.decay_attempt_cap},
                {"range_grid", c.range_grid}};
}

InitConfig init_from_json(const Json& j, InitConfig c) {
    const std::string w = "/init";
    check_keys(j, {"p_decay", "hidden", "decay_hidden", "decay_attempt_cap", "range_grid"}, w);
    read(j, "p_decay", c.p_decay, w);
    read(j, "hidden", c.hidden, w);
    read(j, "decay_hidden", c.decay_hidden, w);
    read(j, "decay_attempt_cap", c.decay_attempt_cap, w);
    read(j, "range_grid", c.range_grid, w);
    return c;
}

Json to_json(const SphereConfig& c) {
    return Json{{"n", c.n},           {"shift_seed", c.shift_seed}, {"shift_range", c.shift_range},
                {"x0", c.x0},         {"iters", c.iters},           {"lrs", c.lrs},
                {"pass_ratio", c.pass_ratio}, {"state_seed", c.state_seed}};
}

SphereConfig sphere_from_json(const Json& j, SphereConfig c) {
    const std::string w = "/sphere";
    check_keys(j, {"n", "shift_seed", "shift_range", "x0", "iters", "lrs", "pass_ratio", "state_seed"}, w);
    read(j, "n", c.n, w);
    read(j, "shift_seed", c.shift_seed, w);
    read(j, "shift_range", c.shift_range, w);
    read(j, "x0", c.x0, w);
    read(j, "iters", c.iters, w);
    read(j, "lrs", c.lrs, w);
    read(j, "pass_ratio", c.pass_ratio, w);
    read(j, "state_seed", c.state_seed, w);
    return c;
}

Json to_json(const DatasetConfig& c) {
    return Json{{"kind", c.kind},   {"n", c.n},
                {"classes", c.classes}, {"noise", c.noise},
                {"val_fraction", c.val_fraction}, {"seed", c.seed},
                {"csv_path", c.csv_path}};
}

DatasetConfig dataset_from_json(const Json& j, DatasetConfig c) {
    const std::string w = "/dataset";
    check_keys(j, {"kind", "n", "classes", "noise", "val_fraction", "seed", "csv_path"}, w);
    read(j, "kind", c.kind, w);
    read(j, "n", c.n, w);
    read(j, "classes", c.classes, w);
    read(j, "noise", c.noise, w);
    read(j, "val_fraction", c.val_fraction, w);
    read(j, "seed", c.seed, w);
    read(j, "csv_path", c.csv_path, w);
    return c;
}

Json to_json(const FitnessConfig& c) {
    return Json{{"lrs", c.lrs},
                {"sweep_steps", c.sweep_steps},
                {"full_steps", c.full_steps},
                {"grace", c.grace},
                {"sweep_margin", c.sweep_margin},
                {"full_margin", c.full_margin},
                {"window", c.window},
                {"batch", c.batch},
                {"eval_every", c.eval_every},
                {"seed", c.seed},
                {"classifier",
                 Json{{"base", c.classifier.base},
                      {"activation", c.classifier.activation == Activation::tanh ? "tanh" : "swish"},
                      {"seed", c.classifier.seed}}}};
}

FitnessConfig fitness_config_from_json(const Json& j, FitnessConfig c) {
    const std::string w = "/fitness";
    check_keys(j,
               {"lrs", "sweep_steps", "full_steps", "grace", "sweep_margin", "full_margin", "window", "batch",
                "eval_every", "seed", "classifier"},
               w);
    read(j, "lrs", c.lrs, w);
    read(j, "sweep_steps", c.sweep_steps, w);
    read(j, "full_steps", c.full_steps, w);
    read(j, "grace", c.grace, w);
    read(j, "sweep_margin", c.sweep_margin, w);
    read(j, "full_margin", c.full_margin, w);
    read(j, "window", c.window, w);
    read(j, "batch", c.batch, w);
    read(j, "eval_every", c.eval_every, w);
    read(j, "seed", c.seed, w);
    if (j.contains("classifier")) {
        const auto& cj = j["classifier"];
        const std::string cw = w + "/classifier";
        check_keys(cj, {"base", "activation", "seed"}, cw);
        read(cj, "base", c.classifier.base, cw);
        read(cj, "seed", c.classifier.seed, cw);
        std::string act = c.classifier.activation == Activation::tanh ? "tanh" : "swish";
        read(cj, "activation", act, cw);
        if (act != "tanh" && act != "swish") throw ConfigError(cw + "/activation: expected tanh or swish");
        c.classifier.activation = act == "tanh" ? Activation::tanh : Activation::swish;
    }
    return c;
}

Json genome_json_or_null(const OptimizerGenome& g) { return g.graph.output.inputs.empty() ? Json(nullptr) : to_json(g); }

Json to_json(const ChildRecord& r) {
    return Json{{"timestep", r.timestep},
                {"particle", r.particle},
                {"child", r.child},
                {"skipped", r.skipped},
                {"attempts", r.attempts},
                {"integrity_rejects", r.integrity_rejects},
                {"fitness", to_json(r.fitness)},
                {"genome", genome_json_or_null(r.genome)}};
}

ChildRecord child_from_json(const Json& j) {
    ChildRecord r;
    r.timestep = j.at("timestep").get<int>();
    r.particle = j.at("particle").get<int>();
    r.child = j.at("child").get<int>();
    r.skipped = j.at("skipped").get<bool>();
    r.attempts = j.at("attempts").get<int>();
    r.integrity_rejects = j.at("integrity_rejects").get<int>();
    r.fitness = fitness_from_json(j.at("fitness"));
    if (!j.at("genome").is_null()) r.genome = genome_from_json(j.at("genome"));
    return r;
}

Json to_json(const InitRecord& r) {
    return Json{{"candidate", r.candidate},
                {"rejects", r.rejects},
                {"fitness", to_json(r.fitness)},
                {"genome", to_json(r.genome)}};
}

InitRecord init_record_from_json(const Json& j) {
    InitRecord r;
    r.candidate = j.at("candidate").get<int>();
    r.rejects = j.at("rejects").get<int>();
    r.fitness = fitness_from_json(j.at("fitness"));
    r.genome = genome_from_json(j.at("genome"));
    return r;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot read '" + p.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

FitnessConfig init_fitness_config(const SearchConfig& cfg) {
    FitnessConfig f = cfg.fitness;
    f.full_steps = cfg.init_full_steps;
    return f;
}

}  // namespace

// ---- config -----------------------------------------------------------------

void SearchConfig::check() const {
    if (n < 1 || k < 1 || t < 1) throw ConfigError("search: n, k and t must be >= 1");
    if (init_factor < 1) throw ConfigError("search: init_factor must be >= 1");
    if (jobs < 1) throw ConfigError("search: jobs must be >= 1");
    if (init_attempt_cap < 1 || integrity_attempt_cap < 1 || child_attempt_cap < 1)
        throw ConfigError("search: attempt caps must be >= 1");
    if (init_full_steps < 1) throw ConfigError("search: init_full_steps must be >= 1");
    if (!seed_genome.empty() && !in_catalog(seed_genome))
        throw ConfigError("search: unknown catalog genome '" + seed_genome + "'");
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const auto& s = stages[i];
        if (s.keep < 1 || s.base < 1 || s.steps < 1 || s.repeats < 1)
            throw ConfigError("search: elimination stage fields must be >= 1");
        if (i > 0 && s.keep >= stages[i - 1].keep) throw ConfigError("search: elimination cuts must strictly decrease");
    }
    init.check();
    sphere.check();
    dataset.check();
    fitness.check();
}

Json to_json(const SearchConfig& c) {
    Json stages = Json::array();
    for (const auto& s : c.stages)
        stages.push_back(Json{{"keep", s.keep}, {"base", s.base}, {"steps", s.steps}, {"repeats", s.repeats}});
    return Json{{"n", c.n},
                {"k", c.k},
                {"t", c.t},
                {"init_factor", c.init_factor},
                {"seed", c.seed},
                {"mask", mask_name(c.mask)},
                {"seed_genome", c.seed_genome},
                {"init_attempt_cap", c.init_attempt_cap},
                {"integrity_attempt_cap", c.integrity_attempt_cap},
                {"child_attempt_cap", c.child_attempt_cap},
                {"init_full_steps", c.init_full_steps},
                {"init", to_json(c.init)},
                {"sphere", to_json(c.sphere)},
                {"dataset", to_json(c.dataset)},
                {"fitness", to_json(c.fitness)},
                {"stages", std::move(stages)}};
}

SearchConfig search_config_from_json(const Json& j, SearchConfig c) {
    const std::string w = "";
    check_keys(j,
               {"n", "k", "t", "init_factor", "seed", "jobs", "mask", "seed_genome", "init_attempt_cap",
                "integrity_attempt_cap", "child_attempt_cap", "init_full_steps", "init", "sphere", "dataset",
                "fitness", "stages"},
               "config");
    read(j, "n", c.n, w);
    read(j, "k", c.k, w);
    read(j, "t", c.t, w);
    read(j, "init_factor", c.init_factor, w);
    read(j, "seed", c.seed, w);
    read(j, "jobs", c.jobs, w);
    read(j, "seed_genome", c.seed_genome, w);
    read(j, "init_attempt_cap", c.init_attempt_cap, w);
    read(j, "integrity_attempt_cap", c.integrity_attempt_cap, w);
    read(j, "child_attempt_cap", c.child_attempt_cap, w);
    read(j, "init_full_steps", c.init_full_steps, w);
    if (j.contains("mask")) {
        std::string m;
        read(j, "mask", m, w);
        c.mask = parse_mask(m);
    }
    if (j.contains("init")) c.init = init_from_json(j["init"], c.init);
    if (j.contains("sphere")) c.sphere = sphere_from_json(j["sphere"], c.sphere);
    if (j.contains("dataset")) c.dataset = dataset_from_json(j["dataset"], c.dataset);
    if (j.contains("fitness")) c.fitness = fitness_config_from_json(j["fitness"], c.fitness);
    if (j.contains("stages")) {
        if (!j["stages"].is_array()) throw ConfigError("/stages: expected an array");
        c.stages.clear();
        for (const auto& s : j["stages"]) {
            check_keys(s, {"keep", "base", "steps", "repeats"}, "/stages");
            EliminationStage st;
            read(s, "keep", st.keep, "/stages");
            read(s, "base", st.base, "/stages");
            read(s, "steps", st.steps, "/stages");
            read(s, "repeats", st.repeats, "/stages");
            c.stages.push_back(st);
        }
    }
    return c;
}

Json to_json(const FitnessRecord& r) {
    Json sweep = Json::array();
    for (const auto& e : r.sweep)
        sweep.push_back(Json{{"lr", e.lr},
                             {"final_train_acc", e.final_train_acc},
                             {"best_val_acc", e.best_val_acc},
                             {"nonfinite", e.nonfinite}});
    return Json{{"best_val_acc", r.best_val_acc},
                {"best_lr", r.best_lr},
                {"stage", stage_name(r.stage)},
                {"steps_run", r.steps_run},
                {"sweep", std::move(sweep)}};
}

FitnessRecord fitness_from_json(const Json& j) {
    FitnessRecord r;
    r.best_val_acc = j.at("best_val_acc").get<double>();
    r.best_lr = j.at("best_lr").get<double>();
    r.stage = parse_stage(j.at("stage").get<std::string>());
    r.steps_run = j.at("steps_run").get<int>();
    for (const auto& e : j.at("sweep"))
        r.sweep.push_back(SweepEntry{e.at("lr").get<double>(), e.at("final_train_acc").get<double>(),
                                     e.at("best_val_acc").get<double>(), e.at("nonfinite").get<bool>()});
    return r;
}

Json to_json(const SearchRun& run) {
    Json init = Json::array();
    for (const auto& r : run.init) init.push_back(to_json(r));
    Json particles = Json::array();
    for (const auto& p : run.particles)
        particles.push_back(Json{{"genome", to_json(p.genome)}, {"fitness", to_json(p.fitness)}});
    Json history = Json::array();
    for (const auto& c : run.history) history.push_back(to_json(c));
    return Json{{"config", to_json(run.config)},
                {"timesteps_done", run.timesteps_done},
                {"init", std::move(init)},
                {"particles", std::move(particles)},
                {"history", std::move(history)}};
}

SearchRun search_run_from_json(const Json& j) {
    SearchRun run;
    try {
        run.config = search_config_from_json(j.at("config"));
        run.timesteps_done = j.at("timesteps_done").get<int>();
        for (const auto& r : j.at("init")) run.init.push_back(init_record_from_json(r));
        for (const auto& p : j.at("particles"))
            run.particles.push_back(Particle{genome_from_json(p.at("genome")), fitness_from_json(p.at("fitness"))});
        for (const auto& c : j.at("history")) run.history.push_back(child_from_json(c));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("checkpoint", e.what());
    }
    return run;
}

// ---- execution ----------------------------------------------------------------

void parallel_for(int count, int jobs, const std::function<void(int)>& fn) {
    if (count <= 0) return;
    const int workers = std::clamp(jobs, 1, count);
    if (workers == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        for (int i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next = count;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

std::vector<int> rank_desc(const std::vector<double>& scores) {
    std::vector<int> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)]; });
    return order;
}

std::vector<InitRecord> enlarged_init(const SearchConfig& cfg, const Dataset& data) {
    const int count = cfg.init_factor * cfg.n;
    std::vector<InitRecord> records(static_cast<std::size_t>(count));
    const FitnessConfig fcfg = init_fitness_config(cfg);
    parallel_for(count, cfg.jobs, [&](int i) {
        Rng rng(derive_seed(cfg.seed, {kInitStream, static_cast<std::uint64_t>(i)}));
        InitRecord& rec = records[static_cast<std::size_t>(i)];
        rec.candidate = i;
        for (;;) {
            OptimizerGenome g = random_init(rng, cfg.init);
            if (integrity_check(g, cfg.sphere, cfg.init.range_grid)) {
                rec.genome = std::move(g);
                break;
            }
            if (++rec.rejects >= cfg.init_attempt_cap)
                throw ConfigError("initialization: candidate " + std::to_string(i) + " found no integrity-passing genome in " +
                                  std::to_string(cfg.init_attempt_cap) + " draws");
        }
        rec.fitness = fitness(rec.genome, data, fcfg);
    });
    return records;
}

std::vector<Particle> initial_particles(const SearchConfig& cfg, const std::vector<InitRecord>& init,
                                        const Dataset& data) {
    std::vector<Particle> particles;
    if (!cfg.seed_genome.empty()) {
        const OptimizerGenome g = catalog_entry(cfg.seed_genome).genome;
        const FitnessRecord f = fitness(g, data, cfg.fitness);
        particles.assign(static_cast<std::size_t>(cfg.n), Particle{g, f});
        return particles;
    }
    std::vector<double> scores;
    for (const auto& r : init) scores.push_back(r.fitness.best_val_acc);
    const auto order = rank_desc(scores);
    for (int i = 0; i < cfg.n && i < static_cast<int>(order.size()); ++i) {
        const auto& r = init[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
        particles.push_back(Particle{r.genome, r.fitness});
    }
    return particles;
}

ChildRecord make_child(const SearchConfig& cfg, const Dataset& data, const Particle& parent, int particle,
                       int timestep, int child) {
    Rng rng(derive_seed(cfg.seed, {kChildStream, static_cast<std::uint64_t>(particle),
                                   static_cast<std::uint64_t>(timestep), static_cast<std::uint64_t>(child)}));
    const MutateConfig mcfg{cfg.mask, cfg.init};
    ChildRecord rec;
    rec.timestep = timestep;
    rec.particle = particle;
    rec.child = child;
    for (rec.attempts = 1; rec.attempts <= cfg.child_attempt_cap; ++rec.attempts) {
        bool found = false;
        for (int m = 0; m < cfg.integrity_attempt_cap; ++m) {
            rec.genome = mutate(parent.genome, rng, mcfg);
            if (integrity_check(rec.genome, cfg.sphere, cfg.init.range_grid)) {
                found = true;
                break;
            }
            ++rec.integrity_rejects;
        }
        if (!found) continue;
        rec.fitness = lr_sweep(rec.genome, data, cfg.fitness);
        if (rec.fitness.passed_sweep()) {
            rec.fitness = finish_fitness(rec.genome, data, cfg.fitness, rec.fitness);
            return rec;
        }
    }
    rec.attempts = cfg.child_attempt_cap;
    rec.skipped = true;
    return rec;
}

std::optional<int> select_child(const std::vector<ChildRecord>& children) {
    std::optional<int> best;
    for (std::size_t i = 0; i < children.size(); ++i) {
        if (children[i].skipped) continue;
        if (!best || children[i].fitness.best_val_acc > children[static_cast<std::size_t>(*best)].fitness.best_val_acc)
            best = static_cast<int>(i);
    }
    return best;
}

void search_timestep(SearchRun& run, const Dataset& data) {
    const auto& cfg = run.config;
    const int ts = run.timesteps_done;
    const int n = static_cast<int>(run.particles.size());
    std::vector<ChildRecord> children(static_cast<std::size_t>(n * cfg.k));
    parallel_for(n * cfg.k, cfg.jobs, [&](int idx) {
        const int p = idx / cfg.k, c = idx % cfg.k;
        children[static_cast<std::size_t>(idx)] = make_child(cfg, data, run.particles[static_cast<std::size_t>(p)], p, ts, c);
    });
    for (int p = 0; p < n; ++p) {
        const std::vector<ChildRecord> mine(children.begin() + p * cfg.k, children.begin() + (p + 1) * cfg.k);
        // The parent is never a candidate; it only stays when every child was skipped.
        if (auto best = select_child(mine)) {
            const auto& c = mine[static_cast<std::size_t>(*best)];
            run.particles[static_cast<std::size_t>(p)] = Particle{c.genome, c.fitness};
        }
    }
    run.history.insert(run.history.end(), children.begin(), children.end());
    ++run.timesteps_done;
}

SearchRun start_search(const SearchConfig& cfg, const Dataset& data) {
    cfg.check();
    SearchRun run;
    run.config = cfg;
    if (cfg.seed_genome.empty()) run.init = enlarged_init(cfg, data);
    run.particles = initial_particles(cfg, run.init, data);
    return run;
}

void continue_search(SearchRun& run, const Dataset& data, int max_timesteps,
                     const std::function<void(const SearchRun&)>& before_timestep) {
    for (int ran = 0; run.timesteps_done < run.config.t && (max_timesteps < 0 || ran < max_timesteps); ++ran) {
        if (before_timestep) before_timestep(run);
        search_timestep(run, data);
    }
}

std::vector<std::string> replay_selection(const SearchRun& run) {
    const auto& cfg = run.config;
    std::vector<std::string> uids;
    if (!cfg.seed_genome.empty()) {
        uids.assign(static_cast<std::size_t>(cfg.n), catalog_entry(cfg.seed_genome).genome.uid);
    } else {
        std::vector<double> scores;
        for (const auto& r : run.init) scores.push_back(r.fitness.best_val_acc);
        const auto order = rank_desc(scores);
        for (int i = 0; i < cfg.n && i < static_cast<int>(order.size()); ++i)
            uids.push_back(run.init[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])].genome.uid);
    }
    for (int ts = 0; ts < run.timesteps_done; ++ts)
        for (std::size_t p = 0; p < uids.size(); ++p) {
            std::vector<ChildRecord> mine;
            for (const auto& c : run.history)
                if (c.timestep == ts && c.particle == static_cast<int>(p)) mine.push_back(c);
            std::sort(mine.begin(), mine.end(), [](const auto& a, const auto& b) { return a.child < b.child; });
            if (auto best = select_child(mine)) uids[p] = mine[static_cast<std::size_t>(*best)].genome.uid;
        }
    return uids;
}

std::string ranking_csv(const SearchRun& run) {
    std::vector<double> scores;
    for (const auto& p : run.particles) scores.push_back(p.fitness.best_val_acc);
    std::string out = "rank,particle,uid,fitness,stage,best_lr,steps_run,momentum,parent_uid,mutation\n";
    int rank = 1;
    for (int idx : rank_desc(scores)) {
        const auto& p = run.particles[static_cast<std::size_t>(idx)];
        out += std::to_string(rank++) + "," + std::to_string(idx) + "," + csv_cell(p.genome.uid) + "," +
               fmt17(p.fitness.best_val_acc) + "," + std::string(stage_name(p.fitness.stage)) + "," +
               fmt17(p.fitness.best_lr) + "," + std::to_string(p.fitness.steps_run) + "," +
               std::string(momentum_name(p.genome.momentum)) + "," + csv_cell(p.genome.lineage.parent_uid) + "," +
               csv_cell(p.genome.lineage.mutation) + "\n";
    }
    return out;
}

void write_atomic(const std::filesystem::path& path, const std::string& text) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
        out << text;
        out.flush();
        if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

namespace {

namespace fs = std::filesystem;

std::string timestep_file(int ts) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "t%04d.jsonl", ts);
    return buf;
}

void write_checkpoint(const fs::path& dir, const SearchRun& run) {
    write_atomic(dir / "checkpoint.json", to_json(run).dump() + "\n");
}

void write_timestep_history(const fs::path& dir, const SearchRun& run, int ts) {
    std::string text;
    for (const auto& c : run.history)
        if (c.timestep == ts) text += to_json(c).dump() + "\n";
    write_atomic(dir / "history" / timestep_file(ts), text);
}

void drive(SearchRun& run, const Dataset& data, const fs::path& dir, int stop_after) {
    int last_written = run.timesteps_done;
    continue_search(run, data, stop_after, [&](const SearchRun& r) {
        // Flush history of the timestep just finished, then checkpoint.
        for (; last_written < r.timesteps_done; ++last_written) write_timestep_history(dir, r, last_written);
        write_checkpoint(dir, r);
    });
    for (; last_written < run.timesteps_done; ++last_written) write_timestep_history(dir, run, last_written);
    write_checkpoint(dir, run);
    if (run.timesteps_done < run.config.t) return;

    write_atomic(dir / "ranking.csv", ranking_csv(run));
    fs::create_directories(dir / "particles");
    for (std::size_t p = 0; p < run.particles.size(); ++p)
        write_atomic(dir / "particles" / ("p" + std::to_string(p) + ".json"), serialize(run.particles[p].genome));
}

}  // namespace

SearchRun run_search_dir(const SearchConfig& cfg, const fs::path& dir, int stop_after) {
    cfg.check();
    if (fs::exists(dir) && !fs::is_empty(dir))
        throw ConfigError("output directory '" + dir.string() + "' is not empty; refusing to overwrite");
    fs::create_directories(dir / "history");
    write_atomic(dir / "config.json", to_json(cfg).dump(2) + "\n");

    const Dataset data = make_dataset(cfg.dataset);
    SearchRun run = start_search(cfg, data);
    std::string init_text;
    for (const auto& r : run.init) init_text += to_json(r).dump() + "\n";
    write_atomic(dir / "history" / "init.jsonl", init_text);
    drive(run, data, dir, stop_after);
    return run;
}

SearchRun resume_search_dir(const fs::path& dir, int stop_after, int jobs) {
    const fs::path ckpt = dir / "checkpoint.json";
    if (!fs::exists(ckpt)) throw ConfigError("no checkpoint in '" + dir.string() + "'");
    Json j;
    try {
        j = Json::parse(read_file(ckpt));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(ckpt.string() + " byte " + std::to_string(e.byte), e.what());
    }
    SearchRun run = search_run_from_json(j);
    if (jobs > 0) run.config.jobs = jobs;
    run.config.check();
    if (fs::exists(dir / "ranking.csv")) throw ConfigError("run in '" + dir.string() + "' is already complete");
    const Dataset data = make_dataset(run.config.dataset);
    drive(run, data, dir, stop_after);
    return run;
}

// ---- elimination ----------------------------------------------------------------

EliminationResult eliminate(const std::vector<std::pair<std::string, OptimizerGenome>>& genomes,
                            const std::vector<EliminationStage>& stages, const Dataset& data,
                            const FitnessConfig& base, std::uint64_t seed, int jobs) {
    if (genomes.empty()) throw ConfigError("eliminate: no genomes given");
    if (stages.empty()) throw ConfigError("eliminate: no stages given");
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const auto& s = stages[i];
        if (s.keep < 1 || s.base < 1 || s.steps < 1 || s.repeats < 1)
            throw ConfigError("eliminate: stage fields must be >= 1");
        if (i > 0 && s.keep >= stages[i - 1].keep) throw ConfigError("eliminate: cuts must strictly decrease");
    }
    if (stages.front().keep > static_cast<int>(genomes.size()))
        throw ConfigError("eliminate: first cut keeps " + std::to_string(stages.front().keep) + " of only " +
                          std::to_string(genomes.size()) + " genomes");

    std::vector<EliminationEntry> pool;
    for (const auto& [name, g] : genomes) pool.push_back(EliminationEntry{name, g, {}, {}});

    EliminationResult result;
    for (std::size_t s = 0; s < stages.size(); ++s) {
        const auto& st = stages[s];
        const int reps = st.repeats;
        std::vector<double> scores(pool.size() * static_cast<std::size_t>(reps));
        parallel_for(static_cast<int>(scores.size()), jobs, [&](int idx) {
            const auto g = static_cast<std::size_t>(idx / reps);
            const auto r = static_cast<std::uint64_t>(idx % reps);
            FitnessConfig f = base;
            f.classifier.base = st.base;
            f.full_steps = st.steps;
            // Common random numbers: repeat r uses the same seeds for every genome.
            f.seed = derive_seed(seed, {kElimStream, s, r, 0});
            f.classifier.seed = derive_seed(seed, {kElimStream, s, r, 1});
            scores[static_cast<std::size_t>(idx)] = fitness(pool[g].genome, data, f).best_val_acc;
        });
        std::vector<double> means;
        for (std::size_t g = 0; g < pool.size(); ++g) {
            const auto first = scores.begin() + static_cast<std::ptrdiff_t>(g * static_cast<std::size_t>(reps));
            std::vector<double> mine(first, first + reps);
            pool[g].stage_scores.push_back(mine);
            pool[g].stage_means.push_back(std::accumulate(mine.begin(), mine.end(), 0.0) / reps);
            means.push_back(pool[g].stage_means.back());
        }
        std::vector<EliminationEntry> next;
        const auto order = rank_desc(means);
        for (std::size_t i = 0; i < order.size(); ++i) {
            auto& e = pool[static_cast<std::size_t>(order[i])];
            if (static_cast<int>(i) < st.keep) {
                next.push_back(std::move(e));
            } else {
                result.eliminated.push_back(std::move(e));
            }
        }
        pool = std::move(next);
    }
    result.ranking = std::move(pool);
    // Later eliminations ranked above earlier ones.
    std::stable_sort(result.eliminated.begin(), result.eliminated.end(),
                     [](const auto& a, const auto& b) { return a.stage_means.size() > b.stage_means.size(); });
    return result;
}

std::string elimination_csv(const EliminationResult& result, std::size_t stage_count) {
    std::string out = "rank,name,uid,survived";
    for (std::size_t s = 0; s < stage_count; ++s) out += ",stage" + std::to_string(s + 1) + "_mean";
    out += "\n";
    int rank = 1;
    auto row = [&](const EliminationEntry& e, bool survived) {
        out += std::to_string(rank++) + "," + csv_cell(e.name) + "," + csv_cell(e.genome.uid) + "," +
               (survived ? "1" : "0");
        for (std::size_t s = 0; s < stage_count; ++s) out += "," + (s < e.stage_means.size() ? fmt17(e.stage_means[s]) : "");
        out += "\n";
    };
    for (const auto& e : result.ranking) row(e, true);
    for (const auto& e : result.eliminated) row(e, false);
    return out;
}

}  // namespace nos
