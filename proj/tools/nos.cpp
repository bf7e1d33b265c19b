// SPDX-License-Identifier: Apache-2.0
//
// Command-line entry point. Exit codes: 0 ok, 1 usage, 2 config or input,
// 3 runtime failure.
#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "nos/catalog.hpp"
#include "nos/error.hpp"
#include "nos/integrity.hpp"
#include "nos/pretty.hpp"
#include "nos/schedules.hpp"
#include "nos/search.hpp"
#include "nos/serialize.hpp"

#ifndef NOS_VERSION
#define NOS_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace nos;

namespace {

std::string g_invocation;  // argv joined, recorded in manifests

std::string num(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string cell(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot read '" + p.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

/// Writes to stdout, or to a new file when `path` is set.
void emit(const std::string& text, const std::string& path) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    if (fs::exists(path)) throw ConfigError("'" + path + "' exists; refusing to overwrite");
    write_atomic(path, text);
}

struct NamedGenome {
    std::string name;
    OptimizerGenome genome;
};

/// `catalog:NAME` or a genome file.
NamedGenome load_genome(const std::string& arg) {
    if (arg.rfind("catalog:", 0) == 0) {
        const std::string name = arg.substr(8);
        return {name, catalog_entry(name).genome};
    }
    OptimizerGenome g = deserialize(slurp(arg));
    validate(g);
    return {fs::path(arg).stem().string(), std::move(g)};
}

/// Genome arguments; a search run directory expands to its final particles.
std::vector<NamedGenome> load_genomes(const std::vector<std::string>& args) {
    std::vector<NamedGenome> out;
    for (const auto& a : args) {
        if (a.rfind("catalog:", 0) != 0 && fs::is_directory(a)) {
            const fs::path dir = fs::path(a) / "particles";
            if (!fs::is_directory(dir)) throw ConfigError("'" + a + "' has no particles/ directory");
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(dir))
                if (e.path().extension() == ".json") files.push_back(e.path());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) {
                auto g = load_genome(f.string());
                g.name = fs::path(a).filename().string() + "/" + g.name;
                out.push_back(std::move(g));
            }
        } else {
            out.push_back(load_genome(a));
        }
    }
    return out;
}

void apply_dataset_flag(DatasetConfig& d, const std::string& flag) {
    if (fs::path(flag).extension() == ".csv") {
        d.kind = "csv";
        d.csv_path = flag;
    } else {
        d.kind = flag;
    }
}

// ---- search ------------------------------------------------------------------

struct SearchFlags {
    std::string config_path;
    std::uint64_t seed = 0;
    int n = 0, k = 0, t = 0, init_factor = 0, jobs = 0, stop_after = -1;
    std::string dataset, mask, out;
    CLI::Option *n_opt{}, *k_opt{}, *t_opt{}, *if_opt{}, *jobs_opt{}, *ds_opt{}, *mask_opt{};
};

void add_search_flags(CLI::App* sub, SearchFlags& f, bool with_out) {
    sub->add_option("--config", f.config_path, "JSON config file; flags override its values")->check(CLI::ExistingFile);
    sub->add_option("--seed", f.seed, "Master seed")->required();
    f.n_opt = sub->add_option("--n", f.n, "Particles");
    f.k_opt = sub->add_option("--k", f.k, "Children per particle and timestep");
    f.t_opt = sub->add_option("--t", f.t, "Timesteps");
    f.if_opt = sub->add_option("--init-factor", f.init_factor, "Enlarged-initialization multiplier");
    f.jobs_opt = sub->add_option("--jobs", f.jobs, "Concurrent fitness evaluations");
    f.ds_opt = sub->add_option("--dataset", f.dataset, "two_moons | blobs | spirals | path/to/file.csv");
    f.mask_opt = sub->add_option("--mask", f.mask, "Mutation mask: full | decay_only");
    if (with_out) {
        sub->add_option("--out", f.out, "Run directory (must be new or empty)")->required();
        sub->add_option("--stop-after", f.stop_after, "Stop after this many timesteps (resume later)");
    }
}

SearchConfig build_search_config(const SearchFlags& f) {
    SearchConfig cfg;
    if (!f.config_path.empty()) {
        Json j;
        try {
            j = Json::parse(slurp(f.config_path));
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(f.config_path + " byte " + std::to_string(e.byte), e.what());
        }
        cfg = search_config_from_json(j);
    }
    cfg.seed = f.seed;
    if (f.n_opt->count()) cfg.n = f.n;
    if (f.k_opt->count()) cfg.k = f.k;
    if (f.t_opt->count()) cfg.t = f.t;
    if (f.if_opt->count()) cfg.init_factor = f.init_factor;
    if (f.jobs_opt->count()) cfg.jobs = f.jobs;
    if (f.ds_opt->count()) apply_dataset_flag(cfg.dataset, f.dataset);
    if (f.mask_opt->count()) cfg.mask = parse_mask(f.mask);
    cfg.check();
    return cfg;
}

std::vector<std::string> artifact_list(const fs::path& dir) {
    std::vector<std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().filename() != "manifest.json")
            out.push_back(fs::relative(e.path(), dir).generic_string());
    std::sort(out.begin(), out.end());
    return out;
}

/// One manifest per run directory; later invocations are appended to it.
void write_manifest(const fs::path& dir, const std::string& command, const std::string& config_path,
                    std::uint64_t seed) {
    const fs::path path = dir / "manifest.json";
    Json m;
    if (fs::exists(path)) {
        m = Json::parse(slurp(path));
    } else {
        m = Json{{"tool", "nos"},
                 {"version", NOS_VERSION},
                 {"command", command},
                 {"config_path", config_path},
                 {"seed", seed},
                 {"invocations", Json::array()}};
    }
    m["invocations"].push_back(Json{{"command", command}, {"argv", g_invocation}});
    m["artifacts"] = artifact_list(dir);
    write_atomic(path, m.dump(2) + "\n");
}

int cmd_search_run(const SearchFlags& f, const std::string& seed_genome) {
    SearchConfig cfg = build_search_config(f);
    if (!seed_genome.empty()) {
        cfg.seed_genome = seed_genome;
        cfg.check();
    }
    const SearchRun run = run_search_dir(cfg, f.out, f.stop_after);
    write_manifest(f.out, seed_genome.empty() ? "search run" : "search seed-from-catalog", f.config_path, cfg.seed);
    std::cerr << "timesteps done: " << run.timesteps_done << "/" << cfg.t << "\n";
    if (run.timesteps_done == cfg.t) std::cout << ranking_csv(run);
    return 0;
}

int cmd_search_resume(const std::string& dir, int jobs, int stop_after) {
    const SearchRun run = resume_search_dir(dir, stop_after, jobs);
    write_manifest(dir, "search resume", "", run.config.seed);
    std::cerr << "timesteps done: " << run.timesteps_done << "/" << run.config.t << "\n";
    if (run.timesteps_done == run.config.t) std::cout << ranking_csv(run);
    return 0;
}

EliminationStage parse_stage_flag(const std::string& text) {
    EliminationStage s;
    char tail = 0;
    if (std::sscanf(text.c_str(), "%d:%d:%d:%d%c", &s.keep, &s.base, &s.steps, &s.repeats, &tail) != 4)
        throw ConfigError("stage '" + text + "': expected keep:base:steps:repeats");
    return s;
}

int cmd_search_eliminate(const SearchFlags& f, const std::vector<std::string>& genome_args,
                         const std::vector<std::string>& stage_flags) {
    SearchConfig cfg = build_search_config(f);
    if (!stage_flags.empty()) {
        cfg.stages.clear();
        for (const auto& s : stage_flags) cfg.stages.push_back(parse_stage_flag(s));
    }
    std::vector<std::pair<std::string, OptimizerGenome>> genomes;
    for (auto& g : load_genomes(genome_args)) genomes.emplace_back(g.name, std::move(g.genome));
    const Dataset data = make_dataset(cfg.dataset);
    const auto result = eliminate(genomes, cfg.stages, data, cfg.fitness, cfg.seed, cfg.jobs);
    emit(elimination_csv(result, cfg.stages.size()), f.out);
    return 0;
}

// ---- single-genome tools ---------------------------------------------------------

int cmd_check(const std::string& arg) {
    const auto g = load_genome(arg);
    const bool range_ok = decays_in_range(g.genome);
    const IntegrityVerdict v = sphere_check(g.genome);
    std::cout << "name,uid,decay_range,sphere,initial_loss,best_final_loss,best_lr,integrity\n"
              << cell(g.name) << "," << cell(g.genome.uid) << "," << range_ok << "," << v.passed << ","
              << num(v.initial_loss) << "," << num(v.best_final_loss) << "," << num(v.best_lr) << ","
              << (range_ok && v.passed) << "\n";
    return 0;
}

/// Trace CSV: a "step" column, gradient columns g0..gN-1 and optional weight
/// columns w0..wN-1 (zero when absent).
int cmd_eval(const std::string& genome_arg, const std::string& trace_path, std::int64_t T, std::uint64_t seed) {
    const auto g = load_genome(genome_arg);
    std::istringstream in(slurp(trace_path));
    std::string line;
    if (!std::getline(in, line)) throw ParseError(trace_path + " line 1", "empty trace");
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) header.push_back(c);
    }
    int step_col = -1;
    std::vector<int> gcols, wcols;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const auto& h = header[i];
        if (h == "step") {
            step_col = static_cast<int>(i);
        } else if (h.size() > 1 && (h[0] == 'g' || h[0] == 'w') &&
                   h.find_first_not_of("0123456789", 1) == std::string::npos) {
            const auto idx = static_cast<std::size_t>(std::stoi(h.substr(1)));
            auto& cols = h[0] == 'g' ? gcols : wcols;
            if (cols.size() <= idx) cols.resize(idx + 1, -1);
            cols[idx] = static_cast<int>(i);
        } else {
            throw ParseError(trace_path + " line 1", "unexpected column '" + h + "'");
        }
    }
    if (step_col < 0 || gcols.empty()) throw ParseError(trace_path + " line 1", "need a step column and g0..");
    if (std::count(gcols.begin(), gcols.end(), -1) || std::count(wcols.begin(), wcols.end(), -1) ||
        (!wcols.empty() && wcols.size() != gcols.size()))
        throw ParseError(trace_path + " line 1", "gradient/weight columns must be contiguous and equal in number");

    std::vector<std::pair<std::int64_t, std::vector<double>>> rows;
    for (int lineno = 2; std::getline(in, line); ++lineno) {
        if (line.empty()) continue;
        std::vector<double> vals;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) {
            try {
                std::size_t used = 0;
                vals.push_back(std::stod(c, &used));
                if (used != c.size()) throw std::invalid_argument(c);
            } catch (const std::exception&) {
                throw ParseError(trace_path + " line " + std::to_string(lineno), "bad number '" + c + "'");
            }
        }
        if (vals.size() != header.size())
            throw ParseError(trace_path + " line " + std::to_string(lineno), "wrong field count");
        rows.emplace_back(static_cast<std::int64_t>(vals[static_cast<std::size_t>(step_col)]), std::move(vals));
    }
    if (rows.empty()) throw ParseError(trace_path, "no trace rows");
    if (T <= 0) T = static_cast<std::int64_t>(rows.size());

    const std::size_t n = gcols.size();
    OptimizerState state = init_state(g.genome, n, seed);
    std::string out = "step";
    for (std::size_t i = 0; i < n; ++i) out += ",u" + std::to_string(i);
    out += "\n";
    Tensor grad(n), w(n, 0.0);
    for (const auto& [step, vals] : rows) {
        if (step < 0 || step > T) throw ConfigError("trace step " + std::to_string(step) + " outside [0, T]");
        for (std::size_t i = 0; i < n; ++i) {
            grad[i] = vals[static_cast<std::size_t>(gcols[i])];
            if (!wcols.empty()) w[i] = vals[static_cast<std::size_t>(wcols[i])];
        }
        update_emas(state, grad);
        const auto r = compute_update(g.genome, state, grad, w, Clock{step, T});
        ++state.step;
        out += std::to_string(step);
        for (double u : r.update) out += "," + num(u);
        out += "\n";
    }
    std::cout << out;
    return 0;
}

int cmd_bench(const std::vector<std::string>& args, const std::string& dataset, const std::string& config_path,
              std::uint64_t seed, int jobs) {
    SearchConfig cfg;
    if (!config_path.empty()) cfg = search_config_from_json(Json::parse(slurp(config_path)));
    if (!dataset.empty()) apply_dataset_flag(cfg.dataset, dataset);
    cfg.fitness.seed = seed;
    cfg.dataset.check();
    cfg.fitness.check();
    const auto genomes = load_genomes(args);
    const Dataset data = make_dataset(cfg.dataset);
    std::vector<FitnessRecord> recs(genomes.size());
    parallel_for(static_cast<int>(genomes.size()), jobs, [&](int i) {
        recs[static_cast<std::size_t>(i)] = fitness(genomes[static_cast<std::size_t>(i)].genome, data, cfg.fitness);
    });
    std::cout << "name,uid,dataset,chance,stage,best_lr,best_val_acc,steps_run\n";
    for (std::size_t i = 0; i < genomes.size(); ++i)
        std::cout << cell(genomes[i].name) << "," << cell(genomes[i].genome.uid) << "," << data.name << ","
                  << num(data.chance()) << "," << stage_name(recs[i].stage) << "," << num(recs[i].best_lr) << ","
                  << num(recs[i].best_val_acc) << "," << recs[i].steps_run << "\n";
    return 0;
}

// ---- plots -------------------------------------------------------------------

std::vector<std::int64_t> grid_points(std::int64_t T, std::int64_t stride) {
    if (T < 1) throw ConfigError("--T must be >= 1");
    if (stride < 1) stride = 1;
    std::vector<std::int64_t> pts;
    for (std::int64_t t = 0; t < T; t += stride) pts.push_back(t);
    pts.push_back(T);
    return pts;
}

int cmd_plot_schedules(std::int64_t T, std::int64_t stride, const std::string& out) {
    std::string text = "t";
    for (int s = 0; s < kScheduleCount; ++s) text += "," + std::string(schedule_name(static_cast<ScheduleId>(s)));
    text += "\n";
    for (auto t : grid_points(T, stride)) {
        text += std::to_string(t);
        for (int s = 0; s < kScheduleCount; ++s) text += "," + num(eval_schedule(static_cast<ScheduleId>(s), {t, T}));
        text += "\n";
    }
    emit(text, out);
    return 0;
}

int cmd_plot_lr(std::int64_t T, std::int64_t stride, const std::string& out) {
    std::string text = "t,one_cycle";
    for (int i = 1; i <= kLearningRateScheduleCount; ++i) text += ",LR" + std::to_string(i);
    text += "\n";
    for (auto t : grid_points(T, stride)) {
        text += std::to_string(t) + "," + num(one_cycle({t, T}));
        for (int i = 1; i <= kLearningRateScheduleCount; ++i) text += "," + num(catalog_lr(i, {t, T}));
        text += "\n";
    }
    emit(text, out);
    return 0;
}

int cmd_plot_decay(const std::string& arg, std::int64_t T, std::int64_t stride, const std::string& out) {
    const auto g = load_genome(arg);
    const auto decays = labeled_decays(g.genome);
    std::string text = "t";
    for (const auto& d : decays) text += "," + d.label;
    text += "\n";
    for (auto t : grid_points(T, stride)) {
        text += std::to_string(t);
        for (const auto& d : decays) text += "," + num(eval_decay_graph(d.graph, {t, T}));
        text += "\n";
    }
    emit(text, out);
    return 0;
}

std::pair<double, double> parse_range(const std::string& text) {
    double lo = 0, hi = 0;
    char tail = 0;
    if (std::sscanf(text.c_str(), "%lf:%lf%c", &lo, &hi, &tail) != 2 || !(lo < hi))
        throw ConfigError("range '" + text + "': expected lo:hi with lo < hi");
    return {lo, hi};
}

/// Axis variable of a surface plot; written into the gradient, weights or
/// the stored averages before the update is evaluated.
enum class Axis { g, w, vhat, shat, lhat };

Axis parse_axis(const std::string& s) {
    if (s == "g") return Axis::g;
    if (s == "w") return Axis::w;
    if (s == "vhat") return Axis::vhat;
    if (s == "shat") return Axis::shat;
    if (s == "lhat") return Axis::lhat;
    throw ConfigError("axis '" + s + "': expected g, w, vhat, shat or lhat");
}

int cmd_plot_surface(const std::string& arg, const std::string& xa, const std::string& ya, const std::string& xr,
                     const std::string& yr, int points, std::vector<std::int64_t> slices, std::int64_t T,
                     const std::string& out) {
    const auto g = load_genome(arg);
    const Axis ax = parse_axis(xa), ay = parse_axis(ya);
    if (ax == ay) throw ConfigError("surface axes must differ");
    if (points < 2) throw ConfigError("--points must be >= 2");
    const auto [x0, x1] = parse_range(xr);
    const auto [y0, y1] = parse_range(yr);
    if (slices.empty()) slices = {1000, 10000, 25000, 45000, 65000, 75000, 85000, 95000};

    const auto n = static_cast<std::size_t>(points) * static_cast<std::size_t>(points);
    std::vector<double> xs(n), ys(n);
    for (int i = 0; i < points; ++i)
        for (int j = 0; j < points; ++j) {
            const auto idx = static_cast<std::size_t>(i * points + j);
            xs[idx] = x0 + (x1 - x0) * i / (points - 1);
            ys[idx] = y0 + (y1 - y0) * j / (points - 1);
        }

    std::string text = "t," + xa + "," + ya + ",u\n";
    for (auto t : slices) {
        if (t < 0 || t > T) throw ConfigError("slice " + std::to_string(t) + " outside [0, T]");
        OptimizerState state = init_state(g.genome, n);
        state.step = t;
        Tensor grad(n, 0.0), w(n, 0.0);
        auto place = [&](Axis a, const std::vector<double>& vals) {
            switch (a) {
                case Axis::g: grad = vals; break;
                case Axis::w: w = vals; break;
                case Axis::vhat: state.vhat = vals; break;
                case Axis::shat: state.shat = vals; break;
                case Axis::lhat: state.lhat = vals; break;
            }
        };
        place(ax, xs);
        place(ay, ys);
        const auto r = compute_update(g.genome, state, grad, w, Clock{t, T});
        for (std::size_t i = 0; i < n; ++i)
            text += std::to_string(t) + "," + num(xs[i]) + "," + num(ys[i]) + "," + num(r.update[i]) + "\n";
    }
    emit(text, out);
    return 0;
}

// ---- catalog / fmt ------------------------------------------------------------------

int cmd_catalog_list() {
    std::cout << "name,family,momentum,decays,notes\n";
    for (auto name : catalog_names()) {
        const auto e = catalog_entry(name);
        std::cout << e.name << "," << e.family << "," << momentum_name(e.genome.momentum) << ","
                  << decayed_edge_count(e.genome) << "," << cell(e.notes) << "\n";
    }
    return 0;
}

int run(int argc, char** argv) {
    CLI::App app{"Optimizer search toolkit: genomes, integrity checks, surrogate fitness and GA search"};
    app.set_version_flag("--version", NOS_VERSION);
    app.require_subcommand(1);

    // search
    auto* search = app.add_subcommand("search", "Genetic search over optimizer genomes");
    search->require_subcommand(1);
    SearchFlags run_flags, seed_flags, elim_flags;
    auto* s_run = search->add_subcommand("run", "Start a new search run directory");
    add_search_flags(s_run, run_flags, true);

    std::string resume_dir;
    int resume_jobs = 0, resume_stop = -1;
    auto* s_resume = search->add_subcommand("resume", "Continue a run directory from its checkpoint");
    s_resume->add_option("dir", resume_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
    s_resume->add_option("--jobs", resume_jobs, "Concurrent fitness evaluations");
    s_resume->add_option("--stop-after", resume_stop, "Stop after this many more timesteps");

    std::vector<std::string> elim_genomes, elim_stages;
    auto* s_elim = search->add_subcommand("eliminate", "Staged elimination of a genome population");
    s_elim->add_option("genomes", elim_genomes, "Genome files, catalog:NAME or run directories")->required();
    s_elim->add_option("--stage", elim_stages, "keep:base:steps:repeats (repeatable; overrides config stages)");
    add_search_flags(s_elim, elim_flags, false);
    s_elim->add_option("--out", elim_flags.out, "Write the ranking CSV here instead of stdout");

    std::string seed_name;
    auto* s_seed = search->add_subcommand("seed-from-catalog", "Start a run with every particle set to a catalog genome");
    s_seed->add_option("name", seed_name, "Catalog entry")->required();
    add_search_flags(s_seed, seed_flags, true);

    // single-genome commands
    std::string genome_arg, trace_path;
    auto* check = app.add_subcommand("check", "Integrity check of one genome (CSV)");
    check->add_option("genome", genome_arg, "Genome file or catalog:NAME")->required();

    std::int64_t eval_T = 0;
    std::uint64_t eval_seed = 0;
    auto* eval = app.add_subcommand("eval", "Feed a gradient trace through a genome, print U per step");
    eval->add_option("genome", genome_arg, "Genome file or catalog:NAME")->required();
    eval->add_option("trace", trace_path, "CSV with step,g0..[,w0..]")->required()->check(CLI::ExistingFile);
    eval->add_option("--T", eval_T, "Horizon (default: number of rows)");
    eval->add_option("--seed", eval_seed, "State seed for drop ops");

    std::vector<std::string> bench_genomes;
    std::string bench_dataset, bench_config;
    std::uint64_t bench_seed = 0;
    int bench_jobs = 1;
    auto* bench = app.add_subcommand("bench", "Fitness table for a list of genomes");
    bench->add_option("genomes", bench_genomes, "Genome files, catalog:NAME or run directories")->required();
    bench->add_option("--dataset", bench_dataset, "two_moons | blobs | spirals | path/to/file.csv");
    bench->add_option("--config", bench_config, "JSON config (dataset and fitness sections)")->check(CLI::ExistingFile);
    bench->add_option("--seed", bench_seed, "Fitness seed");
    bench->add_option("--jobs", bench_jobs, "Concurrent evaluations");

    auto* catalog = app.add_subcommand("catalog", "Built-in optimizers");
    catalog->require_subcommand(1);
    auto* c_list = catalog->add_subcommand("list", "List entries (CSV)");
    std::string export_name, out_path;
    auto* c_export = catalog->add_subcommand("export", "Print an entry in the canonical genome format");
    c_export->add_option("name", export_name, "Catalog entry")->required();
    c_export->add_option("--out", out_path, "Write to a new file instead of stdout");

    auto* plot = app.add_subcommand("plot", "Numeric tables (CSV) of schedules, decays, learning rates, surfaces");
    plot->require_subcommand(1);
    std::int64_t plot_T = 1000, stride = 1;
    auto* p_sched = plot->add_subcommand("schedules", "All decay schedules over 0..T");
    auto* p_lr = plot->add_subcommand("lr", "One-cycle base and LR1..LR9 over 0..T");
    auto* p_decay = plot->add_subcommand("decay", "A genome's decay functions over 0..T");
    p_decay->add_option("genome", genome_arg, "Genome file or catalog:NAME")->required();
    for (auto* p : {p_sched, p_lr, p_decay}) {
        p->add_option("--T", plot_T, "Horizon")->capture_default_str();
        p->add_option("--stride", stride, "Step between rows (T is always included)")->capture_default_str();
        p->add_option("--out", out_path, "Write to a new file instead of stdout");
    }
    std::string xa = "g", ya = "vhat", xr = "-10:10", yr = "-10:10";
    int points = 41;
    std::vector<std::int64_t> slices;
    std::int64_t surface_T = 96000;
    auto* p_surf = plot->add_subcommand("surface", "Update U over a 2-D grid at several time slices");
    p_surf->add_option("genome", genome_arg, "Genome file or catalog:NAME")->required();
    p_surf->add_option("--x", xa, "x axis: g | w | vhat | shat | lhat")->capture_default_str();
    p_surf->add_option("--y", ya, "y axis: g | w | vhat | shat | lhat")->capture_default_str();
    p_surf->add_option("--x-range", xr, "lo:hi")->capture_default_str();
    p_surf->add_option("--y-range", yr, "lo:hi")->capture_default_str();
    p_surf->add_option("--points", points, "Grid points per axis")->capture_default_str();
    p_surf->add_option("--slice", slices, "Time slices (default 1K,10K,25K,45K,65K,75K,85K,95K)");
    p_surf->add_option("--T", surface_T, "Horizon")->capture_default_str();
    p_surf->add_option("--out", out_path, "Write to a new file instead of stdout");

    auto* fmt = app.add_subcommand("fmt", "Pretty-print a genome as a formula");
    fmt->add_option("genome", genome_arg, "Genome file or catalog:NAME")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (*s_run) return cmd_search_run(run_flags, "");
    if (*s_seed) return cmd_search_run(seed_flags, seed_name);
    if (*s_resume) return cmd_search_resume(resume_dir, resume_jobs, resume_stop);
    if (*s_elim) return cmd_search_eliminate(elim_flags, elim_genomes, elim_stages);
    if (*check) return cmd_check(genome_arg);
    if (*eval) return cmd_eval(genome_arg, trace_path, eval_T, eval_seed);
    if (*bench) return cmd_bench(bench_genomes, bench_dataset, bench_config, bench_seed, bench_jobs);
    if (*c_list) return cmd_catalog_list();
    if (*c_export) {
        emit(serialize(catalog_entry(export_name).genome), out_path);
        return 0;
    }
    if (*p_sched) return cmd_plot_schedules(plot_T, stride, out_path);
    if (*p_lr) return cmd_plot_lr(plot_T, stride, out_path);
    if (*p_decay) return cmd_plot_decay(genome_arg, plot_T, stride, out_path);
    if (*p_surf) return cmd_plot_surface(genome_arg, xa, ya, xr, yr, points, slices, surface_T, out_path);
    if (*fmt) {
        std::cout << pretty_print(load_genome(genome_arg).genome) << "\n";
        return 0;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    for (int i = 0; i < argc; ++i) g_invocation += (i ? " " : "") + std::string(argv[i]);
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const InvalidGenome& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
