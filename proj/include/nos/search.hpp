// SPDX-License-Identifier: Apache-2.0
//
// Particle-based, mutation-only genetic search. Every random draw is keyed
// by (particle, timestep, child) so outcomes do not depend on how work is
// scheduled across threads.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nos/integrity.hpp"
#include "nos/serialize.hpp"
#include "nos/surrogate.hpp"
#include "nos/variation.hpp"

namespace nos {

struct EliminationStage {
    int keep = 1;     // survivors after this stage
    int base = 16;    // classifier width
    int steps = 8000; // long-run budget
    int repeats = 3;
};

struct SearchConfig {
    int n = 4;             // particles
    int k = 4;             // children per particle and timestep
    int t = 3;             // timesteps
    int init_factor = 10;  // enlarged initialization draws init_factor * n candidates
    std::uint64_t seed = 0;
    int jobs = 1;  // concurrency only; never affects results

    MutationMask mask = MutationMask::full;
    std::string seed_genome;  // catalog name; when set, every particle starts from it

    int init_attempt_cap = 1000;      // random_init draws per candidate before giving up
    int integrity_attempt_cap = 200;  // mutations per child attempt before it counts as failed
    int child_attempt_cap = 6;        // stage-1 attempts per child before the slot is skipped
    int init_full_steps = 2000;       // long-run budget used to rank initial candidates

    InitConfig init;
    SphereConfig sphere;
    DatasetConfig dataset;
    FitnessConfig fitness;
    std::vector<EliminationStage> stages = {{2, 16, 8000, 3}};

    /// Throws ConfigError on any invalid field.
    void check() const;
};

Json to_json(const SearchConfig& cfg);
/// Fields absent from `j` keep the values already in `base`.
SearchConfig search_config_from_json(const Json& j, SearchConfig base = {});

Json to_json(const FitnessRecord& rec);
FitnessRecord fitness_from_json(const Json& j);

struct Particle {
    OptimizerGenome genome;
    FitnessRecord fitness;
};

struct ChildRecord {
    int timestep = 0;
    int particle = 0;
    int child = 0;
    bool skipped = false;
    int attempts = 0;            // stage-1 attempts used
    int integrity_rejects = 0;   // mutations rejected by the integrity check
    OptimizerGenome genome;      // last candidate when skipped
    FitnessRecord fitness;
};

struct InitRecord {
    int candidate = 0;
    int rejects = 0;
    OptimizerGenome genome;
    FitnessRecord fitness;
};

struct SearchRun {
    SearchConfig config;
    int timesteps_done = 0;
    std::vector<InitRecord> init;
    std::vector<Particle> particles;
    std::vector<ChildRecord> history;
};

Json to_json(const SearchRun& run);
SearchRun search_run_from_json(const Json& j);

/// Runs fn(0..count-1) on up to `jobs` threads. The first exception thrown
/// by any task is rethrown after all workers stop.
void parallel_for(int count, int jobs, const std::function<void(int)>& fn);

/// Index ordering by descending score; ties keep the lower index first.
std::vector<int> rank_desc(const std::vector<double>& scores);

/// Draws init_factor * n integrity-passing genomes, scores them at the
/// reduced budget and keeps the best n. Throws ConfigError when a
/// candidate's rejection loop exhausts init_attempt_cap.
std::vector<InitRecord> enlarged_init(const SearchConfig& cfg, const Dataset& data);

/// Picks the initial particles from the init records (or the seed genome).
std::vector<Particle> initial_particles(const SearchConfig& cfg, const std::vector<InitRecord>& init,
                                        const Dataset& data);

/// Generates and scores child `child` of `parent` for the given slot.
ChildRecord make_child(const SearchConfig& cfg, const Dataset& data, const Particle& parent, int particle,
                       int timestep, int child);

/// Index of the best non-skipped child (ties to the lowest index), or
/// nullopt when every child was skipped.
std::optional<int> select_child(const std::vector<ChildRecord>& children);

/// Moves every particle one timestep; appends the children to run.history.
void search_timestep(SearchRun& run, const Dataset& data);

/// Fresh run state after initialization, before any timestep.
SearchRun start_search(const SearchConfig& cfg, const Dataset& data);

/// Advances until cfg.t timesteps are done or `max_timesteps` more have
/// run. `before_timestep` is called with the state at the start of each
/// timestep (used to checkpoint).
void continue_search(SearchRun& run, const Dataset& data, int max_timesteps = -1,
                     const std::function<void(const SearchRun&)>& before_timestep = {});

/// Rebuilds the final particle uids from the recorded history alone.
std::vector<std::string> replay_selection(const SearchRun& run);

/// Final ranking as CSV (header row, particles ordered by fitness).
std::string ranking_csv(const SearchRun& run);

/// Writes `text` to `path` via a temporary file and rename.
void write_atomic(const std::filesystem::path& path, const std::string& text);

/// Run-directory driver: snapshot config, checkpoint before each timestep,
/// per-timestep history files, ranking.csv and particle genomes.
/// Refuses a non-empty directory.
SearchRun run_search_dir(const SearchConfig& cfg, const std::filesystem::path& dir, int stop_after = -1);
/// Continues a run directory from its checkpoint.
SearchRun resume_search_dir(const std::filesystem::path& dir, int stop_after = -1, int jobs = 0);

struct EliminationEntry {
    std::string name;
    OptimizerGenome genome;
    std::vector<double> stage_means;  // one per stage survived or evaluated
    std::vector<std::vector<double>> stage_scores;
};

struct EliminationResult {
    std::vector<EliminationEntry> ranking;  // survivors of the last stage, best first
    std::vector<EliminationEntry> eliminated;
};

/// Staged elimination: at each stage every remaining genome is scored
/// `repeats` times (repeat r uses the same seed for every genome), ranked by
/// mean fitness and cut to `keep`.
EliminationResult eliminate(const std::vector<std::pair<std::string, OptimizerGenome>>& genomes,
                            const std::vector<EliminationStage>& stages, const Dataset& data,
                            const FitnessConfig& base, std::uint64_t seed, int jobs = 1);

std::string elimination_csv(const EliminationResult& result, std::size_t stage_count);

}  // namespace nos
