// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale fitness: a small feedforward classifier trained with analytic
// gradients under a candidate optimizer, with two-stage early stopping.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nos/engine.hpp"

namespace nos {

struct DatasetConfig {
    std::string kind = "two_moons";  // two_moons | blobs | spirals | csv
    int n = 1000;
    int classes = 3;  // blob centers or spiral arms; two_moons is always 2
    double noise = 0.15;
    double val_fraction = 0.2;
    std::uint64_t seed = 1;
    std::string csv_path;

    void check() const;
};

struct Split {
    std::vector<double> x;  // row-major, rows() x features
    std::vector<int> y;
    std::size_t rows() const { return y.size(); }
};

struct Dataset {
    std::string name;
    int features = 0;
    int classes = 0;
    Split train, val;

    /// Majority-class fraction of the training split.
    double chance() const;
};

/// Deterministic from cfg.seed. Features are standardized with training
/// statistics; the split is stratified so every class appears in both parts.
Dataset make_dataset(const DatasetConfig& cfg);

/// Parses CSV text with a header row and a "label" column. Errors name the
/// offending line. Labels are mapped to class indices in sorted order.
Dataset dataset_from_csv(const std::string& text, const DatasetConfig& cfg);

enum class Activation { tanh, swish };

struct ClassifierSpec {
    int base = 16;
    Activation activation = Activation::swish;
    std::uint64_t seed = 0;
};

struct Layer {
    int in = 0, out = 0;
    Tensor weight;  // out x in, row-major
    Tensor bias;
};

/// Two hidden layers of width base and 2*base, softmax output. The output
/// layer is zero-initialized.
struct Classifier {
    std::vector<Layer> layers;
    Activation activation = Activation::swish;

    /// Parameter tensors in a fixed order: weight0, bias0, weight1, ...
    std::vector<std::span<double>> parameters();
    std::size_t parameter_count() const;
};

Classifier make_classifier(const ClassifierSpec& spec, int features, int classes);

/// Same layout as Classifier::parameters().
using Gradients = std::vector<Tensor>;

/// Mean softmax cross-entropy over the rows; fills `grads` when non-null.
/// `correct` (optional) receives the number of correctly classified rows.
double loss_and_grad(const Classifier& net, std::span<const double> x, std::span<const int> y, Gradients* grads,
                     int* correct = nullptr);

double accuracy(const Classifier& net, const Split& split);

struct TrainConfig {
    int steps = 800;
    double lr = 0.01;
    std::int64_t clock_T = 800;
    int batch = 64;
    int eval_every = 100;
    int window = 50;  // steps averaged for the reported train accuracy
    std::uint64_t seed = 0;
    /// Stop once the windowed train accuracy drops below this after `grace` steps.
    double abort_below = -1.0;
    int grace = 1000;
};

struct TrainResult {
    std::vector<double> train_acc;  // per-step minibatch accuracy
    double final_val_acc = 0.0;
    double best_val_acc = 0.0;
    bool nonfinite = false;
    bool aborted = false;
    int steps_run = 0;

    double window_train_acc(int window) const;
};

/// Trains from the spec's initialization with lr * one_cycle(t, clock_T).
/// Nonfinite loss or parameters halt training; the best validation accuracy
/// seen so far is kept.
TrainResult train_eval(const OptimizerGenome& genome, const ClassifierSpec& spec, const Dataset& data,
                       const TrainConfig& cfg);

enum class Stage { lr_sweep_failed, aborted, completed };
std::string_view stage_name(Stage s) noexcept;
Stage parse_stage(std::string_view name);

struct FitnessConfig {
    std::vector<double> lrs = {10.0, 1.0, 0.1, 0.01, 1e-3, 1e-4, 1e-5};
    int sweep_steps = 800;
    int full_steps = 8000;
    int grace = 1000;
    double sweep_margin = 0.15;  // stage-1 threshold = chance + margin
    double full_margin = 0.30;   // stage-2 threshold = chance + margin
    int window = 50;
    int batch = 64;
    int eval_every = 100;
    ClassifierSpec classifier;
    std::uint64_t seed = 0;

    void check() const;
};

struct SweepEntry {
    double lr = 0.0;
    double final_train_acc = 0.0;
    double best_val_acc = 0.0;
    bool nonfinite = false;
};

struct FitnessRecord {
    double best_val_acc = 0.0;
    double best_lr = 0.0;
    Stage stage = Stage::lr_sweep_failed;
    int steps_run = 0;
    std::vector<SweepEntry> sweep;

    bool passed_sweep() const { return stage != Stage::lr_sweep_failed; }
};

/// Stage 1 only: short run per learning rate. Returns the record with
/// stage lr_sweep_failed, or completed with best_lr chosen (stage 2 not run).
FitnessRecord lr_sweep(const OptimizerGenome& genome, const Dataset& data, const FitnessConfig& cfg);

/// Both stages; fitness is the best validation accuracy of the long run.
FitnessRecord fitness(const OptimizerGenome& genome, const Dataset& data, const FitnessConfig& cfg);

/// Continues with stage 2 from a record produced by lr_sweep.
FitnessRecord finish_fitness(const OptimizerGenome& genome, const Dataset& data, const FitnessConfig& cfg,
                             FitnessRecord sweep_record);

}  // namespace nos
