// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "nos/catalog.hpp"
#include "nos/error.hpp"
#include "nos/surrogate.hpp"
#include "support.hpp"

using namespace nos;
using namespace nos::testing;

namespace {

Dataset moons() {
    static const Dataset d = make_dataset(DatasetConfig{});
    return d;
}

DatasetConfig kind(const std::string& k) {
    DatasetConfig c;
    c.kind = k;
    return c;
}

std::string csv_error_where(const std::string& text) {
    try {
        dataset_from_csv(text, DatasetConfig{});
    } catch (const ParseError& e) {
        return e.where();
    }
    return "<no error>";
}

double class_fraction(const Split& s, int c) {
    return static_cast<double>(std::count(s.y.begin(), s.y.end(), c)) / static_cast<double>(s.rows());
}

}  // namespace

TEST_CASE("analytic gradients match central differences") {
    const Dataset d = make_dataset(kind("blobs"));
    for (auto act : {Activation::tanh, Activation::swish}) {
        ClassifierSpec spec;
        spec.activation = act;
        spec.seed = 3;
        Classifier net = make_classifier(spec, d.features, d.classes);
        // The output layer starts at zero; randomize it so every path carries gradient.
        Rng rng(17);
        for (auto& w : net.layers.back().weight) w = 0.5 * rng.normal();
        for (auto& b : net.layers.back().bias) b = 0.1 * rng.normal();

        const std::size_t rows = 32;
        const std::span<const double> x(d.train.x.data(), rows * static_cast<std::size_t>(d.features));
        const std::span<const int> y(d.train.y.data(), rows);
        Gradients grads;
        loss_and_grad(net, x, y, &grads);
        auto params = net.parameters();
        REQUIRE(params.size() == grads.size());

        double worst = 0.0;
        for (int k = 0; k < 100; ++k) {
            const auto p = static_cast<std::size_t>(rng.index(params.size()));
            const auto i = static_cast<std::size_t>(rng.index(params[p].size()));
            const double keep = params[p][i], h = 1e-5;
            params[p][i] = keep + h;
            const double up = loss_and_grad(net, x, y, nullptr);
            params[p][i] = keep - h;
            const double down = loss_and_grad(net, x, y, nullptr);
            params[p][i] = keep;
            const double numeric = (up - down) / (2 * h);
            const double err = std::fabs(numeric - grads[p][i]) / std::max({std::fabs(numeric), std::fabs(grads[p][i]), 1e-4});
            worst = std::max(worst, err);
        }
        CHECK(worst < 1e-5);
    }
}

TEST_CASE("classifier shape and initialization") {
    ClassifierSpec spec;
    spec.base = 16;
    const auto net = make_classifier(spec, 2, 3);
    REQUIRE(net.layers.size() == 3);
    CHECK(net.layers[0].out == 16);
    CHECK(net.layers[1].out == 32);
    CHECK(net.layers[2].out == 3);
    CHECK(net.parameter_count() == (2 * 16 + 16) + (16 * 32 + 32) + (32 * 3 + 3));
    for (double w : net.layers[2].weight) CHECK(w == 0.0);
    CHECK_THROWS_AS(make_classifier(spec, 2, 1), ConfigError);
    spec.base = 0;
    CHECK_THROWS_AS(make_classifier(spec, 2, 2), ConfigError);
}

TEST_CASE("synthetic datasets") {
    const Dataset m = moons();
    CHECK(m.features == 2);
    CHECK(m.classes == 2);
    CHECK(m.train.rows() == 800);
    CHECK(m.val.rows() == 200);
    CHECK(m.chance() == doctest::Approx(0.5));

    DatasetConfig bc = kind("blobs");
    bc.n = 999;
    const Dataset b = make_dataset(bc);
    CHECK(b.classes == 3);
    CHECK(b.val.rows() == 3 * 67);
    CHECK(b.train.rows() == 999 - 3 * 67);

    DatasetConfig sc = kind("spirals");
    sc.classes = 4;
    const Dataset s = make_dataset(sc);
    CHECK(s.classes == 4);
    CHECK(s.train.rows() + s.val.rows() == 1000);

    for (const Dataset* d : {&m, &b, &s}) {
        CAPTURE(d->name);
        for (int c = 0; c < d->classes; ++c) {
            CHECK(class_fraction(d->train, c) > 0.0);
            CHECK(class_fraction(d->val, c) > 0.0);
        }
        // Training features are standardized.
        const auto f = static_cast<std::size_t>(d->features);
        for (std::size_t j = 0; j < f; ++j) {
            double mean = 0, sq = 0;
            for (std::size_t i = 0; i < d->train.rows(); ++i) mean += d->train.x[i * f + j];
            mean /= static_cast<double>(d->train.rows());
            for (std::size_t i = 0; i < d->train.rows(); ++i) sq += std::pow(d->train.x[i * f + j] - mean, 2);
            CHECK(std::fabs(mean) < 1e-12);
            CHECK(sq / static_cast<double>(d->train.rows()) == doctest::Approx(1.0));
        }
    }
}

TEST_CASE("datasets are reproducible from their seed") {
    const Dataset a = make_dataset(DatasetConfig{}), b = make_dataset(DatasetConfig{});
    CHECK(a.train.x == b.train.x);
    CHECK(a.val.y == b.val.y);
    DatasetConfig other;
    other.seed = 2;
    CHECK(make_dataset(other).train.x != a.train.x);
}

TEST_CASE("dataset config validation") {
    CHECK_THROWS_AS(make_dataset(kind("mnist")), ConfigError);
    DatasetConfig c;
    c.val_fraction = 1.0;
    CHECK_THROWS_AS(make_dataset(c), ConfigError);
    c = {};
    c.n = 2;
    CHECK_THROWS_AS(make_dataset(c), ConfigError);
    c = kind("csv");
    CHECK_THROWS_AS(make_dataset(c), ConfigError);
    c.csv_path = "/nonexistent/data.csv";
    CHECK_THROWS_AS(make_dataset(c), ConfigError);
}

TEST_CASE("csv datasets") {
    std::string text = "a,b,label\n";
    for (int i = 0; i < 10; ++i) text += std::to_string(i) + "," + std::to_string(2 * i) + "," + (i % 2 ? "dog" : "cat") + "\n";
    const Dataset d = dataset_from_csv(text, DatasetConfig{});
    CHECK(d.features == 2);
    CHECK(d.classes == 2);
    CHECK(d.train.rows() + d.val.rows() == 10);
    CHECK(d.val.rows() == 2);

    // Labels map to indices in sorted order: cat -> 0, dog -> 1; odd rows are dogs.
    const std::string reordered = "label,x\ndog,1\ncat,0\ndog,1\ncat,0\ndog,1\ncat,0\n";
    const Dataset r = dataset_from_csv(reordered, DatasetConfig{});
    for (std::size_t i = 0; i < r.train.rows(); ++i) CHECK((r.train.y[i] == 1) == (r.train.x[i] > 0));

    CHECK(csv_error_where("") == "line 1");
    CHECK(csv_error_where("a,b\n1,2\n") == "line 1");
    CHECK(csv_error_where("label\nx\n") == "line 1");
    CHECK(csv_error_where("a,label\n1,x\n2\n") == "line 3");
    CHECK(csv_error_where("a,label\n1,x\nfoo,y\n") == "line 3");
    CHECK(csv_error_where("a,label\n1,x\ninf,y\n") == "line 3");
    CHECK(csv_error_where("a,label\n1,\n") == "line 2");
    CHECK(csv_error_where("a,label\n") == "line 1");
    CHECK_THROWS_WITH_AS(dataset_from_csv("a,label\n1,x\nfoo,y\n", DatasetConfig{}), doctest::Contains("'a'"),
                         ParseError);
    CHECK_THROWS_AS(dataset_from_csv("a,label\n1,x\n2,x\n", DatasetConfig{}), ConfigError);
}

TEST_CASE("zero training steps sit at chance") {
    const Dataset d = moons();
    TrainConfig tc;
    tc.steps = 0;
    const auto r = train_eval(catalog_entry("SGD").genome, ClassifierSpec{}, d, tc);
    // A zero output layer ties every class; the argmax picks class 0.
    CHECK(r.best_val_acc == doctest::Approx(class_fraction(d.val, 0)));
    CHECK(r.steps_run == 0);
    CHECK(r.train_acc.empty());

    tc.steps = 200;
    tc.lr = 0.0;
    const auto still = train_eval(catalog_entry("SGD").genome, ClassifierSpec{}, d, tc);
    CHECK(still.final_val_acc == r.best_val_acc);
    CHECK(still.steps_run == 200);
}

TEST_CASE("training bookkeeping") {
    const Dataset d = moons();
    TrainConfig tc;
    tc.steps = 300;
    tc.clock_T = 300;
    tc.lr = 0.01;
    const auto r = train_eval(catalog_entry("Adam").genome, ClassifierSpec{}, d, tc);
    CHECK(r.steps_run == 300);
    CHECK(r.train_acc.size() == 300);
    CHECK(r.best_val_acc >= r.final_val_acc);
    double tail = 0;
    for (std::size_t i = 250; i < 300; ++i) tail += r.train_acc[i];
    CHECK(r.window_train_acc(50) == doctest::Approx(tail / 50));
    CHECK(r.window_train_acc(1000) == doctest::Approx(std::accumulate(r.train_acc.begin(), r.train_acc.end(), 0.0) / 300));

    tc.steps = 400;
    CHECK_THROWS_AS(train_eval(catalog_entry("Adam").genome, ClassifierSpec{}, d, tc), ConfigError);
}

TEST_CASE("fitness fixtures on every synthetic dataset") {
    for (const char* k : {"two_moons", "blobs", "spirals"}) {
        CAPTURE(k);
        const Dataset d = make_dataset(kind(k));
        const FitnessConfig cfg;

        const auto adam = fitness(catalog_entry("Adam").genome, d, cfg);
        CHECK(adam.stage == Stage::completed);
        CHECK(adam.best_val_acc >= d.chance() + cfg.full_margin);
        REQUIRE(adam.sweep.size() == cfg.lrs.size());
        for (const auto& e : adam.sweep) {
            CHECK(e.final_train_acc >= 0.0);
            CHECK(e.final_train_acc <= 1.0);
        }
        CHECK(adam.steps_run > 0);
        CHECK(std::find(cfg.lrs.begin(), cfg.lrs.end(), adam.best_lr) != cfg.lrs.end());

        const auto constant = fitness(unary_genome(OpCode::identity, OperandId::const1), d, cfg);
        CHECK(constant.stage == Stage::lr_sweep_failed);
        CHECK(constant.steps_run <= cfg.sweep_steps * static_cast<int>(cfg.lrs.size()));
    }
}

TEST_CASE("stage-one selection follows the validation accuracy of passing rates") {
    const Dataset d = moons();
    FitnessConfig cfg;
    const auto rec = lr_sweep(catalog_entry("Adam").genome, d, cfg);
    REQUIRE(rec.passed_sweep());
    const double threshold = d.chance() + cfg.sweep_margin;
    double best = -1;
    double best_lr = 0;
    for (const auto& e : rec.sweep) {
        if (!e.nonfinite && e.final_train_acc >= threshold && e.best_val_acc > best) {
            best = e.best_val_acc;
            best_lr = e.lr;
        }
    }
    CHECK(rec.best_lr == best_lr);
    CHECK(rec.best_val_acc == best);
}

TEST_CASE("fitness is deterministic") {
    const Dataset d = moons();
    FitnessConfig cfg;
    cfg.full_steps = 1500;
    const auto g = catalog_entry("Opt3").genome;
    const auto a = fitness(g, d, cfg), b = fitness(g, d, cfg);
    CHECK(a.best_val_acc == b.best_val_acc);
    CHECK(a.best_lr == b.best_lr);
    CHECK(a.steps_run == b.steps_run);
    CHECK(a.stage == b.stage);
}

TEST_CASE("forced divergence aborts the long run") {
    // QHM at lr 10 clears the short sweep but collapses during the long run.
    const Dataset d = moons();
    FitnessConfig cfg;
    cfg.lrs = {10.0};
    const auto rec = fitness(catalog_entry("QHM").genome, d, cfg);
    CHECK(rec.stage == Stage::aborted);
    CHECK(rec.steps_run < cfg.sweep_steps + cfg.full_steps);
    CHECK(rec.steps_run > cfg.sweep_steps + cfg.grace);
}

TEST_CASE("stage names and fitness config") {
    for (auto s : {Stage::lr_sweep_failed, Stage::aborted, Stage::completed}) CHECK(parse_stage(stage_name(s)) == s);
    CHECK_THROWS_AS(parse_stage("done"), ParseError);
    FitnessConfig c;
    CHECK_NOTHROW(c.check());
    c.lrs.clear();
    CHECK_THROWS_AS(c.check(), ConfigError);
    c = {};
    c.window = 0;
    CHECK_THROWS_AS(c.check(), ConfigError);
    c = {};
    c.grace = -1;
    CHECK_THROWS_AS(c.check(), ConfigError);
}
