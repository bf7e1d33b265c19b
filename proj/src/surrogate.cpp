// SPDX-License-Identifier: Apache-2.0
#include "nos/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

#include "nos/error.hpp"
#include "nos/random.hpp"

namespace nos {

namespace {

struct RawData {
    std::vector<double> x;
    std::vector<int> y;
    int features = 0;
    int classes = 0;
};

RawData two_moons(const DatasetConfig& cfg, Rng& rng) {
    RawData d{{}, {}, 2, 2};
    for (int i = 0; i < cfg.n; ++i) {
        const int label = i % 2;
        const double theta = rng.uniform(0.0, std::numbers::pi);
        double px = std::cos(theta), py = std::sin(theta);
        if (label == 1) {
            px = 1.0 - px;
            py = 0.5 - py;
        }
        d.x.push_back(px + cfg.noise * rng.normal());
        d.x.push_back(py + cfg.noise * rng.normal());
        d.y.push_back(label);
    }
    return d;
}

RawData blobs(const DatasetConfig& cfg, Rng& rng) {
    RawData d{{}, {}, 2, cfg.classes};
    std::vector<std::pair<double, double>> centers;
    for (int c = 0; c < cfg.classes; ++c) centers.emplace_back(rng.uniform(-6.0, 6.0), rng.uniform(-6.0, 6.0));
    for (int i = 0; i < cfg.n; ++i) {
        const int label = i % cfg.classes;
        d.x.push_back(centers[static_cast<std::size_t>(label)].first + rng.normal());
        d.x.push_back(centers[static_cast<std::size_t>(label)].second + rng.normal());
        d.y.push_back(label);
    }
    return d;
}

RawData spirals(const DatasetConfig& cfg, Rng& rng) {
    RawData d{{}, {}, 2, cfg.classes};
    for (int i = 0; i < cfg.n; ++i) {
        const int label = i % cfg.classes;
        const double r = rng.uniform(0.05, 1.0);
        const double angle = 3.0 * std::numbers::pi * r + 2.0 * std::numbers::pi * label / cfg.classes;
        d.x.push_back(r * std::cos(angle) + 0.5 * cfg.noise * rng.normal());
        d.x.push_back(r * std::sin(angle) + 0.5 * cfg.noise * rng.normal());
        d.y.push_back(label);
    }
    return d;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

Dataset finalize(std::string name, RawData raw, const DatasetConfig& cfg) {
    const auto rows = raw.y.size();
    const auto f = static_cast<std::size_t>(raw.features);

    // Stratified split: per class, shuffle and send round(frac * count) rows
    // (at least one) to validation.
    Rng rng(derive_seed(cfg.seed, {0x5E17}));
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(raw.classes));
    for (std::size_t i = 0; i < rows; ++i) by_class[static_cast<std::size_t>(raw.y[i])].push_back(i);
    std::vector<char> is_val(rows, 0);
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& idx = by_class[c];
        if (idx.size() < 2)
            throw ConfigError("dataset " + name + ": class " + std::to_string(c) + " needs at least 2 rows");
        for (std::size_t i = idx.size() - 1; i > 0; --i) std::swap(idx[i], idx[rng.index(i + 1)]);
        auto n_val = static_cast<std::size_t>(std::lround(cfg.val_fraction * static_cast<double>(idx.size())));
        n_val = std::clamp<std::size_t>(n_val, 1, idx.size() - 1);
        for (std::size_t k = 0; k < n_val; ++k) is_val[idx[k]] = 1;
    }

    Dataset d;
    d.name = std::move(name);
    d.features = raw.features;
    d.classes = raw.classes;
    for (std::size_t i = 0; i < rows; ++i) {
        Split& s = is_val[i] ? d.val : d.train;
        s.x.insert(s.x.end(), raw.x.begin() + static_cast<std::ptrdiff_t>(i * f),
                   raw.x.begin() + static_cast<std::ptrdiff_t>((i + 1) * f));
        s.y.push_back(raw.y[i]);
    }

    for (std::size_t j = 0; j < f; ++j) {
        double mean = 0.0, sq = 0.0;
        const auto n = static_cast<double>(d.train.rows());
        for (std::size_t i = 0; i < d.train.rows(); ++i) mean += d.train.x[i * f + j];
        mean /= n;
        for (std::size_t i = 0; i < d.train.rows(); ++i) sq += std::pow(d.train.x[i * f + j] - mean, 2);
        const double sd = std::sqrt(sq / n);
        const double scale = sd > 1e-12 ? 1.0 / sd : 1.0;
        for (auto* s : {&d.train, &d.val})
            for (std::size_t i = 0; i < s->rows(); ++i) s->x[i * f + j] = (s->x[i * f + j] - mean) * scale;
    }
    return d;
}

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

/// Activation value and derivative.
std::pair<double, double> activate(Activation a, double z) {
    if (a == Activation::tanh) {
        const double t = std::tanh(z);
        return {t, 1.0 - t * t};
    }
    const double s = sigmoid(z);
    return {z * s, s + z * s * (1.0 - s)};
}

}  // namespace

void DatasetConfig::check() const {
    if (kind != "two_moons" && kind != "blobs" && kind != "spirals" && kind != "csv")
        throw ConfigError("unknown dataset kind '" + kind + "' (expected two_moons, blobs, spirals or csv)");
    if (kind != "csv" && n < 4) throw ConfigError("dataset: n must be >= 4");
    if ((kind == "blobs" || kind == "spirals") && classes < 2) throw ConfigError("dataset: classes must be >= 2");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("dataset: val_fraction must lie in (0, 1)");
    if (!(noise >= 0.0)) throw ConfigError("dataset: noise must be >= 0");
    if (kind == "csv" && csv_path.empty()) throw ConfigError("dataset: csv kind needs a path");
}

double Dataset::chance() const {
    std::vector<std::size_t> counts(static_cast<std::size_t>(classes), 0);
    for (int c : train.y) ++counts[static_cast<std::size_t>(c)];
    return static_cast<double>(*std::max_element(counts.begin(), counts.end())) /
           static_cast<double>(train.rows());
}

Dataset make_dataset(const DatasetConfig& cfg) {
    cfg.check();
    if (cfg.kind == "csv") {
        std::ifstream in(cfg.csv_path);
        if (!in) throw ConfigError("cannot open dataset file '" + cfg.csv_path + "'");
        std::stringstream buf;
        buf << in.rdbuf();
        return dataset_from_csv(buf.str(), cfg);
    }
    Rng rng(cfg.seed);
    if (cfg.kind == "two_moons") return finalize("two_moons", two_moons(cfg, rng), cfg);
    if (cfg.kind == "blobs") return finalize("blobs", blobs(cfg, rng), cfg);
    return finalize("spirals", spirals(cfg, rng), cfg);
}

Dataset dataset_from_csv(const std::string& text, const DatasetConfig& cfg) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    std::vector<std::string> header;
    while (header.empty() && std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") != std::string::npos) header = split_csv_line(line);
    }
    if (header.empty()) throw ParseError("line 1", "csv is empty");
    const auto label_it = std::find(header.begin(), header.end(), "label");
    if (label_it == header.end())
        throw ParseError("line " + std::to_string(line_no), "header has no 'label' column");
    const auto label_col = static_cast<std::size_t>(label_it - header.begin());
    if (header.size() < 2) throw ParseError("line " + std::to_string(line_no), "no feature columns");

    std::vector<double> x;
    std::vector<std::string> labels;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split_csv_line(line);
        const std::string where = "line " + std::to_string(line_no);
        if (cells.size() != header.size())
            throw ParseError(where, "expected " + std::to_string(header.size()) + " cells, got " +
                                        std::to_string(cells.size()));
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c == label_col) {
                if (cells[c].empty()) throw ParseError(where, "empty label");
                labels.push_back(cells[c]);
                continue;
            }
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(cells[c], &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != cells[c].size() || cells[c].empty() || !std::isfinite(v))
                throw ParseError(where, "column '" + header[c] + "': '" + cells[c] + "' is not a finite number");
            x.push_back(v);
        }
    }
    if (labels.empty()) throw ParseError("line " + std::to_string(line_no), "csv has no data rows");

    std::map<std::string, int> index;
    for (const auto& l : labels) index.emplace(l, 0);
    int next = 0;
    for (auto& [_, i] : index) i = next++;
    if (index.size() < 2) throw ConfigError("csv dataset needs at least 2 classes");

    RawData raw;
    raw.x = std::move(x);
    raw.features = static_cast<int>(header.size()) - 1;
    raw.classes = static_cast<int>(index.size());
    for (const auto& l : labels) raw.y.push_back(index.at(l));
    return finalize("csv", std::move(raw), cfg);
}

std::vector<std::span<double>> Classifier::parameters() {
    std::vector<std::span<double>> out;
    for (auto& l : layers) {
        out.emplace_back(l.weight);
        out.emplace_back(l.bias);
    }
    return out;
}

std::size_t Classifier::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
}

Classifier make_classifier(const ClassifierSpec& spec, int features, int classes) {
    if (spec.base < 1) throw ConfigError("classifier: base width must be >= 1");
    if (features < 1 || classes < 2) throw ConfigError("classifier: need >= 1 feature and >= 2 classes");
    Classifier net;
    net.activation = spec.activation;
    const int widths[] = {features, spec.base, 2 * spec.base, classes};
    Rng rng(spec.seed);
    for (int k = 0; k < 3; ++k) {
        Layer l;
        l.in = widths[k];
        l.out = widths[k + 1];
        const double scale = std::sqrt(1.0 / l.in);
        l.weight.resize(static_cast<std::size_t>(l.in * l.out));
        // The output layer starts at zero: all classes tie until an update
        // treats them differently, so the untrained net sits at chance.
        const bool output_layer = k == 2;
        for (auto& w : l.weight) w = output_layer ? 0.0 : scale * rng.normal();
        l.bias.assign(static_cast<std::size_t>(l.out), 0.0);
        net.layers.push_back(std::move(l));
    }
    return net;
}

double loss_and_grad(const Classifier& net, std::span<const double> x, std::span<const int> y, Gradients* grads,
                     int* correct) {
    const std::size_t rows = y.size();
    const std::size_t L = net.layers.size();
    // pre[k]: pre-activations of layer k; act[k]: its input (act[0] = x);
    // dact[k]: activation derivative at pre[k], kept for the backward pass.
    std::vector<Tensor> pre(L), act(L + 1), dact(L);
    act[0].assign(x.begin(), x.end());
    for (std::size_t k = 0; k < L; ++k) {
        const Layer& l = net.layers[k];
        const auto in = static_cast<std::size_t>(l.in), out = static_cast<std::size_t>(l.out);
        pre[k].assign(rows * out, 0.0);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t o = 0; o < out; ++o) {
                double z = l.bias[o];
                for (std::size_t i = 0; i < in; ++i) z += l.weight[o * in + i] * act[k][r * in + i];
                pre[k][r * out + o] = z;
            }
        if (k + 1 < L) {
            act[k + 1].resize(rows * out);
            if (grads) dact[k].resize(rows * out);
            for (std::size_t j = 0; j < rows * out; ++j) {
                const auto [a, da] = activate(net.activation, pre[k][j]);
                act[k + 1][j] = a;
                if (grads) dact[k][j] = da;
            }
        }
    }

    const auto classes = static_cast<std::size_t>(net.layers.back().out);
    Tensor delta(rows * classes);
    double loss = 0.0;
    int hits = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* z = &pre[L - 1][r * classes];
        const double zmax = *std::max_element(z, z + classes);
        double denom = 0.0;
        for (std::size_t c = 0; c < classes; ++c) denom += std::exp(z[c] - zmax);
        const auto label = static_cast<std::size_t>(y[r]);
        loss += std::log(denom) - (z[label] - zmax);
        if (static_cast<std::size_t>(std::max_element(z, z + classes) - z) == label) ++hits;
        for (std::size_t c = 0; c < classes; ++c)
            delta[r * classes + c] = (std::exp(z[c] - zmax) / denom - (c == label ? 1.0 : 0.0)) / static_cast<double>(rows);
    }
    if (correct) *correct = hits;
    if (!grads) return loss / static_cast<double>(rows);

    grads->assign(2 * L, Tensor{});
    for (std::size_t k = L; k-- > 0;) {
        const Layer& l = net.layers[k];
        const auto in = static_cast<std::size_t>(l.in), out = static_cast<std::size_t>(l.out);
        Tensor& gw = (*grads)[2 * k];
        Tensor& gb = (*grads)[2 * k + 1];
        gw.assign(l.weight.size(), 0.0);
        gb.assign(out, 0.0);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t o = 0; o < out; ++o) {
                const double d = delta[r * out + o];
                gb[o] += d;
                for (std::size_t i = 0; i < in; ++i) gw[o * in + i] += d * act[k][r * in + i];
            }
        if (k == 0) break;
        Tensor prev(rows * in, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t o = 0; o < out; ++o) {
                const double d = delta[r * out + o];
                for (std::size_t i = 0; i < in; ++i) prev[r * in + i] += l.weight[o * in + i] * d;
            }
            for (std::size_t i = 0; i < in; ++i) prev[r * in + i] *= dact[k - 1][r * in + i];
        }
        delta = std::move(prev);
    }
    return loss / static_cast<double>(rows);
}

double accuracy(const Classifier& net, const Split& split) {
    if (split.rows() == 0) return 0.0;
    int hits = 0;
    loss_and_grad(net, split.x, split.y, nullptr, &hits);
    return static_cast<double>(hits) / static_cast<double>(split.rows());
}

double TrainResult::window_train_acc(int window) const {
    if (train_acc.empty()) return 0.0;
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(std::max(window, 1)), train_acc.size());
    return std::accumulate(train_acc.end() - static_cast<std::ptrdiff_t>(n), train_acc.end(), 0.0) /
           static_cast<double>(n);
}

TrainResult train_eval(const OptimizerGenome& genome, const ClassifierSpec& spec, const Dataset& data,
                       const TrainConfig& cfg) {
    if (cfg.steps < 0 || cfg.clock_T < 1 || cfg.steps > cfg.clock_T)
        throw ConfigError("train: need 0 <= steps <= clock_T and clock_T >= 1");
    if (cfg.batch < 1 || cfg.eval_every < 1) throw ConfigError("train: batch and eval_every must be >= 1");

    Classifier net = make_classifier(spec, data.features, data.classes);
    auto params = net.parameters();
    std::vector<OptimizerState> states;
    for (std::size_t i = 0; i < params.size(); ++i)
        states.push_back(init_state(genome, params[i].size(), derive_seed(cfg.seed, {0x0A7, i})));

    TrainResult result;
    result.final_val_acc = accuracy(net, data.val);
    result.best_val_acc = result.final_val_acc;

    const auto f = static_cast<std::size_t>(data.features);
    const std::size_t rows = data.train.rows();
    const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch), rows);
    std::vector<std::size_t> order(rows);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(cfg.seed, {0xBA7C}));
    std::size_t cursor = rows;

    std::vector<double> bx(batch * f);
    std::vector<int> by(batch);
    Gradients grads;
    for (int step = 0; step < cfg.steps; ++step) {
        for (std::size_t b = 0; b < batch; ++b) {
            if (cursor == rows) {
                for (std::size_t i = rows - 1; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);
                cursor = 0;
            }
            const std::size_t r = order[cursor++];
            std::copy_n(data.train.x.begin() + static_cast<std::ptrdiff_t>(r * f), f,
                        bx.begin() + static_cast<std::ptrdiff_t>(b * f));
            by[b] = data.train.y[r];
        }
        int hits = 0;
        const double loss = loss_and_grad(net, bx, by, &grads, &hits);
        result.steps_run = step + 1;
        if (!std::isfinite(loss)) {
            result.nonfinite = true;
            break;
        }
        result.train_acc.push_back(static_cast<double>(hits) / static_cast<double>(batch));

        const Clock clock{step, cfg.clock_T};
        const double alpha = cfg.lr * one_cycle(clock);
        bool finite = true;
        for (std::size_t i = 0; i < params.size(); ++i) {
            apply_step(genome, states[i], params[i], grads[i], alpha, clock);
            for (double v : params[i]) finite = finite && std::isfinite(v);
        }
        if (!finite) {
            result.nonfinite = true;
            break;
        }
        if ((step + 1) % cfg.eval_every == 0 || step + 1 == cfg.steps) {
            result.final_val_acc = accuracy(net, data.val);
            result.best_val_acc = std::max(result.best_val_acc, result.final_val_acc);
        }
        if (cfg.abort_below >= 0.0 && step + 1 > cfg.grace && result.window_train_acc(cfg.window) < cfg.abort_below) {
            result.aborted = true;
            break;
        }
    }
    return result;
}

std::string_view stage_name(Stage s) noexcept {
    switch (s) {
        case Stage::lr_sweep_failed: return "lr_sweep_failed";
        case Stage::aborted: return "aborted";
        case Stage::completed: return "completed";
    }
    return "?";
}

Stage parse_stage(std::string_view name) {
    for (Stage s : {Stage::lr_sweep_failed, Stage::aborted, Stage::completed})
        if (stage_name(s) == name) return s;
    throw ParseError("", "unknown stage '" + std::string(name) + "'");
}

void FitnessConfig::check() const {
    if (lrs.empty()) throw ConfigError("fitness: lr set must be non-empty");
    if (sweep_steps < 1 || full_steps < 1) throw ConfigError("fitness: step budgets must be >= 1");
    if (grace < 0) throw ConfigError("fitness: grace must be >= 0");
    if (window < 1 || batch < 1 || eval_every < 1) throw ConfigError("fitness: window, batch, eval_every must be >= 1");
}

FitnessRecord lr_sweep(const OptimizerGenome& genome, const Dataset& data, const FitnessConfig& cfg) {
    cfg.check();
    const double threshold = data.chance() + cfg.sweep_margin;
    FitnessRecord rec;
    double best_any = 0.0;
    bool found = false;
    for (double lr : cfg.lrs) {
        TrainConfig tc;
        tc.steps = cfg.sweep_steps;
        tc.clock_T = cfg.sweep_steps;
        tc.lr = lr;
        tc.batch = cfg.batch;
        tc.eval_every = cfg.eval_every;
        tc.window = cfg.window;
        tc.seed = cfg.seed;
        const TrainResult r = train_eval(genome, cfg.classifier, data, tc);
        SweepEntry e{lr, r.window_train_acc(cfg.window), r.best_val_acc, r.nonfinite};
        rec.sweep.push_back(e);
        rec.steps_run += r.steps_run;
        best_any = std::max(best_any, e.best_val_acc);
        const bool pass = !e.nonfinite && e.final_train_acc >= threshold;
        // Among passing rates the best validation accuracy wins; ties keep the earlier rate.
        if (pass && (!found || e.best_val_acc > rec.best_val_acc)) {
            found = true;
            rec.best_lr = lr;
            rec.best_val_acc = e.best_val_acc;
        }
    }
    if (!found) {
        rec.stage = Stage::lr_sweep_failed;
        rec.best_val_acc = best_any;
    } else {
        rec.stage = Stage::completed;
    }
    return rec;
}

FitnessRecord finish_fitness(const OptimizerGenome& genome, const Dataset& data, const FitnessConfig& cfg,
                             FitnessRecord rec) {
    if (!rec.passed_sweep()) return rec;
    TrainConfig tc;
    tc.steps = cfg.full_steps;
    tc.clock_T = cfg.full_steps;
    tc.lr = rec.best_lr;
    tc.batch = cfg.batch;
    tc.eval_every = cfg.eval_every;
    tc.window = cfg.window;
    tc.seed = cfg.seed;
    tc.abort_below = data.chance() + cfg.full_margin;
    tc.grace = cfg.grace;
    const TrainResult r = train_eval(genome, cfg.classifier, data, tc);
    rec.steps_run += r.steps_run;
    rec.best_val_acc = r.best_val_acc;
    rec.stage = (r.aborted || r.nonfinite) ? Stage::aborted : Stage::completed;
    return rec;
}

FitnessRecord fitness(const OptimizerGenome& genome, const Dataset& data, const FitnessConfig& cfg) {
    return finish_fitness(genome, data, cfg, lr_sweep(genome, data, cfg));
}

}  // namespace nos
