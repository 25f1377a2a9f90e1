#include "wmm/train.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "wmm/error.hpp"

namespace wmm {

namespace {

double global_norm(const std::vector<std::vector<double>>& grads) {
    double acc = 0.0;
    for (const auto& g : grads) {
        for (double v : g) {
            acc += v * v;
        }
    }
    return std::sqrt(acc);
}

bool finite_params(Model& model) {
    for (const ParamBlock& b : model.parameters()) {
        for (double v : b.values) {
            if (!std::isfinite(v)) {
                return false;
            }
        }
    }
    return true;
}

} // namespace

void validate(const TrainConfig& cfg) {
    if (cfg.batch_size == 0) throw ConfigError("train.batch_size must be positive");
    if (!(cfg.learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
    if (cfg.patience == 0) throw ConfigError("train.patience must be >= 1");
    if (!(cfg.l2 >= 0.0)) throw ConfigError("train.l2 must be >= 0");
    if (cfg.clip_norm && !(*cfg.clip_norm >= 0.0)) throw ConfigError("train.clip_norm must be >= 0");
    if (cfg.entropy_bins == 0) throw ConfigError("train.entropy_bins must be positive");
    if (cfg.wmm) validate(*cfg.wmm);
}

std::string_view to_string(RunStatus status) {
    return status == RunStatus::Ok ? "ok" : "diverged";
}

void gather_batch(const DataSplit& split, std::span<const std::size_t> indices, Mat& inputs,
                  std::vector<double>& targets) {
    const auto f = static_cast<Eigen::Index>(split.features);
    inputs.resize(static_cast<Eigen::Index>(indices.size()), f);
    targets.resize(indices.size() * split.target_width);
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const std::size_t i = indices[r];
        inputs.row(static_cast<Eigen::Index>(r)) =
            Eigen::Map<const Eigen::RowVectorXd>(split.inputs.data() + i * split.features, f);
        std::copy_n(split.targets.begin() + static_cast<std::ptrdiff_t>(i * split.target_width),
                    split.target_width, targets.begin() + static_cast<std::ptrdiff_t>(r * split.target_width));
    }
}

Evaluation evaluate(const Model& model, const DataSplit& split, LossKind loss, std::size_t chunk) {
    const std::size_t n = split.size();
    if (n == 0) {
        throw std::invalid_argument("evaluate: empty split");
    }
    std::vector<std::size_t> idx;
    Mat x;
    std::vector<double> t;
    double loss_sum = 0.0;
    double metric_sum = 0.0;
    for (std::size_t start = 0; start < n; start += chunk) {
        const std::size_t count = std::min(chunk, n - start);
        idx.resize(count);
        std::iota(idx.begin(), idx.end(), start);
        gather_batch(split, idx, x, t);
        const Mat out = model.forward(x);
        loss_sum += loss_value(loss, out, t) * static_cast<double>(count);
        metric_sum += metric_value(loss, out, t) * static_cast<double>(count);
    }
    return {loss_sum / static_cast<double>(n), metric_sum / static_cast<double>(n)};
}

TrainReport train(Model& model, const DatasetSplits& data, const TrainConfig& cfg) {
    validate(cfg);
    const auto started = std::chrono::steady_clock::now();
    const std::size_t width = model.spec().input_width();
    for (const DataSplit* s : {&data.train, &data.val, &data.test}) {
        if (s->size() == 0 || s->features != width) {
            throw ConfigError("dataset feature width does not match the model input width " +
                              std::to_string(width));
        }
    }

    // Resolve everything up front so a bad target fails before any training.
    std::vector<NamedMatrix> wmm_targets;
    if (cfg.wmm) {
        wmm_targets = model.targets().resolve(cfg.wmm->targets);
    }
    std::vector<std::string> track_ids = cfg.track;
    if (track_ids.empty()) {
        track_ids = cfg.wmm ? cfg.wmm->targets : model.eligible_targets();
    }
    const std::vector<TrackedMatrix> tracked = model.tracked(track_ids);

    const Rng root(cfg.seed);
    Rng data_rng = root.derive("data");
    Rng wmm_rng = root.derive("wmm");
    const double clip =
        cfg.clip_norm.value_or(model.recurrent() ? kRecurrentClipNorm : 0.0);

    TrainReport report;
    report.timeline = EntropyTimeline(cfg.entropy_bins);

    const Evaluation init_train = evaluate(model, data.train, cfg.loss);
    const Evaluation init_val = evaluate(model, data.val, cfg.loss);
    report.epochs.push_back({0, init_train.loss, init_val.loss, init_val.metric});
    report.timeline.record_epoch(0, tracked);
    report.best_epoch = 0;
    report.best_val_loss = init_val.loss;
    report.best_val_metric = init_val.metric;
    auto best_params = model.snapshot();

    if (!std::isfinite(init_val.loss) || !std::isfinite(init_train.loss)) {
        report.status = RunStatus::Diverged;
    }

    Optimizer optimizer(cfg.optimizer, cfg.learning_rate, model.parameter_sizes());
    std::vector<ParamBlock> blocks = model.parameters();
    std::vector<std::span<double>> param_spans;
    for (const ParamBlock& b : blocks) {
        param_spans.push_back(b.values);
    }

    const std::size_t n = data.train.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Mat x;
    std::vector<double> t;
    ModelCache cache;
    Mat d_out;
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= cfg.epochs && report.status == RunStatus::Ok; ++epoch) {
        for (std::size_t k = n - 1; k > 0; --k) {
            std::swap(order[k], order[static_cast<std::size_t>(data_rng.below(k + 1))]);
        }
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, n - start);
            gather_batch(data.train, std::span(order).subspan(start, count), x, t);
            const Mat out = model.forward(x, &cache);
            const double loss = loss_value(cfg.loss, out, t, &d_out);
            if (!std::isfinite(loss)) {
                report.status = RunStatus::Diverged;
                break;
            }
            loss_sum += loss;
            ++batches;

            auto grads = model.backward(cache, d_out);
            if (cfg.l2 > 0.0) {
                for (std::size_t b = 0; b < blocks.size(); ++b) {
                    if (blocks[b].is_weight) {
                        for (std::size_t i = 0; i < grads[b].size(); ++i) {
                            grads[b][i] += cfg.l2 * blocks[b].values[i];
                        }
                    }
                }
            }
            if (clip > 0.0) {
                const double norm = global_norm(grads);
                if (norm > clip) {
                    const double s = clip / norm;
                    for (auto& g : grads) {
                        for (double& v : g) v *= s;
                    }
                }
            }
            optimizer.step(param_spans, grads);
            ++report.steps;

            if (cfg.wmm) {
                std::vector<double> before;
                WmmObserver observe;
                if (cfg.instrument_events) {
                    observe = [&](const NamedMatrix& m) {
                        before.push_back(weight_entropy(m.matrix, cfg.entropy_bins));
                    };
                }
                const auto applied = apply_wmm_step(wmm_targets, *cfg.wmm, wmm_rng, observe);
                std::size_t fired = 0;
                for (std::size_t i = 0; i < applied.size(); ++i) {
                    if (!applied[i].mask) continue;
                    WmmEventRecord ev;
                    ev.step = report.steps;
                    ev.epoch = static_cast<long>(epoch);
                    ev.matrix_id = applied[i].id;
                    ev.mask_size = applied[i].mask->count();
                    if (cfg.instrument_events) {
                        ev.entropy_before = before[fired];
                        ev.entropy_after = weight_entropy(wmm_targets[i].matrix, cfg.entropy_bins);
                    }
                    ++fired;
                    report.events.push_back(std::move(ev));
                }
            }
        }
        if (report.status != RunStatus::Ok) {
            break;
        }
        if (!finite_params(model)) {
            report.status = RunStatus::Diverged;
            break;
        }
        const Evaluation val = evaluate(model, data.val, cfg.loss);
        report.epochs.push_back({static_cast<long>(epoch), loss_sum / static_cast<double>(batches),
                                 val.loss, val.metric});
        report.timeline.record_epoch(static_cast<long>(epoch), tracked);
        if (!std::isfinite(val.loss)) {
            report.status = RunStatus::Diverged;
            break;
        }
        if (val.loss < report.best_val_loss) {
            report.best_val_loss = val.loss;
            report.best_val_metric = val.metric;
            report.best_epoch = static_cast<long>(epoch);
            best_params = model.snapshot();
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }

    model.restore(best_params);
    if (report.status == RunStatus::Ok) {
        const Evaluation test = evaluate(model, data.test, cfg.loss);
        report.test_loss = test.loss;
        report.test_metric = test.metric;
    }
    report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

} // namespace wmm
