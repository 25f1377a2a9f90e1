#include "wmm/experiment.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "wmm/error.hpp"
#include "wmm/stats.hpp"

namespace wmm {

namespace {

using nlohmann::json;

// Typed access to one JSON object that remembers which keys were consumed,
// so unknown keys can be reported by name.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) {
            throw ConfigError(label() + " must be a JSON object");
        }
    }

    bool has(const char* key) {
        seen_.insert(key);
        return j_.contains(key) && !j_.at(key).is_null();
    }

    template <class T>
    T get(const char* key, T fallback) {
        if (!has(key)) return fallback;
        try {
            return j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(field(key) + " has the wrong type");
        }
    }

    const json& raw(const char* key) {
        seen_.insert(key);
        return j_.at(key);
    }

    std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.contains(it.key())) {
                throw ConfigError("unknown field " + field(it.key().c_str()));
            }
        }
    }

private:
    std::string label() const { return path_.empty() ? "spec" : path_; }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

template <class Fn>
auto parse_enum(const std::string& field, const std::string& value, Fn fn) {
    try {
        return fn(value);
    } catch (const ConfigError& e) {
        throw ConfigError(field + ": " + e.what());
    }
}

Range parse_range(ObjectReader& r, const char* key, Range fallback) {
    if (!r.has(key)) return fallback;
    const json& v = r.raw(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
        throw ConfigError(r.field(key) + " must be a [lo, hi] pair of numbers");
    }
    return {v[0].get<double>(), v[1].get<double>()};
}

std::vector<std::string> parse_strings(ObjectReader& r, const char* key,
                                       std::vector<std::string> fallback) {
    if (!r.has(key)) return fallback;
    const json& v = r.raw(key);
    if (!v.is_array()) throw ConfigError(r.field(key) + " must be an array of strings");
    std::vector<std::string> out;
    for (const json& e : v) {
        if (!e.is_string()) throw ConfigError(r.field(key) + " must be an array of strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

ModelSpec parse_model_object(const json& j, std::size_t window) {
    ObjectReader r(j, "model");
    ModelSpec m;
    m.seq_len = r.get<std::size_t>("seq_len", window);
    m.step_features = r.get<std::size_t>("step_features", 1);
    if (r.has("lstm")) {
        try {
            m.lstm_hidden = r.raw("lstm").get<std::vector<std::size_t>>();
        } catch (const json::exception&) {
            throw ConfigError("model.lstm must be an array of hidden sizes");
        }
    }
    if (!r.has("dense")) throw ConfigError("model.dense is required");
    const json& dense = r.raw("dense");
    if (!dense.is_array()) throw ConfigError("model.dense must be an array");
    for (std::size_t i = 0; i < dense.size(); ++i) {
        ObjectReader d(dense[i], "model.dense[" + std::to_string(i) + "]");
        DenseSpec s;
        s.units = d.get<std::size_t>("units", 1);
        s.activation = parse_enum(d.field("activation"),
                                  d.get<std::string>("activation", "identity"), parse_activation);
        d.finish();
        m.dense.push_back(s);
    }
    r.finish();
    return m;
}

json model_json(const ModelSpec& m) {
    json dense = json::array();
    for (const DenseSpec& d : m.dense) {
        dense.push_back({{"units", d.units}, {"activation", std::string(to_string(d.activation))}});
    }
    return {{"seq_len", m.seq_len},
            {"step_features", m.step_features},
            {"lstm", m.lstm_hidden},
            {"dense", std::move(dense)}};
}

json wmm_json(const WmmConfig& w) {
    return {{"method", std::string(to_string(w.method))},
            {"p", w.p},
            {"c", w.c},
            {"density", w.density},
            {"targets", w.targets}};
}

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError(dir.string(), "cannot create directory: " + ec.message());
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError(path.string(), "cannot open for writing");
    return os;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    auto os = open_out(path);
    os << text;
    if (!os) throw IoError(path.string(), "write failed");
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string(), "cannot open");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> default_track(const TrainConfig& cfg, const Model& model) {
    if (!cfg.track.empty()) return cfg.track;
    if (cfg.wmm) return cfg.wmm->targets;
    return model.eligible_targets();
}

// Maps an exception to the exit-code contract, logging the message.
template <class Fn>
int guarded(std::ostream& log, Fn&& fn) {
    try {
        return fn();
    } catch (const IoError& e) {
        log << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const ConfigError& e) {
        log << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::invalid_argument& e) {
        log << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const RangeError& e) {
        log << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::filesystem::filesystem_error& e) {
        log << "error: " << e.what() << '\n';
        return kExitIo;
    }
}

} // namespace

std::string_view to_string(Task task) {
    switch (task) {
    case Task::Synthetic: return "synthetic";
    case Task::SyntheticNoise: return "synthetic-noise";
    case Task::MnistMlp: return "mnist-mlp";
    }
    return "?";
}

Task parse_task(std::string_view name) {
    if (name == "synthetic") return Task::Synthetic;
    if (name == "synthetic-noise") return Task::SyntheticNoise;
    if (name == "mnist-mlp") return Task::MnistMlp;
    throw ConfigError("unknown task '" + std::string(name) +
                      "' (expected synthetic|synthetic-noise|mnist-mlp)");
}

ModelSpec model_preset(std::string_view name, std::size_t window) {
    ModelSpec m;
    if (name == "lstm-small") {
        m.seq_len = window;
        m.step_features = 1;
        m.lstm_hidden = {8, 8};
        m.dense = {{1, Activation::Identity}};
    } else if (name == "mlp") {
        m.seq_len = 1;
        m.step_features = window;
        m.dense = {{32, Activation::Tanh}, {1, Activation::Identity}};
    } else if (name == "mnist-mlp") {
        m.seq_len = 1;
        m.step_features = 784;
        m.dense = {{64, Activation::Relu}, {10, Activation::Identity}};
    } else if (name == "mnist-lstm") {
        m.seq_len = 28;
        m.step_features = 28;
        m.lstm_hidden = {32, 32};
        m.dense = {{10, Activation::Identity}};
    } else {
        throw ConfigError("unknown model preset '" + std::string(name) +
                          "' (expected lstm-small|mlp|mnist-mlp|mnist-lstm)");
    }
    return m;
}

ExperimentSpec default_experiment(Task task, std::string_view preset) {
    ExperimentSpec s;
    s.task = task;
    s.model_preset = std::string(preset);
    s.model = model_preset(preset, s.data.window);
    if (task == Task::MnistMlp) {
        s.train.loss = LossKind::SoftmaxCrossEntropy;
        s.train.epochs = 10;
        s.train.batch_size = 64;
        s.train.learning_rate = 1e-3;
        s.train.patience = 3;
    } else if (!s.model.lstm_hidden.empty()) {
        s.train.epochs = 8;
        s.train.batch_size = 32;
        s.train.learning_rate = 5e-3;
        s.train.patience = 3;
    } else {
        s.train.epochs = 20;
        s.train.batch_size = 32;
        s.train.learning_rate = 3e-3;
        s.train.patience = 5;
    }
    return s;
}

ExperimentSpec skewed_init_preset(WmmMethod method) {
    ExperimentSpec s = default_experiment(Task::SyntheticNoise, "mlp");
    s.init = InitKind::Skewed;
    s.train.optimizer = OptimizerKind::Sgd;
    s.train.learning_rate = 0.01;
    s.train.epochs = 2;
    s.train.seed = 1;
    WmmConfig w;
    w.method = method;
    w.p = 0.1;
    w.c = 0.35;
    w.targets = {"dense0"};
    s.train.wmm = w;
    return s;
}

ExperimentSpec parse_experiment(std::string_view json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("spec is not valid JSON: ") + e.what());
    }
    ObjectReader root(j, "");
    const Task task = parse_enum("task", root.get<std::string>("task", "synthetic"), parse_task);

    std::string preset = task == Task::MnistMlp ? "mnist-mlp" : "lstm-small";
    std::optional<json> inline_model;
    if (root.has("model")) {
        const json& m = root.raw("model");
        if (m.is_string()) {
            preset = m.get<std::string>();
        } else if (m.is_object()) {
            inline_model = m;
        } else {
            throw ConfigError("model must be a preset name or an object");
        }
    }
    ExperimentSpec s = default_experiment(task, inline_model ? "mlp" : preset);

    if (root.has("data")) {
        ObjectReader d(root.raw("data"), "data");
        if (d.has("path")) s.data.path = d.get<std::string>("path", "");
        if (d.has("mnist_dir")) s.data.mnist_dir = d.get<std::string>("mnist_dir", "");
        s.data.scale = d.get("scale", s.data.scale);
        s.data.seed = d.get("seed", s.data.seed);
        s.data.window = d.get("window", s.data.window);
        s.data.windows_per_series = d.get("windows_per_series", s.data.windows_per_series);
        s.data.noise_alpha = d.get("noise_alpha", s.data.noise_alpha);
        s.data.snr_db = d.get("snr_db", s.data.snr_db);
        d.finish();
    }
    if (inline_model) {
        s.model_preset = "custom";
        s.model = parse_model_object(*inline_model, s.data.window);
    } else if (task != Task::MnistMlp) {
        s.model = model_preset(s.model_preset, s.data.window);
    }

    if (root.has("init")) {
        s.init = parse_enum("init", root.get<std::string>("init", "uniform"), parse_init);
    }

    if (root.has("train")) {
        ObjectReader t(root.raw("train"), "train");
        TrainConfig& c = s.train;
        c.epochs = t.get("epochs", c.epochs);
        c.batch_size = t.get("batch_size", c.batch_size);
        c.learning_rate = t.get("learning_rate", c.learning_rate);
        if (t.has("optimizer")) {
            c.optimizer = parse_enum(t.field("optimizer"), t.get<std::string>("optimizer", ""),
                                     parse_optimizer);
        }
        if (t.has("loss")) {
            c.loss = parse_enum(t.field("loss"), t.get<std::string>("loss", ""), parse_loss);
        }
        c.seed = t.get("seed", c.seed);
        c.l2 = t.get("l2", c.l2);
        c.patience = t.get("patience", c.patience);
        if (t.has("clip_norm")) c.clip_norm = t.get("clip_norm", 0.0);
        c.entropy_bins = t.get("entropy_bins", c.entropy_bins);
        c.instrument_events = t.get("instrument_events", c.instrument_events);
        t.finish();
    }

    if (root.has("wmm")) {
        ObjectReader w(root.raw("wmm"), "wmm");
        WmmConfig cfg;
        cfg.method = parse_enum(w.field("method"), w.get<std::string>("method", "reinit"),
                                parse_method);
        cfg.p = w.get("p", cfg.p);
        cfg.c = w.get("c", cfg.c);
        cfg.density = w.get("density", cfg.density);
        cfg.targets = parse_strings(w, "targets", {});
        w.finish();
        s.train.wmm = std::move(cfg);
    }
    s.train.track = parse_strings(root, "track", {});

    if (root.has("search")) {
        ObjectReader r(root.raw("search"), "search");
        SearchSettings ss;
        ss.space.method = parse_enum(r.field("method"), r.get<std::string>("method", "reinit"),
                                     parse_search_method);
        ss.space.p = parse_range(r, "p_range", ss.space.p);
        ss.space.c = parse_range(r, "c_range", ss.space.c);
        ss.space.targets = parse_strings(r, "targets", {});
        ss.space.density = r.get("density", ss.space.density);
        if (r.has("l2_grid")) {
            try {
                ss.space.l2_grid = r.raw("l2_grid").get<std::vector<double>>();
            } catch (const json::exception&) {
                throw ConfigError("search.l2_grid must be an array of numbers");
            }
        }
        ss.budget = r.get("budget", ss.budget);
        ss.top_k = r.get("top_k", ss.top_k);
        ss.master_seed = r.get("master_seed", ss.master_seed);
        r.finish();
        if (ss.budget == 0) throw ConfigError("search.budget must be >= 1");
        if (ss.top_k == 0) throw ConfigError("search.top_k must be >= 1");
        s.search = std::move(ss);
    }
    s.out = root.get<std::string>("out", s.out.string());
    root.finish();

    // Cross-field validation.
    validate(s.model);
    validate(s.train);
    if (s.task != Task::MnistMlp && s.model.input_width() != s.data.window) {
        throw ConfigError("model input width " + std::to_string(s.model.input_width()) +
                          " does not match data.window " + std::to_string(s.data.window));
    }
    if (s.task == Task::MnistMlp && s.train.loss != LossKind::SoftmaxCrossEntropy) {
        throw ConfigError("train.loss must be softmax_cross_entropy for mnist-mlp");
    }
    if (s.task != Task::MnistMlp && s.train.loss != LossKind::Mse) {
        throw ConfigError("train.loss must be mse for regression tasks");
    }
    if (s.data.window == 0 || s.data.windows_per_series == 0) {
        throw ConfigError("data.window and data.windows_per_series must be positive");
    }
    return s;
}

ExperimentSpec load_experiment(const std::filesystem::path& path) {
    return parse_experiment(read_file(path));
}

std::string to_json(const ExperimentSpec& s) {
    json j;
    j["task"] = std::string(to_string(s.task));
    j["model"] = model_json(s.model);
    j["init"] = std::string(to_string(s.init));
    j["data"] = {{"path", s.data.path ? json(s.data.path->string()) : json(nullptr)},
                 {"mnist_dir", s.data.mnist_dir ? json(s.data.mnist_dir->string()) : json(nullptr)},
                 {"scale", s.data.scale},
                 {"seed", s.data.seed},
                 {"window", s.data.window},
                 {"windows_per_series", s.data.windows_per_series},
                 {"noise_alpha", s.data.noise_alpha},
                 {"snr_db", s.data.snr_db}};
    const TrainConfig& t = s.train;
    j["train"] = {{"epochs", t.epochs},
                  {"batch_size", t.batch_size},
                  {"learning_rate", t.learning_rate},
                  {"optimizer", std::string(to_string(t.optimizer))},
                  {"loss", std::string(to_string(t.loss))},
                  {"seed", t.seed},
                  {"l2", t.l2},
                  {"patience", t.patience},
                  {"clip_norm", t.clip_norm ? json(*t.clip_norm) : json(nullptr)},
                  {"entropy_bins", t.entropy_bins},
                  {"instrument_events", t.instrument_events}};
    j["wmm"] = t.wmm ? wmm_json(*t.wmm) : json(nullptr);
    j["track"] = t.track;
    if (s.search) {
        const SearchSettings& ss = *s.search;
        j["search"] = {{"method", std::string(to_string(ss.space.method))},
                       {"p_range", {ss.space.p.lo, ss.space.p.hi}},
                       {"c_range", {ss.space.c.lo, ss.space.c.hi}},
                       {"targets", ss.space.targets},
                       {"density", ss.space.density},
                       {"l2_grid", ss.space.l2_grid},
                       {"budget", ss.budget},
                       {"top_k", ss.top_k},
                       {"master_seed", ss.master_seed}};
    } else {
        j["search"] = nullptr;
    }
    j["out"] = s.out.string();
    return j.dump(2);
}

SyntheticOptions synthetic_options(const ExperimentSpec& spec) {
    SyntheticOptions o;
    o.sizes = scaled_split(spec.data.scale);
    o.window = spec.data.window;
    o.windows_per_series = spec.data.windows_per_series;
    o.noisy = spec.task == Task::SyntheticNoise;
    o.noise_alpha = spec.data.noise_alpha;
    o.snr_db = spec.data.snr_db;
    o.seed = spec.data.seed;
    return o;
}

DatasetSplits prepare_data(const ExperimentSpec& spec) {
    if (spec.task == Task::MnistMlp) {
        if (!spec.data.mnist_dir) {
            throw ConfigError("data.mnist_dir is required for task mnist-mlp");
        }
        return load_mnist(*spec.data.mnist_dir, scaled_split(spec.data.scale));
    }
    DatasetSplits splits = spec.data.path ? load_dataset_dir(*spec.data.path)
                                          : generate_synthetic(synthetic_options(spec)).splits;
    standardize(splits);
    return splits;
}

RunResult run_training(const ExperimentSpec& spec, const DatasetSplits& data,
                       const TrainConfig& cfg) {
    Rng init_rng(init_seed(cfg.seed));
    Model model = Model::build(spec.model, spec.init, init_rng);
    RunResult result;
    result.report = train(model, data, cfg);
    const auto ids = default_track(cfg, model);
    for (const TrackedMatrix& t : model.tracked(ids)) {
        result.final_entropy_bits += weight_entropy(t.matrix, cfg.entropy_bins);
    }
    return result;
}

std::vector<std::string> search_targets(const ExperimentSpec& spec) {
    if (spec.search && !spec.search->space.targets.empty()) {
        return spec.search->space.targets;
    }
    Rng rng(0);
    return Model::build(spec.model, InitKind::Uniform, rng).eligible_targets();
}

TrainConfig trial_config(const ExperimentSpec& spec, const TrialPlan& plan) {
    TrainConfig cfg = spec.train;
    cfg.seed = plan.seed;
    cfg.l2 = plan.l2;
    cfg.wmm.reset();
    if (plan.method != SearchMethod::None) {
        cfg.wmm = plan.wmm;
    }
    Rng rng(0);
    cfg.track = Model::build(spec.model, InitKind::Uniform, rng).eligible_targets();
    cfg.instrument_events = false;
    return cfg;
}

std::vector<TrialRecord> run_campaign(const ExperimentSpec& spec, const DatasetSplits& data,
                                      const SearchOptions& options) {
    if (!spec.search) {
        throw ConfigError("spec has no search section");
    }
    SearchSpace space = spec.search->space;
    space.targets = search_targets(spec);
    validate(space);
    {
        // Resolve the training spec before any trial runs.
        Rng rng(0);
        Model probe = Model::build(spec.model, spec.init, rng);
        probe.targets().resolve(space.targets);
        const std::size_t width = spec.model.input_width();
        if (data.train.features != width || data.val.features != width ||
            data.test.features != width) {
            throw ConfigError("dataset feature width does not match the model input width");
        }
        validate(spec.train);
    }
    return run_search(space, options, [&](const TrialPlan& plan) {
        const RunResult run = run_training(spec, data, trial_config(spec, plan));
        TrialResult r;
        r.status = run.report.status;
        if (r.status == RunStatus::Ok) {
            r.val_metric = run.report.best_val_metric;
            r.test_metric = run.report.test_metric;
            r.entropy_bits = run.final_entropy_bits;
        }
        return r;
    });
}

bool higher_is_better(const ExperimentSpec& spec) {
    return spec.train.loss == LossKind::SoftmaxCrossEntropy;
}

std::string report_json(const ExperimentSpec& spec, const TrainConfig& cfg,
                        const RunResult& result) {
    const TrainReport& r = result.report;
    json j;
    ExperimentSpec materialized = spec;
    materialized.train = cfg;
    j["spec"] = json::parse(to_json(materialized));
    j["status"] = std::string(to_string(r.status));
    j["metric"] = cfg.loss == LossKind::Mse ? "mse" : "accuracy";
    j["best_epoch"] = r.best_epoch;
    j["best_val_loss"] = r.best_val_loss;
    j["best_val_metric"] = r.best_val_metric;
    j["test_loss"] = r.test_loss ? json(*r.test_loss) : json(nullptr);
    j["test_metric"] = r.test_metric ? json(*r.test_metric) : json(nullptr);
    j["steps"] = r.steps;
    j["final_entropy_bits"] = result.final_entropy_bits;
    json epochs = json::array();
    for (const EpochRecord& e : r.epochs) {
        epochs.push_back({{"epoch", e.epoch},
                          {"train_loss", e.train_loss},
                          {"val_loss", e.val_loss},
                          {"val_metric", e.val_metric}});
    }
    j["epochs"] = std::move(epochs);
    json timeline = json::array();
    for (const EntropyEpoch& e : r.timeline.epochs()) {
        json per = json::object();
        for (const EntropyRow& row : e.rows) per[row.target_id] = row.entropy_bits;
        timeline.push_back({{"epoch", e.epoch}, {"total_bits", e.total_bits}, {"matrices", per}});
    }
    j["entropy_timeline"] = std::move(timeline);
    json events = json::array();
    for (const WmmEventRecord& e : r.events) {
        events.push_back({{"step", e.step},
                          {"epoch", e.epoch},
                          {"matrix", e.matrix_id},
                          {"mask_size", e.mask_size},
                          {"entropy_before", e.entropy_before},
                          {"entropy_after", e.entropy_after}});
    }
    j["wmm_events"] = std::move(events);
    j["metadata"] = {{"wall_clock_seconds", r.wall_clock_seconds}};
    return j.dump(2);
}

void write_events_csv(std::ostream& os, std::span<const WmmEventRecord> events) {
    os << "step,epoch,matrix_id,mask_size,entropy_before,entropy_after,delta\n";
    for (const WmmEventRecord& e : events) {
        os << e.step << ',' << e.epoch << ',' << e.matrix_id << ',' << e.mask_size << ','
           << format_real(e.entropy_before) << ',' << format_real(e.entropy_after) << ','
           << format_real(e.entropy_after - e.entropy_before) << '\n';
    }
}

int cmd_gen_data(const GenDataArgs& args, std::ostream& log) {
    return guarded(log, [&] {
        if (args.task == Task::MnistMlp) {
            throw ConfigError("gen-data only synthesizes the synthetic tasks; MNIST is read from "
                              "IDX files via data.mnist_dir");
        }
        if (args.out.empty()) throw ConfigError("--out is required");
        ExperimentSpec spec = default_experiment(args.task, "lstm-small");
        spec.data.scale = args.scale;
        spec.data.seed = args.seed;
        const SyntheticData data = generate_synthetic(synthetic_options(spec));
        save_synthetic(args.out, data, std::string(to_string(args.task)));
        log << "wrote " << data.splits.train.size() << '/' << data.splits.val.size() << '/'
            << data.splits.test.size() << " windows to " << args.out.string() << '\n';
        return static_cast<int>(kExitOk);
    });
}

int cmd_train(const TrainArgs& args, std::ostream& log) {
    return guarded(log, [&] {
        ExperimentSpec spec = load_experiment(args.spec);
        if (args.seed) spec.train.seed = *args.seed;
        if (args.out) spec.out = *args.out;
        const DatasetSplits data = prepare_data(spec);
        const RunResult result = run_training(spec, data, spec.train);

        ensure_dir(spec.out);
        write_file(spec.out / "report.json", report_json(spec, spec.train, result) + "\n");
        {
            auto os = open_out(spec.out / "entropy.csv");
            result.report.timeline.write_csv(os);
        }
        {
            auto os = open_out(spec.out / "events.csv");
            write_events_csv(os, result.report.events);
        }
        const TrainReport& r = result.report;
        if (r.status != RunStatus::Ok) {
            log << "run diverged after " << r.steps << " steps\n";
            return static_cast<int>(kExitDiverged);
        }
        log << "best epoch " << r.best_epoch << ", val loss " << format_real(r.best_val_loss)
            << ", test metric " << format_real(*r.test_metric) << '\n';
        return static_cast<int>(kExitOk);
    });
}

int cmd_search(const SearchArgs& args, std::ostream& log) {
    return guarded(log, [&] {
        ExperimentSpec spec = load_experiment(args.spec);
        if (!spec.search) throw ConfigError("search: spec has no search section");
        if (args.seed) spec.search->master_seed = *args.seed;
        if (args.budget) {
            if (*args.budget == 0) throw ConfigError("--budget must be >= 1");
            spec.search->budget = *args.budget;
        }
        if (args.out) spec.out = *args.out;
        const DatasetSplits data = prepare_data(spec);
        ensure_dir(spec.out);

        SearchOptions opts;
        opts.master_seed = spec.search->master_seed;
        opts.budget = spec.search->budget;
        opts.table_path = spec.out / "trials.jsonl";
        opts.threads = default_thread_count();
        const std::vector<TrialRecord> trials = run_campaign(spec, data, opts);
        {
            auto os = open_out(spec.out / "trials.csv");
            write_trials_csv(os, trials);
        }

        const bool higher = higher_is_better(spec);
        const std::size_t ok = count_ok(trials);
        json summary;
        summary["method"] = std::string(to_string(spec.search->space.method));
        summary["metric"] = higher ? "accuracy" : "mse";
        summary["higher_is_better"] = higher;
        summary["budget"] = spec.search->budget;
        summary["master_seed"] = spec.search->master_seed;
        summary["ok_trials"] = ok;
        summary["diverged_trials"] = trials.size() - ok;
        std::size_t k = spec.search->top_k;
        if (ok < k) {
            log << "warning: only " << ok << " ok trials; top-k clipped from " << k << " to "
                << ok << '\n';
            summary["warning"] = "top_k clipped to available ok trials";
            k = ok;
        }
        if (k > 0) {
            const TopKSummary s = top_k_summary(trials, k, MetricField::Test, higher);
            summary["top_k"] = {{"k", s.k},
                                {"mean", s.mean},
                                {"std", s.stddev},
                                {"entropy_mean", s.entropy_mean}};
            summary["best"] = json::parse(to_json_line(s.best));
        } else {
            summary["top_k"] = nullptr;
            summary["best"] = nullptr;
        }
        summary["spec"] = json::parse(to_json(spec));
        write_file(spec.out / "summary.json", summary.dump(2) + "\n");
        log << "search finished: " << ok << '/' << trials.size() << " trials ok\n";
        return static_cast<int>(kExitOk);
    });
}

int cmd_report(const ReportArgs& args, std::ostream& log) {
    return guarded(log, [&] {
        if (!std::filesystem::is_directory(args.out)) {
            throw IoError(args.out.string(), "not a directory");
        }
        struct Campaign {
            std::string name;
            json summary;
        };
        std::vector<Campaign> campaigns;
        std::vector<std::filesystem::path> dirs;
        for (const auto& entry : std::filesystem::directory_iterator(args.out)) {
            if (entry.is_directory() && std::filesystem::exists(entry.path() / "summary.json")) {
                dirs.push_back(entry.path());
            }
        }
        std::sort(dirs.begin(), dirs.end());
        for (const auto& d : dirs) {
            try {
                campaigns.push_back({d.filename().string(),
                                     json::parse(read_file(d / "summary.json"))});
            } catch (const json::exception& e) {
                throw IoError((d / "summary.json").string(), e.what());
            }
        }
        const Campaign* reference = nullptr;
        for (const Campaign& c : campaigns) {
            if (c.summary.value("method", "") == "none" && !c.summary["best"].is_null()) {
                if (reference) throw ConfigError("report: more than one reference campaign");
                reference = &c;
            }
        }
        if (!reference) {
            throw ConfigError("report: no reference (method none) campaign with ok trials in " +
                              args.out.string());
        }
        const bool higher = reference->summary.value("higher_is_better", false);
        const double ref_metric = reference->summary["best"]["test_metric"].get<double>();
        const double ref_entropy = reference->summary["best"]["entropy_bits"].get<double>();

        auto os = open_out(args.out / "comparison.csv");
        os << "campaign,method,statistic,metric,reference_metric,relative_performance,"
              "entropy_bits,reference_entropy_bits,relative_entropy\n";
        for (const Campaign& c : campaigns) {
            if (c.summary["top_k"].is_null()) continue;
            const bool is_ref = &c == reference;
            const double metric = is_ref ? ref_metric : c.summary["top_k"]["mean"].get<double>();
            const double entropy =
                is_ref ? ref_entropy : c.summary["top_k"]["entropy_mean"].get<double>();
            const double rel_perf = higher ? metric / ref_metric : ref_metric / metric;
            const std::string stat =
                is_ref ? "best" : "top" + std::to_string(c.summary["top_k"]["k"].get<int>()) + "_mean";
            os << c.name << ',' << c.summary.value("method", "") << ',' << stat << ','
               << format_real(metric) << ',' << format_real(ref_metric) << ','
               << format_real(rel_perf) << ',' << format_real(entropy) << ','
               << format_real(ref_entropy) << ',' << format_real(entropy / ref_entropy) << '\n';
        }
        if (!os) throw IoError((args.out / "comparison.csv").string(), "write failed");
        log << "wrote " << (args.out / "comparison.csv").string() << '\n';
        return static_cast<int>(kExitOk);
    });
}

} // namespace wmm
