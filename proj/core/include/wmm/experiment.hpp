#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wmm/data.hpp"
#include "wmm/hyperopt.hpp"
#include "wmm/model.hpp"
#include "wmm/train.hpp"

namespace wmm {

enum class Task { Synthetic, SyntheticNoise, MnistMlp };

std::string_view to_string(Task task);
Task parse_task(std::string_view name);

struct DataOptions {
    std::optional<std::filesystem::path> path; // directory written by gen-data
    std::optional<std::filesystem::path> mnist_dir;
    double scale = 0.1;
    std::uint64_t seed = 1;
    std::size_t window = kDefaultWindow;
    std::size_t windows_per_series = 50;
    double noise_alpha = 1.0;
    double snr_db = 10.0;
};

struct SearchSettings {
    SearchSpace space;   // empty targets mean every eligible target
    std::size_t budget = 30;
    std::size_t top_k = 5;
    std::uint64_t master_seed = 0;
};

/// A single JSON document describing one experiment. Every default is
/// materialized by to_json so outputs are self-describing.
struct ExperimentSpec {
    Task task = Task::Synthetic;
    std::string model_preset = "lstm-small"; // "custom" when given inline
    ModelSpec model;
    InitKind init = InitKind::Uniform;
    DataOptions data;
    TrainConfig train;
    std::optional<SearchSettings> search;
    std::filesystem::path out = "out";
};

/// Architecture presets: lstm-small (2 LSTM layers of 8 + 1 dense), mlp
/// (50-32-1 tanh), mnist-mlp (784-64-10 relu), mnist-lstm (row-sequential).
ModelSpec model_preset(std::string_view name, std::size_t window = kDefaultWindow);

/// Preset-appropriate defaults, before any spec overrides.
ExperimentSpec default_experiment(Task task, std::string_view preset);

/// Short instrumented run of the mlp on noisy synthetic data with skewed
/// init: SGD at lr 0.01 for 2 epochs, `method` on dense0 with p=0.1, c=0.35.
ExperimentSpec skewed_init_preset(WmmMethod method);

/// Parses and validates. Throws ConfigError naming the offending field.
ExperimentSpec parse_experiment(std::string_view json_text);
ExperimentSpec load_experiment(const std::filesystem::path& path);
std::string to_json(const ExperimentSpec& spec);

SyntheticOptions synthetic_options(const ExperimentSpec& spec);

/// Loads or generates the data for the task. Regression data is
/// standardized with training-split statistics.
DatasetSplits prepare_data(const ExperimentSpec& spec);

/// Builds the model from init_seed(cfg.seed) and trains it. The report
/// carries the final entropy of the tracked matrices in `final_entropy`.
struct RunResult {
    TrainReport report;
    double final_entropy_bits = 0.0;
};
RunResult run_training(const ExperimentSpec& spec, const DatasetSplits& data,
                       const TrainConfig& cfg);

/// Eligible search targets of the spec's model (or the explicit list).
std::vector<std::string> search_targets(const ExperimentSpec& spec);

/// Training configuration of one search trial. Every trial tracks the whole
/// network so entropy summaries are comparable across targets.
TrainConfig trial_config(const ExperimentSpec& spec, const TrialPlan& plan);

std::vector<TrialRecord> run_campaign(const ExperimentSpec& spec, const DatasetSplits& data,
                                      const SearchOptions& options);

bool higher_is_better(const ExperimentSpec& spec);

std::string report_json(const ExperimentSpec& spec, const TrainConfig& cfg,
                        const RunResult& result);
void write_events_csv(std::ostream& os, std::span<const WmmEventRecord> events);

// --- command entry points; return the process exit code -----------------

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitDiverged = 2, kExitIo = 3 };

struct GenDataArgs {
    Task task = Task::Synthetic;
    double scale = 0.1;
    std::uint64_t seed = 1;
    std::filesystem::path out;
};

struct TrainArgs {
    std::filesystem::path spec;
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out;
};

struct SearchArgs {
    std::filesystem::path spec;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> budget;
    std::optional<std::filesystem::path> out;
};

struct ReportArgs {
    std::filesystem::path out; // directory containing one sub-directory per campaign
};

int cmd_gen_data(const GenDataArgs& args, std::ostream& log);
int cmd_train(const TrainArgs& args, std::ostream& log);
int cmd_search(const SearchArgs& args, std::ostream& log);
int cmd_report(const ReportArgs& args, std::ostream& log);

} // namespace wmm
