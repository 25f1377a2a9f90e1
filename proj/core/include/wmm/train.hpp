#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wmm/data.hpp"
#include "wmm/model.hpp"
#include "wmm/stats.hpp"
#include "wmm/wmm_ops.hpp"

namespace wmm {

inline constexpr double kRecurrentClipNorm = 5.0;

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    OptimizerKind optimizer = OptimizerKind::Adam;
    LossKind loss = LossKind::Mse;
    std::uint64_t seed = 0;
    std::optional<WmmConfig> wmm;
    double l2 = 0.0;
    std::size_t patience = 5;
    // Global-norm gradient clip. Unset: kRecurrentClipNorm for recurrent
    // models, no clipping otherwise. 0 disables.
    std::optional<double> clip_norm;
    std::size_t entropy_bins = kDefaultEntropyBins;
    // Matrices in the entropy timeline; empty means the WMM targets, or every
    // eligible target when WMM is off.
    std::vector<std::string> track;
    // Measure entropy of each matrix right before and after every WMM firing.
    bool instrument_events = true;
};

/// Throws ConfigError naming the offending field.
void validate(const TrainConfig& cfg);

struct EpochRecord {
    long epoch = 0;
    double train_loss = 0.0; // epoch 0: full evaluation; later: mean mini-batch loss
    double val_loss = 0.0;
    double val_metric = 0.0;
};

struct WmmEventRecord {
    std::size_t step = 0;
    long epoch = 0;
    std::string matrix_id;
    std::size_t mask_size = 0;
    double entropy_before = 0.0;
    double entropy_after = 0.0;
};

enum class RunStatus { Ok, Diverged };

std::string_view to_string(RunStatus status);

struct TrainReport {
    RunStatus status = RunStatus::Ok;
    std::vector<EpochRecord> epochs;
    long best_epoch = 0;
    double best_val_loss = 0.0;
    double best_val_metric = 0.0;
    // Evaluated once, at the parameters of the best validation epoch.
    std::optional<double> test_loss;
    std::optional<double> test_metric;
    EntropyTimeline timeline;
    std::vector<WmmEventRecord> events;
    std::size_t steps = 0;
    double wall_clock_seconds = 0.0; // metadata; not reproducible
};

struct Evaluation {
    double loss = 0.0;
    double metric = 0.0;
};

Evaluation evaluate(const Model& model, const DataSplit& split, LossKind loss,
                    std::size_t chunk = 512);

/// Copies rows `indices` of a split into a batch matrix and target list.
void gather_batch(const DataSplit& split, std::span<const std::size_t> indices, Mat& inputs,
                  std::vector<double>& targets);

/// Mini-batch training with early stopping on validation loss. The RNG is
/// partitioned into independent streams derived from cfg.seed ("data" for
/// batch order, "wmm" for the regularizer), so enabling WMM never changes
/// the batch order. On return the model holds the best-validation
/// parameters. Non-finite loss ends the run with status Diverged.
TrainReport train(Model& model, const DatasetSplits& data, const TrainConfig& cfg);

/// Seed of the stream used to initialize the model for a given master seed.
inline std::uint64_t init_seed(std::uint64_t master) { return derive_seed(master, "init"); }

} // namespace wmm
