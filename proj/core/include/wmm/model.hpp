#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wmm/nn.hpp"
#include "wmm/rng.hpp"
#include "wmm/stats.hpp"
#include "wmm/wmm_ops.hpp"

namespace wmm {

struct DenseSpec {
    std::size_t units = 1;
    Activation activation = Activation::Identity;
};

/// Architecture: an optional stack of LSTM layers reading a sequence, whose
/// last hidden state feeds a stack of dense layers. With no LSTM layers the
/// dense stack reads the flat input directly.
struct ModelSpec {
    std::size_t seq_len = 1;       // time steps per sample (1 for MLPs)
    std::size_t step_features = 1; // features per time step
    std::vector<std::size_t> lstm_hidden;
    std::vector<DenseSpec> dense;

    std::size_t input_width() const noexcept { return seq_len * step_features; }
    std::size_t output_width() const noexcept { return dense.empty() ? 0 : dense.back().units; }
};

/// Throws ConfigError on an unusable architecture.
void validate(const ModelSpec& spec);

enum class InitKind { Uniform, Skewed };

std::string_view to_string(InitKind kind);
InitKind parse_init(std::string_view name);

struct ParamBlock {
    std::string name;
    std::span<double> values;
    bool is_weight = false; // biases are excluded from L2 and WMM
};

struct ModelCache {
    std::vector<LstmCache> lstm;
    std::vector<DenseCache> dense;
};

class Model {
public:
    /// Weight matrices from uniform_init (or skewed_init); biases zero.
    static Model build(const ModelSpec& spec, InitKind init, Rng& rng);

    const ModelSpec& spec() const noexcept { return spec_; }
    bool recurrent() const noexcept { return !lstm_.empty(); }

    std::vector<LstmCell>& lstm() noexcept { return lstm_; }
    const std::vector<LstmCell>& lstm() const noexcept { return lstm_; }
    std::vector<DenseLayer>& dense() noexcept { return dense_; }
    const std::vector<DenseLayer>& dense() const noexcept { return dense_; }

    /// Rows of x are samples of width spec().input_width().
    Mat forward(const Mat& x, ModelCache* cache = nullptr) const;

    /// Gradients for every block of parameters(), same order and sizes.
    std::vector<std::vector<double>> backward(const ModelCache& cache, const Mat& d_output) const;

    /// Order: per LSTM layer w_x, w_h, bias; per dense layer weight, bias.
    std::vector<ParamBlock> parameters();
    std::vector<std::size_t> parameter_sizes() const;

    std::vector<std::vector<double>> snapshot() const;
    void restore(const std::vector<std::vector<double>>& values);

    /// WMM targets: "dense<k>", "lstm<k>" (all gates of both matrices) and
    /// "lstm<k>.<gate>" for gate in input|forget|cell|output. Matrix ids are
    /// "dense<k>.w" and "lstm<k>.wx.<gate>" / "lstm<k>.wh.<gate>".
    TargetRegistry targets();

    /// Targets a hyper-parameter search chooses from: every dense layer and
    /// every (LSTM layer, gate) pair.
    std::vector<std::string> eligible_targets() const;

    /// Matrices covered by the given target ids, for entropy tracking.
    std::vector<TrackedMatrix> tracked(std::span<const std::string> target_ids);

private:
    ModelSpec spec_;
    std::vector<LstmCell> lstm_;
    std::vector<DenseLayer> dense_;
};

} // namespace wmm
