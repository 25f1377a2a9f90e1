#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "wmm/matrix.hpp"

namespace wmm {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

inline Eigen::Map<Mat> as_eigen(WeightMatrix& w) { return {w.data(), Eigen::Index(w.rows()), Eigen::Index(w.cols())}; }
inline Eigen::Map<const Mat> as_eigen(const WeightMatrix& w) { return {w.data(), Eigen::Index(w.rows()), Eigen::Index(w.cols())}; }

enum class Activation { Identity, Tanh, Relu, Sigmoid };

std::string_view to_string(Activation act);
Activation parse_activation(std::string_view name);

// ---------------------------------------------------------------------------
// Dense

/// y = act(x W^T + b). Rows of x are samples. The bias is never a WMM target.
struct DenseLayer {
    WeightMatrix weight; // out x in
    std::vector<double> bias;
    Activation activation = Activation::Identity;

    std::size_t inputs() const noexcept { return weight.cols(); }
    std::size_t outputs() const noexcept { return weight.rows(); }
};

struct DenseCache {
    Mat input;
    Mat pre;
    Mat output;
};

struct DenseGrads {
    Mat d_weight;
    Vec d_bias;
    Mat d_input;
};

Mat dense_forward(const DenseLayer& layer, const Mat& x, DenseCache* cache = nullptr);
DenseGrads dense_backward(const DenseLayer& layer, const DenseCache& cache, const Mat& d_output);

// ---------------------------------------------------------------------------
// LSTM

/// Row-block order of the stacked gate matrices.
enum class Gate { Input = 0, Forget = 1, Cell = 2, Output = 3 };
inline constexpr std::array<Gate, 4> kGates{Gate::Input, Gate::Forget, Gate::Cell, Gate::Output};

std::string_view to_string(Gate gate);

struct LstmCell {
    WeightMatrix w_x; // 4h x in
    WeightMatrix w_h; // 4h x h
    std::vector<double> bias; // 4h

    std::size_t hidden() const noexcept { return w_h.cols(); }
    std::size_t inputs() const noexcept { return w_x.cols(); }
};

/// Throws std::invalid_argument unless shapes are consistent.
void check_cell(const LstmCell& cell);

struct LstmCache {
    std::vector<Mat> x;      // T entries, B x in
    std::vector<Mat> h;      // T + 1 entries, h[0] is the zero initial state
    std::vector<Mat> c;      // T + 1 entries
    std::vector<Mat> gates;  // T entries, B x 4h post-activation [i f g o]
    std::vector<Mat> tanh_c; // T entries
};

struct LstmGrads {
    Mat d_wx;
    Mat d_wh;
    Vec d_bias;
    std::vector<Mat> d_inputs; // T entries, B x in
};

/// Runs the cell over a sequence from zero initial state; returns h_1..h_T.
std::vector<Mat> lstm_forward(const LstmCell& cell, const std::vector<Mat>& inputs,
                              LstmCache* cache = nullptr);

/// Backpropagation through time. d_hidden[t] is the upstream gradient on h_{t+1}.
LstmGrads lstm_backward(const LstmCell& cell, const LstmCache& cache,
                        const std::vector<Mat>& d_hidden);

struct GateSlices {
    std::array<MatrixRef, 4> input_weights;     // row blocks of w_x
    std::array<MatrixRef, 4> recurrent_weights; // row blocks of w_h
};

/// Per-gate row-block views; mutating a slice touches only that gate.
GateSlices gate_slices(LstmCell& cell);

// ---------------------------------------------------------------------------
// Losses

enum class LossKind { Mse, SoftmaxCrossEntropy };

std::string_view to_string(LossKind loss);
LossKind parse_loss(std::string_view name);

/// Mean loss over the batch. `targets` holds B x outputs values for MSE and
/// B class indices for cross entropy. Writes dL/d(output) when requested.
double loss_value(LossKind kind, const Mat& output, std::span<const double> targets,
                  Mat* d_output = nullptr);

/// MSE for regression, accuracy for classification.
double metric_value(LossKind kind, const Mat& output, std::span<const double> targets);

// ---------------------------------------------------------------------------
// Optimizers

enum class OptimizerKind { Sgd, Adam };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

class Optimizer {
public:
    Optimizer(OptimizerKind kind, double learning_rate, std::span<const std::size_t> sizes,
              AdamParams adam = {});

    /// In-place update of every parameter block from its gradient block.
    void step(std::span<const std::span<double>> params,
              std::span<const std::vector<double>> grads);

    std::size_t steps() const noexcept { return steps_; }
    const std::vector<std::vector<double>>& first_moments() const noexcept { return m_; }

private:
    OptimizerKind kind_;
    double lr_;
    AdamParams adam_;
    std::size_t steps_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

} // namespace wmm
