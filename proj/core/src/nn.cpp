#include "wmm/nn.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "wmm/error.hpp"

namespace wmm {

namespace {

Mat activate(Activation act, const Mat& pre) {
    switch (act) {
    case Activation::Identity: return pre;
    case Activation::Tanh: return pre.array().tanh().matrix();
    case Activation::Relu: return pre.array().max(0.0).matrix();
    case Activation::Sigmoid: return (1.0 / (1.0 + (-pre.array()).exp())).matrix();
    }
    return pre;
}

// dL/dpre given dL/dout, the pre-activation and the activation output.
Mat activation_backward(Activation act, const Mat& pre, const Mat& out, const Mat& d_out) {
    switch (act) {
    case Activation::Identity: return d_out;
    case Activation::Tanh: return (d_out.array() * (1.0 - out.array().square())).matrix();
    case Activation::Relu: return (d_out.array() * (pre.array() > 0.0).cast<double>()).matrix();
    case Activation::Sigmoid: return (d_out.array() * out.array() * (1.0 - out.array())).matrix();
    }
    return d_out;
}

inline auto sigmoid(const auto& x) { return 1.0 / (1.0 + (-x).exp()); }

Eigen::Map<const Eigen::RowVectorXd> bias_row(const std::vector<double>& b) {
    return {b.data(), Eigen::Index(b.size())};
}

} // namespace

std::string_view to_string(Activation act) {
    switch (act) {
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    }
    return "?";
}

Activation parse_activation(std::string_view name) {
    if (name == "identity") return Activation::Identity;
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::Relu;
    if (name == "sigmoid") return Activation::Sigmoid;
    throw ConfigError("unknown activation '" + std::string(name) + "'");
}

Mat dense_forward(const DenseLayer& layer, const Mat& x, DenseCache* cache) {
    if (static_cast<std::size_t>(x.cols()) != layer.inputs()) {
        throw std::invalid_argument("dense_forward: input width " + std::to_string(x.cols()) +
                                    " does not match layer inputs " +
                                    std::to_string(layer.inputs()));
    }
    if (layer.bias.size() != layer.outputs()) {
        throw std::invalid_argument("dense_forward: bias size does not match layer outputs");
    }
    Mat pre = x * as_eigen(layer.weight).transpose();
    pre.rowwise() += bias_row(layer.bias);
    Mat out = activate(layer.activation, pre);
    if (cache != nullptr) {
        cache->input = x;
        cache->pre = std::move(pre);
        cache->output = out;
    }
    return out;
}

DenseGrads dense_backward(const DenseLayer& layer, const DenseCache& cache, const Mat& d_output) {
    if (d_output.rows() != cache.output.rows() || d_output.cols() != cache.output.cols()) {
        throw std::invalid_argument("dense_backward: upstream gradient shape mismatch");
    }
    const Mat d_pre = activation_backward(layer.activation, cache.pre, cache.output, d_output);
    DenseGrads g;
    g.d_weight = d_pre.transpose() * cache.input;
    g.d_bias = d_pre.colwise().sum().transpose();
    g.d_input = d_pre * as_eigen(layer.weight);
    return g;
}

std::string_view to_string(Gate gate) {
    switch (gate) {
    case Gate::Input: return "input";
    case Gate::Forget: return "forget";
    case Gate::Cell: return "cell";
    case Gate::Output: return "output";
    }
    return "?";
}

void check_cell(const LstmCell& cell) {
    const std::size_t h = cell.hidden();
    if (h == 0 || cell.w_h.rows() != 4 * h || cell.w_x.rows() != 4 * h ||
        cell.bias.size() != 4 * h) {
        throw std::invalid_argument("LstmCell: expected w_x 4h x in, w_h 4h x h, bias 4h");
    }
}

std::vector<Mat> lstm_forward(const LstmCell& cell, const std::vector<Mat>& inputs,
                              LstmCache* cache) {
    check_cell(cell);
    if (inputs.empty()) {
        throw std::invalid_argument("lstm_forward: sequence length must be >= 1");
    }
    const Eigen::Index h = static_cast<Eigen::Index>(cell.hidden());
    const Eigen::Index batch = inputs.front().rows();
    const auto wx_t = as_eigen(cell.w_x).transpose();
    const auto wh_t = as_eigen(cell.w_h).transpose();

    if (cache != nullptr) {
        *cache = {};
        cache->x = inputs;
        cache->h.reserve(inputs.size() + 1);
        cache->c.reserve(inputs.size() + 1);
        cache->gates.reserve(inputs.size());
        cache->tanh_c.reserve(inputs.size());
    }

    Mat h_prev = Mat::Zero(batch, h);
    Mat c_prev = Mat::Zero(batch, h);
    if (cache != nullptr) {
        cache->h.push_back(h_prev);
        cache->c.push_back(c_prev);
    }
    std::vector<Mat> hs;
    hs.reserve(inputs.size());
    Mat gates(batch, 4 * h);
    for (const Mat& x : inputs) {
        if (x.rows() != batch || static_cast<std::size_t>(x.cols()) != cell.inputs()) {
            throw std::invalid_argument("lstm_forward: input shape mismatch");
        }
        gates.noalias() = x * wx_t;
        gates.noalias() += h_prev * wh_t;
        gates.rowwise() += bias_row(cell.bias);
        gates.leftCols(2 * h) = sigmoid(gates.leftCols(2 * h).array()).matrix();
        gates.middleCols(2 * h, h) = gates.middleCols(2 * h, h).array().tanh().matrix();
        gates.rightCols(h) = sigmoid(gates.rightCols(h).array()).matrix();

        Mat c = (gates.middleCols(h, h).array() * c_prev.array() +
                 gates.leftCols(h).array() * gates.middleCols(2 * h, h).array())
                    .matrix();
        Mat tc = c.array().tanh().matrix();
        Mat hh = (gates.rightCols(h).array() * tc.array()).matrix();
        if (cache != nullptr) {
            cache->gates.push_back(gates);
            cache->tanh_c.push_back(tc);
            cache->c.push_back(c);
            cache->h.push_back(hh);
        }
        hs.push_back(hh);
        h_prev = std::move(hh);
        c_prev = std::move(c);
    }
    return hs;
}

LstmGrads lstm_backward(const LstmCell& cell, const LstmCache& cache,
                        const std::vector<Mat>& d_hidden) {
    check_cell(cell);
    const std::size_t steps = cache.x.size();
    if (d_hidden.size() != steps || cache.gates.size() != steps) {
        throw std::invalid_argument("lstm_backward: gradient sequence length mismatch");
    }
    const Eigen::Index h = static_cast<Eigen::Index>(cell.hidden());
    const Eigen::Index batch = cache.x.front().rows();
    const auto wx = as_eigen(cell.w_x);
    const auto wh = as_eigen(cell.w_h);

    LstmGrads g;
    g.d_wx = Mat::Zero(wx.rows(), wx.cols());
    g.d_wh = Mat::Zero(wh.rows(), wh.cols());
    g.d_bias = Vec::Zero(4 * h);
    g.d_inputs.resize(steps);

    Mat dh_next = Mat::Zero(batch, h);
    Mat dc_next = Mat::Zero(batch, h);
    Mat d_gates(batch, 4 * h);
    for (std::size_t k = steps; k-- > 0;) {
        const Mat& gates = cache.gates[k];
        const auto i = gates.leftCols(h).array();
        const auto f = gates.middleCols(h, h).array();
        const auto gc = gates.middleCols(2 * h, h).array();
        const auto o = gates.rightCols(h).array();
        const auto tc = cache.tanh_c[k].array();

        const Mat dh = d_hidden[k] + dh_next;
        const Mat dc = (dc_next.array() + dh.array() * o * (1.0 - tc.square())).matrix();
        d_gates.leftCols(h) = (dc.array() * gc * i * (1.0 - i)).matrix();
        d_gates.middleCols(h, h) = (dc.array() * cache.c[k].array() * f * (1.0 - f)).matrix();
        d_gates.middleCols(2 * h, h) = (dc.array() * i * (1.0 - gc.square())).matrix();
        d_gates.rightCols(h) = (dh.array() * tc * o * (1.0 - o)).matrix();

        g.d_wx.noalias() += d_gates.transpose() * cache.x[k];
        g.d_wh.noalias() += d_gates.transpose() * cache.h[k];
        g.d_bias += d_gates.colwise().sum().transpose();
        g.d_inputs[k] = d_gates * wx;
        dh_next = d_gates * wh;
        dc_next = (dc.array() * f).matrix();
    }
    return g;
}

GateSlices gate_slices(LstmCell& cell) {
    check_cell(cell);
    const std::size_t h = cell.hidden();
    GateSlices s;
    for (Gate gate : kGates) {
        const auto k = static_cast<std::size_t>(gate);
        s.input_weights[k] = cell.w_x.row_block(k * h, h);
        s.recurrent_weights[k] = cell.w_h.row_block(k * h, h);
    }
    return s;
}

std::string_view to_string(LossKind loss) {
    return loss == LossKind::Mse ? "mse" : "softmax_cross_entropy";
}

LossKind parse_loss(std::string_view name) {
    if (name == "mse") return LossKind::Mse;
    if (name == "softmax_cross_entropy" || name == "cross_entropy") {
        return LossKind::SoftmaxCrossEntropy;
    }
    throw ConfigError("unknown loss '" + std::string(name) + "'");
}

double loss_value(LossKind kind, const Mat& output, std::span<const double> targets,
                  Mat* d_output) {
    const Eigen::Index batch = output.rows();
    const Eigen::Index width = output.cols();
    if (batch == 0) {
        throw std::invalid_argument("loss_value: empty batch");
    }
    if (kind == LossKind::Mse) {
        if (targets.size() != static_cast<std::size_t>(batch * width)) {
            throw std::invalid_argument("loss_value: target count mismatch");
        }
        Eigen::Map<const Mat> t(targets.data(), batch, width);
        const Mat diff = output - t;
        const double n = static_cast<double>(batch * width);
        if (d_output != nullptr) {
            *d_output = diff * (2.0 / n);
        }
        return diff.squaredNorm() / n;
    }

    if (targets.size() != static_cast<std::size_t>(batch)) {
        throw std::invalid_argument("loss_value: expected one class index per sample");
    }
    const Eigen::VectorXd row_max = output.rowwise().maxCoeff();
    Mat shifted = output.colwise() - row_max;
    Mat probs = shifted.array().exp().matrix();
    const Eigen::VectorXd sums = probs.rowwise().sum();
    probs.array().colwise() /= sums.array();
    double loss = 0.0;
    for (Eigen::Index r = 0; r < batch; ++r) {
        const auto label = static_cast<Eigen::Index>(targets[static_cast<std::size_t>(r)]);
        if (label < 0 || label >= width) {
            throw std::invalid_argument("loss_value: class index out of range");
        }
        loss -= shifted(r, label) - std::log(sums(r));
    }
    if (d_output != nullptr) {
        *d_output = probs;
        for (Eigen::Index r = 0; r < batch; ++r) {
            (*d_output)(r, static_cast<Eigen::Index>(targets[static_cast<std::size_t>(r)])) -= 1.0;
        }
        *d_output /= static_cast<double>(batch);
    }
    return loss / static_cast<double>(batch);
}

double metric_value(LossKind kind, const Mat& output, std::span<const double> targets) {
    if (kind == LossKind::Mse) {
        return loss_value(kind, output, targets);
    }
    std::size_t correct = 0;
    for (Eigen::Index r = 0; r < output.rows(); ++r) {
        Eigen::Index best = 0;
        output.row(r).maxCoeff(&best);
        if (static_cast<double>(best) == targets[static_cast<std::size_t>(r)]) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(output.rows());
}

std::string_view to_string(OptimizerKind kind) {
    return kind == OptimizerKind::Sgd ? "sgd" : "adam";
}

OptimizerKind parse_optimizer(std::string_view name) {
    if (name == "sgd") return OptimizerKind::Sgd;
    if (name == "adam") return OptimizerKind::Adam;
    throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate, std::span<const std::size_t> sizes,
                     AdamParams adam)
    : kind_(kind), lr_(learning_rate), adam_(adam) {
    if (!(learning_rate > 0.0)) {
        throw std::invalid_argument("Optimizer: learning rate must be positive");
    }
    if (kind_ == OptimizerKind::Adam) {
        for (std::size_t n : sizes) {
            m_.emplace_back(n, 0.0);
            v_.emplace_back(n, 0.0);
        }
    }
}

void Optimizer::step(std::span<const std::span<double>> params,
                     std::span<const std::vector<double>> grads) {
    if (params.size() != grads.size()) {
        throw std::invalid_argument("Optimizer::step: parameter/gradient count mismatch");
    }
    ++steps_;
    if (kind_ == OptimizerKind::Sgd) {
        for (std::size_t k = 0; k < params.size(); ++k) {
            for (std::size_t i = 0; i < params[k].size(); ++i) {
                params[k][i] -= lr_ * grads[k][i];
            }
        }
        return;
    }
    if (params.size() != m_.size()) {
        throw std::invalid_argument("Optimizer::step: parameter layout changed");
    }
    const double t = static_cast<double>(steps_);
    const double c1 = 1.0 - std::pow(adam_.beta1, t);
    const double c2 = 1.0 - std::pow(adam_.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < params[k].size(); ++i) {
            const double g = grads[k][i];
            m[i] = adam_.beta1 * m[i] + (1.0 - adam_.beta1) * g;
            v[i] = adam_.beta2 * v[i] + (1.0 - adam_.beta2) * g * g;
            params[k][i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + adam_.epsilon);
        }
    }
}

} // namespace wmm
