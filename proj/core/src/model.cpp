#include "wmm/model.hpp"

#include <algorithm>
#include <stdexcept>

#include "wmm/error.hpp"

namespace wmm {

namespace {

std::vector<double> to_vector(const Mat& m) { return {m.data(), m.data() + m.size()}; }
std::vector<double> to_vector(const Vec& v) { return {v.data(), v.data() + v.size()}; }

WeightMatrix init_matrix(std::size_t rows, std::size_t cols, InitKind init, Rng& rng) {
    return init == InitKind::Skewed ? skewed_init(rows, cols, rng) : uniform_init(rows, cols, rng);
}

} // namespace

void validate(const ModelSpec& spec) {
    if (spec.seq_len == 0 || spec.step_features == 0) {
        throw ConfigError("model: seq_len and step_features must be positive");
    }
    if (spec.dense.empty()) {
        throw ConfigError("model: at least one dense layer is required");
    }
    for (std::size_t h : spec.lstm_hidden) {
        if (h == 0) {
            throw ConfigError("model: LSTM hidden size must be positive");
        }
    }
    for (const DenseSpec& d : spec.dense) {
        if (d.units == 0) {
            throw ConfigError("model: dense units must be positive");
        }
    }
}

std::string_view to_string(InitKind kind) { return kind == InitKind::Skewed ? "skewed" : "uniform"; }

InitKind parse_init(std::string_view name) {
    if (name == "uniform") return InitKind::Uniform;
    if (name == "skewed") return InitKind::Skewed;
    throw ConfigError("unknown init '" + std::string(name) + "' (expected uniform|skewed)");
}

Model Model::build(const ModelSpec& spec, InitKind init, Rng& rng) {
    validate(spec);
    Model m;
    m.spec_ = spec;
    std::size_t width = spec.step_features;
    for (std::size_t h : spec.lstm_hidden) {
        LstmCell cell;
        cell.w_x = init_matrix(4 * h, width, init, rng);
        cell.w_h = init_matrix(4 * h, h, init, rng);
        cell.bias.assign(4 * h, 0.0);
        m.lstm_.push_back(std::move(cell));
        width = h;
    }
    if (spec.lstm_hidden.empty()) {
        width = spec.input_width();
    }
    for (const DenseSpec& d : spec.dense) {
        DenseLayer layer;
        layer.weight = init_matrix(d.units, width, init, rng);
        layer.bias.assign(d.units, 0.0);
        layer.activation = d.activation;
        m.dense_.push_back(std::move(layer));
        width = d.units;
    }
    return m;
}

Mat Model::forward(const Mat& x, ModelCache* cache) const {
    if (static_cast<std::size_t>(x.cols()) != spec_.input_width()) {
        throw std::invalid_argument("Model::forward: input width " + std::to_string(x.cols()) +
                                    " != " + std::to_string(spec_.input_width()));
    }
    if (cache != nullptr) {
        cache->lstm.resize(lstm_.size());
        cache->dense.resize(dense_.size());
    }
    Mat features;
    if (recurrent()) {
        const auto f = static_cast<Eigen::Index>(spec_.step_features);
        std::vector<Mat> seq(spec_.seq_len);
        for (std::size_t t = 0; t < spec_.seq_len; ++t) {
            seq[t] = x.middleCols(static_cast<Eigen::Index>(t) * f, f);
        }
        for (std::size_t l = 0; l < lstm_.size(); ++l) {
            seq = lstm_forward(lstm_[l], seq, cache ? &cache->lstm[l] : nullptr);
        }
        features = std::move(seq.back());
    } else {
        features = x;
    }
    for (std::size_t l = 0; l < dense_.size(); ++l) {
        features = dense_forward(dense_[l], features, cache ? &cache->dense[l] : nullptr);
    }
    return features;
}

std::vector<std::vector<double>> Model::backward(const ModelCache& cache,
                                                 const Mat& d_output) const {
    if (cache.dense.size() != dense_.size() || cache.lstm.size() != lstm_.size()) {
        throw std::invalid_argument("Model::backward: cache does not match model");
    }
    std::vector<std::vector<double>> grads(2 * dense_.size() + 3 * lstm_.size());
    Mat upstream = d_output;
    for (std::size_t l = dense_.size(); l-- > 0;) {
        DenseGrads g = dense_backward(dense_[l], cache.dense[l], upstream);
        const std::size_t slot = 3 * lstm_.size() + 2 * l;
        grads[slot] = to_vector(g.d_weight);
        grads[slot + 1] = to_vector(g.d_bias);
        upstream = std::move(g.d_input);
    }
    if (recurrent()) {
        std::vector<Mat> d_hidden(spec_.seq_len);
        for (std::size_t t = 0; t + 1 < spec_.seq_len; ++t) {
            d_hidden[t] = Mat::Zero(upstream.rows(), upstream.cols());
        }
        d_hidden.back() = std::move(upstream);
        for (std::size_t l = lstm_.size(); l-- > 0;) {
            LstmGrads g = lstm_backward(lstm_[l], cache.lstm[l], d_hidden);
            grads[3 * l] = to_vector(g.d_wx);
            grads[3 * l + 1] = to_vector(g.d_wh);
            grads[3 * l + 2] = to_vector(g.d_bias);
            d_hidden = std::move(g.d_inputs);
        }
    }
    return grads;
}

std::vector<ParamBlock> Model::parameters() {
    std::vector<ParamBlock> out;
    for (std::size_t l = 0; l < lstm_.size(); ++l) {
        const std::string p = "lstm" + std::to_string(l);
        out.push_back({p + ".wx", lstm_[l].w_x.values(), true});
        out.push_back({p + ".wh", lstm_[l].w_h.values(), true});
        out.push_back({p + ".b", lstm_[l].bias, false});
    }
    for (std::size_t l = 0; l < dense_.size(); ++l) {
        const std::string p = "dense" + std::to_string(l);
        out.push_back({p + ".w", dense_[l].weight.values(), true});
        out.push_back({p + ".b", dense_[l].bias, false});
    }
    return out;
}

std::vector<std::size_t> Model::parameter_sizes() const {
    std::vector<std::size_t> out;
    for (const LstmCell& c : lstm_) {
        out.push_back(c.w_x.size());
        out.push_back(c.w_h.size());
        out.push_back(c.bias.size());
    }
    for (const DenseLayer& d : dense_) {
        out.push_back(d.weight.size());
        out.push_back(d.bias.size());
    }
    return out;
}

std::vector<std::vector<double>> Model::snapshot() const {
    std::vector<std::vector<double>> out;
    for (const LstmCell& c : lstm_) {
        out.emplace_back(c.w_x.values().begin(), c.w_x.values().end());
        out.emplace_back(c.w_h.values().begin(), c.w_h.values().end());
        out.push_back(c.bias);
    }
    for (const DenseLayer& d : dense_) {
        out.emplace_back(d.weight.values().begin(), d.weight.values().end());
        out.push_back(d.bias);
    }
    return out;
}

void Model::restore(const std::vector<std::vector<double>>& values) {
    auto blocks = parameters();
    if (values.size() != blocks.size()) {
        throw std::invalid_argument("Model::restore: snapshot layout mismatch");
    }
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        if (values[k].size() != blocks[k].values.size()) {
            throw std::invalid_argument("Model::restore: snapshot size mismatch");
        }
        std::copy(values[k].begin(), values[k].end(), blocks[k].values.begin());
    }
}

TargetRegistry Model::targets() {
    TargetRegistry reg;
    for (std::size_t l = 0; l < dense_.size(); ++l) {
        const std::string id = "dense" + std::to_string(l);
        WeightMatrix& w = dense_[l].weight;
        reg.add(id, {{id + ".w", w.ref(), init_bound(w.cols())}});
    }
    for (std::size_t l = 0; l < lstm_.size(); ++l) {
        const std::string layer = "lstm" + std::to_string(l);
        LstmCell& cell = lstm_[l];
        const GateSlices slices = gate_slices(cell);
        std::vector<NamedMatrix> all;
        for (Gate gate : kGates) {
            const auto k = static_cast<std::size_t>(gate);
            const std::string g(to_string(gate));
            std::vector<NamedMatrix> pair{
                {layer + ".wx." + g, slices.input_weights[k], init_bound(cell.w_x.cols())},
                {layer + ".wh." + g, slices.recurrent_weights[k], init_bound(cell.w_h.cols())},
            };
            all.insert(all.end(), pair.begin(), pair.end());
            reg.add(layer + "." + g, std::move(pair));
        }
        reg.add(layer, std::move(all));
    }
    return reg;
}

std::vector<std::string> Model::eligible_targets() const {
    std::vector<std::string> out;
    for (std::size_t l = 0; l < lstm_.size(); ++l) {
        for (Gate gate : kGates) {
            out.push_back("lstm" + std::to_string(l) + "." + std::string(to_string(gate)));
        }
    }
    for (std::size_t l = 0; l < dense_.size(); ++l) {
        out.push_back("dense" + std::to_string(l));
    }
    return out;
}

std::vector<TrackedMatrix> Model::tracked(std::span<const std::string> target_ids) {
    std::vector<TrackedMatrix> out;
    for (const NamedMatrix& m : targets().resolve(target_ids)) {
        out.push_back({m.id, m.matrix});
    }
    return out;
}

} // namespace wmm
