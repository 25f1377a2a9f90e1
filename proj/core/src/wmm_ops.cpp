#include "wmm/wmm_ops.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "wmm/error.hpp"

namespace wmm {

namespace {

void check_dims(std::size_t rows, std::size_t cols, const char* who) {
    if (rows == 0 || cols == 0) {
        throw std::invalid_argument(std::string(who) + ": dimensions must be positive");
    }
}

void check_window(std::size_t rows, std::size_t cols, const WindowSpec& window, const char* who) {
    if (window.height == 0 || window.width == 0 || window.top + window.height > rows ||
        window.left + window.width > cols) {
        throw std::invalid_argument(std::string(who) + ": window out of matrix bounds");
    }
}

void check_probability(double p, const char* name, const char* who) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument(std::string(who) + ": " + name + " must lie in [0, 1]");
    }
}

} // namespace

double init_bound(std::size_t cols) {
    if (cols == 0) {
        throw std::invalid_argument("init_bound: cols must be positive");
    }
    return 1.0 / std::sqrt(static_cast<double>(cols));
}

WeightMatrix uniform_init(std::size_t rows, std::size_t cols, Rng& rng) {
    check_dims(rows, cols, "uniform_init");
    const double a = init_bound(cols);
    std::vector<double> values(rows * cols);
    for (double& v : values) {
        v = rng.uniform(-a, a);
    }
    return {rows, cols, std::move(values)};
}

WeightMatrix skewed_init(std::size_t rows, std::size_t cols, Rng& rng, double exponent) {
    check_dims(rows, cols, "skewed_init");
    if (!(exponent >= 1.0)) {
        throw std::invalid_argument("skewed_init: exponent must be >= 1");
    }
    const double a = init_bound(cols);
    std::vector<double> values(rows * cols);
    for (double& v : values) {
        v = -a + 2.0 * a * std::pow(rng.uniform(), exponent);
    }
    return {rows, cols, std::move(values)};
}

std::string_view to_string(WmmMethod method) {
    return method == WmmMethod::Reinit ? "reinit" : "shuffle";
}

WmmMethod parse_method(std::string_view name) {
    if (name == "reinit") return WmmMethod::Reinit;
    if (name == "shuffle") return WmmMethod::Shuffle;
    throw ConfigError("unknown WMM method '" + std::string(name) + "' (expected reinit|shuffle)");
}

void validate(const WmmConfig& cfg) {
    if (!(cfg.p >= 0.0 && cfg.p <= 1.0)) {
        throw ConfigError("wmm.p must lie in [0, 1]");
    }
    if (!(cfg.c > 0.0 && cfg.c <= 1.0)) {
        throw ConfigError("wmm.c must lie in (0, 1]");
    }
    if (!(cfg.density >= 0.0 && cfg.density <= 1.0)) {
        throw ConfigError("wmm.density must lie in [0, 1]");
    }
    if (cfg.targets.empty()) {
        throw ConfigError("wmm.targets must not be empty");
    }
}

SparseMask::SparseMask(std::size_t rows, std::size_t cols, WindowSpec window)
    : rows_(rows), cols_(cols), window_(window), bits_(rows * cols, 0) {}

void SparseMask::set(std::size_t r, std::size_t c) {
    if (!window_.contains(r, c)) {
        throw std::out_of_range("SparseMask::set: entry outside window");
    }
    auto& bit = bits_[r * cols_ + c];
    if (bit == 0) {
        bit = 1;
        ++count_;
    }
}

std::vector<std::size_t> SparseMask::indices() const {
    std::vector<std::size_t> out;
    out.reserve(count_);
    for (std::size_t r = window_.top; r < window_.top + window_.height; ++r) {
        for (std::size_t c = window_.left; c < window_.left + window_.width; ++c) {
            if (bits_[r * cols_ + c] != 0) {
                out.push_back(r * cols_ + c);
            }
        }
    }
    return out;
}

std::size_t window_extent(std::size_t n, double coverage) {
    const auto scaled = static_cast<std::size_t>(std::lround(coverage * static_cast<double>(n)));
    return std::min(n, std::max<std::size_t>(1, scaled));
}

WindowSpec select_window(std::size_t rows, std::size_t cols, double c, Rng& rng) {
    check_dims(rows, cols, "select_window");
    if (!(c > 0.0 && c <= 1.0)) {
        throw std::invalid_argument("select_window: c must lie in (0, 1]");
    }
    WindowSpec w;
    w.height = window_extent(rows, c);
    w.width = window_extent(cols, c);
    w.top = static_cast<std::size_t>(rng.below(rows - w.height + 1));
    w.left = static_cast<std::size_t>(rng.below(cols - w.width + 1));
    return w;
}

SparseMask build_reinit_mask(std::size_t rows, std::size_t cols, const WindowSpec& window,
                             double p, Rng& rng) {
    check_probability(p, "p", "build_reinit_mask");
    check_window(rows, cols, window, "build_reinit_mask");
    SparseMask mask(rows, cols, window);
    for (std::size_t r = window.top; r < window.top + window.height; ++r) {
        for (std::size_t c = window.left; c < window.left + window.width; ++c) {
            if (rng.uniform() < p) {
                mask.set(r, c);
            }
        }
    }
    return mask;
}

SparseMask build_shuffle_mask(std::size_t rows, std::size_t cols, const WindowSpec& window,
                              double density, Rng& rng) {
    check_probability(density, "density", "build_shuffle_mask");
    check_window(rows, cols, window, "build_shuffle_mask");
    SparseMask mask(rows, cols, window);
    for (std::size_t r = window.top; r < window.top + window.height; ++r) {
        for (std::size_t c = window.left; c < window.left + window.width; ++c) {
            if (rng.bernoulli(density)) {
                mask.set(r, c);
            }
        }
    }
    return mask;
}

SparseMask reinitialize(MatrixRef w, double p, double c, double bound, Rng& rng) {
    check_dims(w.rows, w.cols, "reinitialize");
    const WindowSpec window = select_window(w.rows, w.cols, c, rng);
    SparseMask mask = build_reinit_mask(w.rows, w.cols, window, p, rng);
    for (std::size_t idx : mask.indices()) {
        w.values[idx] = rng.uniform(-bound, bound);
    }
    return mask;
}

SparseMask shuffle(MatrixRef w, double c, double density, Rng& rng) {
    check_dims(w.rows, w.cols, "shuffle");
    const WindowSpec window = select_window(w.rows, w.cols, c, rng);
    SparseMask mask = build_shuffle_mask(w.rows, w.cols, window, density, rng);
    const std::vector<std::size_t> idx = mask.indices();
    if (idx.size() < 2) {
        return mask;
    }
    std::vector<double> picked(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        picked[k] = w.values[idx[k]];
    }
    for (std::size_t k = picked.size() - 1; k > 0; --k) {
        const auto j = static_cast<std::size_t>(rng.below(k + 1));
        std::swap(picked[k], picked[j]);
    }
    for (std::size_t k = 0; k < idx.size(); ++k) {
        w.values[idx[k]] = picked[k];
    }
    return mask;
}

std::pair<WeightMatrix, SparseMask> weight_reinitialization(const WeightMatrix& w, double p,
                                                            double c, Rng& rng) {
    WeightMatrix out = w;
    SparseMask mask = reinitialize(out.ref(), p, c, rng);
    return {std::move(out), std::move(mask)};
}

std::pair<WeightMatrix, SparseMask> weight_shuffling(const WeightMatrix& w, double c,
                                                     double density, Rng& rng) {
    WeightMatrix out = w;
    SparseMask mask = shuffle(out.ref(), c, density, rng);
    return {std::move(out), std::move(mask)};
}

void TargetRegistry::add(std::string target_id, std::vector<NamedMatrix> matrices) {
    if (matrices.empty()) {
        throw std::invalid_argument("TargetRegistry::add: target '" + target_id +
                                    "' covers no matrices");
    }
    targets_[std::move(target_id)] = std::move(matrices);
}

std::vector<std::string> TargetRegistry::ids() const {
    std::vector<std::string> out;
    out.reserve(targets_.size());
    for (const auto& [id, _] : targets_) {
        out.push_back(id);
    }
    return out;
}

std::vector<NamedMatrix> TargetRegistry::resolve(std::span<const std::string> target_ids) const {
    std::vector<NamedMatrix> out;
    std::set<std::string> seen;
    for (const std::string& id : target_ids) {
        auto it = targets_.find(id);
        if (it == targets_.end()) {
            throw ConfigError("unknown WMM target '" + id + "'");
        }
        for (const NamedMatrix& m : it->second) {
            if (seen.insert(m.id).second) {
                out.push_back(m);
            }
        }
    }
    return out;
}

std::vector<WmmApplication> apply_wmm_step(std::span<const NamedMatrix> targets,
                                           const WmmConfig& cfg, Rng& rng,
                                           const WmmObserver& before_apply) {
    std::vector<WmmApplication> out;
    out.reserve(targets.size());
    for (const NamedMatrix& t : targets) {
        WmmApplication app{t.id, std::nullopt};
        if (cfg.p > rng.uniform()) {
            if (before_apply) {
                before_apply(t);
            }
            if (cfg.method == WmmMethod::Reinit) {
                app.mask = reinitialize(t.matrix, cfg.p, cfg.c, t.bound, rng);
            } else {
                app.mask = shuffle(t.matrix, cfg.c, cfg.density, rng);
            }
        }
        out.push_back(std::move(app));
    }
    return out;
}

std::vector<WmmApplication> apply_wmm_step(const TargetRegistry& registry, const WmmConfig& cfg,
                                           Rng& rng) {
    validate(cfg);
    const std::vector<NamedMatrix> targets = registry.resolve(cfg.targets);
    return apply_wmm_step(targets, cfg, rng);
}

} // namespace wmm
