#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wmm/matrix.hpp"
#include "wmm/rng.hpp"

namespace wmm {

/// Half-width of the uniform initialization range, 1/sqrt(cols).
double init_bound(std::size_t cols);

/// i.i.d. draws from U[-1/sqrt(cols), +1/sqrt(cols)]. This is also the
/// distribution reinitialized weights are resampled from.
WeightMatrix uniform_init(std::size_t rows, std::size_t cols, Rng& rng);

/// Heavily skewed initialization over the same range: -a + 2a * u^exponent.
/// Most mass sits near -a. Used as the preset for entropy/KL experiments.
WeightMatrix skewed_init(std::size_t rows, std::size_t cols, Rng& rng, double exponent = 16.0);

enum class WmmMethod { Reinit, Shuffle };

std::string_view to_string(WmmMethod method);
WmmMethod parse_method(std::string_view name);

struct WmmConfig {
    WmmMethod method = WmmMethod::Reinit;
    double p = 0.1;        // trigger probability (and reinit mask threshold)
    double c = 0.1;        // window coverage per dimension
    double density = 0.5;  // Bernoulli density of the shuffle mask
    std::vector<std::string> targets;
};

/// Throws ConfigError describing the first invalid field.
void validate(const WmmConfig& cfg);

struct WindowSpec {
    std::size_t top = 0;
    std::size_t left = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    bool contains(std::size_t r, std::size_t c) const noexcept {
        return r >= top && r < top + height && c >= left && c < left + width;
    }
    std::size_t area() const noexcept { return height * width; }

    friend bool operator==(const WindowSpec&, const WindowSpec&) = default;
};

class SparseMask {
public:
    SparseMask() = default;
    SparseMask(std::size_t rows, std::size_t cols, WindowSpec window);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    const WindowSpec& window() const noexcept { return window_; }

    bool test(std::size_t r, std::size_t c) const { return bits_[r * cols_ + c] != 0; }
    void set(std::size_t r, std::size_t c);

    std::size_t count() const noexcept { return count_; }
    bool empty() const noexcept { return count_ == 0; }

    /// Flat row-major indices of the set entries, ascending.
    std::vector<std::size_t> indices() const;

    friend bool operator==(const SparseMask&, const SparseMask&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    WindowSpec window_;
    std::vector<std::uint8_t> bits_;
    std::size_t count_ = 0;
};

/// max(1, round(coverage * n)).
std::size_t window_extent(std::size_t n, double coverage);

/// Window of extents window_extent(rows, c) x window_extent(cols, c) at a
/// uniformly drawn valid position. Draws top, then left.
WindowSpec select_window(std::size_t rows, std::size_t cols, double c, Rng& rng);

/// Inside the window an entry is set iff a fresh U[0,1) draw is < p.
SparseMask build_reinit_mask(std::size_t rows, std::size_t cols, const WindowSpec& window,
                             double p, Rng& rng);

/// Inside the window an entry is set iff a Bernoulli(density) trial succeeds.
SparseMask build_shuffle_mask(std::size_t rows, std::size_t cols, const WindowSpec& window,
                              double density, Rng& rng);

/// Weight reinitialization on a view. Masked entries are replaced by draws
/// from U[-bound, bound]; everything else is untouched.
SparseMask reinitialize(MatrixRef w, double p, double c, double bound, Rng& rng);
inline SparseMask reinitialize(MatrixRef w, double p, double c, Rng& rng) {
    return reinitialize(w, p, c, init_bound(w.cols), rng);
}

/// Weight shuffling on a view. Masked entries are permuted among themselves
/// by Fisher-Yates over their row-major index list.
SparseMask shuffle(MatrixRef w, double c, double density, Rng& rng);

std::pair<WeightMatrix, SparseMask> weight_reinitialization(const WeightMatrix& w, double p,
                                                            double c, Rng& rng);
std::pair<WeightMatrix, SparseMask> weight_shuffling(const WeightMatrix& w, double c,
                                                     double density, Rng& rng);

/// A weight matrix (or slice of one) that a WMM step may act on.
struct NamedMatrix {
    std::string id;
    MatrixRef matrix;
    double bound = 0.0; // reinit half-range; init_bound(cols) of the owning matrix
};

/// Maps target ids ("dense0", "lstm1.forget", ...) to the matrices they cover.
class TargetRegistry {
public:
    void add(std::string target_id, std::vector<NamedMatrix> matrices);

    bool contains(const std::string& target_id) const { return targets_.contains(target_id); }
    std::vector<std::string> ids() const;

    /// Resolves every id, deduplicating matrices by id and preserving first
    /// occurrence order. Throws ConfigError on the first unknown id.
    std::vector<NamedMatrix> resolve(std::span<const std::string> target_ids) const;

private:
    std::map<std::string, std::vector<NamedMatrix>> targets_;
};

struct WmmApplication {
    std::string id;
    std::optional<SparseMask> mask; // empty when the trigger did not fire
};

/// Called with a matrix right before a triggered operator mutates it.
using WmmObserver = std::function<void(const NamedMatrix&)>;

/// One regularization step: for each matrix independently draw u ~ U[0,1)
/// and apply the configured operator iff p > u.
std::vector<WmmApplication> apply_wmm_step(std::span<const NamedMatrix> targets,
                                           const WmmConfig& cfg, Rng& rng,
                                           const WmmObserver& before_apply = {});

/// Resolves cfg.targets first (no mutation on failure), then applies.
std::vector<WmmApplication> apply_wmm_step(const TargetRegistry& registry, const WmmConfig& cfg,
                                           Rng& rng);

} // namespace wmm
