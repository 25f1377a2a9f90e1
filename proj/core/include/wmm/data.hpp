#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wmm/rng.hpp"

namespace wmm {

/// Coefficients of s(t) = a_sin sin(2 pi f t + phase) + a_exp exp(rate t)
///                      + a_log ln(t + 1 + log_offset), with t = n * step.
struct SeriesRecipe {
    double a_sin = 0.0;
    double a_exp = 0.0;
    double a_log = 0.0;
    double frequency = 0.0;  // cycles per unit t
    double phase = 0.0;
    double exp_rate = 0.0;
    double log_offset = 0.0; // >= 0 keeps the log argument positive
    double step = 1.0;
};

/// Throws RangeError if any sample is non-finite.
std::vector<double> generate_series(const SeriesRecipe& recipe, std::size_t length);

/// Amplitudes in [0.5, 2], period 5-25 samples, exp rate in [-0.02, 0.02],
/// log offset in [0, 10].
SeriesRecipe sample_recipe(Rng& rng);

/// Noise with power spectral density proportional to 1/f^alpha, shaped in
/// the frequency domain from white Gaussian noise, zero mean, RMS equal to
/// `amplitude`.
std::vector<double> colored_noise(std::size_t length, double alpha, double amplitude, Rng& rng);

double rms(std::span<const double> values);

/// One split of a supervised dataset, samples stored row-major.
struct DataSplit {
    std::size_t features = 0;
    std::size_t target_width = 1;
    std::vector<double> inputs;  // size() x features
    std::vector<double> targets; // size() x target_width; class index for classification
    // Source records [first_source, end_source) this split was cut from.
    std::size_t first_source = 0;
    std::size_t end_source = 0;

    std::size_t size() const noexcept { return features == 0 ? 0 : inputs.size() / features; }
};

struct DatasetSplits {
    DataSplit train;
    DataSplit val;
    DataSplit test;
};

struct SplitSizes {
    std::size_t train = 0;
    std::size_t val = 0;
    std::size_t test = 0;

    friend bool operator==(const SplitSizes&, const SplitSizes&) = default;
};

inline constexpr SplitSizes kFullScaleSplit{55000, 5000, 10000};
inline constexpr std::size_t kDefaultWindow = 50;

/// Rounds each full-scale split size by `scale`. Throws ConfigError if any
/// split ends up empty.
SplitSizes scaled_split(double scale, SplitSizes full = kFullScaleSplit);

/// Number of sliding windows (with one-step-ahead target) in a series.
std::size_t window_count(std::size_t length, std::size_t window);

/// Cuts sliding windows out of a pool of series. Splits take contiguous
/// blocks of whole series in the order train, val, test; a series is never
/// shared between splits. Throws std::invalid_argument naming the shortfall
/// when the pool runs out.
DatasetSplits window_dataset(std::span<const std::vector<double>> pool, std::size_t window,
                             SplitSizes sizes);

struct SyntheticOptions {
    SplitSizes sizes{5500, 500, 1000};
    std::size_t window = kDefaultWindow;
    std::size_t windows_per_series = 50;
    bool noisy = false;
    double noise_alpha = 1.0;
    double snr_db = 10.0;
    std::uint64_t seed = 0;
};

struct SyntheticData {
    SyntheticOptions options;
    std::vector<SeriesRecipe> recipes;
    std::vector<std::vector<double>> clean;
    std::vector<std::vector<double>> noise; // empty unless options.noisy
    DatasetSplits splits;
};

/// Samples one recipe and (optionally) one noise sequence per series, each
/// from its own seeded stream, then windows the pool.
SyntheticData generate_synthetic(const SyntheticOptions& options);

/// Series needed to cover `sizes` with `windows_per_series` windows each.
std::size_t series_needed(const SplitSizes& sizes, std::size_t windows_per_series);

struct Standardizer {
    double mean = 0.0;
    double scale = 1.0;

    double apply(double v) const noexcept { return (v - mean) / scale; }
};

/// Fits on train inputs; applies to inputs and targets of every split.
Standardizer standardize(DatasetSplits& splits);

/// Dataset CSV: header `x0,...,x{w-1},y`, one row per window in split order
/// train, val, test.
void write_dataset_csv(const std::filesystem::path& path, const DatasetSplits& splits);

/// Reads a dataset CSV; `sizes` comes from the JSON sidecar.
DatasetSplits read_dataset_csv(const std::filesystem::path& path, SplitSizes sizes);

/// Writes `<dir>/dataset.csv` and `<dir>/dataset.json` (recipes, seeds, split
/// boundaries).
void save_synthetic(const std::filesystem::path& dir, const SyntheticData& data,
                    const std::string& task);

/// Loads a directory written by save_synthetic.
DatasetSplits load_dataset_dir(const std::filesystem::path& dir);

/// MNIST from the standard IDX files in `dir`. Train and validation are cut
/// from the training file, test from the t10k file. Pixels scaled to [0, 1].
DatasetSplits load_mnist(const std::filesystem::path& dir, SplitSizes sizes);

} // namespace wmm
