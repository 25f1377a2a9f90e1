#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wmm/rng.hpp"
#include "wmm/train.hpp"
#include "wmm/wmm_ops.hpp"

namespace wmm {

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

inline constexpr Range kTriggerRange{0.05, 0.4};
inline constexpr Range kCoverageRange{0.03, 0.35};

/// None is the reference campaign: no WMM, L2 coefficient cycled over a grid.
enum class SearchMethod { None, Reinit, Shuffle };

std::string_view to_string(SearchMethod method);
SearchMethod parse_search_method(std::string_view name);

struct SearchSpace {
    SearchMethod method = SearchMethod::Reinit;
    Range p = kTriggerRange;
    Range c = kCoverageRange;
    std::vector<std::string> targets; // eligible (layer, gate) targets
    double density = 0.5;
    std::vector<double> l2_grid{0.0, 1e-5, 1e-4, 1e-3};
};

/// Throws ConfigError: ranges must be positive (log-uniform), targets nonempty.
void validate(const SearchSpace& space);

/// exp(U[ln lo, ln hi)); a collapsed range returns lo exactly.
double sample_log_uniform(Range range, Rng& rng);

/// Draws p, c and one target uniformly from the eligible set, then a trial
/// seed. The method is taken from the space (Reinit when the space is the
/// reference campaign, so the draw sequence never depends on the method).
std::pair<WmmConfig, std::uint64_t> sample_config(const SearchSpace& space, Rng& rng);

struct TrialPlan {
    std::size_t index = 0;
    SearchMethod method = SearchMethod::Reinit;
    WmmConfig wmm;          // ignored for SearchMethod::None
    double l2 = 0.0;
    std::uint64_t seed = 0; // training seed of the trial
};

/// Fully determined by (space, master seed, trial index); the sampled p, c,
/// target and seed do not depend on the campaign's method.
TrialPlan plan_trial(const SearchSpace& space, std::uint64_t master_seed, std::size_t index);

struct TrialResult {
    RunStatus status = RunStatus::Ok;
    std::optional<double> val_metric;
    std::optional<double> test_metric;
    std::optional<double> entropy_bits;
};

struct TrialRecord {
    std::size_t trial = 0;
    SearchMethod method = SearchMethod::Reinit;
    std::optional<double> p;
    std::optional<double> c;
    std::string target; // empty for the reference campaign
    double l2 = 0.0;
    std::uint64_t seed = 0;
    std::optional<double> val_metric;
    std::optional<double> test_metric;
    std::optional<double> entropy_bits;
    RunStatus status = RunStatus::Ok;

    std::optional<double> p_times_c() const {
        if (p && c) return *p * *c;
        return std::nullopt;
    }
    friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

TrialRecord make_record(const TrialPlan& plan, const TrialResult& result);

/// One JSON object, no trailing newline.
std::string to_json_line(const TrialRecord& record);
TrialRecord parse_trial_line(std::string_view line);

/// Columns trial,method,p,c,p_times_c,target,seed,val_metric,test_metric,status.
void write_trials_csv(std::ostream& os, std::span<const TrialRecord> records);

using TrialFn = std::function<TrialResult(const TrialPlan&)>;

struct SearchOptions {
    std::uint64_t master_seed = 0;
    std::size_t budget = 1;
    std::filesystem::path table_path; // JSON-lines table; empty disables persistence
    std::size_t threads = 1;
    // Run at most this many new trials, then return (simulates interruption).
    std::optional<std::size_t> stop_after;
};

/// Worker count from WMM_LAB_THREADS, falling back to the hardware count.
std::size_t default_thread_count();

/// Executes the missing trials of [0, budget) on a bounded worker pool.
/// Trials already in the table are reused, so an interrupted campaign
/// resumes where it stopped. Records are appended in trial order as they
/// complete; the finished table is rewritten sorted by trial index.
/// Returns the records sorted by trial index.
std::vector<TrialRecord> run_search(const SearchSpace& space, const SearchOptions& options,
                                    const TrialFn& run_trial);

std::vector<TrialRecord> read_trial_table(const std::filesystem::path& path);

struct TopKSummary {
    std::size_t k = 0;
    double mean = 0.0;
    double stddev = 0.0; // population
    double entropy_mean = 0.0;
    TrialRecord best;
};

enum class MetricField { Validation, Test };

/// Mean and population standard deviation of `field` over the k best ok
/// trials, plus the single best trial. Throws std::invalid_argument stating
/// the count when fewer than k trials are ok.
TopKSummary top_k_summary(std::span<const TrialRecord> trials, std::size_t k, MetricField field,
                          bool higher_is_better = false);

std::size_t count_ok(std::span<const TrialRecord> trials);

} // namespace wmm
