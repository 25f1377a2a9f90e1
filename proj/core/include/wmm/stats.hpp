#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "wmm/matrix.hpp"

namespace wmm {

inline constexpr std::size_t kDefaultEntropyBins = 64;

struct Histogram {
    std::vector<double> edges;        // bins + 1, strictly increasing
    std::vector<std::size_t> counts;  // bins

    std::size_t total() const noexcept;
};

/// Equal-width bins over [min, max] of the finite values; right-open except
/// the last bin. A degenerate range yields a single bin holding everything.
/// Binning depends only on the value multiset.
Histogram histogram(std::span<const double> values, std::size_t bins);
inline Histogram histogram(ConstMatrixRef w, std::size_t bins) { return histogram(w.values, bins); }

/// Shannon entropy in bits of the histogram's bin frequencies.
double entropy_bits(const Histogram& h);

double weight_entropy(ConstMatrixRef w, std::size_t bins = kDefaultEntropyBins);

/// Discrete KL(q || u) in bits, where q is the empirical distribution over
/// `bins` equal-width bins on [-1/sqrt(cols), 1/sqrt(cols)] plus an underflow
/// and an overflow bin, and u is uniform over the in-range bins with a tiny
/// floor on the two overflow bins.
double kl_to_init(ConstMatrixRef w, std::size_t bins = kDefaultEntropyBins);

inline constexpr double kKlOverflowFloor = 1e-12;

struct TrackedMatrix {
    std::string id;
    ConstMatrixRef matrix;
};

struct EntropyRow {
    std::string target_id;
    double entropy_bits = 0.0;
};

struct EntropyEpoch {
    long epoch = 0;
    std::vector<EntropyRow> rows;
    double total_bits = 0.0;
};

/// Per-epoch entropy of every tracked matrix.
class EntropyTimeline {
public:
    explicit EntropyTimeline(std::size_t bins = kDefaultEntropyBins) : bins_(bins) {}

    /// Appends one row per tracked matrix. Throws std::invalid_argument
    /// unless epoch is greater than the last recorded epoch.
    const EntropyEpoch& record_epoch(long epoch, std::span<const TrackedMatrix> tracked);

    const std::vector<EntropyEpoch>& epochs() const noexcept { return epochs_; }
    std::size_t bins() const noexcept { return bins_; }
    bool empty() const noexcept { return epochs_.empty(); }

    /// CSV with header `epoch,target_id,entropy_bits,total_bits`, LF endings.
    void write_csv(std::ostream& os) const;

private:
    std::size_t bins_;
    std::vector<EntropyEpoch> epochs_;
};

/// Round-trippable decimal rendering used by every CSV writer.
std::string format_real(double v);

} // namespace wmm
