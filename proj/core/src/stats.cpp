#include "wmm/stats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "wmm/wmm_ops.hpp"

namespace wmm {

namespace {

std::size_t bin_index(double x, double lo, double hi, std::size_t bins) {
    const double pos = (x - lo) / (hi - lo) * static_cast<double>(bins);
    if (!(pos > 0.0)) {
        return 0;
    }
    return std::min(bins - 1, static_cast<std::size_t>(pos));
}

} // namespace

std::size_t Histogram::total() const noexcept {
    return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

Histogram histogram(std::span<const double> values, std::size_t bins) {
    if (bins == 0) {
        throw std::invalid_argument("histogram: bins must be positive");
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    std::size_t finite = 0;
    for (double v : values) {
        if (std::isfinite(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            ++finite;
        }
    }
    if (finite == 0) {
        throw std::invalid_argument("histogram: no finite values");
    }

    Histogram h;
    if (lo == hi) {
        h.edges = {lo, std::nextafter(lo, std::numeric_limits<double>::infinity())};
        h.counts = {finite};
        return h;
    }
    h.edges.resize(bins + 1);
    const double width = (hi - lo) / static_cast<double>(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        h.edges[b] = lo + width * static_cast<double>(b);
    }
    h.edges[bins] = hi;
    h.counts.assign(bins, 0);
    for (double v : values) {
        if (std::isfinite(v)) {
            ++h.counts[bin_index(v, lo, hi, bins)];
        }
    }
    return h;
}

double entropy_bits(const Histogram& h) {
    const double total = static_cast<double>(h.total());
    if (total == 0.0) {
        return 0.0;
    }
    double H = 0.0;
    for (std::size_t n : h.counts) {
        if (n != 0) {
            const double q = static_cast<double>(n) / total;
            H -= q * std::log2(q);
        }
    }
    // -0.0 and tiny negative rounding both collapse to zero
    return H > 0.0 ? H : 0.0;
}

double weight_entropy(ConstMatrixRef w, std::size_t bins) {
    if (w.size() == 0) {
        throw std::invalid_argument("weight_entropy: empty matrix");
    }
    return entropy_bits(histogram(w.values, bins));
}

double kl_to_init(ConstMatrixRef w, std::size_t bins) {
    if (bins == 0) {
        throw std::invalid_argument("kl_to_init: bins must be positive");
    }
    if (w.size() == 0) {
        throw std::invalid_argument("kl_to_init: empty matrix");
    }
    const double a = init_bound(w.cols);
    // [underflow, in-range bins..., overflow]
    std::vector<std::size_t> counts(bins + 2, 0);
    std::size_t total = 0;
    for (double v : w.values) {
        if (!std::isfinite(v)) {
            continue;
        }
        ++total;
        if (v < -a) {
            ++counts.front();
        } else if (v > a) {
            ++counts.back();
        } else {
            ++counts[1 + bin_index(v, -a, a, bins)];
        }
    }
    if (total == 0) {
        throw std::invalid_argument("kl_to_init: no finite values");
    }
    const double in_range = 1.0 / static_cast<double>(bins);
    double kl = 0.0;
    for (std::size_t b = 0; b < counts.size(); ++b) {
        if (counts[b] == 0) {
            continue;
        }
        const double q = static_cast<double>(counts[b]) / static_cast<double>(total);
        const double u = (b == 0 || b == bins + 1) ? kKlOverflowFloor : in_range;
        kl += q * std::log2(q / u);
    }
    return std::max(kl, 0.0);
}

const EntropyEpoch& EntropyTimeline::record_epoch(long epoch,
                                                   std::span<const TrackedMatrix> tracked) {
    if (!epochs_.empty() && epoch <= epochs_.back().epoch) {
        throw std::invalid_argument("record_epoch: epoch " + std::to_string(epoch) +
                                    " is not after " + std::to_string(epochs_.back().epoch));
    }
    EntropyEpoch row;
    row.epoch = epoch;
    row.rows.reserve(tracked.size());
    for (const TrackedMatrix& t : tracked) {
        const double h = weight_entropy(t.matrix, bins_);
        row.rows.push_back({t.id, h});
        row.total_bits += h;
    }
    epochs_.push_back(std::move(row));
    return epochs_.back();
}

void EntropyTimeline::write_csv(std::ostream& os) const {
    os << "epoch,target_id,entropy_bits,total_bits\n";
    for (const EntropyEpoch& e : epochs_) {
        for (const EntropyRow& r : e.rows) {
            os << e.epoch << ',' << r.target_id << ',' << format_real(r.entropy_bits) << ','
               << format_real(e.total_bits) << '\n';
        }
    }
}

std::string format_real(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) {
        throw std::runtime_error("format_real: conversion failed");
    }
    return std::string(buf, end);
}

} // namespace wmm
