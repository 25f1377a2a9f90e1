#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>

#include "oracles.hpp"
#include "wmm/error.hpp"
#include "wmm/stats.hpp"
#include "wmm/wmm_ops.hpp"

using namespace wmm;

namespace {

std::vector<double> sorted_values(const WeightMatrix& w) {
    std::vector<double> v(w.values().begin(), w.values().end());
    std::sort(v.begin(), v.end());
    return v;
}

WeightMatrix ramp(std::size_t rows, std::size_t cols) {
    WeightMatrix w(rows, cols);
    for (std::size_t i = 0; i < w.size(); ++i) w.values()[i] = static_cast<double>(i) * 0.25 - 3.0;
    return w;
}

} // namespace

TEST_CASE("rng streams are reproducible and partitioned") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng root(7);
    CHECK(root.derive("wmm").seed() != root.derive("data").seed());
    CHECK(root.derive("trial", 1).seed() != root.derive("trial", 2).seed());
    CHECK(root.derive("wmm").seed() == Rng(7).derive("wmm").seed());
    Rng u(3);
    for (int i = 0; i < 10000; ++i) {
        const double x = u.uniform();
        REQUIRE(x >= 0.0);
        REQUIRE(x < 1.0);
        REQUIRE(u.below(7) < 7);
    }
    CHECK_THROWS_AS(u.below(0), std::invalid_argument);
}

TEST_CASE("uniform_init respects the column bound") {
    Rng rng(1);
    const WeightMatrix narrow = uniform_init(1, 4, rng);
    for (double v : narrow.values()) {
        CHECK(v >= -0.5);
        CHECK(v <= 0.5);
    }
    const WeightMatrix single = uniform_init(2, 1, rng);
    for (double v : single.values()) {
        CHECK(std::abs(v) <= 1.0);
    }
    CHECK_THROWS_AS(uniform_init(0, 3, rng), std::invalid_argument);
    CHECK_THROWS_AS(uniform_init(3, 0, rng), std::invalid_argument);
}

TEST_CASE("uniform_init moments match U[-a, a]") {
    Rng rng(2);
    const WeightMatrix w = uniform_init(100, 100, rng);
    const std::vector<double> v(w.values().begin(), w.values().end());
    CHECK(std::abs(oracle::mean(v)) < 0.01);
    const double expected = (2 * 0.1) * (2 * 0.1) / 12.0;
    CHECK(oracle::variance(v) == doctest::Approx(expected).epsilon(0.10));
}

TEST_CASE("skewed_init stays in range with mass near the lower bound") {
    Rng rng(3);
    const WeightMatrix w = skewed_init(40, 25, rng);
    const double a = init_bound(25);
    std::size_t low = 0;
    for (double v : w.values()) {
        REQUIRE(std::abs(v) <= a);
        if (v < -0.5 * a) ++low;
    }
    CHECK(low > w.size() * 3 / 4);
}

TEST_CASE("select_window follows the extent rule") {
    Rng rng(4);
    const WindowSpec full = select_window(10, 10, 1.0, rng);
    CHECK(full == WindowSpec{0, 0, 10, 10});

    CHECK(window_extent(8, 0.35) == 3); // round(2.8)
    CHECK(window_extent(4, 0.35) == 1); // round(1.4)
    CHECK(window_extent(28, 0.03) == 1);

    for (int i = 0; i < 200; ++i) {
        const WindowSpec w = select_window(8, 4, 0.35, rng);
        CHECK(w.height == 3);
        CHECK(w.width == 1);
        CHECK(w.top <= 5);
        CHECK(w.left <= 3);
    }
    CHECK_THROWS_AS(select_window(4, 4, 0.0, rng), std::invalid_argument);
    CHECK_THROWS_AS(select_window(4, 4, 1.5, rng), std::invalid_argument);
}

TEST_CASE("tiny coverage reaches every position of a 28x28 matrix") {
    Rng rng(5);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (int i = 0; i < 20000; ++i) {
        const WindowSpec w = select_window(28, 28, 0.03, rng);
        REQUIRE(w.height == 1);
        REQUIRE(w.width == 1);
        seen.insert({w.top, w.left});
    }
    CHECK(seen.size() == 784);
}

TEST_CASE("reinit mask edge cases") {
    Rng rng(6);
    const WindowSpec win{2, 3, 3, 3};
    CHECK(build_reinit_mask(10, 10, win, 0.0, rng).empty());
    const SparseMask all = build_reinit_mask(10, 10, win, 1.0, rng);
    CHECK(all.count() == 9);
    for (std::size_t idx : all.indices()) CHECK(win.contains(idx / 10, idx % 10));
    CHECK_THROWS_AS(build_reinit_mask(4, 4, WindowSpec{2, 2, 3, 3}, 0.5, rng), std::invalid_argument);
    CHECK_THROWS_AS(build_reinit_mask(4, 4, WindowSpec{0, 0, 2, 2}, 1.5, rng), std::invalid_argument);
}

TEST_CASE("reinit mask count follows Binomial(area, p)") {
    Rng rng(7);
    const WindowSpec win{0, 0, 50, 50};
    double total = 0.0;
    const int trials = 10000;
    for (int i = 0; i < trials; ++i) total += static_cast<double>(build_reinit_mask(50, 50, win, 0.2, rng).count());
    const double mean = total / trials;
    CHECK(mean >= 475.0);
    CHECK(mean <= 525.0);
    CHECK(mean == doctest::Approx(2500 * 0.2).epsilon(0.01));
}

TEST_CASE("shuffle mask count follows Binomial(area, density)") {
    Rng rng(8);
    CHECK(build_shuffle_mask(6, 6, WindowSpec{1, 1, 4, 4}, 1.0, rng).count() == 16);
    CHECK(build_shuffle_mask(6, 6, WindowSpec{1, 1, 4, 4}, 0.0, rng).empty());
    const WindowSpec win{0, 0, 40, 40};
    double total = 0.0;
    for (int i = 0; i < 10000; ++i) total += static_cast<double>(build_shuffle_mask(40, 40, win, 0.5, rng).count());
    const double mean = total / 10000.0;
    CHECK(mean >= 760.0);
    CHECK(mean <= 840.0);
}

TEST_CASE("sparse mask rejects entries outside its window") {
    SparseMask m(4, 4, WindowSpec{1, 1, 2, 2});
    m.set(1, 1);
    CHECK(m.count() == 1);
    CHECK_THROWS(m.set(0, 0));
}

TEST_CASE("weight_reinitialization with p = 0 is the identity") {
    Rng rng(9);
    const WeightMatrix w = ramp(6, 7);
    const auto [out, mask] = weight_reinitialization(w, 0.0, 0.5, rng);
    CHECK(out == w);
    CHECK(mask.empty());
}

TEST_CASE("weight_reinitialization changes exactly the mask, inside the init range") {
    Rng rng(10);
    const WeightMatrix w(20, 16, 10.0);
    const auto [out, mask] = weight_reinitialization(w, 0.3, 0.5, rng);
    const double a = 1.0 / std::sqrt(16.0);
    CHECK(mask.count() > 0);
    for (std::size_t r = 0; r < 20; ++r) {
        for (std::size_t c = 0; c < 16; ++c) {
            const bool changed = out(r, c) != w(r, c);
            CHECK(changed == mask.test(r, c));
            if (changed) {
                CHECK(std::abs(out(r, c)) <= a);
                CHECK(mask.window().contains(r, c));
            }
        }
    }
}

TEST_CASE("full reinitialization reproduces the init distribution (KS)") {
    Rng rng(11);
    const std::size_t cols = 25;
    const double a = 1.0 / std::sqrt(static_cast<double>(cols));
    std::vector<double> pooled;
    const WeightMatrix w(8, cols, 3.0);
    while (pooled.size() < 100000) {
        const auto [out, mask] = weight_reinitialization(w, 1.0, 1.0, rng);
        REQUIRE(mask.count() == w.size());
        pooled.insert(pooled.end(), out.values().begin(), out.values().end());
    }
    const double d = oracle::ks_statistic(pooled, [a](double x) { return std::clamp((x + a) / (2 * a), 0.0, 1.0); });
    CHECK(d < oracle::ks_critical_001(pooled.size()));
}

TEST_CASE("weight_shuffling preserves the multiset and confines changes") {
    Rng rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        WeightMatrix w = uniform_init(9, 13, rng);
        const auto [out, mask] = weight_shuffling(w, 0.6, 0.5, rng);
        CHECK(sorted_values(out) == sorted_values(w));
        for (std::size_t r = 0; r < 9; ++r) {
            for (std::size_t c = 0; c < 13; ++c) {
                if (!mask.test(r, c)) REQUIRE(out(r, c) == w(r, c));
            }
        }
    }
}

TEST_CASE("shuffling zero or one element is the identity") {
    Rng rng(13);
    const WeightMatrix w = ramp(5, 5);
    CHECK(weight_shuffling(w, 1.0, 0.0, rng).first == w);
    const WeightMatrix one(1, 1, 2.5);
    CHECK(weight_shuffling(one, 1.0, 1.0, rng).first == one);
}

TEST_CASE("shuffle permutations are uniform") {
    Rng rng(14);
    const WeightMatrix w(1, 3, std::vector<double>{1.0, 2.0, 3.0});
    std::map<std::array<double, 3>, int> freq;
    const int runs = 60000;
    for (int i = 0; i < runs; ++i) {
        const auto [out, mask] = weight_shuffling(w, 1.0, 1.0, rng);
        REQUIRE(mask.count() == 3);
        freq[{out(0, 0), out(0, 1), out(0, 2)}]++;
    }
    CHECK(freq.size() == 6);
    for (const auto& [perm, n] : freq) {
        CHECK(std::abs(static_cast<double>(n) / runs - 1.0 / 6.0) < 0.02);
    }
}

TEST_CASE("in-place operators respect row-block views") {
    Rng rng(15);
    WeightMatrix w = uniform_init(16, 5, rng);
    const WeightMatrix before = w;
    MatrixRef forget = w.row_block(4, 4);
    reinitialize(forget, 1.0, 1.0, init_bound(5), rng);
    for (std::size_t r = 0; r < 16; ++r) {
        for (std::size_t c = 0; c < 5; ++c) {
            if (r < 4 || r >= 8) CHECK(w(r, c) == before(r, c));
        }
    }
}

TEST_CASE("split_filters gives independent per-filter views") {
    std::vector<double> bank(2 * 3 * 3);
    for (std::size_t i = 0; i < bank.size(); ++i) bank[i] = static_cast<double>(i);
    auto filters = split_filters(bank, 2, 3, 3);
    REQUIRE(filters.size() == 2);
    CHECK(filters[1](0, 0) == 9.0);
    Rng rng(16);
    reinitialize(filters[0], 1.0, 1.0, 0.1, rng);
    for (std::size_t i = 9; i < 18; ++i) CHECK(bank[i] == static_cast<double>(i));
    CHECK_THROWS_AS(split_filters(bank, 3, 3, 3), std::invalid_argument);
}

TEST_CASE("validate rejects bad configs") {
    WmmConfig cfg;
    cfg.targets = {"dense0"};
    CHECK_NOTHROW(validate(cfg));
    cfg.p = 1.5;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg.p = 0.1;
    cfg.c = 0.0;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg.c = 0.1;
    cfg.targets.clear();
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    CHECK(parse_method("shuffle") == WmmMethod::Shuffle);
    CHECK_THROWS_AS(parse_method("dropout"), ConfigError);
}

TEST_CASE("apply_wmm_step trigger extremes and unknown targets") {
    Rng init(17);
    WeightMatrix a = uniform_init(6, 6, init);
    WeightMatrix b = uniform_init(6, 6, init);
    TargetRegistry reg;
    reg.add("a", {{"a.w", a.ref(), init_bound(6)}});
    reg.add("b", {{"b.w", b.ref(), init_bound(6)}});
    const WeightMatrix a0 = a, b0 = b;

    WmmConfig cfg;
    cfg.method = WmmMethod::Reinit;
    cfg.p = 0.0;
    cfg.c = 1.0;
    cfg.targets = {"a", "b"};
    Rng rng(18);
    for (const auto& rec : apply_wmm_step(reg, cfg, rng)) CHECK_FALSE(rec.mask.has_value());
    CHECK(a == a0);
    CHECK(b == b0);

    cfg.p = 1.0;
    const auto applied = apply_wmm_step(reg, cfg, rng);
    REQUIRE(applied.size() == 2);
    for (const auto& rec : applied) CHECK(rec.mask.has_value());

    const WeightMatrix a1 = a;
    cfg.targets = {"a", "missing"};
    CHECK_THROWS_AS(apply_wmm_step(reg, cfg, rng), ConfigError);
    CHECK(a == a1);
}

TEST_CASE("apply_wmm_step fires each target at rate p") {
    WeightMatrix w(4, 4, 0.0);
    const std::vector<NamedMatrix> targets{{"w", w.ref(), 0.5}};
    WmmConfig cfg;
    cfg.method = WmmMethod::Shuffle;
    cfg.p = 0.25;
    cfg.c = 0.5;
    cfg.targets = {"w"};
    Rng rng(19);
    int fired = 0;
    const int steps = 100000;
    for (int i = 0; i < steps; ++i) {
        if (apply_wmm_step(targets, cfg, rng)[0].mask) ++fired;
    }
    const double freq = static_cast<double>(fired) / steps;
    CHECK(freq >= 0.23);
    CHECK(freq <= 0.27);
}

TEST_CASE("operators are deterministic given the seed") {
    const WeightMatrix w = ramp(12, 12);
    Rng r1(20), r2(20);
    CHECK(weight_reinitialization(w, 0.3, 0.4, r1).first == weight_reinitialization(w, 0.3, 0.4, r2).first);
    CHECK(weight_shuffling(w, 0.4, 0.5, r1).first == weight_shuffling(w, 0.4, 0.5, r2).first);
}

TEST_CASE("degenerate 1x1 matrix") {
    Rng rng(21);
    const WeightMatrix one(1, 1, 5.0);
    const auto [out, mask] = weight_reinitialization(one, 1.0, 0.1, rng);
    CHECK(mask.count() == 1);
    CHECK(std::abs(out(0, 0)) <= 1.0);
}

TEST_CASE("property: random shuffles keep entropy bit-exact") {
    Rng rng(22);
    for (int i = 0; i < 100; ++i) {
        const std::size_t rows = 1 + rng.below(20), cols = 1 + rng.below(20);
        const WeightMatrix w = uniform_init(rows, cols, rng);
        const double c = 0.05 + 0.95 * rng.uniform();
        const auto [out, mask] = weight_shuffling(w, c, rng.uniform(), rng);
        for (std::size_t bins : {1u, 7u, 64u}) {
            CHECK(weight_entropy(out.cref(), bins) == weight_entropy(w.cref(), bins));
        }
    }
}

TEST_CASE("property: reinit never touches anything outside the window") {
    Rng rng(23);
    for (int i = 0; i < 200; ++i) {
        const std::size_t rows = 1 + rng.below(30), cols = 1 + rng.below(30);
        const WeightMatrix w(rows, cols, 7.0);
        const double p = rng.uniform();
        const double c = 0.05 + 0.95 * rng.uniform();
        const auto [out, mask] = weight_reinitialization(w, p, c, rng);
        CHECK(mask.window().height == window_extent(rows, c));
        CHECK(mask.window().width == window_extent(cols, c));
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t k = 0; k < cols; ++k) {
                if (mask.test(r, k)) REQUIRE(mask.window().contains(r, k));
                if (out(r, k) != 7.0) REQUIRE(mask.test(r, k));
            }
        }
    }
}
