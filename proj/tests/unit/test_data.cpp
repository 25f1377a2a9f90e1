#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "oracles.hpp"
#include "wmm/data.hpp"
#include "wmm/error.hpp"
#include "wmm/idx.hpp"

using namespace wmm;

namespace {

std::vector<std::uint8_t> idx_bytes(std::uint8_t type, std::vector<std::uint32_t> dims,
                                    const std::vector<std::uint8_t>& payload) {
    std::vector<std::uint8_t> b{0, 0, type, static_cast<std::uint8_t>(dims.size())};
    for (std::uint32_t d : dims) {
        for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(d >> s));
    }
    b.insert(b.end(), payload.begin(), payload.end());
    return b;
}

IdxErrorKind parse_error_kind(const std::vector<std::uint8_t>& bytes, std::size_t* offset = nullptr) {
    try {
        parse_idx(bytes);
    } catch (const IdxParseError& e) {
        if (offset) *offset = e.offset();
        return e.kind();
    }
    FAIL("expected a parse error");
    return IdxErrorKind::BadMagic;
}

} // namespace

TEST_CASE("generate_series reference sequences") {
    SeriesRecipe sine;
    sine.a_sin = 1.0;
    sine.frequency = 0.25;
    const auto s = generate_series(sine, 8);
    const double expected[] = {0, 1, 0, -1, 0, 1, 0, -1};
    for (int i = 0; i < 8; ++i) CHECK(s[i] == doctest::Approx(expected[i]).scale(1.0));

    for (double v : generate_series(SeriesRecipe{}, 20)) CHECK(v == 0.0);

    SeriesRecipe ones;
    ones.a_exp = 1.0;
    for (double v : generate_series(ones, 20)) CHECK(v == 1.0);

    SeriesRecipe logs;
    logs.a_log = 2.0;
    logs.log_offset = 0.5;
    CHECK(generate_series(logs, 4)[3] == doctest::Approx(2.0 * std::log(4.5)));

    SeriesRecipe blowup;
    blowup.a_exp = 1.0;
    blowup.exp_rate = 50.0;
    CHECK_THROWS_AS(generate_series(blowup, 100), RangeError);
}

TEST_CASE("sampled recipes stay inside their ranges") {
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        const SeriesRecipe r = sample_recipe(rng);
        CHECK(r.a_sin >= 0.5);
        CHECK(r.a_sin <= 2.0);
        CHECK(1.0 / r.frequency >= 5.0);
        CHECK(1.0 / r.frequency <= 25.0);
        CHECK(std::abs(r.exp_rate) <= 0.02);
        CHECK(r.log_offset >= 0.0);
    }
}

TEST_CASE("colored noise basics") {
    Rng rng(2);
    for (double v : colored_noise(64, 1.0, 0.0, rng)) CHECK(v == 0.0);
    const auto n = colored_noise(1000, 1.0, 0.3, rng);
    CHECK(std::abs(oracle::mean(n)) < 1e-12);
    CHECK(rms(n) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK_THROWS_AS(colored_noise(64, -0.5, 1.0, rng), std::invalid_argument);
    CHECK_THROWS_AS(colored_noise(1, 1.0, 1.0, rng), std::invalid_argument);
}

TEST_CASE("white noise has no lag-1 correlation") {
    Rng rng(3);
    const auto n = colored_noise(1 << 14, 0.0, 1.0, rng);
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t < n.size(); ++t) {
        den += n[t] * n[t];
        if (t + 1 < n.size()) num += n[t] * n[t + 1];
    }
    CHECK(std::abs(num / den) < 0.05);
}

TEST_CASE("pink noise has a -1 spectral slope") {
    Rng rng(4);
    const std::size_t len = 1 << 14;
    const auto n = colored_noise(len, 1.0, 1.0, rng);
    const auto p = oracle::periodogram(n);
    std::vector<double> lf, lp;
    for (std::size_t k = len / 64; k < len / 8; ++k) {
        lf.push_back(std::log(static_cast<double>(k) / static_cast<double>(len)));
        lp.push_back(std::log(p[k]));
    }
    const double slope = oracle::slope(lf, lp);
    CHECK(slope >= -1.3);
    CHECK(slope <= -0.7);
}

TEST_CASE("window_dataset counts and splits") {
    CHECK(window_count(52, 50) == 2);
    CHECK(window_count(50, 50) == 0);

    const std::vector<std::vector<double>> one{std::vector<double>(52, 1.0)};
    const DatasetSplits s = window_dataset(one, 50, {2, 0, 0});
    CHECK(s.train.size() == 2);

    std::vector<std::vector<double>> pool(10);
    for (std::size_t i = 0; i < pool.size(); ++i) {
        for (std::size_t t = 0; t < 15; ++t) pool[i].push_back(static_cast<double>(100 * i + t));
    }
    const DatasetSplits d = window_dataset(pool, 5, {25, 10, 10});
    CHECK(d.train.size() == 25);
    CHECK(d.val.size() == 10);
    CHECK(d.test.size() == 10);
    CHECK(d.train.end_source <= d.val.first_source);
    CHECK(d.val.end_source <= d.test.first_source);
    // One-step-ahead target.
    CHECK(d.train.targets[0] == 5.0);
    CHECK(d.train.inputs[4] == 4.0);

    try {
        window_dataset(pool, 5, {60, 30, 30});
        FAIL("expected shortfall");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("short by") != std::string::npos);
    }
}

TEST_CASE("desk-scale split sizes") {
    CHECK(scaled_split(0.1) == SplitSizes{5500, 500, 1000});
    CHECK(scaled_split(1.0) == kFullScaleSplit);
    CHECK_THROWS_AS(scaled_split(0.00001), ConfigError);
    CHECK_THROWS_AS(scaled_split(0.0), ConfigError);

    SyntheticOptions o;
    o.seed = 5;
    const SyntheticData data = generate_synthetic(o);
    CHECK(data.splits.train.size() == 5500);
    CHECK(data.splits.val.size() == 500);
    CHECK(data.splits.test.size() == 1000);
    CHECK(data.splits.train.end_source <= data.splits.val.first_source);
    CHECK(data.splits.val.end_source <= data.splits.test.first_source);
}

TEST_CASE("synthetic data is deterministic and noise is additive") {
    SyntheticOptions o;
    o.sizes = {200, 50, 50};
    o.noisy = true;
    o.seed = 6;
    const SyntheticData a = generate_synthetic(o);
    const SyntheticData b = generate_synthetic(o);
    CHECK(a.splits.train.inputs == b.splits.train.inputs);
    CHECK(a.splits.test.targets == b.splits.test.targets);

    REQUIRE(a.noise.size() == a.clean.size());
    // First training window is the first `window` samples of series 0.
    for (std::size_t t = 0; t < o.window; ++t) {
        CHECK(a.splits.train.inputs[t] == a.clean[0][t] + a.noise[0][t]);
    }
    CHECK(a.splits.train.targets[0] == a.clean[0][o.window] + a.noise[0][o.window]);

    o.noisy = false;
    const SyntheticData clean = generate_synthetic(o);
    CHECK(clean.clean == a.clean);

    // 10 dB: noise RMS is the clean RMS over sqrt(10).
    for (std::size_t i = 0; i < a.clean.size(); ++i) {
        CHECK(rms(a.noise[i]) == doctest::Approx(rms(a.clean[i]) / std::sqrt(10.0)).epsilon(1e-9));
    }
}

TEST_CASE("standardize fits on the training split") {
    SyntheticOptions o;
    o.sizes = {200, 50, 50};
    o.seed = 7;
    DatasetSplits s = generate_synthetic(o).splits;
    const double raw = s.val.inputs[3];
    const Standardizer z = standardize(s);
    CHECK(oracle::mean(s.train.inputs) == doctest::Approx(0.0).scale(1.0));
    CHECK(oracle::variance(s.train.inputs) == doctest::Approx(1.0));
    CHECK(s.val.inputs[3] == doctest::Approx((raw - z.mean) / z.scale));
}

TEST_CASE("dataset CSV and sidecar round-trip") {
    const auto dir = oracle::temp_dir("data_roundtrip");
    SyntheticOptions o;
    o.sizes = {100, 50, 50};
    o.noisy = true;
    o.seed = 8;
    const SyntheticData data = generate_synthetic(o);
    save_synthetic(dir, data, "synthetic-noise");
    const DatasetSplits back = load_dataset_dir(dir);
    CHECK(back.train.inputs == data.splits.train.inputs);
    CHECK(back.test.targets == data.splits.test.targets);
    CHECK(back.val.first_source == data.splits.val.first_source);

    const std::string first = oracle::slurp(dir / "dataset.csv");
    save_synthetic(dir, generate_synthetic(o), "synthetic-noise");
    CHECK(oracle::slurp(dir / "dataset.csv") == first);
    CHECK(first.rfind("x0,x1,", 0) == 0);

    CHECK_THROWS_AS(load_dataset_dir(dir / "missing"), IoError);
}

TEST_CASE("idx round-trip for every element type") {
    const std::vector<std::uint8_t> u8 = idx_bytes(0x08, {2, 3}, {1, 2, 3, 250, 254, 255});
    const IdxTensor t = parse_idx(u8);
    CHECK(t.dims() == std::vector<std::uint32_t>{2, 3});
    CHECK(t.value(3) == 250.0);
    CHECK(encode_idx(t) == u8);

    CHECK(parse_idx(idx_bytes(0x09, {2}, {0xFF, 0x7F})).value(0) == -1.0);
    CHECK(parse_idx(idx_bytes(0x0B, {1}, {0xFF, 0xFE})).value(0) == -2.0);
    CHECK(parse_idx(idx_bytes(0x0C, {1}, {0x00, 0x01, 0x00, 0x00})).value(0) == 65536.0);
    CHECK(parse_idx(idx_bytes(0x0D, {1}, {0x3F, 0xC0, 0x00, 0x00})).value(0) == 1.5);
    CHECK(parse_idx(idx_bytes(0x0E, {1}, {0xC0, 0x04, 0, 0, 0, 0, 0, 0})).value(0) == -2.5);
}

TEST_CASE("idx errors are distinct and carry offsets") {
    std::size_t off = 0;
    CHECK(parse_error_kind(idx_bytes(0x08, {10}, std::vector<std::uint8_t>(9)), &off) == IdxErrorKind::Truncated);
    CHECK(off == 8 + 9);

    auto bad = idx_bytes(0x08, {1}, {0});
    bad[1] = 7;
    CHECK(parse_error_kind(bad, &off) == IdxErrorKind::BadMagic);
    CHECK(off == 1);
    CHECK(parse_error_kind(idx_bytes(0x0A, {1}, {0}), &off) == IdxErrorKind::UnsupportedType);
    CHECK(off == 2);
    CHECK(parse_error_kind(idx_bytes(0x08, {}, {})) == IdxErrorKind::BadDimensions);
    CHECK(parse_error_kind(idx_bytes(0x08, {2}, {1, 2, 3}), &off) == IdxErrorKind::TrailingBytes);
    CHECK(off == 10);
    CHECK(parse_error_kind({0, 0}) == IdxErrorKind::Truncated);

    auto dims_cut = idx_bytes(0x08, {3, 3}, {});
    dims_cut.resize(9);
    CHECK(parse_error_kind(dims_cut, &off) == IdxErrorKind::Truncated);
    CHECK(off == 9);

    CHECK_THROWS_AS(read_idx_file("/nonexistent/file.idx"), IoError);
}

TEST_CASE("idx parser survives random bytes") {
    Rng rng(9);
    for (int i = 0; i < 2000; ++i) {
        std::vector<std::uint8_t> bytes(rng.below(40));
        for (auto& b : bytes) b = static_cast<std::uint8_t>(rng.below(256));
        if (bytes.size() >= 4 && rng.bernoulli(0.5)) {
            bytes[0] = bytes[1] = 0;
            bytes[2] = 0x08;
            bytes[3] = static_cast<std::uint8_t>(rng.below(4));
        }
        try {
            const IdxTensor t = parse_idx(bytes);
            CHECK(t.payload().size() == t.element_count() * element_size(t.type()));
        } catch (const IdxParseError&) {
        }
    }
}

TEST_CASE("real MNIST files when present") {
    const char* env = std::getenv("WMM_MNIST_DIR");
    const std::filesystem::path dir = env ? env : "data/mnist";
    if (!std::filesystem::exists(dir / "train-images-idx3-ubyte")) {
        MESSAGE("MNIST files not found; skipping");
        return;
    }
    CHECK(read_idx_file(dir / "train-images-idx3-ubyte").dims() == std::vector<std::uint32_t>{60000, 28, 28});
    CHECK(read_idx_file(dir / "t10k-images-idx3-ubyte").dims() == std::vector<std::uint32_t>{10000, 28, 28});
}

TEST_CASE("mnist loader on a synthetic fixture") {
    const auto dir = oracle::temp_dir("mnist_fixture");
    auto write = [&](const char* name, const std::vector<std::uint8_t>& bytes) {
        std::ofstream os(dir / name, std::ios::binary);
        os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    };
    std::vector<std::uint8_t> pixels(6 * 4), labels(6);
    for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = static_cast<std::uint8_t>(i * 10);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<std::uint8_t>(i);
    write("train-images-idx3-ubyte", idx_bytes(0x08, {6, 2, 2}, pixels));
    write("train-labels-idx1-ubyte", idx_bytes(0x08, {6}, labels));
    write("t10k-images-idx3-ubyte", idx_bytes(0x08, {6, 2, 2}, pixels));
    write("t10k-labels-idx1-ubyte", idx_bytes(0x08, {6}, labels));

    const DatasetSplits s = load_mnist(dir, {3, 2, 4});
    CHECK(s.train.size() == 3);
    CHECK(s.val.size() == 2);
    CHECK(s.test.size() == 4);
    CHECK(s.train.features == 4);
    CHECK(s.train.inputs[1] == doctest::Approx(10.0 / 255.0));
    CHECK(s.val.targets[0] == 4.0); // validation is the tail of the training file
    CHECK(s.train.end_source <= s.val.first_source);
    CHECK_THROWS_AS(load_mnist(dir, {5, 2, 1}), ConfigError);
}
