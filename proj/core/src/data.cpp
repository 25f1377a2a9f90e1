#include "wmm/data.hpp"

#include <fftw3.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "wmm/error.hpp"
#include "wmm/idx.hpp"
#include "wmm/stats.hpp"

namespace wmm {

namespace {

// FFTW planning is not thread-safe; execution is.
std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

void append_windows(DataSplit& split, const std::vector<double>& series, std::size_t window,
                    std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
        split.inputs.insert(split.inputs.end(), series.begin() + static_cast<std::ptrdiff_t>(i),
                            series.begin() + static_cast<std::ptrdiff_t>(i + window));
        split.targets.push_back(series[i + window]);
    }
}

nlohmann::json recipe_json(const SeriesRecipe& r) {
    return {{"a_sin", r.a_sin},         {"a_exp", r.a_exp},   {"a_log", r.a_log},
            {"frequency", r.frequency}, {"phase", r.phase},   {"exp_rate", r.exp_rate},
            {"log_offset", r.log_offset}, {"step", r.step}};
}

} // namespace

std::vector<double> generate_series(const SeriesRecipe& recipe, std::size_t length) {
    if (length == 0) {
        throw std::invalid_argument("generate_series: length must be positive");
    }
    if (recipe.log_offset < 0.0) {
        throw std::invalid_argument("generate_series: log_offset must be >= 0");
    }
    std::vector<double> s(length);
    for (std::size_t n = 0; n < length; ++n) {
        const double t = static_cast<double>(n) * recipe.step;
        double v = 0.0;
        if (recipe.a_sin != 0.0) {
            v += recipe.a_sin * std::sin(2.0 * std::numbers::pi * recipe.frequency * t + recipe.phase);
        }
        if (recipe.a_exp != 0.0) {
            v += recipe.a_exp * std::exp(recipe.exp_rate * t);
        }
        if (recipe.a_log != 0.0) {
            v += recipe.a_log * std::log(t + 1.0 + recipe.log_offset);
        }
        if (!std::isfinite(v)) {
            throw RangeError("generate_series: non-finite sample at index " + std::to_string(n));
        }
        s[n] = v;
    }
    return s;
}

SeriesRecipe sample_recipe(Rng& rng) {
    SeriesRecipe r;
    r.a_sin = rng.uniform(0.5, 2.0);
    r.a_exp = rng.uniform(0.5, 2.0);
    r.a_log = rng.uniform(0.5, 2.0);
    r.frequency = 1.0 / rng.uniform(5.0, 25.0);
    r.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    r.exp_rate = rng.uniform(-0.02, 0.02);
    r.log_offset = rng.uniform(0.0, 10.0);
    r.step = 1.0;
    return r;
}

double rms(std::span<const double> values) {
    if (values.empty()) {
        return 0.0;
    }
    double acc = 0.0;
    for (double v : values) {
        acc += v * v;
    }
    return std::sqrt(acc / static_cast<double>(values.size()));
}

std::vector<double> colored_noise(std::size_t length, double alpha, double amplitude, Rng& rng) {
    if (length < 2) {
        throw std::invalid_argument("colored_noise: length must be >= 2");
    }
    if (!(alpha >= 0.0)) {
        throw std::invalid_argument("colored_noise: spectral exponent must be >= 0");
    }
    if (!(amplitude >= 0.0)) {
        throw std::invalid_argument("colored_noise: amplitude must be >= 0");
    }
    std::vector<double> out(length, 0.0);
    if (amplitude == 0.0) {
        return out;
    }

    const std::size_t bins = length / 2 + 1;
    std::vector<double> white(length);
    for (double& v : white) {
        v = rng.normal();
    }
    fftw_complex* spectrum = fftw_alloc_complex(bins);
    fftw_plan forward;
    fftw_plan inverse;
    {
        std::lock_guard lock(fftw_planner_mutex());
        forward = fftw_plan_dft_r2c_1d(static_cast<int>(length), white.data(), spectrum,
                                       FFTW_ESTIMATE);
        inverse = fftw_plan_dft_c2r_1d(static_cast<int>(length), spectrum, out.data(),
                                       FFTW_ESTIMATE);
    }
    fftw_execute(forward);
    // Amplitude scaling f^(-alpha/2) gives power f^(-alpha).
    spectrum[0][0] = 0.0;
    spectrum[0][1] = 0.0;
    for (std::size_t k = 1; k < bins; ++k) {
        const double f = static_cast<double>(k) / static_cast<double>(length);
        const double gain = std::pow(f, -alpha / 2.0);
        spectrum[k][0] *= gain;
        spectrum[k][1] *= gain;
    }
    fftw_execute(inverse);
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(forward);
        fftw_destroy_plan(inverse);
    }
    fftw_free(spectrum);

    const double mean = std::accumulate(out.begin(), out.end(), 0.0) / static_cast<double>(length);
    for (double& v : out) {
        v -= mean;
    }
    const double current = rms(out);
    if (current > 0.0) {
        for (double& v : out) {
            v *= amplitude / current;
        }
    }
    return out;
}

SplitSizes scaled_split(double scale, SplitSizes full) {
    if (!(scale > 0.0)) {
        throw ConfigError("scale must be positive");
    }
    auto scaled = [scale](std::size_t n) {
        return static_cast<std::size_t>(std::llround(static_cast<double>(n) * scale));
    };
    SplitSizes s{scaled(full.train), scaled(full.val), scaled(full.test)};
    if (s.train == 0 || s.val == 0 || s.test == 0) {
        throw ConfigError("scale " + format_real(scale) + " leaves an empty split (train " +
                          std::to_string(s.train) + ", val " + std::to_string(s.val) + ", test " +
                          std::to_string(s.test) + ")");
    }
    return s;
}

std::size_t window_count(std::size_t length, std::size_t window) {
    return length > window ? length - window : 0;
}

DatasetSplits window_dataset(std::span<const std::vector<double>> pool, std::size_t window,
                             SplitSizes sizes) {
    if (window == 0) {
        throw std::invalid_argument("window_dataset: window must be positive");
    }
    DatasetSplits out;
    DataSplit* splits[] = {&out.train, &out.val, &out.test};
    const std::size_t wanted[] = {sizes.train, sizes.val, sizes.test};
    const char* names[] = {"train", "val", "test"};

    std::size_t next = 0;
    for (int s = 0; s < 3; ++s) {
        DataSplit& split = *splits[s];
        split.features = window;
        split.target_width = 1;
        split.first_source = next;
        split.inputs.reserve(wanted[s] * window);
        split.targets.reserve(wanted[s]);
        std::size_t have = 0;
        while (have < wanted[s]) {
            if (next >= pool.size()) {
                throw std::invalid_argument(
                    std::string("window_dataset: insufficient data for split ") + names[s] +
                    ": short by " + std::to_string(wanted[s] - have) + " windows");
            }
            const std::size_t take = std::min(window_count(pool[next].size(), window),
                                              wanted[s] - have);
            append_windows(split, pool[next], window, take);
            have += take;
            ++next;
        }
        split.end_source = next;
    }
    return out;
}

std::size_t series_needed(const SplitSizes& sizes, std::size_t windows_per_series) {
    if (windows_per_series == 0) {
        throw std::invalid_argument("series_needed: windows_per_series must be positive");
    }
    return ceil_div(sizes.train, windows_per_series) + ceil_div(sizes.val, windows_per_series) +
           ceil_div(sizes.test, windows_per_series);
}

SyntheticData generate_synthetic(const SyntheticOptions& options) {
    SyntheticData data;
    data.options = options;
    const std::size_t n_series = series_needed(options.sizes, options.windows_per_series);
    const std::size_t length = options.window + options.windows_per_series;
    const Rng root(options.seed);

    std::vector<std::vector<double>> pool;
    pool.reserve(n_series);
    for (std::size_t i = 0; i < n_series; ++i) {
        Rng recipe_rng = root.derive("recipe", i);
        SeriesRecipe recipe = sample_recipe(recipe_rng);
        std::vector<double> clean = generate_series(recipe, length);
        std::vector<double> series = clean;
        if (options.noisy) {
            Rng noise_rng = root.derive("noise", i);
            const double amplitude = rms(clean) * std::pow(10.0, -options.snr_db / 20.0);
            std::vector<double> noise = colored_noise(length, options.noise_alpha, amplitude,
                                                      noise_rng);
            for (std::size_t t = 0; t < length; ++t) {
                series[t] += noise[t];
            }
            data.noise.push_back(std::move(noise));
        }
        data.recipes.push_back(recipe);
        data.clean.push_back(std::move(clean));
        pool.push_back(std::move(series));
    }
    data.splits = window_dataset(pool, options.window, options.sizes);
    return data;
}

Standardizer standardize(DatasetSplits& splits) {
    const auto& x = splits.train.inputs;
    if (x.empty()) {
        throw std::invalid_argument("standardize: empty training split");
    }
    Standardizer st;
    st.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x) {
        var += (v - st.mean) * (v - st.mean);
    }
    var /= static_cast<double>(x.size());
    st.scale = var > 0.0 ? std::sqrt(var) : 1.0;
    for (DataSplit* s : {&splits.train, &splits.val, &splits.test}) {
        for (double& v : s->inputs) v = st.apply(v);
        for (double& v : s->targets) v = st.apply(v);
    }
    return st;
}

void write_dataset_csv(const std::filesystem::path& path, const DatasetSplits& splits) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw IoError(path.string(), "cannot open for writing");
    }
    const std::size_t w = splits.train.features;
    for (std::size_t i = 0; i < w; ++i) {
        os << 'x' << i << ',';
    }
    os << "y\n";
    for (const DataSplit* s : {&splits.train, &splits.val, &splits.test}) {
        if (s->features != w || s->target_width != 1) {
            throw std::invalid_argument("write_dataset_csv: inconsistent split shapes");
        }
        for (std::size_t r = 0; r < s->size(); ++r) {
            for (std::size_t i = 0; i < w; ++i) {
                os << format_real(s->inputs[r * w + i]) << ',';
            }
            os << format_real(s->targets[r]) << '\n';
        }
    }
    if (!os) {
        throw IoError(path.string(), "write failed");
    }
}

DatasetSplits read_dataset_csv(const std::filesystem::path& path, SplitSizes sizes) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(path.string(), "cannot open dataset CSV");
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw IoError(path.string(), "missing header");
    }
    const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
    if (columns < 2) {
        throw IoError(path.string(), "header needs at least one input and one target column");
    }
    const std::size_t w = columns - 1;

    DatasetSplits out;
    DataSplit* splits[] = {&out.train, &out.val, &out.test};
    const std::size_t wanted[] = {sizes.train, sizes.val, sizes.test};
    std::size_t row = 0;
    for (int s = 0; s < 3; ++s) {
        DataSplit& split = *splits[s];
        split.features = w;
        split.first_source = row;
        for (std::size_t k = 0; k < wanted[s]; ++k, ++row) {
            if (!std::getline(in, line)) {
                throw IoError(path.string(), "expected " +
                                                 std::to_string(sizes.train + sizes.val + sizes.test) +
                                                 " rows, found " + std::to_string(row));
            }
            const char* p = line.data();
            const char* end = line.data() + line.size();
            for (std::size_t c = 0; c < columns; ++c) {
                double v = 0.0;
                auto [next, ec] = std::from_chars(p, end, v);
                if (ec != std::errc{}) {
                    throw IoError(path.string(), "bad number on data row " + std::to_string(row));
                }
                (c + 1 < columns ? split.inputs : split.targets).push_back(v);
                p = next;
                if (c + 1 < columns) {
                    if (p == end || *p != ',') {
                        throw IoError(path.string(), "short data row " + std::to_string(row));
                    }
                    ++p;
                }
            }
        }
        split.end_source = row;
    }
    return out;
}

void save_synthetic(const std::filesystem::path& dir, const SyntheticData& data,
                    const std::string& task) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError(dir.string(), "cannot create directory: " + ec.message());
    }
    write_dataset_csv(dir / "dataset.csv", data.splits);

    const auto& o = data.options;
    nlohmann::json meta;
    meta["task"] = task;
    meta["seed"] = o.seed;
    meta["window"] = o.window;
    meta["windows_per_series"] = o.windows_per_series;
    meta["noise"] = {{"enabled", o.noisy}, {"alpha", o.noise_alpha}, {"snr_db", o.snr_db}};
    const auto& s = data.splits;
    const std::size_t a = s.train.size();
    const std::size_t b = a + s.val.size();
    const std::size_t c = b + s.test.size();
    meta["splits"] = {
        {"train", {{"rows", {0, a}}, {"series", {s.train.first_source, s.train.end_source}}}},
        {"val", {{"rows", {a, b}}, {"series", {s.val.first_source, s.val.end_source}}}},
        {"test", {{"rows", {b, c}}, {"series", {s.test.first_source, s.test.end_source}}}},
    };
    nlohmann::json recipes = nlohmann::json::array();
    for (std::size_t i = 0; i < data.recipes.size(); ++i) {
        nlohmann::json r = recipe_json(data.recipes[i]);
        r["recipe_seed"] = derive_seed(o.seed, "recipe", i);
        if (o.noisy) {
            r["noise_seed"] = derive_seed(o.seed, "noise", i);
        }
        recipes.push_back(std::move(r));
    }
    meta["recipes"] = std::move(recipes);

    const auto path = dir / "dataset.json";
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw IoError(path.string(), "cannot open for writing");
    }
    os << meta.dump(2) << '\n';
    if (!os) {
        throw IoError(path.string(), "write failed");
    }
}

DatasetSplits load_dataset_dir(const std::filesystem::path& dir) {
    const auto meta_path = dir / "dataset.json";
    std::ifstream in(meta_path);
    if (!in) {
        throw IoError(meta_path.string(), "cannot open dataset sidecar");
    }
    nlohmann::json meta;
    try {
        in >> meta;
        const auto& sp = meta.at("splits");
        auto rows = [&](const char* name) {
            const auto& r = sp.at(name).at("rows");
            return r.at(1).get<std::size_t>() - r.at(0).get<std::size_t>();
        };
        SplitSizes sizes{rows("train"), rows("val"), rows("test")};
        DatasetSplits out = read_dataset_csv(dir / "dataset.csv", sizes);
        // Source ranges refer to series, not rows.
        DataSplit* splits[] = {&out.train, &out.val, &out.test};
        const char* names[] = {"train", "val", "test"};
        for (int s = 0; s < 3; ++s) {
            const auto& series = sp.at(names[s]).at("series");
            splits[s]->first_source = series.at(0).get<std::size_t>();
            splits[s]->end_source = series.at(1).get<std::size_t>();
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(meta_path.string(), std::string("malformed sidecar: ") + e.what());
    }
}

DatasetSplits load_mnist(const std::filesystem::path& dir, SplitSizes sizes) {
    const IdxTensor train_x = read_idx_file(dir / "train-images-idx3-ubyte");
    const IdxTensor train_y = read_idx_file(dir / "train-labels-idx1-ubyte");
    const IdxTensor test_x = read_idx_file(dir / "t10k-images-idx3-ubyte");
    const IdxTensor test_y = read_idx_file(dir / "t10k-labels-idx1-ubyte");

    auto check = [&](const IdxTensor& x, const IdxTensor& y, const char* which) {
        if (x.dims().size() != 3 || y.dims().size() != 1 || x.dims()[0] != y.dims()[0]) {
            throw IoError((dir / which).string(), "unexpected MNIST tensor shapes");
        }
    };
    check(train_x, train_y, "train-images-idx3-ubyte");
    check(test_x, test_y, "t10k-images-idx3-ubyte");

    const std::size_t n_train_file = train_x.dims()[0];
    if (sizes.train + sizes.val > n_train_file || sizes.test > test_x.dims()[0]) {
        throw ConfigError("requested MNIST split exceeds available records");
    }
    const std::size_t features = std::size_t{train_x.dims()[1]} * train_x.dims()[2];

    auto cut = [features](const IdxTensor& x, const IdxTensor& y, std::size_t first,
                          std::size_t count) {
        DataSplit s;
        s.features = features;
        s.target_width = 1;
        s.first_source = first;
        s.end_source = first + count;
        s.inputs.resize(count * features);
        s.targets.resize(count);
        for (std::size_t r = 0; r < count; ++r) {
            for (std::size_t i = 0; i < features; ++i) {
                s.inputs[r * features + i] = x.value((first + r) * features + i) / 255.0;
            }
            s.targets[r] = y.value(first + r);
        }
        return s;
    };
    DatasetSplits out;
    out.train = cut(train_x, train_y, 0, sizes.train);
    out.val = cut(train_x, train_y, n_train_file - sizes.val, sizes.val);
    out.test = cut(test_x, test_y, 0, sizes.test);
    return out;
}

} // namespace wmm
