#include "wmm/hyperopt.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

#include <json.hpp>

#include "wmm/error.hpp"
#include "wmm/stats.hpp"

namespace wmm {

namespace {

using nlohmann::json;

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_double(const json& j, const char* key) {
    const auto& v = j.at(key);
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
}

std::string csv_opt(const std::optional<double>& v) { return v ? format_real(*v) : std::string(); }

std::optional<double> metric_of(const TrialRecord& r, MetricField field) {
    return field == MetricField::Test ? r.test_metric : r.val_metric;
}

void write_table(const std::filesystem::path& path, std::span<const TrialRecord> records) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError(tmp.string(), "cannot open trial table for writing");
        for (const TrialRecord& r : records) {
            os << to_json_line(r) << '\n';
        }
        if (!os) throw IoError(tmp.string(), "write failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError(path.string(), "cannot replace trial table: " + ec.message());
}

} // namespace

std::string_view to_string(SearchMethod method) {
    switch (method) {
    case SearchMethod::None: return "none";
    case SearchMethod::Reinit: return "reinit";
    case SearchMethod::Shuffle: return "shuffle";
    }
    return "?";
}

SearchMethod parse_search_method(std::string_view name) {
    if (name == "none") return SearchMethod::None;
    if (name == "reinit") return SearchMethod::Reinit;
    if (name == "shuffle") return SearchMethod::Shuffle;
    throw ConfigError("unknown search method '" + std::string(name) +
                      "' (expected none|reinit|shuffle)");
}

void validate(const SearchSpace& space) {
    for (const auto& [name, r] : {std::pair{"p_range", space.p}, std::pair{"c_range", space.c}}) {
        if (!(r.lo > 0.0) || !(r.hi >= r.lo)) {
            throw ConfigError(std::string("search.") + name + " must satisfy 0 < lo <= hi");
        }
    }
    if (space.p.hi > 1.0) throw ConfigError("search.p_range must lie within (0, 1]");
    if (space.c.hi > 1.0) throw ConfigError("search.c_range must lie within (0, 1]");
    if (space.targets.empty()) throw ConfigError("search.targets must not be empty");
    if (!(space.density >= 0.0 && space.density <= 1.0)) {
        throw ConfigError("search.density must lie in [0, 1]");
    }
    if (space.method == SearchMethod::None && space.l2_grid.empty()) {
        throw ConfigError("search.l2_grid must not be empty for the reference campaign");
    }
    for (double l2 : space.l2_grid) {
        if (!(l2 >= 0.0)) throw ConfigError("search.l2_grid values must be >= 0");
    }
}

double sample_log_uniform(Range range, Rng& rng) {
    const double u = rng.uniform();
    if (range.lo == range.hi) {
        return range.lo;
    }
    const double v = std::exp(std::log(range.lo) + u * (std::log(range.hi) - std::log(range.lo)));
    return std::clamp(v, range.lo, range.hi);
}

std::pair<WmmConfig, std::uint64_t> sample_config(const SearchSpace& space, Rng& rng) {
    if (space.targets.empty()) {
        throw ConfigError("search.targets must not be empty");
    }
    WmmConfig cfg;
    cfg.method = space.method == SearchMethod::Shuffle ? WmmMethod::Shuffle : WmmMethod::Reinit;
    cfg.density = space.density;
    cfg.p = sample_log_uniform(space.p, rng);
    cfg.c = sample_log_uniform(space.c, rng);
    cfg.targets = {space.targets[static_cast<std::size_t>(rng.below(space.targets.size()))]};
    const std::uint64_t seed = rng.next_u64();
    return {std::move(cfg), seed};
}

TrialPlan plan_trial(const SearchSpace& space, std::uint64_t master_seed, std::size_t index) {
    Rng rng(derive_seed(master_seed, "trial", index));
    auto [cfg, seed] = sample_config(space, rng);
    TrialPlan plan;
    plan.index = index;
    plan.method = space.method;
    plan.wmm = std::move(cfg);
    plan.seed = seed;
    plan.l2 = space.method == SearchMethod::None ? space.l2_grid[index % space.l2_grid.size()]
                                                 : 0.0;
    return plan;
}

TrialRecord make_record(const TrialPlan& plan, const TrialResult& result) {
    TrialRecord r;
    r.trial = plan.index;
    r.method = plan.method;
    if (plan.method != SearchMethod::None) {
        r.p = plan.wmm.p;
        r.c = plan.wmm.c;
        r.target = plan.wmm.targets.empty() ? std::string() : plan.wmm.targets.front();
    }
    r.l2 = plan.l2;
    r.seed = plan.seed;
    r.status = result.status;
    if (result.status == RunStatus::Ok) {
        r.val_metric = result.val_metric;
        r.test_metric = result.test_metric;
        r.entropy_bits = result.entropy_bits;
    }
    return r;
}

std::string to_json_line(const TrialRecord& r) {
    json j;
    j["trial"] = r.trial;
    j["method"] = std::string(to_string(r.method));
    j["p"] = opt(r.p);
    j["c"] = opt(r.c);
    j["p_times_c"] = opt(r.p_times_c());
    j["target"] = r.target;
    j["l2"] = r.l2;
    j["seed"] = r.seed;
    j["val_metric"] = opt(r.val_metric);
    j["test_metric"] = opt(r.test_metric);
    j["entropy_bits"] = opt(r.entropy_bits);
    j["status"] = std::string(to_string(r.status));
    return j.dump();
}

TrialRecord parse_trial_line(std::string_view line) {
    try {
        const json j = json::parse(line);
        TrialRecord r;
        r.trial = j.at("trial").get<std::size_t>();
        r.method = parse_search_method(j.at("method").get<std::string>());
        r.p = opt_double(j, "p");
        r.c = opt_double(j, "c");
        r.target = j.at("target").get<std::string>();
        r.l2 = j.at("l2").get<double>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.val_metric = opt_double(j, "val_metric");
        r.test_metric = opt_double(j, "test_metric");
        r.entropy_bits = opt_double(j, "entropy_bits");
        const auto status = j.at("status").get<std::string>();
        if (status != "ok" && status != "diverged") {
            throw ConfigError("unknown trial status '" + status + "'");
        }
        r.status = status == "ok" ? RunStatus::Ok : RunStatus::Diverged;
        return r;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed trial record: ") + e.what());
    }
}

void write_trials_csv(std::ostream& os, std::span<const TrialRecord> records) {
    os << "trial,method,p,c,p_times_c,target,seed,val_metric,test_metric,status\n";
    for (const TrialRecord& r : records) {
        os << r.trial << ',' << to_string(r.method) << ',' << csv_opt(r.p) << ',' << csv_opt(r.c)
           << ',' << csv_opt(r.p_times_c()) << ',' << r.target << ',' << r.seed << ','
           << csv_opt(r.val_metric) << ',' << csv_opt(r.test_metric) << ','
           << to_string(r.status) << '\n';
    }
}

std::size_t default_thread_count() {
    if (const char* env = std::getenv("WMM_LAB_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) {
            return static_cast<std::size_t>(v);
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<TrialRecord> read_trial_table(const std::filesystem::path& path) {
    std::vector<TrialRecord> out;
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        return out;
    }
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            out.push_back(parse_trial_line(line));
        } catch (const ConfigError&) {
            // A torn final line from an interrupted write; the trial reruns.
            break;
        }
    }
    return out;
}

std::vector<TrialRecord> run_search(const SearchSpace& space, const SearchOptions& options,
                                    const TrialFn& run_trial) {
    validate(space);
    if (options.budget == 0) {
        throw ConfigError("search budget must be >= 1");
    }

    std::map<std::size_t, TrialRecord> done;
    const bool persist = !options.table_path.empty();
    if (persist) {
        for (TrialRecord& r : read_trial_table(options.table_path)) {
            if (r.trial >= options.budget) continue;
            const TrialPlan plan = plan_trial(space, options.master_seed, r.trial);
            if (r.seed != plan.seed || r.method != plan.method) {
                throw ConfigError(options.table_path.string() +
                                  ": existing trial table belongs to a different campaign");
            }
            done.emplace(r.trial, std::move(r));
        }
        // Drop torn or foreign lines before appending.
        std::vector<TrialRecord> kept;
        for (const auto& [_, r] : done) kept.push_back(r);
        write_table(options.table_path, kept);
    }

    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < options.budget; ++i) {
        if (!done.contains(i)) todo.push_back(i);
    }
    if (options.stop_after && *options.stop_after < todo.size()) {
        todo.resize(*options.stop_after);
    }

    std::ofstream table;
    if (persist) {
        table.open(options.table_path, std::ios::binary | std::ios::app);
        if (!table) throw IoError(options.table_path.string(), "cannot open trial table");
    }

    std::mutex mu;
    std::condition_variable cv;
    std::map<std::size_t, TrialRecord> pending; // finished, not yet appended
    std::size_t finished = 0;
    std::exception_ptr failure;
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (;;) {
            const std::size_t slot = next.fetch_add(1);
            if (slot >= todo.size()) return;
            {
                std::lock_guard lock(mu);
                if (failure) return;
            }
            try {
                const TrialPlan plan = plan_trial(space, options.master_seed, todo[slot]);
                TrialRecord rec = make_record(plan, run_trial(plan));
                std::lock_guard lock(mu);
                pending.emplace(slot, std::move(rec));
                ++finished;
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
                ++finished;
            }
            cv.notify_all();
        }
    };

    const std::size_t n_threads = std::max<std::size_t>(1, std::min(options.threads, todo.size()));
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) {
        pool.emplace_back(worker);
    }

    // Single collector: append in todo order so the table stays sorted.
    std::size_t written = 0;
    {
        std::unique_lock lock(mu);
        while (written < todo.size()) {
            cv.wait(lock, [&] { return pending.contains(written) || failure || finished == todo.size(); });
            if (failure) break;
            if (!pending.contains(written)) {
                if (finished == todo.size()) break;
                continue;
            }
            TrialRecord rec = std::move(pending.at(written));
            pending.erase(written);
            if (persist) {
                table << to_json_line(rec) << '\n';
                table.flush();
            }
            done.emplace(rec.trial, std::move(rec));
            ++written;
        }
    }
    pool.clear();
    if (failure) {
        std::rethrow_exception(failure);
    }

    std::vector<TrialRecord> out;
    out.reserve(done.size());
    for (auto& [_, r] : done) out.push_back(std::move(r));
    if (persist) {
        table.close();
        write_table(options.table_path, out);
    }
    return out;
}

std::size_t count_ok(std::span<const TrialRecord> trials) {
    return static_cast<std::size_t>(std::count_if(trials.begin(), trials.end(), [](const auto& r) {
        return r.status == RunStatus::Ok && r.val_metric && r.test_metric;
    }));
}

TopKSummary top_k_summary(std::span<const TrialRecord> trials, std::size_t k, MetricField field,
                          bool higher_is_better) {
    if (k == 0) {
        throw std::invalid_argument("top_k_summary: k must be >= 1");
    }
    std::vector<const TrialRecord*> ok;
    for (const TrialRecord& r : trials) {
        if (r.status == RunStatus::Ok && metric_of(r, field)) ok.push_back(&r);
    }
    if (ok.size() < k) {
        throw std::invalid_argument("top_k_summary: need " + std::to_string(k) +
                                    " ok trials, have " + std::to_string(ok.size()));
    }
    // Ties broken by trial index for a stable result.
    std::sort(ok.begin(), ok.end(), [&](const TrialRecord* a, const TrialRecord* b) {
        const double ma = *metric_of(*a, field);
        const double mb = *metric_of(*b, field);
        if (ma != mb) return higher_is_better ? ma > mb : ma < mb;
        return a->trial < b->trial;
    });
    TopKSummary s;
    s.k = k;
    s.best = *ok.front();
    double sum = 0.0;
    double entropy = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        sum += *metric_of(*ok[i], field);
        entropy += ok[i]->entropy_bits.value_or(0.0);
    }
    s.mean = sum / static_cast<double>(k);
    s.entropy_mean = entropy / static_cast<double>(k);
    double var = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double d = *metric_of(*ok[i], field) - s.mean;
        var += d * d;
    }
    s.stddev = std::sqrt(var / static_cast<double>(k));
    return s;
}

} // namespace wmm
