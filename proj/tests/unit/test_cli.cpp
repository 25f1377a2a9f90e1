#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "oracles.hpp"
#include "wmm/error.hpp"
#include "wmm/experiment.hpp"

using namespace wmm;
using nlohmann::json;

namespace {

std::filesystem::path write_spec(const std::filesystem::path& dir, const std::string& name, const json& j) {
    const auto path = dir / name;
    std::ofstream(path) << j.dump(2);
    return path;
}

json small_task(const std::string& task = "synthetic-noise", const std::string& model = "mlp") {
    return {{"task", task}, {"model", model}, {"data", {{"scale", 0.02}, {"seed", 3}}}};
}

std::vector<std::string> csv_lines(const std::filesystem::path& p) {
    std::istringstream in(oracle::slurp(p));
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

} // namespace

TEST_CASE("spec parsing names the offending field") {
    auto message = [](const std::string& text) -> std::string {
        try {
            parse_experiment(text);
        } catch (const ConfigError& e) {
            return e.what();
        }
        return "";
    };
    CHECK(message(R"({"task": "synthetic", "trian": {}})").find("trian") != std::string::npos);
    CHECK(message(R"({"train": {"epochs": "ten"}})").find("train.epochs") != std::string::npos);
    CHECK(message(R"({"train": {"learning_rate": -1}})").find("learning_rate") != std::string::npos);
    CHECK(message(R"({"wmm": {"method": "reinit", "p": 2, "targets": ["dense0"]}})").find("wmm.p") != std::string::npos);
    CHECK(message(R"({"task": "cifar"})").find("cifar") != std::string::npos);
    CHECK(message(R"({"model": "resnet"})").find("resnet") != std::string::npos);
    CHECK(message(R"({"search": {"method": "tpe"}})").find("search.method") != std::string::npos);
    CHECK(message("{not json").find("JSON") != std::string::npos);
    CHECK(message(R"({"model": "mlp", "data": {"window": 20}})").find("window") == std::string::npos);
    CHECK(message(R"({"model": {"seq_len": 5, "dense": [{"units": 1}]}})").find("width") != std::string::npos);
}

TEST_CASE("materialized spec parses back to the same document") {
    const ExperimentSpec s = parse_experiment(R"({
        "task": "synthetic-noise", "model": "lstm-small", "init": "skewed",
        "train": {"epochs": 3, "clip_norm": 1.0},
        "wmm": {"method": "shuffle", "p": 0.2, "c": 0.1, "targets": ["lstm1.output"]},
        "search": {"method": "none", "budget": 4}})");
    CHECK(s.model.lstm_hidden == std::vector<std::size_t>{8, 8});
    CHECK(s.train.wmm->method == WmmMethod::Shuffle);
    const std::string once = to_json(s);
    CHECK(to_json(parse_experiment(once)) == once);
}

TEST_CASE("gen-data writes the scaled splits reproducibly") {
    const auto dir = oracle::temp_dir("cli_gen");
    std::ostringstream log;
    GenDataArgs args{Task::SyntheticNoise, 0.1, 4, dir / "a"};
    REQUIRE(cmd_gen_data(args, log) == kExitOk);
    const json meta = json::parse(oracle::slurp(dir / "a" / "dataset.json"));
    CHECK(meta["splits"]["train"]["rows"][1].get<int>() - meta["splits"]["train"]["rows"][0].get<int>() == 5500);
    CHECK(meta["splits"]["val"]["rows"][1].get<int>() - meta["splits"]["val"]["rows"][0].get<int>() == 500);
    CHECK(meta["splits"]["test"]["rows"][1].get<int>() - meta["splits"]["test"]["rows"][0].get<int>() == 1000);
    CHECK(csv_lines(dir / "a" / "dataset.csv").size() == 7001);

    args.out = dir / "b";
    REQUIRE(cmd_gen_data(args, log) == kExitOk);
    CHECK(oracle::slurp(dir / "a" / "dataset.csv") == oracle::slurp(dir / "b" / "dataset.csv"));
    CHECK(oracle::slurp(dir / "a" / "dataset.json") == oracle::slurp(dir / "b" / "dataset.json"));

    args.scale = 0.00004;
    args.out = dir / "c";
    std::ostringstream err;
    CHECK(cmd_gen_data(args, err) == kExitValidation);
    CHECK(err.str().find("empty split") != std::string::npos);

    std::ofstream(dir / "blocker") << "x";
    args.scale = 0.02;
    args.out = dir / "blocker" / "sub";
    std::ostringstream io;
    CHECK(cmd_gen_data(args, io) == kExitIo);
    CHECK(io.str().find("blocker") != std::string::npos);
}

TEST_CASE("train writes report, timeline and events") {
    const auto dir = oracle::temp_dir("cli_train");
    json j = small_task();
    j["train"] = {{"epochs", 3}};
    j["out"] = (dir / "plain").string();
    std::ostringstream log;
    REQUIRE(cmd_train({write_spec(dir, "plain.json", j), {}, {}}, log) == kExitOk);
    const auto timeline = csv_lines(dir / "plain" / "entropy.csv");
    CHECK(timeline[0] == "epoch,target_id,entropy_bits,total_bits");
    CHECK(timeline.size() > 2);
    const json report = json::parse(oracle::slurp(dir / "plain" / "report.json"));
    CHECK(report["status"] == "ok");
    CHECK(report.contains("metadata"));
    CHECK(report["spec"]["train"]["epochs"] == 3);
    CHECK(report["wmm_events"].empty());

    // Same inputs: identical bytes outside the metadata field.
    REQUIRE(cmd_train({dir / "plain.json", {}, dir / "again"}, log) == kExitOk);
    json again = json::parse(oracle::slurp(dir / "again" / "report.json"));
    json first = report;
    again.erase("metadata");
    first.erase("metadata");
    again["spec"].erase("out");
    first["spec"].erase("out");
    CHECK(again == first);
    CHECK(oracle::slurp(dir / "again" / "entropy.csv") == oracle::slurp(dir / "plain" / "entropy.csv"));

    json s = small_task();
    s["train"] = {{"epochs", 2}};
    s["wmm"] = {{"method", "shuffle"}, {"p", 0.5}, {"c", 0.3}, {"targets", {"dense0", "dense1"}}};
    s["out"] = (dir / "shuffle").string();
    REQUIRE(cmd_train({write_spec(dir, "shuffle.json", s), {}, {}}, log) == kExitOk);
    const auto events = csv_lines(dir / "shuffle" / "events.csv");
    REQUIRE(events.size() > 10);
    CHECK(events[0] == "step,epoch,matrix_id,mask_size,entropy_before,entropy_after,delta");
    for (std::size_t i = 1; i < events.size(); ++i) CHECK(events[i].substr(events[i].rfind(',') + 1) == "0");
}

TEST_CASE("train exit codes") {
    const auto dir = oracle::temp_dir("cli_train_codes");
    std::ostringstream log;
    CHECK(cmd_train({dir / "missing.json", {}, {}}, log) == kExitIo);

    json bad = small_task();
    bad["train"] = {{"patience", 0}};
    std::ostringstream err;
    CHECK(cmd_train({write_spec(dir, "bad.json", bad), {}, dir / "bad"}, err) == kExitValidation);
    CHECK(err.str().find("train.patience") != std::string::npos);

    json boom = small_task();
    boom["train"] = {{"optimizer", "sgd"}, {"learning_rate", 1e6}, {"epochs", 2}};
    CHECK(cmd_train({write_spec(dir, "boom.json", boom), {}, dir / "boom"}, log) == kExitDiverged);
    CHECK(std::filesystem::exists(dir / "boom" / "report.json"));

    json unknown = small_task();
    unknown["wmm"] = {{"method", "reinit"}, {"targets", {"lstm3.cell"}}};
    CHECK(cmd_train({write_spec(dir, "unknown.json", unknown), {}, dir / "unknown"}, log) == kExitValidation);
}

TEST_CASE("search outputs, clipping and method audit") {
    const auto dir = oracle::temp_dir("cli_search");
    std::ostringstream log;
    json j = small_task();
    j["train"] = {{"epochs", 2}};
    j["search"] = {{"method", "reinit"}, {"budget", 1}, {"master_seed", 2}};
    const auto spec = write_spec(dir, "reinit.json", j);
    std::ostringstream warn;
    REQUIRE(cmd_search({spec, {}, {}, dir / "one"}, warn) == kExitOk);
    CHECK(warn.str().find("warning") != std::string::npos);
    const json one = json::parse(oracle::slurp(dir / "one" / "summary.json"));
    CHECK(one["top_k"]["k"] == 1);

    REQUIRE(cmd_search({spec, {}, 6, dir / "reinit"}, log) == kExitOk);
    j["search"]["method"] = "shuffle";
    REQUIRE(cmd_search({write_spec(dir, "shuffle.json", j), {}, 6, dir / "shuffle"}, log) == kExitOk);
    j["search"]["method"] = "none";
    REQUIRE(cmd_search({write_spec(dir, "none.json", j), {}, 6, dir / "none"}, log) == kExitOk);

    auto table = [&](const char* m) {
        std::vector<json> rows;
        std::istringstream in(oracle::slurp(dir / m / "trials.jsonl"));
        for (std::string line; std::getline(in, line);) rows.push_back(json::parse(line));
        return rows;
    };
    const auto r = table("reinit"), s = table("shuffle"), n = table("none");
    REQUIRE(r.size() == 6);
    REQUIRE(s.size() == 6);
    REQUIRE(n.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
        for (const char* key : {"trial", "p", "c", "target", "seed", "l2"}) CHECK(r[i][key] == s[i][key]);
        CHECK(r[i]["seed"] == n[i]["seed"]);
        CHECK(n[i]["p"].is_null());
        CHECK(n[i]["l2"].get<double>() == std::vector<double>{0, 1e-5, 1e-4, 1e-3}[i % 4]);
    }
    CHECK(csv_lines(dir / "reinit" / "trials.csv").size() == 7);

    const json ref = json::parse(oracle::slurp(dir / "none" / "summary.json"));
    CHECK(ref["method"] == "none");
    CHECK(ref["best"]["test_metric"].is_number());

    std::filesystem::remove_all(dir / "one");
    REQUIRE(cmd_report({dir}, log) == kExitOk);
    const auto cmp = csv_lines(dir / "comparison.csv");
    REQUIRE(cmp.size() == 4);
    CHECK(cmp[0].rfind("campaign,method,statistic,", 0) == 0);
    bool saw_ref = false;
    for (const auto& line : cmp) {
        if (line.rfind("none,none,best,", 0) == 0) {
            saw_ref = true;
            CHECK(line.find(",1,") != std::string::npos);
        }
    }
    CHECK(saw_ref);
}

TEST_CASE("search refuses a bad training spec before any trial") {
    const auto dir = oracle::temp_dir("cli_search_bad");
    json j = small_task();
    j["search"] = {{"method", "reinit"}, {"budget", 3}, {"targets", {"dense7"}}};
    std::ostringstream log;
    CHECK(cmd_search({write_spec(dir, "bad.json", j), {}, {}, dir / "out"}, log) == kExitValidation);
    CHECK_FALSE(std::filesystem::exists(dir / "out" / "trials.jsonl"));
    CHECK(cmd_report({dir / "nothing"}, log) == kExitIo);
}

TEST_CASE("budget 30 on noiseless synthetic mlp is stable") {
    ExperimentSpec spec = default_experiment(Task::Synthetic, "mlp");
    spec.data.scale = 0.02;
    SearchSettings s;
    s.space.method = SearchMethod::Reinit;
    spec.search = s;
    const DatasetSplits data = prepare_data(spec);
    SearchOptions o;
    o.master_seed = 1;
    o.budget = 30;
    const auto trials = run_campaign(spec, data, o);
    CHECK(trials.size() == 30);
    CHECK(count_ok(trials) >= 27);
}
