// wmm-lab: data generation, training, search campaigns and reporting.
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "wmm/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Weight-matrix modification experiments"};
    app.require_subcommand(1);

    std::string task_name = "synthetic";
    wmm::GenDataArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset");
    gen_cmd->add_option("--task", task_name, "synthetic | synthetic-noise")->capture_default_str();
    gen_cmd->add_option("--scale", gen.scale, "Fraction of the full-scale split sizes")
        ->capture_default_str();
    gen_cmd->add_option("--seed", gen.seed, "Dataset seed")->capture_default_str();
    gen_cmd->add_option("--out", gen.out, "Output directory")->required();

    std::string train_spec;
    std::optional<std::uint64_t> train_seed;
    std::optional<std::string> train_out;
    auto* train_cmd = app.add_subcommand("train", "Train one model");
    train_cmd->add_option("--spec", train_spec, "Experiment JSON")->required();
    train_cmd->add_option("--seed", train_seed, "Override train.seed");
    train_cmd->add_option("--out", train_out, "Override the output directory");

    std::string search_spec;
    std::optional<std::uint64_t> search_seed;
    std::optional<std::size_t> search_budget;
    std::optional<std::string> search_out;
    auto* search_cmd = app.add_subcommand("search", "Run a random-search campaign");
    search_cmd->add_option("--spec", search_spec, "Experiment JSON with a search section")
        ->required();
    search_cmd->add_option("--seed", search_seed, "Override search.master_seed");
    search_cmd->add_option("--budget", search_budget, "Override search.budget");
    search_cmd->add_option("--out", search_out, "Override the output directory");

    wmm::ReportArgs report;
    auto* report_cmd = app.add_subcommand("report", "Compare finished campaigns");
    report_cmd->add_option("--out", report.out, "Directory holding one folder per campaign")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : wmm::kExitValidation;
    }

    if (*gen_cmd) {
        try {
            gen.task = wmm::parse_task(task_name);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return wmm::kExitValidation;
        }
        return wmm::cmd_gen_data(gen, std::cerr);
    }
    if (*train_cmd) {
        wmm::TrainArgs args{train_spec, train_seed, {}};
        if (train_out) args.out = *train_out;
        return wmm::cmd_train(args, std::cerr);
    }
    if (*search_cmd) {
        wmm::SearchArgs args{search_spec, search_seed, search_budget, {}};
        if (search_out) args.out = *search_out;
        return wmm::cmd_search(args, std::cerr);
    }
    return wmm::cmd_report(report, std::cerr);
}
