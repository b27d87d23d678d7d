// Command-line front end: corpus generation, base training, incremental
// updates, routing, evaluation and serve mode.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ats/cli_commands.hpp"
#include "ats/serve.hpp"

namespace {

void add_model_options(CLI::App* cmd, ats::cli::ModelOptions& m)
{
    cmd->add_option("--gamma", m.gamma, "Ridge regularization")->capture_default_str();
    cmd->add_option("--d-e", m.d_e, "Expanded feature dimension")->capture_default_str();
    cmd->add_option("--d-f", m.d_f, "Token embedding dimension")->capture_default_str();
    cmd->add_option("--seed", m.seed, "Featurizer and expansion seed")->capture_default_str();
}

int fail(const std::string& message, int code = 1)
{
    std::cerr << nlohmann::json{{"error", message}}.dump() << '\n';
    return code;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Continual-learning instruction router"};
    app.require_subcommand(1);

    ats::cli::GenCorpusOptions gen;
    auto* gen_cmd = app.add_subcommand("gen-corpus", "Write a seeded synthetic instruction corpus (JSONL)");
    gen_cmd->add_option("--out", gen.out, "Output corpus path")->required();
    gen_cmd->add_option("--n-classes", gen.n_classes)->capture_default_str();
    gen_cmd->add_option("--per-class", gen.per_class)->capture_default_str();
    gen_cmd->add_option("--seed", gen.seed)->capture_default_str();
    gen_cmd->add_option("--train-fraction", gen.train_fraction)->capture_default_str();
    gen_cmd->add_flag("--force", gen.force, "Overwrite an existing file");

    ats::cli::TrainBaseOptions train;
    auto* train_cmd = app.add_subcommand("train-base", "Fit the scheduler jointly on base classes");
    train_cmd->add_option("--corpus", train.corpus)->required();
    train_cmd->add_option("--classes", train.classes, "Base task ids (default: all)")->delimiter(',');
    train_cmd->add_option("--state-out", train.state_out)->required();
    add_model_options(train_cmd, train.model);

    ats::cli::UpdateOptions update;
    auto* update_cmd = app.add_subcommand("update", "Absorb one new class without revisiting old data");
    update_cmd->add_option("--state", update.state_in)->required();
    update_cmd->add_option("--corpus", update.corpus)->required();
    update_cmd->add_option("--class", update.new_class)->required();
    update_cmd->add_option("--state-out", update.state_out)->required();

    ats::cli::RouteOptions route;
    std::string registry_path;
    auto* route_cmd = app.add_subcommand("route", "Route one instruction and print the result as JSON");
    route_cmd->add_option("--state", route.state)->required();
    route_cmd->add_option("--registry", registry_path);
    route_cmd->add_option("--text", route.text)->required();
    route_cmd->add_option("--proprioception", route.proprioception)->delimiter(',');

    ats::cli::EvalOptions eval;
    std::string plan_path;
    auto* eval_cmd = app.add_subcommand("eval", "Run the phase-by-phase continual learning protocol");
    eval_cmd->add_option("--corpus", eval.corpus)->required();
    eval_cmd->add_option("--plan", plan_path, "Plan JSON (default: 5 base classes, rest incremental)");
    eval_cmd->add_option("--report-out", eval.report_out)->required();
    eval_cmd->add_flag("--baseline", eval.baseline, "Also run the sequential gradient baseline");
    eval_cmd->add_option("--steps", eval.baseline_cfg.steps, "Baseline gradient steps per phase")
        ->capture_default_str();
    eval_cmd->add_option("--learning-rate", eval.baseline_cfg.learning_rate)->capture_default_str();
    add_model_options(eval_cmd, eval.model);

    std::string serve_state;
    std::string serve_registry;
    std::string endpoint = "stdio";
    auto* serve_cmd = app.add_subcommand("serve", "Answer newline-delimited JSON requests");
    serve_cmd->add_option("--state", serve_state)->required();
    serve_cmd->add_option("--registry", serve_registry);
    serve_cmd->add_option("--endpoint", endpoint, "stdio or unix:<path>")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail(e.what(), 2);
    }

    try {
        if (*gen_cmd) {
            const auto corpus = ats::cli::cmd_gen_corpus(gen);
            std::cout << nlohmann::json{{"corpus", gen.out.string()}, {"rows", corpus.size()}}.dump() << '\n';
        } else if (*train_cmd) {
            const auto st = ats::cli::cmd_train_base(train);
            std::cout << nlohmann::json{{"state", train.state_out.string()}, {"d_K", st.scheduler.d_K()}}.dump()
                      << '\n';
        } else if (*update_cmd) {
            const auto st = ats::cli::cmd_update(update);
            std::cout << nlohmann::json{{"state", update.state_out.string()},
                                        {"d_K", st.scheduler.d_K()},
                                        {"tasks_seen", st.scheduler.tasks_seen()}}
                             .dump()
                      << '\n';
        } else if (*route_cmd) {
            if (!registry_path.empty())
                route.registry = registry_path;
            std::cout << ats::route_result_to_json(ats::cli::cmd_route(route)).dump() << '\n';
        } else if (*eval_cmd) {
            if (!plan_path.empty())
                eval.plan = plan_path;
            std::cout << ats::cli::cmd_eval(eval).table;
        } else if (*serve_cmd) {
            ats::ExecutorRegistry reg;
            if (!serve_registry.empty())
                reg = ats::load_registry_file(serve_registry);
            const ats::Router router(ats::load_state_file(serve_state), std::move(reg));
            ats::serve(router, endpoint);
        }
    } catch (const std::exception& e) {
        return fail(e.what());
    }
    return 0;
}
