// Command-line front end for the training lab: single seeded runs, multi-seed
// campaigns, report generation over persisted results, and the built-in
// verification battery.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "knowsr/checkpoint.hpp"
#include "knowsr/config.hpp"
#include "knowsr/env.hpp"
#include "knowsr/errors.hpp"
#include "knowsr/harness.hpp"
#include "knowsr/metrics.hpp"
#include "knowsr/trainer.hpp"
#include "knowsr/verify.hpp"

namespace {

namespace fs = std::filesystem;
using namespace knowsr;

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string join_path(const std::string& dir, const std::string& leaf) {
    return (fs::path(dir) / leaf).string();
}

void save_agents(const std::string& dir, const std::string& tag,
                 const std::vector<maddpg::AgentNets>& agents) {
    for (std::size_t i = 0; i < agents.size(); ++i) {
        const std::string base = tag + "_agent" + std::to_string(i);
        nn::save_mlp_file(join_path(dir, base + "_actor.mlp"), agents[i].actor);
        nn::save_mlp_file(join_path(dir, base + "_critic.mlp"), agents[i].critic);
    }
}

int run_train(const std::string& config_path, std::uint64_t seed, const std::string& out_dir,
              bool dump_trajectory) {
    const config::ExperimentConfig cfg = config::load_experiment_config(config_path);
    fs::create_directories(out_dir);

    trainer::RunHooks hooks;
    if (cfg.checkpoint_every > 0) {
        hooks.on_episode_end = [&](std::size_t episode, const std::vector<maddpg::AgentNets>& agents) {
            if (episode % cfg.checkpoint_every == 0)
                save_agents(out_dir, "ckpt_" + cfg.name + "_seed" + std::to_string(seed) + "_ep" +
                                         std::to_string(episode),
                            agents);
        };
    }

    const trainer::RunResult run = trainer::run_training(cfg.run, seed, hooks);
    const std::string tag = cfg.name + "_seed" + std::to_string(seed);
    metrics::write_metrics_file(join_path(out_dir, "metrics_" + tag + ".tsv"), run.metrics);
    metrics::write_timing_file(join_path(out_dir, "timing_" + tag + ".tsv"), run.metrics);
    save_agents(out_dir, "final_" + tag, run.agents);

    if (dump_trajectory) {
        std::vector<env::PolicyFn> policies;
        Rng rng(derive_seed(seed, 3));
        for (const maddpg::AgentNets& a : run.agents)
            policies.push_back([&a, &rng](const nn::Tensor2& obs_row) {
                return maddpg::act(a, obs_row, 0.0, rng);
            });
        const env::RolloutResult rollout =
            env::episode_rollout(policies, cfg.run.world, derive_seed(seed, 4));
        std::ofstream out(join_path(out_dir, "traj_" + tag + ".ndjson"));
        if (!out) throw ConfigError("cannot write trajectory file");
        env::write_trajectory(out, rollout);
    }

    const std::size_t episodes = run.metrics.size();
    std::cout << "trained " << cfg.name << " seed " << seed << ": " << episodes << " episodes, final "
              << "avg step reward " << format_double(run.metrics.back().avg_step_reward) << "\n"
              << "results in " << out_dir << "\n";
    return 0;
}

int run_campaign_cmd(const std::string& config_path, const std::string& out_dir) {
    const config::ExperimentConfig cfg = config::load_experiment_config(config_path);
    const harness::CampaignResult result =
        harness::run_campaign_to_dir(cfg, out_dir, slurp(config_path));
    const harness::SummaryRow& s = result.summary;
    std::cout << "campaign " << s.name << ": " << s.n_seeds << " seeds\n"
              << "  mean avg step reward  " << format_double(s.campaign_mean_reward) << "\n"
              << "  final smoothed reward " << format_double(s.final_smoothed_reward) << "\n"
              << "  first-best episode    " << s.first_best_episode << "\n"
              << "  mean 95% CI half-width "
              << (s.ci_defined ? format_double(s.mean_ci_half_width) : std::string("undefined (1 seed)"))
              << "\n"
              << "results in " << out_dir << "\n";
    return 0;
}

// metrics_<name>_seed<seed>.tsv -> (name, seed); empty name when not a match.
std::pair<std::string, std::string> parse_metrics_leaf(const std::string& leaf) {
    if (leaf.rfind("metrics_", 0) != 0 || leaf.size() < 13 ||
        leaf.substr(leaf.size() - 4) != ".tsv")
        return {"", ""};
    const std::string core = leaf.substr(8, leaf.size() - 12);
    const std::size_t pos = core.rfind("_seed");
    if (pos == std::string::npos) return {"", ""};
    return {core.substr(0, pos), core.substr(pos + 5)};
}

int run_report(const std::string& in_dir, bool table, bool plots, const std::string& baseline) {
    if (!fs::is_directory(in_dir)) throw ConfigError("report: not a directory: " + in_dir);

    std::vector<harness::SummaryRow> summaries;
    for (const fs::directory_entry& entry : fs::directory_iterator(in_dir)) {
        const std::string leaf = entry.path().filename().string();
        if (leaf.rfind("summary_", 0) == 0 && leaf.size() > 12 &&
            leaf.substr(leaf.size() - 4) == ".tsv")
            summaries.push_back(harness::read_summary_file(entry.path().string()));
    }
    if (summaries.empty()) throw ConfigError("report: no summary files in " + in_dir);
    std::sort(summaries.begin(), summaries.end(),
              [](const harness::SummaryRow& a, const harness::SummaryRow& b) { return a.name < b.name; });

    if (table) {
        if (summaries.size() == 1) {
            std::cout << harness::kSummaryHeader << "\n"
                      << summaries[0].name << "\t" << summaries[0].n_seeds << "\t"
                      << format_double(summaries[0].campaign_mean_reward) << "\t"
                      << format_double(summaries[0].final_smoothed_reward) << "\t"
                      << summaries[0].first_best_episode << "\t"
                      << format_double(summaries[0].mean_ci_half_width) << "\t"
                      << (summaries[0].ci_defined ? "true" : "false") << "\n";
        } else {
            harness::write_comparison_table(std::cout, harness::compare_variants(summaries, baseline));
        }
    }

    if (plots) {
        // Rebuild each variant's curve from its persisted per-seed metrics;
        // the smoothing window comes from the variant's persisted config.
        std::map<std::string, std::map<std::string, std::string>> by_name; // name -> seed -> path
        for (const fs::directory_entry& entry : fs::directory_iterator(in_dir)) {
            const auto [name, seed] = parse_metrics_leaf(entry.path().filename().string());
            if (!name.empty()) by_name[name][seed] = entry.path().string();
        }
        for (const auto& [name, seed_files] : by_name) {
            std::size_t window = 100;
            std::size_t share_start = 0;
            const std::string cfg_path = join_path(in_dir, "config_" + name + ".ini");
            if (fs::exists(cfg_path)) {
                const config::ExperimentConfig cfg = config::load_experiment_config(cfg_path);
                window = cfg.smoothing_window;
                share_start = cfg.run.schedule.share_start_episode;
            }
            std::vector<std::vector<double>> rewards;
            for (const auto& [seed, path] : seed_files) {
                std::vector<double> series;
                for (const trainer::MetricsRecord& r : metrics::read_metrics_file(path))
                    series.push_back(r.avg_step_reward);
                rewards.push_back(std::move(series));
            }
            const harness::CurveData curve = harness::aggregate_curves(rewards, window);
            harness::emit_plot_data_file(join_path(in_dir, "plot_" + name + ".tsv"), curve, share_start);
            std::cout << "wrote plot_" << name << ".tsv (" << seed_files.size() << " seeds)\n";
        }
    }
    return 0;
}

int run_verify() {
    const std::vector<verify::CheckResult> results = verify::run_all();
    bool all = true;
    for (const verify::CheckResult& r : results) {
        std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << "\n";
        all = all && r.passed;
    }
    std::cout << (all ? "verify: all checks passed\n" : "verify: FAILURES above\n");
    return all ? 0 : 3;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-agent actor-critic lab with alternating knowledge sharing"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "results", in_dir, baseline = "maddpg";
    std::uint64_t seed = 1;
    bool dump_trajectory = false, table = false, plots = false;

    CLI::App* train = app.add_subcommand("train", "one seeded training run");
    train->add_option("--config", config_path, "experiment config file")->required();
    train->add_option("--seed", seed, "run seed");
    train->add_option("--out", out_dir, "output directory");
    train->add_flag("--dump-trajectories", dump_trajectory,
                    "write a deterministic final-policy episode trajectory");

    CLI::App* campaign = app.add_subcommand("campaign", "multi-seed campaign with aggregation");
    campaign->add_option("--config", config_path, "experiment config file")->required();
    campaign->add_option("--out", out_dir, "output directory");

    CLI::App* report = app.add_subcommand("report", "tables and plot data from persisted results");
    report->add_option("--in", in_dir, "directory holding campaign outputs")->required();
    report->add_flag("--table", table, "print the variant comparison table");
    report->add_flag("--plots", plots, "regenerate plot data files from metrics");
    report->add_option("--baseline", baseline, "baseline variant name for the table");

    CLI::App* verify_cmd = app.add_subcommand("verify", "run the gradient and invariant battery");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (train->parsed()) return run_train(config_path, seed, out_dir, dump_trajectory);
        if (campaign->parsed()) return run_campaign_cmd(config_path, out_dir);
        if (report->parsed()) return run_report(in_dir, table, plots, baseline);
        if (verify_cmd->parsed()) return run_verify();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ParameterError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DimensionError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
