#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "knowsr/config.hpp"
#include "knowsr/harness.hpp"
#include "knowsr/metrics.hpp"
#include "knowsr/stats.hpp"

using namespace knowsr;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& leaf) {
    const fs::path dir = fs::temp_directory_path() / leaf;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

config::ExperimentConfig tiny_campaign(const std::string& name) {
    config::ExperimentConfig cfg;
    cfg.name = name;
    cfg.variant = "maddpg";
    cfg.run.world.n_agents = 2;
    cfg.run.world.n_landmarks = 2;
    cfg.run.episodes = 10;
    cfg.run.train.hidden = {8, 8};
    cfg.run.train.batch_size = 40;
    cfg.run.train.chunk_size = 20;
    cfg.run.train.update_every = 2;
    cfg.run.sharing_enabled = false;
    cfg.seeds = {1, 2, 3};
    cfg.smoothing_window = 4;
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace

TEST_CASE("trailing mean uses partial windows at the head") {
    const std::vector<double> series = {1.0, 2.0, 3.0, 4.0};
    const std::vector<double> smoothed = stats::trailing_mean(series, 2);
    REQUIRE(smoothed == std::vector<double>{1.0, 1.5, 2.5, 3.5});

    // A window longer than the series averages everything seen so far.
    const std::vector<double> wide = stats::trailing_mean(series, 10);
    REQUIRE(wide[0] == 1.0);
    REQUIRE(wide[3] == 2.5);

    REQUIRE_THROWS_AS(stats::trailing_mean(series, 0), ParameterError);
    REQUIRE(stats::trailing_mean(series, 1) == series);
}

TEST_CASE("t quantiles switch to the normal value past the table") {
    REQUIRE_THAT(stats::t_quantile_975(1), Catch::Matchers::WithinAbs(12.706, 1e-9));
    REQUIRE_THAT(stats::t_quantile_975(30), Catch::Matchers::WithinAbs(2.042, 1e-9));
    REQUIRE_THAT(stats::t_quantile_975(31), Catch::Matchers::WithinAbs(1.959964, 1e-9));
    REQUIRE_THAT(stats::t_quantile_975(10000), Catch::Matchers::WithinAbs(1.959964, 1e-9));
}

TEST_CASE("mean confidence interval on a hand-checked sample") {
    const std::vector<double> sample = {1.0, 2.0, 3.0}; // mean 2, sd 1
    const stats::MeanCi ci = stats::mean_ci(sample);
    const double half = stats::t_quantile_975(2) * 1.0 / std::sqrt(3.0);
    REQUIRE(ci.defined);
    REQUIRE_THAT(ci.mean, Catch::Matchers::WithinAbs(2.0, 1e-12));
    REQUIRE_THAT(ci.ci_low, Catch::Matchers::WithinAbs(2.0 - half, 1e-12));
    REQUIRE_THAT(ci.ci_high, Catch::Matchers::WithinAbs(2.0 + half, 1e-12));

    const stats::MeanCi single = stats::mean_ci(std::vector<double>{5.0});
    REQUIRE_FALSE(single.defined);
    REQUIRE(single.ci_low == 5.0);
    REQUIRE(single.ci_high == 5.0);

    REQUIRE_THROWS_AS(stats::mean(std::vector<double>{}), InsufficientDataError);
}

TEST_CASE("first best episode tolerates near-plateau dips") {
    const std::vector<double> series = {-5.0, -3.0, -1.0, -1.05, -1.0};
    REQUIRE(harness::first_best_episode(series, 1, 0.1) == 3);

    const std::vector<double> rising = {1.0, 2.0, 3.0};
    REQUIRE(harness::first_best_episode(rising, 1, 0.0) == 3);
    REQUIRE(harness::first_best_episode(rising, 1, 1.0) == 2);
    REQUIRE(harness::first_best_episode(rising, 1, 100.0) == 1);

    const std::vector<double> flat = {2.0, 2.0, 2.0};
    REQUIRE(harness::first_best_episode(flat, 1, 0.0) == 1);

    REQUIRE_THROWS_AS(harness::first_best_episode(std::vector<double>{}, 1, 0.0),
                      InsufficientDataError);
    REQUIRE_THROWS_AS(harness::first_best_episode(series, 1, -0.1), ParameterError);
}

TEST_CASE("curve aggregation is exact and permutation invariant") {
    const std::vector<std::vector<double>> seeds = {{0.0, 2.0}, {2.0, 4.0}};
    const harness::CurveData curve = harness::aggregate_curves(seeds, 1);
    REQUIRE(curve.ci_defined);
    REQUIRE(curve.mean == std::vector<double>{1.0, 3.0});
    const std::vector<double> column = {0.0, 2.0};
    const double half = stats::t_quantile_975(1) * stats::sample_sd(column) / std::sqrt(2.0);
    REQUIRE_THAT(curve.ci_low[0], Catch::Matchers::WithinAbs(1.0 - half, 1e-12));
    REQUIRE_THAT(curve.ci_high[0], Catch::Matchers::WithinAbs(1.0 + half, 1e-12));

    // Reordering the seed series must reproduce identical bytes.
    const std::vector<std::vector<double>> shuffled = {{2.0, 4.0}, {0.0, 2.0}};
    const harness::CurveData again = harness::aggregate_curves(shuffled, 1);
    REQUIRE(curve.mean == again.mean);
    REQUIRE(curve.ci_low == again.ci_low);
    REQUIRE(curve.ci_high == again.ci_high);

    REQUIRE_THROWS_AS(harness::aggregate_curves({{1.0, 2.0}, {1.0}}, 1), ParameterError);
    REQUIRE_THROWS_AS(harness::aggregate_curves({}, 1), InsufficientDataError);

    const harness::CurveData lone = harness::aggregate_curves({{1.0, 2.0}}, 1);
    REQUIRE_FALSE(lone.ci_defined);
    REQUIRE(lone.ci_low == lone.mean);
}

TEST_CASE("plot data carries the share marker and the CI band") {
    harness::CurveData curve;
    curve.mean = {1.0, 2.0};
    curve.ci_low = {0.5, 1.5};
    curve.ci_high = {1.5, 2.5};
    curve.ci_defined = true;

    std::ostringstream out;
    harness::emit_plot_data(out, curve, 150);
    std::istringstream in(out.str());
    std::string line;
    REQUIRE(std::getline(in, line));
    REQUIRE(line == "# share_start_episode\t150");
    REQUIRE(std::getline(in, line));
    REQUIRE(line == "episode\tsmoothed_mean\tci_low\tci_high");
    REQUIRE(std::getline(in, line));
    REQUIRE(line.substr(0, 2) == "1\t");
    REQUIRE(std::getline(in, line));
    REQUIRE(line.substr(0, 2) == "2\t");
    REQUIRE_FALSE(std::getline(in, line));

    std::ostringstream empty_out;
    harness::emit_plot_data(empty_out, harness::CurveData{}, 0);
    std::istringstream empty_in(empty_out.str());
    std::size_t lines = 0;
    while (std::getline(empty_in, line)) lines += 1;
    REQUIRE(lines == 2); // marker and header only
}

TEST_CASE("campaigns produce one record per seed and episode") {
    const config::ExperimentConfig cfg = tiny_campaign("unit");
    const harness::CampaignResult result = harness::run_campaign(cfg);

    REQUIRE(result.per_seed.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        REQUIRE(result.per_seed[i].size() == 10);
        for (std::size_t e = 0; e < 10; ++e) {
            REQUIRE(result.per_seed[i][e].seed == cfg.seeds[i]);
            REQUIRE(result.per_seed[i][e].episode == e + 1);
        }
    }
    REQUIRE(result.curve.mean.size() == 10);
    REQUIRE(result.curve.ci_defined);
    REQUIRE(result.summary.name == "unit");
    REQUIRE(result.summary.n_seeds == 3);
    REQUIRE(result.summary.first_best_episode >= 1);
    REQUIRE(result.summary.first_best_episode <= 10);
    REQUIRE(result.summary.mean_ci_half_width >= 0.0);

    // The campaign mean is the plain average over every seed and episode.
    double total = 0.0;
    for (const auto& run : result.per_seed)
        for (const auto& rec : run) total += rec.avg_step_reward;
    REQUIRE_THAT(result.summary.campaign_mean_reward,
                 Catch::Matchers::WithinRel(total / 30.0, 1e-12));
}

TEST_CASE("duplicate seeds reproduce identical runs inside a campaign") {
    config::ExperimentConfig cfg = tiny_campaign("dup");
    cfg.seeds = {7, 7};
    cfg.run.episodes = 6;
    const harness::CampaignResult result = harness::run_campaign(cfg);

    std::ostringstream a, b;
    metrics::write_metrics(a, result.per_seed[0]);
    metrics::write_metrics(b, result.per_seed[1]);
    REQUIRE(a.str() == b.str());
    // Zero spread between the duplicates collapses the band onto the mean.
    for (std::size_t e = 0; e < result.curve.mean.size(); ++e) {
        REQUIRE_THAT(result.curve.ci_low[e], Catch::Matchers::WithinAbs(result.curve.mean[e], 1e-12));
    }
}

TEST_CASE("a single-seed campaign reports an undefined interval") {
    config::ExperimentConfig cfg = tiny_campaign("solo");
    cfg.seeds = {4};
    cfg.run.episodes = 6;
    const harness::CampaignResult result = harness::run_campaign(cfg);
    REQUIRE_FALSE(result.curve.ci_defined);
    REQUIRE_FALSE(result.summary.ci_defined);
    REQUIRE(result.summary.mean_ci_half_width == 0.0);
}

TEST_CASE("campaign directories hold config, metrics, plot and summary") {
    const fs::path dir = fresh_dir("knowsr_test_campaign");
    config::ExperimentConfig cfg = tiny_campaign("toy");
    cfg.seeds = {1, 2};
    cfg.run.episodes = 6;
    const std::string config_text = "# placeholder config text\n";

    harness::run_campaign_to_dir(cfg, dir.string(), config_text);

    REQUIRE(slurp(dir / "config_toy.ini") == config_text);
    REQUIRE(fs::exists(dir / "metrics_toy_seed1.tsv"));
    REQUIRE(fs::exists(dir / "metrics_toy_seed2.tsv"));
    REQUIRE(fs::exists(dir / "timing_toy_seed1.tsv"));
    REQUIRE(fs::exists(dir / "plot_toy.tsv"));
    REQUIRE_FALSE(fs::exists(dir / "PARTIAL_toy"));

    const auto records = metrics::read_metrics_file((dir / "metrics_toy_seed2.tsv").string());
    REQUIRE(records.size() == 6);
    REQUIRE(records.front().seed == 2);

    const harness::SummaryRow row = harness::read_summary_file((dir / "summary_toy.tsv").string());
    REQUIRE(row.name == "toy");
    REQUIRE(row.n_seeds == 2);

    fs::remove_all(dir);
}

TEST_CASE("an aborted campaign leaves a marker instead of aggregates") {
    const fs::path dir = fresh_dir("knowsr_test_partial");
    config::ExperimentConfig cfg = tiny_campaign("boom");
    cfg.seeds = {1};
    cfg.run.episodes = 6;
    cfg.run.train.lr_critic = 1e155; // guarantees a non-finite loss at the first burst

    REQUIRE_THROWS_AS(harness::run_campaign_to_dir(cfg, dir.string(), "text\n"), NumericError);
    REQUIRE(fs::exists(dir / "PARTIAL_boom"));
    REQUIRE(fs::exists(dir / "config_boom.ini"));
    REQUIRE_FALSE(fs::exists(dir / "summary_boom.tsv"));
    REQUIRE_FALSE(fs::exists(dir / "plot_boom.tsv"));

    fs::remove_all(dir);
}

TEST_CASE("variant comparison ranks by reward and flags both columns") {
    harness::SummaryRow base;
    base.name = "maddpg";
    base.n_seeds = 5;
    base.campaign_mean_reward = -318.640;
    base.first_best_episode = 3692;
    harness::SummaryRow better;
    better.name = "knowsr";
    better.n_seeds = 5;
    better.campaign_mean_reward = -288.823;
    better.first_best_episode = 2187;

    const auto rows = harness::compare_variants({base, better}, "maddpg");
    REQUIRE(rows.size() == 2);
    REQUIRE(rows[0].summary.name == "knowsr"); // higher reward sorts first
    REQUIRE(rows[0].reward_flag == harness::Flag::Better);
    REQUIRE(rows[0].time_flag == harness::Flag::Better);
    REQUIRE(rows[1].reward_flag == harness::Flag::Baseline);
    REQUIRE(rows[1].time_flag == harness::Flag::Baseline);

    harness::SummaryRow clone = base;
    clone.name = "copycat";
    const auto tied = harness::compare_variants({base, clone}, "maddpg");
    for (const auto& r : tied) {
        if (r.summary.name == "copycat") {
            REQUIRE(r.reward_flag == harness::Flag::Tie);
            REQUIRE(r.time_flag == harness::Flag::Tie);
        }
    }

    REQUIRE_THROWS_AS(harness::compare_variants({base}, "maddpg"), InsufficientDataError);
    REQUIRE_THROWS_AS(harness::compare_variants({base, better}, "missing"), ParameterError);

    std::ostringstream table;
    harness::write_comparison_table(table, rows);
    REQUIRE(table.str().find("better") != std::string::npos);
    REQUIRE(table.str().find("baseline") != std::string::npos);
}

TEST_CASE("summary rows survive a file round trip") {
    const fs::path dir = fresh_dir("knowsr_test_summary");
    harness::SummaryRow row;
    row.name = "roundtrip";
    row.n_seeds = 5;
    row.campaign_mean_reward = -123.456789;
    row.final_smoothed_reward = -99.5;
    row.first_best_episode = 321;
    row.mean_ci_half_width = 0.75;
    row.ci_defined = true;

    const std::string path = (dir / "summary_roundtrip.tsv").string();
    harness::write_summary_file(path, row);
    const harness::SummaryRow back = harness::read_summary_file(path);
    REQUIRE(back.name == row.name);
    REQUIRE(back.n_seeds == row.n_seeds);
    REQUIRE(back.campaign_mean_reward == row.campaign_mean_reward);
    REQUIRE(back.final_smoothed_reward == row.final_smoothed_reward);
    REQUIRE(back.first_best_episode == row.first_best_episode);
    REQUIRE(back.mean_ci_half_width == row.mean_ci_half_width);
    REQUIRE(back.ci_defined);

    fs::remove_all(dir);
}

TEST_CASE("metrics records survive a text round trip and reject corruption") {
    std::vector<trainer::MetricsRecord> records(2);
    records[0].seed = 9;
    records[0].episode = 1;
    records[0].avg_step_reward = -1.25;
    records[0].episode_return = -31.25;
    records[0].phase = sharing::Phase::SelfTrain;
    records[0].self_updates = 4;
    records[1].seed = 9;
    records[1].episode = 2;
    records[1].avg_step_reward = -0.5;
    records[1].episode_return = -12.5;
    records[1].phase = sharing::Phase::Share;
    records[1].self_updates = 8;
    records[1].share_updates = 2;

    std::ostringstream out;
    metrics::write_metrics(out, records);
    std::istringstream in(out.str());
    const auto back = metrics::read_metrics(in);
    REQUIRE(back.size() == 2);
    REQUIRE(back[0].seed == 9);
    REQUIRE(back[0].avg_step_reward == -1.25);
    REQUIRE(back[0].phase == sharing::Phase::SelfTrain);
    REQUIRE(back[1].phase == sharing::Phase::Share);
    REQUIRE(back[1].share_updates == 2);
    REQUIRE(back[1].episode_return == -12.5);

    std::istringstream bad_header("wrong\theader\n");
    REQUIRE_THROWS_AS(metrics::read_metrics(bad_header), ConfigError);

    std::string truncated = out.str();
    truncated += "9\t3\t-0.25\n"; // too few fields
    std::istringstream bad_row(truncated);
    REQUIRE_THROWS_AS(metrics::read_metrics(bad_row), ConfigError);
}

TEST_CASE("experiment configs parse every section") {
    const std::string text = R"(# full configuration exercise
[scenario]
n_agents = 4
n_landmarks = 4
max_steps = 30
agent_radius = 0.2
landmark_radius = 0.1
dt = 0.05
damping = 0.3
world_extent = 1.5
collision_penalty = 2
force_scale = 4

[train]
gamma = 0.9
tau = 0.02
lr_actor = 0.005
lr_critic = 0.004
lr_share = 0.003
batch_size = 128
chunk_size = 32
update_every = 2
noise_initial = 0.4
noise_final = 0.1
noise_decay_fraction = 0.5
grad_clip_norm = 1.0
policy_temperature = 0.5
bootstrap_critic = false
buffer_capacity = 5000
hidden = 16, 16

[schedule]
self_steps = 6
share_steps = 2
share_start_episode = 50
share_loss = kd(2.5)

[campaign]
name = grid_a
variant = knowsr
episodes = 400
seeds = 3, 5, 8
smoothing_window = 20
first_best_tolerance_frac = 0.05
checkpoint_every = 100
)";
    std::istringstream in(text);
    const config::ExperimentConfig cfg = config::parse_experiment_config(in);

    REQUIRE(cfg.run.world.n_agents == 4);
    REQUIRE(cfg.run.world.max_steps == 30);
    REQUIRE(cfg.run.world.agent_radius == 0.2);
    REQUIRE(cfg.run.world.dt == 0.05);
    REQUIRE(cfg.run.world.collision_penalty == 2.0);

    REQUIRE(cfg.run.train.gamma == 0.9);
    REQUIRE(cfg.run.train.tau == 0.02);
    REQUIRE(cfg.run.train.lr_share.has_value());
    REQUIRE(cfg.run.train.lr_share.value() == 0.003);
    REQUIRE(cfg.run.train.batch_size == 128);
    REQUIRE(cfg.run.train.policy_temperature == 0.5);
    REQUIRE(cfg.run.train.bootstrap_critic == false);
    REQUIRE(cfg.run.train.hidden == std::vector<std::size_t>{16, 16});

    REQUIRE(cfg.run.schedule.self_steps == 6);
    REQUIRE(cfg.run.schedule.share_steps == 2);
    REQUIRE(cfg.run.schedule.share_start_episode == 50);
    REQUIRE(cfg.run.schedule.share_loss == sharing::ShareLossKind::Kd);
    REQUIRE(cfg.run.schedule.share_temperature == 2.5);

    REQUIRE(cfg.name == "grid_a");
    REQUIRE(cfg.variant == "knowsr");
    REQUIRE(cfg.run.episodes == 400);
    REQUIRE(cfg.seeds == std::vector<std::uint64_t>{3, 5, 8});
    REQUIRE(cfg.smoothing_window == 20);
    REQUIRE(cfg.first_best_tolerance_frac == 0.05);
    REQUIRE(cfg.checkpoint_every == 100);
    REQUIRE(cfg.run.sharing_enabled); // variant knowsr switches sharing on
}

TEST_CASE("the maddpg variant disables sharing even with a schedule present") {
    const std::string text = "[schedule]\nself_steps = 6\nshare_steps = 2\n"
                             "[campaign]\nvariant = maddpg\n";
    std::istringstream in(text);
    const config::ExperimentConfig cfg = config::parse_experiment_config(in);
    REQUIRE_FALSE(cfg.run.sharing_enabled);
    REQUIRE(cfg.variant == "maddpg");
}

TEST_CASE("config rejection names the offending line") {
    std::istringstream unknown_key("[train]\nbogus = 1\n");
    try {
        config::parse_experiment_config(unknown_key);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        REQUIRE(std::string(e.what()).find("line 2") != std::string::npos);
    }

    std::istringstream unknown_section("[nonsense]\n");
    REQUIRE_THROWS_AS(config::parse_experiment_config(unknown_section), ConfigError);

    std::istringstream orphan("gamma = 0.5\n");
    REQUIRE_THROWS_AS(config::parse_experiment_config(orphan), ConfigError);

    std::istringstream bad_number("[train]\ngamma = fast\n");
    REQUIRE_THROWS_AS(config::parse_experiment_config(bad_number), ConfigError);

    std::istringstream bad_loss("[schedule]\nshare_loss = huber\n");
    REQUIRE_THROWS_AS(config::parse_experiment_config(bad_loss), ConfigError);
}

TEST_CASE("comments and blank lines are ignored by the parser") {
    const std::string text = "; leading comment\n\n[campaign]\n# hash comment\nname = quiet\n";
    std::istringstream in(text);
    const config::ExperimentConfig cfg = config::parse_experiment_config(in);
    REQUIRE(cfg.name == "quiet");
}

TEST_CASE("worker count respects the thread cap override") {
    setenv("KNOWSR_THREADS", "2", 1);
    REQUIRE(harness::detail::worker_count(8) == 2);
    REQUIRE(harness::detail::worker_count(1) == 1);

    setenv("KNOWSR_THREADS", "banana", 1);
    REQUIRE_THROWS_AS(harness::detail::worker_count(8), ConfigError);
    setenv("KNOWSR_THREADS", "0", 1);
    REQUIRE_THROWS_AS(harness::detail::worker_count(8), ConfigError);

    unsetenv("KNOWSR_THREADS");
    const std::size_t n = harness::detail::worker_count(4);
    REQUIRE(n >= 1);
    REQUIRE(n <= 4);
}
