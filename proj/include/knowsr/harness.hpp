#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "knowsr/config.hpp"
#include "knowsr/errors.hpp"
#include "knowsr/metrics.hpp"
#include "knowsr/stats.hpp"
#include "knowsr/textio.hpp"
#include "knowsr/trainer.hpp"

namespace knowsr::harness {

using config::ExperimentConfig;
using trainer::MetricsRecord;

/// Campaign-level digest of one variant, the row a comparison table is
/// built from. Rewards are seed-aggregated; first_best is read off the
/// seed-mean smoothed curve.
struct SummaryRow {
    std::string name;
    std::size_t n_seeds = 0;
    double campaign_mean_reward = 0.0;  // mean avg_step_reward over every (seed, episode)
    double final_smoothed_reward = 0.0; // seed-mean smoothed value at the last episode
    std::size_t first_best_episode = 0; // 1-based
    double mean_ci_half_width = 0.0;    // mean over episodes of the 95% CI half-width
    bool ci_defined = false;            // false with a single seed
};

/// Earliest episode (1-based) whose smoothed value reaches the smoothed
/// series' global maximum minus tolerance. window = 1 treats the input as
/// already smoothed.
inline std::size_t first_best_episode(std::span<const double> series, std::size_t window,
                                      double tolerance) {
    if (series.empty()) throw InsufficientDataError("first_best_episode: empty series");
    if (tolerance < 0.0) throw ParameterError("first_best_episode: tolerance must be >= 0");
    const std::vector<double> smoothed = stats::trailing_mean(series, window);
    double best = smoothed[0];
    for (double v : smoothed) best = std::max(best, v);
    for (std::size_t i = 0; i < smoothed.size(); ++i)
        if (smoothed[i] >= best - tolerance) return i + 1;
    return smoothed.size(); // unreachable: the maximum itself qualifies
}

/// Seed-mean learning curve with per-episode 95% confidence band, built
/// from per-seed trailing-mean smoothed reward series.
struct CurveData {
    std::vector<double> mean;
    std::vector<double> ci_low;
    std::vector<double> ci_high;
    bool ci_defined = false;
};

namespace detail {

// Cross-seed samples are sorted before averaging so the aggregate is
// identical under any permutation of the seed list.
inline stats::MeanCi sorted_mean_ci(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return stats::mean_ci(values);
}

} // namespace detail

inline CurveData aggregate_curves(const std::vector<std::vector<double>>& per_seed_rewards,
                                  std::size_t window) {
    if (per_seed_rewards.empty()) throw InsufficientDataError("aggregate_curves: no seeds");
    const std::size_t episodes = per_seed_rewards[0].size();
    for (const auto& s : per_seed_rewards)
        if (s.size() != episodes) throw ParameterError("aggregate_curves: seed series lengths differ");
    if (episodes == 0) throw InsufficientDataError("aggregate_curves: empty series");

    std::vector<std::vector<double>> smoothed;
    smoothed.reserve(per_seed_rewards.size());
    for (const auto& s : per_seed_rewards) smoothed.push_back(stats::trailing_mean(s, window));

    CurveData curve;
    curve.mean.resize(episodes);
    curve.ci_low.resize(episodes);
    curve.ci_high.resize(episodes);
    curve.ci_defined = per_seed_rewards.size() >= 2;
    std::vector<double> column(per_seed_rewards.size());
    for (std::size_t e = 0; e < episodes; ++e) {
        for (std::size_t s = 0; s < column.size(); ++s) column[s] = smoothed[s][e];
        const stats::MeanCi ci = detail::sorted_mean_ci(column);
        curve.mean[e] = ci.mean;
        curve.ci_low[e] = ci.ci_low;
        curve.ci_high[e] = ci.ci_high;
    }
    return curve;
}

struct CampaignResult {
    std::vector<std::vector<MetricsRecord>> per_seed; // in configured seed order
    CurveData curve;
    SummaryRow summary;
};

namespace detail {

inline std::size_t worker_count(std::size_t n_jobs) {
    std::size_t cap = std::thread::hardware_concurrency();
    if (cap == 0) cap = 1;
    if (const char* env = std::getenv("KNOWSR_THREADS")) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (end == env || *end != '\0' || v == 0)
            throw ConfigError("KNOWSR_THREADS must be a positive integer");
        cap = static_cast<std::size_t>(v);
    }
    return std::max<std::size_t>(1, std::min(cap, n_jobs));
}

} // namespace detail

/// Builds the digest row from finished per-seed records.
inline SummaryRow summarize(const ExperimentConfig& cfg,
                            const std::vector<std::vector<MetricsRecord>>& per_seed,
                            const CurveData& curve) {
    SummaryRow row;
    row.name = cfg.name;
    row.n_seeds = per_seed.size();

    std::vector<double> all_rewards;
    for (const auto& run : per_seed)
        for (const MetricsRecord& r : run) all_rewards.push_back(r.avg_step_reward);
    std::sort(all_rewards.begin(), all_rewards.end());
    row.campaign_mean_reward = stats::mean(all_rewards);

    row.final_smoothed_reward = curve.mean.back();
    // The curve is already smoothed, so detection runs at window 1, but
    // entries before the window has filled average fewer episodes and a lone
    // lucky opener must not pass for convergence: the best level, its
    // tolerance range, and the search all start at the first full window (or
    // at the final episode when the run is shorter than the window).
    const std::size_t start = std::min(cfg.smoothing_window, curve.mean.size()) - 1;
    const std::span<const double> settled(curve.mean.data() + start, curve.mean.size() - start);
    double lo = settled[0], hi = settled[0];
    for (double v : settled) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    row.first_best_episode =
        start + first_best_episode(settled, 1, cfg.first_best_tolerance_frac * (hi - lo));

    row.ci_defined = curve.ci_defined;
    if (curve.ci_defined) {
        double half_sum = 0.0;
        for (std::size_t e = 0; e < curve.mean.size(); ++e)
            half_sum += (curve.ci_high[e] - curve.ci_low[e]) / 2.0;
        row.mean_ci_half_width = half_sum / static_cast<double>(curve.mean.size());
    }
    return row;
}

/// Runs the campaign: one seeded training run per configured seed (dispatched
/// to at most KNOWSR_THREADS workers), then cross-seed aggregation. Any seed
/// failure aborts the whole campaign; completed seeds are reported through
/// the exception's message by index.
inline CampaignResult run_campaign(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::size_t n = cfg.seeds.size();
    std::vector<std::vector<MetricsRecord>> per_seed(n);
    std::vector<std::exception_ptr> failures(n);

    std::atomic<std::size_t> cursor{0};
    const auto work = [&]() {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= n) return;
            try {
                per_seed[i] = trainer::run_training(cfg.run, cfg.seeds[i]).metrics;
            } catch (...) {
                failures[i] = std::current_exception();
            }
        }
    };
    const std::size_t workers = detail::worker_count(n);
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (std::thread& t : pool) t.join();
    }
    for (std::size_t i = 0; i < n; ++i)
        if (failures[i]) std::rethrow_exception(failures[i]);

    CampaignResult result;
    result.per_seed = std::move(per_seed);
    std::vector<std::vector<double>> rewards(n);
    for (std::size_t i = 0; i < n; ++i) {
        rewards[i].reserve(result.per_seed[i].size());
        for (const MetricsRecord& r : result.per_seed[i]) rewards[i].push_back(r.avg_step_reward);
    }
    result.curve = aggregate_curves(rewards, cfg.smoothing_window);
    result.summary = summarize(cfg, result.per_seed, result.curve);
    return result;
}

// --- persistence ------------------------------------------------------------

inline constexpr const char* kSummaryHeader =
    "name\tn_seeds\tcampaign_mean_reward\tfinal_smoothed_reward\tfirst_best_episode\t"
    "mean_ci_half_width\tci_defined";

inline void write_summary_file(const std::string& path, const SummaryRow& row) {
    std::ofstream out(path);
    if (!out) throw ConfigError("write_summary_file: cannot open " + path);
    out << kSummaryHeader << '\n'
        << row.name << '\t' << row.n_seeds << '\t' << format_double(row.campaign_mean_reward) << '\t'
        << format_double(row.final_smoothed_reward) << '\t' << row.first_best_episode << '\t'
        << format_double(row.mean_ci_half_width) << '\t' << (row.ci_defined ? "true" : "false")
        << '\n';
}

inline SummaryRow read_summary_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("read_summary_file: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("read_summary_file: empty file " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kSummaryHeader) throw ConfigError("read_summary_file: unexpected header in " + path);
    if (!std::getline(in, line)) throw ConfigError("read_summary_file: missing row in " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::vector<std::string> f = metrics::split_tabs(line);
    if (f.size() != 7) throw ConfigError("read_summary_file: malformed row in " + path);
    SummaryRow row;
    row.name = f[0];
    row.n_seeds = static_cast<std::size_t>(std::stoull(f[1]));
    row.campaign_mean_reward = parse_double(f[2]);
    row.final_smoothed_reward = parse_double(f[3]);
    row.first_best_episode = static_cast<std::size_t>(std::stoull(f[4]));
    row.mean_ci_half_width = parse_double(f[5]);
    row.ci_defined = f[6] == "true";
    return row;
}

/// Plot-ready curve: a marker comment carrying the sharing start, a header,
/// then one row per episode with the smoothed seed-mean and its 95% band.
inline void emit_plot_data(std::ostream& out, const CurveData& curve, std::size_t share_start_episode) {
    out << "# share_start_episode\t" << share_start_episode << '\n';
    out << "episode\tsmoothed_mean\tci_low\tci_high\n";
    for (std::size_t e = 0; e < curve.mean.size(); ++e)
        out << (e + 1) << '\t' << format_double(curve.mean[e]) << '\t'
            << format_double(curve.ci_low[e]) << '\t' << format_double(curve.ci_high[e]) << '\n';
}

inline void emit_plot_data_file(const std::string& path, const CurveData& curve,
                                std::size_t share_start_episode) {
    std::ofstream out(path);
    if (!out) throw ConfigError("emit_plot_data_file: cannot open " + path);
    emit_plot_data(out, curve, share_start_episode);
}

/// Runs a campaign and persists everything under out_dir:
///   config_<name>.ini        verbatim configuration text
///   metrics_<name>_seed<s>   per-episode records, deterministic bytes
///   timing_<name>_seed<s>    measured wall-clock per episode
///   plot_<name>.tsv          smoothed seed-mean curve with CI band
///   summary_<name>.tsv       the SummaryRow
/// A failed run leaves PARTIAL_<name> describing the abort instead of the
/// aggregate files.
inline CampaignResult run_campaign_to_dir(const ExperimentConfig& cfg, const std::string& out_dir,
                                          const std::string& config_text) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);
    const auto path = [&](const std::string& leaf) {
        return (std::filesystem::path(out_dir) / leaf).string();
    };
    {
        std::ofstream out(path("config_" + cfg.name + ".ini"));
        if (!out) throw ConfigError("run_campaign_to_dir: cannot write under " + out_dir);
        out << config_text;
    }
    CampaignResult result;
    try {
        result = run_campaign(cfg);
    } catch (const std::exception& e) {
        std::ofstream marker(path("PARTIAL_" + cfg.name));
        marker << "campaign aborted: " << e.what() << '\n';
        throw;
    }
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
        const std::string tag = cfg.name + "_seed" + std::to_string(cfg.seeds[i]);
        metrics::write_metrics_file(path("metrics_" + tag + ".tsv"), result.per_seed[i]);
        metrics::write_timing_file(path("timing_" + tag + ".tsv"), result.per_seed[i]);
    }
    emit_plot_data_file(path("plot_" + cfg.name + ".tsv"), result.curve,
                        cfg.run.schedule.share_start_episode);
    write_summary_file(path("summary_" + cfg.name + ".tsv"), result.summary);
    return result;
}

// --- comparison -------------------------------------------------------------

enum class Flag { Baseline, Better, Worse, Tie };

inline const char* flag_name(Flag f) {
    switch (f) {
        case Flag::Baseline: return "baseline";
        case Flag::Better: return "better";
        case Flag::Worse: return "worse";
        default: return "tie";
    }
}

struct ComparisonRow {
    SummaryRow summary;
    Flag reward_flag = Flag::Tie; // higher campaign mean reward is better
    Flag time_flag = Flag::Tie;   // earlier first-best episode is better
};

/// Ranks variants against the named baseline: rows sorted by mean reward,
/// best first, each non-baseline row flagged on both Table-style columns.
inline std::vector<ComparisonRow> compare_variants(const std::vector<SummaryRow>& summaries,
                                                   const std::string& baseline_name = "maddpg") {
    if (summaries.size() < 2)
        throw InsufficientDataError("compare_variants: need at least 2 summaries");
    const SummaryRow* baseline = nullptr;
    for (const SummaryRow& s : summaries)
        if (s.name == baseline_name) baseline = &s;
    if (!baseline)
        throw ParameterError("compare_variants: no summary named '" + baseline_name + "'");

    std::vector<ComparisonRow> rows;
    rows.reserve(summaries.size());
    for (const SummaryRow& s : summaries) {
        ComparisonRow row;
        row.summary = s;
        if (s.name == baseline_name) {
            row.reward_flag = row.time_flag = Flag::Baseline;
        } else {
            row.reward_flag = s.campaign_mean_reward > baseline->campaign_mean_reward ? Flag::Better
                              : s.campaign_mean_reward < baseline->campaign_mean_reward
                                  ? Flag::Worse
                                  : Flag::Tie;
            row.time_flag = s.first_best_episode < baseline->first_best_episode ? Flag::Better
                            : s.first_best_episode > baseline->first_best_episode ? Flag::Worse
                                                                                  : Flag::Tie;
        }
        rows.push_back(row);
    }
    std::stable_sort(rows.begin(), rows.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
        return a.summary.campaign_mean_reward > b.summary.campaign_mean_reward;
    });
    return rows;
}

inline void write_comparison_table(std::ostream& out, const std::vector<ComparisonRow>& rows) {
    out << "name\tmean_reward\tfinal_smoothed\tfirst_best_episode\treward_vs_baseline\t"
           "time_vs_baseline\n";
    for (const ComparisonRow& r : rows)
        out << r.summary.name << '\t' << format_double(r.summary.campaign_mean_reward) << '\t'
            << format_double(r.summary.final_smoothed_reward) << '\t' << r.summary.first_best_episode
            << '\t' << flag_name(r.reward_flag) << '\t' << flag_name(r.time_flag) << '\n';
}

} // namespace knowsr::harness
