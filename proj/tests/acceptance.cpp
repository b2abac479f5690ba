// Acceptance battery for the lab. Each criterion prints one verdict line;
// the process exits nonzero when any gated criterion fails. The slow
// convergence experiment runs last so the fast checks report early.
//
// Usage: acceptance <path-to-cli-binary> [scratch-dir]

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "knowsr/config.hpp"
#include "knowsr/harness.hpp"
#include "knowsr/trainer.hpp"
#include "knowsr/verify.hpp"

#include "oracle_helpers.hpp"

namespace fs = std::filesystem;
using namespace knowsr;

namespace {

enum class State { Pass, Fail, Skip };

struct Verdict {
    int number = 0;
    std::string title;
    State state = State::Fail;
    std::string detail;
};

void print_verdict(const Verdict& v) {
    const char* tag = v.state == State::Pass ? "[PASS]" : v.state == State::Fail ? "[FAIL]" : "[SKIP]";
    std::cout << tag << " criterion " << v.number << ": " << v.title;
    if (!v.detail.empty()) std::cout << " (" << v.detail << ")";
    std::cout << std::endl;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Verdict from_check(int number, const verify::CheckResult& res) {
    Verdict v;
    v.number = number;
    v.title = res.name;
    v.state = res.passed ? State::Pass : State::Fail;
    v.detail = res.detail;
    return v;
}

// Criterion 3: per-episode fingerprints of every network in the run.
std::vector<std::uint64_t> parameter_trajectory(const trainer::RunConfig& cfg, std::uint64_t seed) {
    std::vector<std::uint64_t> fps;
    trainer::RunHooks hooks;
    hooks.on_episode_end = [&](std::size_t, const std::vector<maddpg::AgentNets>& agents) {
        for (const maddpg::AgentNets& a : agents) {
            fps.push_back(oracle::params_fingerprint(a.actor));
            fps.push_back(oracle::params_fingerprint(a.critic));
            fps.push_back(oracle::params_fingerprint(a.target_actor));
            fps.push_back(oracle::params_fingerprint(a.target_critic));
        }
    };
    trainer::run_training(cfg, seed, hooks);
    return fps;
}

Verdict check_degenerate_schedule() {
    Verdict v;
    v.number = 3;
    v.title = "degenerate schedule equals plain self-training over 50 episodes";

    trainer::RunConfig base;
    base.world.n_agents = 3;
    base.world.n_landmarks = 3;
    base.episodes = 50;

    trainer::RunConfig stub = base;
    stub.sharing_enabled = true;
    stub.schedule.self_steps = 1;
    stub.schedule.share_steps = 0;
    stub.schedule.share_start_episode = 10;

    trainer::RunConfig off = base;
    off.sharing_enabled = false;

    const std::vector<std::uint64_t> a = parameter_trajectory(stub, 7);
    const std::vector<std::uint64_t> b = parameter_trajectory(off, 7);
    const bool same = !a.empty() && a == b;
    v.state = same ? State::Pass : State::Fail;
    std::ostringstream d;
    d << a.size() << " network fingerprints compared, " << (same ? "all equal" : "mismatch");
    v.detail = d.str();
    return v;
}

Verdict check_cli_determinism(const std::string& cli, const fs::path& scratch) {
    Verdict v;
    v.number = 8;
    v.title = "train CLI reproduces byte-identical metrics";

    const fs::path dir = scratch / "criterion8";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path cfg_path = dir / "acc8.ini";
    {
        std::ofstream out(cfg_path);
        out << "[scenario]\nn_agents = 2\nn_landmarks = 2\n\n"
               "[train]\nbatch_size = 50\nchunk_size = 25\nupdate_every = 2\nhidden = 16, 16\n\n"
               "[campaign]\nname = acc8\nvariant = maddpg\nepisodes = 12\nseeds = 3\n";
    }

    for (const char* leaf : {"runA", "runB"}) {
        const std::string cmd = "\"" + cli + "\" train --config \"" + cfg_path.string() +
                                "\" --seed 3 --out \"" + (dir / leaf).string() + "\" > /dev/null";
        const int rc = std::system(cmd.c_str());
        if (rc != 0) {
            v.state = State::Fail;
            v.detail = std::string("train exited nonzero for ") + leaf;
            return v;
        }
    }

    const std::string a = slurp(dir / "runA" / "metrics_acc8_seed3.tsv");
    const std::string b = slurp(dir / "runB" / "metrics_acc8_seed3.tsv");
    if (a.empty() || a != b) {
        v.state = State::Fail;
        v.detail = a.empty() ? "metrics file missing or empty" : "metrics bytes differ";
        return v;
    }
    v.state = State::Pass;
    std::ostringstream d;
    d << a.size() << " metric bytes identical across reruns";
    v.detail = d.str();
    return v;
}

constexpr const char* kMaddpgIni =
    "[scenario]\n"
    "n_agents = 3\n"
    "n_landmarks = 3\n"
    "\n"
    "[campaign]\n"
    "name = spread3_maddpg\n"
    "variant = maddpg\n"
    "episodes = 1500\n"
    "seeds = 1, 2, 3, 4, 5\n"
    "smoothing_window = 100\n";

constexpr const char* kKnowsrIni =
    "[scenario]\n"
    "n_agents = 3\n"
    "n_landmarks = 3\n"
    "\n"
    "[schedule]\n"
    "self_steps = 7\n"
    "share_steps = 3\n"
    "share_start_episode = 150\n"
    "\n"
    "[campaign]\n"
    "name = spread3_knowsr73\n"
    "variant = knowsr\n"
    "episodes = 1500\n"
    "seeds = 1, 2, 3, 4, 5\n"
    "smoothing_window = 100\n";

Verdict check_convergence(const fs::path& scratch) {
    Verdict v;
    v.number = 5;
    v.title = "knowledge sharing matches final reward and accelerates convergence";

    std::istringstream m_in(kMaddpgIni), k_in(kKnowsrIni);
    const config::ExperimentConfig m_cfg = config::parse_experiment_config(m_in);
    const config::ExperimentConfig k_cfg = config::parse_experiment_config(k_in);

    std::cout << "criterion 5: running " << m_cfg.seeds.size() << "-seed campaigns of "
              << m_cfg.run.episodes << " episodes each; this is the slow part" << std::endl;

    auto t0 = std::chrono::steady_clock::now();
    const harness::CampaignResult maddpg =
        harness::run_campaign_to_dir(m_cfg, (scratch / "campaign_maddpg").string(), kMaddpgIni);
    std::cout << "criterion 5: baseline campaign done in " << std::fixed << std::setprecision(0)
              << seconds_since(t0) << "s" << std::endl;

    t0 = std::chrono::steady_clock::now();
    const harness::CampaignResult knowsr =
        harness::run_campaign_to_dir(k_cfg, (scratch / "campaign_knowsr").string(), kKnowsrIni);
    std::cout << "criterion 5: sharing campaign done in " << std::fixed << std::setprecision(0)
              << seconds_since(t0) << "s" << std::endl;

    const double final_m = maddpg.curve.mean.back();
    const double final_k = knowsr.curve.mean.back();
    const std::size_t fb_m = maddpg.summary.first_best_episode;

    // Earliest episode where the sharing curve reaches the baseline's final
    // level. The scan starts where the smoothing window has filled, the same
    // domain first_best_episode is detected on, so neither side banks a
    // lucky few-sample opener.
    std::size_t reach = 0;
    const std::size_t start = std::min(k_cfg.smoothing_window, knowsr.curve.mean.size()) - 1;
    for (std::size_t e = start; e < knowsr.curve.mean.size(); ++e) {
        if (knowsr.curve.mean[e] >= final_m) {
            reach = e + 1;
            break;
        }
    }

    const bool final_ok = final_k >= final_m;
    const double budget = 0.8 * static_cast<double>(fb_m);
    const bool speed_ok = reach != 0 && static_cast<double>(reach) <= budget;

    std::ostringstream d;
    d << std::setprecision(6) << "final smoothed reward " << final_k << " vs baseline " << final_m
      << (final_ok ? " [ok]" : " [below]") << "; reached baseline level at episode ";
    if (reach == 0)
        d << "never";
    else
        d << reach;
    d << " vs budget " << std::setprecision(1) << std::fixed << budget << " (0.8 x " << fb_m << ")"
      << (speed_ok ? " [ok]" : " [late]");

    v.state = (final_ok && speed_ok) ? State::Pass : State::Fail;
    v.detail = d.str();
    return v;
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: acceptance <cli-binary> [scratch-dir]" << std::endl;
        return 2;
    }
    const std::string cli = argv[1];
    const fs::path scratch = argc > 2 ? fs::path(argv[2]) : fs::path("acceptance_scratch");
    fs::create_directories(scratch);

    std::vector<Verdict> verdicts;
    const auto record = [&](Verdict v) {
        print_verdict(v);
        verdicts.push_back(std::move(v));
    };

    record(from_check(1, verify::check_gradient_suite(20)));
    record(from_check(2, verify::check_loss_values()));
    record(check_degenerate_schedule());
    record(from_check(4, verify::check_consensus_fixed_point(100)));
    record(from_check(7, verify::check_physics()));
    record(check_cli_determinism(cli, scratch));

    {
        Verdict v;
        v.number = 6;
        v.title = "full-scale ordering reproduction";
        v.state = State::Skip;
        v.detail = "not gated: the 8-agent 4000-episode ratio grid exceeds desk runtime; "
                   "configs/taskII_*.ini reproduce it offline";
        record(v);
    }

    record(check_convergence(scratch));

    std::sort(verdicts.begin(), verdicts.end(),
              [](const Verdict& a, const Verdict& b) { return a.number < b.number; });
    std::cout << "\n=== acceptance summary ===" << std::endl;
    bool failed = false;
    for (const Verdict& v : verdicts) {
        print_verdict(v);
        failed = failed || v.state == State::Fail;
    }
    return failed ? 1 : 0;
}
