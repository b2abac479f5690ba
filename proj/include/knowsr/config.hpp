#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "knowsr/errors.hpp"
#include "knowsr/textio.hpp"
#include "knowsr/trainer.hpp"

namespace knowsr::config {

/// One experiment as read from a config file: scenario, optimization
/// settings, alternation plan, and the campaign frame around them.
struct ExperimentConfig {
    std::string name = "experiment";
    std::string variant = "maddpg"; // "maddpg" or "knowsr"
    trainer::RunConfig run;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::size_t smoothing_window = 100;
    double first_best_tolerance_frac = 0.02; // of the smoothed series' range
    std::size_t checkpoint_every = 0;        // episodes between checkpoints; 0 disables

    void validate() const {
        if (name.empty()) throw ConfigError("ExperimentConfig: name must not be empty");
        if (variant != "maddpg" && variant != "knowsr")
            throw ConfigError("ExperimentConfig: variant must be maddpg or knowsr, got " + variant);
        if (seeds.empty()) throw ConfigError("ExperimentConfig: seeds must not be empty");
        if (smoothing_window == 0) throw ConfigError("ExperimentConfig: smoothing_window must be >= 1");
        if (first_best_tolerance_frac < 0.0)
            throw ConfigError("ExperimentConfig: first_best_tolerance_frac must be >= 0");
        run.validate();
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return s.substr(b, e - b);
}

inline ConfigError key_error(std::size_t lineno, const std::string& what) {
    return ConfigError("config line " + std::to_string(lineno) + ": " + what);
}

inline double to_double(const std::string& v, std::size_t lineno) {
    try {
        return parse_double(v);
    } catch (const ConfigError&) {
        throw key_error(lineno, "expected a number, got '" + v + "'");
    }
}

inline std::size_t to_size(const std::string& v, std::size_t lineno) {
    for (char c : v)
        if (c < '0' || c > '9') throw key_error(lineno, "expected a non-negative integer, got '" + v + "'");
    if (v.empty()) throw key_error(lineno, "expected a non-negative integer, got ''");
    return static_cast<std::size_t>(std::stoull(v));
}

inline bool to_bool(const std::string& v, std::size_t lineno) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw key_error(lineno, "expected true/false, got '" + v + "'");
}

inline std::vector<std::string> split_commas(const std::string& v) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : v) {
        if (c == ',') {
            parts.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    parts.push_back(trim(cur));
    return parts;
}

// share_loss accepts "mse", "kd" (temperature from share_temperature), or
// "kd(T)" with an inline temperature.
inline void apply_share_loss(sharing::ShareSchedule& sched, const std::string& v, std::size_t lineno) {
    if (v == "mse") {
        sched.share_loss = sharing::ShareLossKind::Mse;
        return;
    }
    if (v == "kd") {
        sched.share_loss = sharing::ShareLossKind::Kd;
        return;
    }
    if (v.size() > 4 && v.substr(0, 3) == "kd(" && v.back() == ')') {
        sched.share_loss = sharing::ShareLossKind::Kd;
        sched.share_temperature = to_double(v.substr(3, v.size() - 4), lineno);
        return;
    }
    throw key_error(lineno, "share_loss must be mse, kd, or kd(T), got '" + v + "'");
}

} // namespace detail

/// Strict section/key parser for the experiment file format:
///   [scenario] n_agents, n_landmarks, max_steps, agent_radius,
///              landmark_radius, dt, damping, world_extent,
///              collision_penalty, force_scale
///   [train]    gamma, tau, lr_actor, lr_critic, lr_share, batch_size,
///              chunk_size, update_every, noise_initial, noise_final,
///              noise_decay_fraction, grad_clip_norm, actor_logit_reg,
///              policy_temperature, bootstrap_critic, buffer_capacity, hidden
///   [schedule] self_steps, share_steps, share_start_episode, share_loss,
///              share_temperature
///   [campaign] name, variant, episodes, seeds, smoothing_window,
///              first_best_tolerance_frac, checkpoint_every
/// Unknown sections or keys are errors; omitted keys keep their defaults.
/// Lines starting with # or ; are comments.
inline ExperimentConfig parse_experiment_config(std::istream& in) {
    ExperimentConfig cfg;
    std::string section;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        lineno += 1;
        const std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw detail::key_error(lineno, "unterminated section header");
            section = t.substr(1, t.size() - 2);
            if (section != "scenario" && section != "train" && section != "schedule" &&
                section != "campaign")
                throw detail::key_error(lineno, "unknown section [" + section + "]");
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) throw detail::key_error(lineno, "expected key = value");
        const std::string key = detail::trim(t.substr(0, eq));
        const std::string val = detail::trim(t.substr(eq + 1));
        if (key.empty()) throw detail::key_error(lineno, "empty key");
        if (section.empty()) throw detail::key_error(lineno, "key before any [section]");

        if (section == "scenario") {
            env::WorldConfig& w = cfg.run.world;
            if (key == "n_agents") w.n_agents = detail::to_size(val, lineno);
            else if (key == "n_landmarks") w.n_landmarks = detail::to_size(val, lineno);
            else if (key == "max_steps") w.max_steps = detail::to_size(val, lineno);
            else if (key == "agent_radius") w.agent_radius = detail::to_double(val, lineno);
            else if (key == "landmark_radius") w.landmark_radius = detail::to_double(val, lineno);
            else if (key == "dt") w.dt = detail::to_double(val, lineno);
            else if (key == "damping") w.damping = detail::to_double(val, lineno);
            else if (key == "world_extent") w.world_extent = detail::to_double(val, lineno);
            else if (key == "collision_penalty") w.collision_penalty = detail::to_double(val, lineno);
            else if (key == "force_scale") w.force_scale = detail::to_double(val, lineno);
            else throw detail::key_error(lineno, "unknown [scenario] key '" + key + "'");
        } else if (section == "train") {
            maddpg::TrainConfig& tr = cfg.run.train;
            if (key == "gamma") tr.gamma = detail::to_double(val, lineno);
            else if (key == "tau") tr.tau = detail::to_double(val, lineno);
            else if (key == "lr_actor") tr.lr_actor = detail::to_double(val, lineno);
            else if (key == "lr_critic") tr.lr_critic = detail::to_double(val, lineno);
            else if (key == "lr_share") tr.lr_share = detail::to_double(val, lineno);
            else if (key == "batch_size") tr.batch_size = detail::to_size(val, lineno);
            else if (key == "chunk_size") tr.chunk_size = detail::to_size(val, lineno);
            else if (key == "update_every") tr.update_every = detail::to_size(val, lineno);
            else if (key == "noise_initial") tr.noise_initial = detail::to_double(val, lineno);
            else if (key == "noise_final") tr.noise_final = detail::to_double(val, lineno);
            else if (key == "noise_decay_fraction") tr.noise_decay_fraction = detail::to_double(val, lineno);
            else if (key == "grad_clip_norm") tr.grad_clip_norm = detail::to_double(val, lineno);
            else if (key == "actor_logit_reg") tr.actor_logit_reg = detail::to_double(val, lineno);
            else if (key == "policy_temperature") tr.policy_temperature = detail::to_double(val, lineno);
            else if (key == "bootstrap_critic") tr.bootstrap_critic = detail::to_bool(val, lineno);
            else if (key == "buffer_capacity") tr.buffer_capacity = detail::to_size(val, lineno);
            else if (key == "hidden") {
                tr.hidden.clear();
                for (const std::string& part : detail::split_commas(val))
                    tr.hidden.push_back(detail::to_size(part, lineno));
            } else {
                throw detail::key_error(lineno, "unknown [train] key '" + key + "'");
            }
        } else if (section == "schedule") {
            sharing::ShareSchedule& s = cfg.run.schedule;
            if (key == "self_steps") s.self_steps = detail::to_size(val, lineno);
            else if (key == "share_steps") s.share_steps = detail::to_size(val, lineno);
            else if (key == "share_start_episode") s.share_start_episode = detail::to_size(val, lineno);
            else if (key == "share_loss") detail::apply_share_loss(s, val, lineno);
            else if (key == "share_temperature") s.share_temperature = detail::to_double(val, lineno);
            else throw detail::key_error(lineno, "unknown [schedule] key '" + key + "'");
        } else { // campaign
            if (key == "name") cfg.name = val;
            else if (key == "variant") cfg.variant = val;
            else if (key == "episodes") cfg.run.episodes = detail::to_size(val, lineno);
            else if (key == "seeds") {
                cfg.seeds.clear();
                for (const std::string& part : detail::split_commas(val))
                    cfg.seeds.push_back(static_cast<std::uint64_t>(detail::to_size(part, lineno)));
            } else if (key == "smoothing_window") {
                cfg.smoothing_window = detail::to_size(val, lineno);
            } else if (key == "first_best_tolerance_frac") {
                cfg.first_best_tolerance_frac = detail::to_double(val, lineno);
            } else if (key == "checkpoint_every") {
                cfg.checkpoint_every = detail::to_size(val, lineno);
            } else {
                throw detail::key_error(lineno, "unknown [campaign] key '" + key + "'");
            }
        }
    }
    cfg.run.sharing_enabled = cfg.variant == "knowsr";
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse_experiment_config(in);
}

} // namespace knowsr::config
