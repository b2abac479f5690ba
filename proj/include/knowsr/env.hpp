#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "knowsr/textio.hpp"
#include "knowsr/errors.hpp"
#include "knowsr/replay.hpp"
#include "knowsr/rng.hpp"
#include "knowsr/tensor.hpp"

namespace knowsr::env {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline double distance(const Vec2& a, const Vec2& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

/// Cooperative spread task: point-mass agents must cover a set of landmarks.
/// Every agent receives the shared negative sum of landmark-to-nearest-agent
/// distances; colliding agents additionally pay a per-collision penalty.
struct WorldConfig {
    std::size_t n_agents = 3;
    std::size_t n_landmarks = 3;
    double agent_radius = 0.15;
    double landmark_radius = 0.05;
    double dt = 0.1;
    double damping = 0.25;
    std::size_t max_steps = 25;
    double world_extent = 1.0;
    double collision_penalty = 1.0;
    double force_scale = 5.0;

    std::size_t obs_dim() const { return 4 + 2 * n_landmarks + 2 * (n_agents - 1); }
    static constexpr std::size_t action_dim = 5; // (no-op, +x, -x, +y, -y)

    void validate() const {
        if (n_agents < 2) throw ConfigError("WorldConfig: n_agents must be >= 2");
        if (n_landmarks < 1) throw ConfigError("WorldConfig: n_landmarks must be >= 1");
        if (max_steps < 1) throw ConfigError("WorldConfig: max_steps must be >= 1");
        if (dt <= 0.0) throw ConfigError("WorldConfig: dt must be > 0");
        if (damping < 0.0 || damping >= 1.0) throw ConfigError("WorldConfig: damping must be in [0,1)");
        if (world_extent <= 0.0) throw ConfigError("WorldConfig: world_extent must be > 0");
        if (force_scale <= 0.0) throw ConfigError("WorldConfig: force_scale must be > 0");
    }
};

struct WorldState {
    std::vector<Vec2> agent_pos;
    std::vector<Vec2> agent_vel;
    std::vector<Vec2> landmark_pos;
    std::size_t step_count = 0;
};

/// Fresh episode: agent and landmark positions i.i.d. uniform in the spawn
/// box, velocities zero. Overlapping spawns are allowed.
inline WorldState reset(const WorldConfig& config, std::uint64_t rng_seed) {
    config.validate();
    Rng rng(rng_seed);
    WorldState s;
    s.agent_pos.resize(config.n_agents);
    s.agent_vel.resize(config.n_agents);
    s.landmark_pos.resize(config.n_landmarks);
    for (Vec2& p : s.agent_pos) {
        p.x = rng.uniform(-config.world_extent, config.world_extent);
        p.y = rng.uniform(-config.world_extent, config.world_extent);
    }
    for (Vec2& p : s.landmark_pos) {
        p.x = rng.uniform(-config.world_extent, config.world_extent);
        p.y = rng.uniform(-config.world_extent, config.world_extent);
    }
    return s;
}

/// Per-agent view: [own vel (2), own pos (2), landmarks - self (2 each),
/// other agents - self (2 each, by index, skipping self)].
inline nn::Tensor2 observe(const WorldState& state, std::size_t agent_index) {
    const std::size_t n_agents = state.agent_pos.size();
    const std::size_t n_landmarks = state.landmark_pos.size();
    if (agent_index >= n_agents)
        throw ParameterError("observe: agent index " + std::to_string(agent_index) + " out of range");
    nn::Tensor2 obs(1, 4 + 2 * n_landmarks + 2 * (n_agents - 1));
    const Vec2 self_pos = state.agent_pos[agent_index];
    const Vec2 self_vel = state.agent_vel[agent_index];
    std::size_t j = 0;
    obs.data[j++] = self_vel.x;
    obs.data[j++] = self_vel.y;
    obs.data[j++] = self_pos.x;
    obs.data[j++] = self_pos.y;
    for (const Vec2& lm : state.landmark_pos) {
        obs.data[j++] = lm.x - self_pos.x;
        obs.data[j++] = lm.y - self_pos.y;
    }
    for (std::size_t k = 0; k < n_agents; ++k) {
        if (k == agent_index) continue;
        obs.data[j++] = state.agent_pos[k].x - self_pos.x;
        obs.data[j++] = state.agent_pos[k].y - self_pos.y;
    }
    return obs;
}

inline nn::Tensor2 observe_all(const WorldState& state) {
    const std::size_t n = state.agent_pos.size();
    nn::Tensor2 all;
    for (std::size_t i = 0; i < n; ++i) {
        const nn::Tensor2 row = observe(state, i);
        if (i == 0) all = nn::Tensor2(n, row.cols);
        for (std::size_t j = 0; j < row.cols; ++j) all(i, j) = row.data[j];
    }
    return all;
}

/// Shared distance term of the reward: -sum over landmarks of the distance
/// to the nearest agent. Zero exactly when every landmark is covered.
inline double shared_distance_reward(const WorldState& state) {
    double total = 0.0;
    for (const Vec2& lm : state.landmark_pos) {
        double nearest = std::numeric_limits<double>::infinity();
        for (const Vec2& ap : state.agent_pos) nearest = std::min(nearest, distance(lm, ap));
        total -= nearest;
    }
    return total;
}

struct StepResult {
    WorldState state;
    std::vector<double> rewards;
    bool done = false;
};

/// Advances the world one tick:
///   force    f = force_scale * (a1 - a2, a3 - a4)
///   velocity v <- v * (1 - damping) + f * dt
///   position p <- p + v * dt
/// then scores the new configuration. The distance term is shared by all
/// agents; each member of a colliding pair (distance < 2 * agent_radius)
/// additionally loses collision_penalty.
inline StepResult step(const WorldState& state, const nn::Tensor2& actions, const WorldConfig& config) {
    if (state.step_count >= config.max_steps)
        throw StateError("step: episode already done (step " + std::to_string(state.step_count) + ")");
    if (actions.rows != config.n_agents || actions.cols != WorldConfig::action_dim)
        throw DimensionError("step: actions must be n_agents x 5, got " + nn::shape_str(actions));
    if (!actions.all_finite()) throw NumericError("step: non-finite action entry");

    StepResult result;
    result.state = state;
    WorldState& s = result.state;
    for (std::size_t i = 0; i < config.n_agents; ++i) {
        const double* a = actions.row_ptr(i);
        const double fx = config.force_scale * (a[1] - a[2]);
        const double fy = config.force_scale * (a[3] - a[4]);
        s.agent_vel[i].x = s.agent_vel[i].x * (1.0 - config.damping) + fx * config.dt;
        s.agent_vel[i].y = s.agent_vel[i].y * (1.0 - config.damping) + fy * config.dt;
        s.agent_pos[i].x += s.agent_vel[i].x * config.dt;
        s.agent_pos[i].y += s.agent_vel[i].y * config.dt;
    }
    s.step_count = state.step_count + 1;

    const double shared = shared_distance_reward(s);
    result.rewards.assign(config.n_agents, shared);
    const double collide_dist = 2.0 * config.agent_radius;
    for (std::size_t i = 0; i < config.n_agents; ++i)
        for (std::size_t j = i + 1; j < config.n_agents; ++j)
            if (distance(s.agent_pos[i], s.agent_pos[j]) < collide_dist) {
                result.rewards[i] -= config.collision_penalty;
                result.rewards[j] -= config.collision_penalty;
            }
    result.done = s.step_count == config.max_steps;
    return result;
}

/// Per-agent policy: observation row in, action row (5 logits) out.
using PolicyFn = std::function<nn::Tensor2(const nn::Tensor2& obs_row)>;

struct RolloutResult {
    std::vector<replay::Transition> transitions; // exactly max_steps entries
    std::vector<WorldState> states;              // max_steps + 1 entries, initial first
    double avg_step_reward = 0.0;                // mean over steps of agent-mean reward
};

/// Runs one full episode from a seeded reset. The per-episode metric is the
/// mean over steps of the agent-averaged reward.
inline RolloutResult episode_rollout(const std::vector<PolicyFn>& policies,
                                     const WorldConfig& config, std::uint64_t seed) {
    if (policies.size() != config.n_agents)
        throw ConfigError("episode_rollout: need one policy per agent");
    RolloutResult out;
    WorldState state = reset(config, seed);
    out.states.push_back(state);
    double reward_sum = 0.0;
    for (std::size_t t = 0; t < config.max_steps; ++t) {
        const nn::Tensor2 obs = observe_all(state);
        nn::Tensor2 actions(config.n_agents, WorldConfig::action_dim);
        for (std::size_t i = 0; i < config.n_agents; ++i) {
            nn::Tensor2 obs_row(1, obs.cols);
            for (std::size_t j = 0; j < obs.cols; ++j) obs_row.data[j] = obs(i, j);
            const nn::Tensor2 action = policies[i](obs_row);
            if (action.rows != 1 || action.cols != WorldConfig::action_dim)
                throw DimensionError("episode_rollout: policy returned " + nn::shape_str(action));
            for (std::size_t j = 0; j < WorldConfig::action_dim; ++j) actions(i, j) = action.data[j];
        }
        StepResult sr = step(state, actions, config);
        double agent_mean = 0.0;
        for (double r : sr.rewards) agent_mean += r;
        agent_mean /= static_cast<double>(config.n_agents);
        reward_sum += agent_mean;

        replay::Transition tr;
        tr.obs = obs;
        tr.actions = std::move(actions);
        tr.rewards = sr.rewards;
        tr.next_obs = observe_all(sr.state);
        tr.done = sr.done;
        out.transitions.push_back(std::move(tr));

        state = std::move(sr.state);
        out.states.push_back(state);
    }
    out.avg_step_reward = reward_sum / static_cast<double>(config.max_steps);
    return out;
}

/// Line-delimited trajectory dump, one JSON record per step, for offline
/// plotting.
inline void write_trajectory(std::ostream& out, const RolloutResult& rollout) {
    const auto vec2_array = [](const std::vector<Vec2>& v) {
        std::string s = "[";
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) s += ",";
            s += "[" + format_double(v[i].x) + "," + format_double(v[i].y) + "]";
        }
        return s + "]";
    };
    for (std::size_t t = 0; t < rollout.transitions.size(); ++t) {
        const WorldState& after = rollout.states[t + 1];
        const replay::Transition& tr = rollout.transitions[t];
        out << "{\"step\":" << t
            << ",\"agent_pos\":" << vec2_array(after.agent_pos)
            << ",\"landmark_pos\":" << vec2_array(after.landmark_pos)
            << ",\"actions\":[";
        for (std::size_t i = 0; i < tr.actions.rows; ++i) {
            if (i) out << ",";
            out << "[";
            for (std::size_t j = 0; j < tr.actions.cols; ++j) {
                if (j) out << ",";
                out << format_double(tr.actions(i, j));
            }
            out << "]";
        }
        out << "],\"rewards\":[";
        for (std::size_t i = 0; i < tr.rewards.size(); ++i) {
            if (i) out << ",";
            out << format_double(tr.rewards[i]);
        }
        out << "]}\n";
    }
}

} // namespace knowsr::env
