#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "knowsr/env.hpp"
#include "knowsr/errors.hpp"
#include "knowsr/maddpg.hpp"
#include "knowsr/replay.hpp"
#include "knowsr/rng.hpp"
#include "knowsr/sharing.hpp"

namespace knowsr::trainer {

using maddpg::AgentNets;
using maddpg::TrainConfig;
using sharing::Phase;
using sharing::ShareSchedule;

/// One experiment: scenario, optimization settings, alternation plan, length.
struct RunConfig {
    env::WorldConfig world;
    TrainConfig train;
    ShareSchedule schedule;
    std::size_t episodes = 1500;
    bool sharing_enabled = true; // false: pure self-training regardless of schedule

    void validate() const {
        world.validate();
        train.validate();
        schedule.validate();
        if (episodes == 0) throw ConfigError("RunConfig: episodes must be >= 1");
    }
};

/// Per-episode record. Everything except wall_seconds is a pure function of
/// the configuration and seed.
struct MetricsRecord {
    std::uint64_t seed = 0;
    std::size_t episode = 0; // 1-based
    double avg_step_reward = 0.0;
    double episode_return = 0.0;
    Phase phase = Phase::SelfTrain; // Share iff any sharing round ran this episode
    std::size_t self_updates = 0;   // cumulative update slots (every slot self-trains)
    std::size_t share_updates = 0;  // cumulative slots that also ran a sharing round
    double wall_seconds = 0.0; // measured, excluded from deterministic output
};

/// Optional callbacks into a run. on_episode_end sees the 1-based episode and
/// the live agents after that episode's updates.
struct RunHooks {
    std::function<void(std::size_t, const std::vector<AgentNets>&)> on_episode_end;
};

struct RunResult {
    std::vector<AgentNets> agents;
    std::vector<MetricsRecord> metrics;
};

namespace detail {

// One exploration episode; every transition lands in the buffer. The noise
// generator is shared across episodes so draws never repeat.
inline double run_episode(std::vector<AgentNets>& agents, const env::WorldConfig& world,
                          double noise_scale, double temperature, std::uint64_t episode_seed,
                          Rng& noise_rng, replay::ReplayBuffer& buffer, double* episode_return) {
    std::vector<env::PolicyFn> policies;
    policies.reserve(agents.size());
    for (AgentNets& a : agents)
        policies.push_back([&a, noise_scale, temperature, &noise_rng](const nn::Tensor2& obs_row) {
            return maddpg::act(a, obs_row, noise_scale, noise_rng, temperature);
        });
    env::RolloutResult rollout = env::episode_rollout(policies, world, episode_seed);
    for (replay::Transition& tr : rollout.transitions) buffer.push(std::move(tr));
    *episode_return = rollout.avg_step_reward * static_cast<double>(world.max_steps);
    return rollout.avg_step_reward;
}

} // namespace detail

/// Full training run. Episodes are rolled out with annealed exploration
/// noise; every train.update_every episodes, once the buffer can fill a
/// batch, one batch is sampled and walked in ordered chunks. Each chunk is
/// one update slot: every slot updates every agent's critic then actor and
/// soft-updates its targets; on slots the schedule marks as sharing, all
/// agents' advice is collected after those updates and one sharing step is
/// additionally applied to every actor. Sharing supplements self-training
/// rather than displacing it, so the critic never skips a slot. Slots count
/// toward the alternation cycle only after sharing becomes eligible.
inline RunResult run_training(const RunConfig& cfg, std::uint64_t seed, const RunHooks& hooks = {}) {
    cfg.validate();
    const env::WorldConfig& world = cfg.world;
    const TrainConfig& train = cfg.train;

    Rng init_rng(derive_seed(seed, 0));
    Rng noise_rng(derive_seed(seed, 1));
    Rng sample_rng(derive_seed(seed, 2));

    const std::size_t obs_dim = world.obs_dim();
    std::vector<AgentNets> agents;
    agents.reserve(world.n_agents);
    for (std::size_t i = 0; i < world.n_agents; ++i)
        agents.push_back(maddpg::make_agent_nets(i, obs_dim, world.n_agents, train, init_rng));

    replay::ReplayBuffer buffer(train.buffer_capacity);
    RunResult result;
    result.metrics.reserve(cfg.episodes);

    std::size_t cycle_slot = 0; // update slots since sharing became eligible
    std::size_t self_updates = 0;
    std::size_t share_updates = 0;

    for (std::size_t episode = 1; episode <= cfg.episodes; ++episode) {
        const auto t0 = std::chrono::steady_clock::now();
        const double noise = maddpg::noise_scale_at(train, episode, cfg.episodes);
        const std::uint64_t episode_seed = derive_seed(seed, 1000 + episode);

        MetricsRecord rec;
        rec.seed = seed;
        rec.episode = episode;
        rec.avg_step_reward = detail::run_episode(agents, world, noise, train.policy_temperature,
                                                  episode_seed, noise_rng, buffer,
                                                  &rec.episode_return);

        bool shared_this_episode = false;
        if (episode % train.update_every == 0 && buffer.size() >= train.batch_size) {
            const std::vector<replay::Transition> batch = buffer.sample(train.batch_size, sample_rng);
            const auto chunks = replay::ordered_chunks(batch, train.chunk_size);
            for (std::span<const replay::Transition> chunk : chunks) {
                for (std::size_t i = 0; i < agents.size(); ++i) {
                    maddpg::critic_update(agents, i, chunk, train);
                    maddpg::actor_update(agents, i, chunk, train);
                }
                for (AgentNets& a : agents) maddpg::soft_update(a, train.tau);
                self_updates += 1;

                const bool eligible = cfg.sharing_enabled && episode > cfg.schedule.share_start_episode;
                if (eligible) {
                    if (sharing::schedule_phase(cfg.schedule, episode, cycle_slot) == Phase::Share) {
                        // Advice for every agent against the post-self-update
                        // actors, then the sharing steps; no agent sees a
                        // peer's mid-round parameters.
                        std::vector<nn::Tensor2> obs_batches;
                        std::vector<sharing::AdviceBatch> advice;
                        obs_batches.reserve(agents.size());
                        advice.reserve(agents.size());
                        for (std::size_t i = 0; i < agents.size(); ++i) {
                            obs_batches.push_back(maddpg::detail::agent_obs_batch(chunk, i, false));
                            advice.push_back(sharing::collect_advice(agents, i, obs_batches.back()));
                        }
                        for (std::size_t i = 0; i < agents.size(); ++i)
                            sharing::share_update(agents[i], obs_batches[i], advice[i], cfg.schedule, train);
                        share_updates += 1;
                        shared_this_episode = true;
                    }
                    cycle_slot += 1;
                }
            }
        }

        rec.phase = shared_this_episode ? Phase::Share : Phase::SelfTrain;
        rec.self_updates = self_updates;
        rec.share_updates = share_updates;
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.metrics.push_back(rec);

        if (hooks.on_episode_end) hooks.on_episode_end(episode, agents);
    }

    result.agents = std::move(agents);
    return result;
}

} // namespace knowsr::trainer
