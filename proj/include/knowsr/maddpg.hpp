#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "knowsr/env.hpp"
#include "knowsr/errors.hpp"
#include "knowsr/losses.hpp"
#include "knowsr/mlp.hpp"
#include "knowsr/replay.hpp"
#include "knowsr/rng.hpp"
#include "knowsr/tensor.hpp"

namespace knowsr::maddpg {

using nn::Gradients;
using nn::MlpParams;
using nn::Tensor2;
using replay::Transition;

struct TrainConfig {
    double gamma = 0.95;
    double tau = 0.01;
    double lr_actor = 1e-2;
    double lr_critic = 1e-2;
    std::optional<double> lr_share; // defaults to lr_actor when unset
    std::size_t batch_size = 1024;
    std::size_t chunk_size = 256;
    std::size_t update_every = 4; // episodes between update bursts
    double noise_initial = 0.3;
    double noise_final = 0.05;
    double noise_decay_fraction = 0.25; // share of the episode budget spent annealing
    double grad_clip_norm = 0.5;        // <= 0 disables
    double actor_logit_reg = 1e-3;      // L2 pull on actor logits; keeps the softmax unsaturated
    double policy_temperature = 1.0;    // softmax sharpness of executed actions; < 1 gives stronger forces
    bool bootstrap_critic = true;       // false: critic target is the raw reward
    std::size_t buffer_capacity = 1'000'000;
    std::vector<std::size_t> hidden = {64, 64, 64};

    double share_lr() const { return lr_share.value_or(lr_actor); }

    void validate() const {
        if (gamma < 0.0 || gamma >= 1.0) throw ConfigError("TrainConfig: gamma must be in [0,1)");
        if (tau <= 0.0 || tau > 1.0) throw ConfigError("TrainConfig: tau must be in (0,1]");
        if (lr_actor <= 0.0 || lr_critic <= 0.0) throw ConfigError("TrainConfig: learning rates must be > 0");
        if (lr_share && *lr_share <= 0.0) throw ConfigError("TrainConfig: lr_share must be > 0");
        if (batch_size == 0 || chunk_size == 0) throw ConfigError("TrainConfig: batch/chunk sizes must be >= 1");
        if (update_every == 0) throw ConfigError("TrainConfig: update_every must be >= 1");
        if (buffer_capacity == 0) throw ConfigError("TrainConfig: buffer_capacity must be >= 1");
        if (hidden.empty()) throw ConfigError("TrainConfig: need at least one hidden layer");
        if (noise_decay_fraction < 0.0 || noise_decay_fraction > 1.0)
            throw ConfigError("TrainConfig: noise_decay_fraction must be in [0,1]");
        if (actor_logit_reg < 0.0) throw ConfigError("TrainConfig: actor_logit_reg must be >= 0");
        if (policy_temperature <= 0.0) throw ConfigError("TrainConfig: policy_temperature must be > 0");
    }
};

/// Exploration noise scale for a 1-based episode index: linear from
/// noise_initial to noise_final over the first noise_decay_fraction of the
/// budget, constant afterwards.
inline double noise_scale_at(const TrainConfig& cfg, std::size_t episode, std::size_t episode_budget) {
    const double decay_eps = cfg.noise_decay_fraction * static_cast<double>(episode_budget);
    if (decay_eps <= 1.0) return cfg.noise_final;
    const double progress = static_cast<double>(episode - 1) / (decay_eps - 1.0);
    if (progress >= 1.0) return cfg.noise_final;
    return cfg.noise_initial + (cfg.noise_final - cfg.noise_initial) * progress;
}

/// One agent's networks: decentralized actor, centralized critic that sees
/// every agent's observation and action, and slow target copies of both.
struct AgentNets {
    MlpParams actor;
    MlpParams critic;
    MlpParams target_actor;
    MlpParams target_critic;
    std::size_t index = 0;
    std::size_t obs_dim = 0;
    std::size_t n_agents = 0;

    std::size_t critic_in_dim() const { return n_agents * (obs_dim + env::WorldConfig::action_dim); }
};

/// Builds actor and critic with the configured hidden widths; targets start
/// as exact copies of the online networks.
inline AgentNets make_agent_nets(std::size_t agent_index, std::size_t obs_dim, std::size_t n_agents,
                                 const TrainConfig& cfg, Rng& rng) {
    AgentNets nets;
    nets.index = agent_index;
    nets.obs_dim = obs_dim;
    nets.n_agents = n_agents;

    std::vector<std::size_t> actor_dims;
    actor_dims.push_back(obs_dim);
    for (std::size_t h : cfg.hidden) actor_dims.push_back(h);
    actor_dims.push_back(env::WorldConfig::action_dim);
    nets.actor = nn::make_mlp(actor_dims, rng);

    std::vector<std::size_t> critic_dims;
    critic_dims.push_back(nets.critic_in_dim());
    for (std::size_t h : cfg.hidden) critic_dims.push_back(h);
    critic_dims.push_back(1);
    nets.critic = nn::make_mlp(critic_dims, rng);

    nets.target_actor = nets.actor;
    nets.target_critic = nets.critic;
    return nets;
}

/// Executed action weights: the actor's logits pushed through the final
/// softmax layer at the policy temperature. The raw logits stay the medium
/// for advice; the weights are what the environment and the critics consume.
/// Without this bounding the position -> observation -> force loop has gain
/// > 1 and rollouts diverge. Temperatures below 1 sharpen the weights toward
/// a vertex of the simplex, which maps to stronger net forces.
inline Tensor2 policy_forward(const MlpParams& actor, const Tensor2& obs_batch,
                              double temperature = 1.0) {
    return nn::softmax_with_temperature(nn::mlp_forward(actor, obs_batch), temperature);
}

namespace detail {

// Pullback of a tempered softmax row p = softmax(z / T):
// dz_j = p_j * (g_j - sum_k p_k g_k) / T.
inline Tensor2 softmax_backward(const Tensor2& probs, const Tensor2& d_probs,
                                double temperature = 1.0) {
    Tensor2 d_logits(probs.rows, probs.cols);
    for (std::size_t r = 0; r < probs.rows; ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < probs.cols; ++c) dot += probs(r, c) * d_probs(r, c);
        for (std::size_t c = 0; c < probs.cols; ++c)
            d_logits(r, c) = probs(r, c) * (d_probs(r, c) - dot) / temperature;
    }
    return d_logits;
}

} // namespace detail

/// Exploration: zero-mean Gaussian noise of the given scale perturbs the
/// actor's logits before the tempered softmax, so executed actions stay on
/// the weight simplex and every component keeps a live exploration channel.
/// noise_scale = 0 is the plain policy.
inline Tensor2 act(const AgentNets& nets, const Tensor2& obs_row, double noise_scale, Rng& rng,
                   double temperature = 1.0) {
    if (obs_row.rows != 1 || obs_row.cols != nets.obs_dim)
        throw DimensionError("act: observation must be 1x" + std::to_string(nets.obs_dim) +
                             ", got " + nn::shape_str(obs_row));
    Tensor2 logits = nn::mlp_forward(nets.actor, obs_row);
    if (noise_scale != 0.0)
        for (double& v : logits.data) v += noise_scale * rng.gaussian();
    return nn::softmax_with_temperature(logits, temperature);
}

inline Tensor2 act(const AgentNets& nets, const Tensor2& obs_row, double noise_scale, std::uint64_t seed,
                   double temperature = 1.0) {
    Rng rng(seed);
    return act(nets, obs_row, noise_scale, rng, temperature);
}

// --- centralized critic input assembly ------------------------------------
// The joint layout is fixed everywhere: [obs_0 .. obs_{N-1} | act_0 .. act_{N-1}].

inline Tensor2 assemble_critic_input(const Tensor2& joint_obs, const Tensor2& joint_actions) {
    if (joint_obs.rows != joint_actions.rows)
        throw DimensionError("assemble_critic_input: agent counts differ");
    const std::size_t n = joint_obs.rows;
    Tensor2 x(1, n * joint_obs.cols + n * joint_actions.cols);
    std::size_t j = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < joint_obs.cols; ++c) x.data[j++] = joint_obs(i, c);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < joint_actions.cols; ++c) x.data[j++] = joint_actions(i, c);
    return x;
}

/// Inverse of assemble_critic_input, for round-trip checks.
inline std::pair<Tensor2, Tensor2> disassemble_critic_input(const Tensor2& row, std::size_t n_agents,
                                                            std::size_t obs_dim, std::size_t action_dim) {
    if (row.rows != 1 || row.cols != n_agents * (obs_dim + action_dim))
        throw DimensionError("disassemble_critic_input: bad row width " + nn::shape_str(row));
    Tensor2 obs(n_agents, obs_dim), actions(n_agents, action_dim);
    std::size_t j = 0;
    for (std::size_t i = 0; i < n_agents; ++i)
        for (std::size_t c = 0; c < obs_dim; ++c) obs(i, c) = row.data[j++];
    for (std::size_t i = 0; i < n_agents; ++i)
        for (std::size_t c = 0; c < action_dim; ++c) actions(i, c) = row.data[j++];
    return {obs, actions};
}

namespace detail {

// Batch of critic inputs, one row per transition. `use_next` selects the
// next-observation side. Actions come from `actions_of(b)` as a B x (N*5)
// matrix already laid out per agent.
inline Tensor2 assemble_batch(std::span<const Transition> chunk, bool use_next,
                              const Tensor2& action_block) {
    const std::size_t batch = chunk.size();
    const std::size_t n = chunk[0].obs.rows;
    const std::size_t obs_dim = chunk[0].obs.cols;
    const std::size_t act_cols = action_block.cols;
    Tensor2 x(batch, n * obs_dim + act_cols);
    for (std::size_t b = 0; b < batch; ++b) {
        const Tensor2& obs = use_next ? chunk[b].next_obs : chunk[b].obs;
        double* row = x.row_ptr(b);
        std::size_t j = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < obs_dim; ++c) row[j++] = obs(i, c);
        const double* arow = action_block.row_ptr(b);
        for (std::size_t c = 0; c < act_cols; ++c) row[j++] = arow[c];
    }
    return x;
}

// Stored joint actions flattened to B x (N*5).
inline Tensor2 stored_action_block(std::span<const Transition> chunk) {
    const std::size_t batch = chunk.size();
    const std::size_t n = chunk[0].actions.rows;
    const std::size_t d = chunk[0].actions.cols;
    Tensor2 block(batch, n * d);
    for (std::size_t b = 0; b < batch; ++b) {
        double* row = block.row_ptr(b);
        std::size_t j = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < d; ++c) row[j++] = chunk[b].actions(i, c);
    }
    return block;
}

// Observations of one agent across the chunk, B x obs_dim.
inline Tensor2 agent_obs_batch(std::span<const Transition> chunk, std::size_t agent, bool use_next) {
    const std::size_t batch = chunk.size();
    const std::size_t obs_dim = chunk[0].obs.cols;
    Tensor2 out(batch, obs_dim);
    for (std::size_t b = 0; b < batch; ++b) {
        const Tensor2& obs = use_next ? chunk[b].next_obs : chunk[b].obs;
        for (std::size_t c = 0; c < obs_dim; ++c) out(b, c) = obs(agent, c);
    }
    return out;
}

} // namespace detail

/// Critic regression target and loss without applying an update:
///   y_b = r_i + gamma * Q'_i(x'_b, a'_1..a'_N)   (y_b = r_i on done rows)
/// with next actions from every agent's target actor, and
///   L = mean_b (Q_i(x_b, a_b) - y_b)^2.
inline std::pair<double, Gradients> critic_loss_grads(std::span<AgentNets> agents, std::size_t agent_index,
                                                      std::span<const Transition> chunk,
                                                      const TrainConfig& cfg) {
    if (chunk.empty()) throw ParameterError("critic update: empty chunk");
    AgentNets& self = agents[agent_index];
    const std::size_t batch = chunk.size();
    const std::size_t n = self.n_agents;

    Tensor2 y(batch, 1);
    if (cfg.bootstrap_critic) {
        Tensor2 next_actions(batch, n * env::WorldConfig::action_dim);
        for (std::size_t i = 0; i < n; ++i) {
            const Tensor2 next_obs_i = detail::agent_obs_batch(chunk, i, true);
            const Tensor2 a_i = policy_forward(agents[i].target_actor, next_obs_i, cfg.policy_temperature);
            for (std::size_t b = 0; b < batch; ++b)
                for (std::size_t c = 0; c < env::WorldConfig::action_dim; ++c)
                    next_actions(b, i * env::WorldConfig::action_dim + c) = a_i(b, c);
        }
        const Tensor2 x_next = detail::assemble_batch(chunk, true, next_actions);
        const Tensor2 q_next = nn::mlp_forward(self.target_critic, x_next);
        for (std::size_t b = 0; b < batch; ++b) {
            const double bootstrap = chunk[b].done ? 0.0 : cfg.gamma * q_next(b, 0);
            y(b, 0) = chunk[b].rewards[agent_index] + bootstrap;
        }
    } else {
        for (std::size_t b = 0; b < batch; ++b) y(b, 0) = chunk[b].rewards[agent_index];
    }

    const Tensor2 x = detail::assemble_batch(chunk, false, detail::stored_action_block(chunk));
    const Tensor2 q = nn::mlp_forward(self.critic, x);
    double loss = 0.0;
    Tensor2 upstream(batch, 1);
    for (std::size_t b = 0; b < batch; ++b) {
        const double diff = q(b, 0) - y(b, 0);
        loss += diff * diff;
        upstream(b, 0) = 2.0 * diff / static_cast<double>(batch);
    }
    loss /= static_cast<double>(batch);
    Gradients grads = nn::mlp_backward(self.critic, x, upstream);
    return {loss, std::move(grads)};
}

/// One critic step: minimizes the bootstrapped MSE above, returns the
/// pre-step loss.
inline double critic_update(std::span<AgentNets> agents, std::size_t agent_index,
                            std::span<const Transition> chunk, const TrainConfig& cfg) {
    auto [loss, grads] = critic_loss_grads(agents, agent_index, chunk, cfg);
    if (!std::isfinite(loss)) throw NumericError("critic_update: non-finite loss");
    nn::clip_gradients(grads, cfg.grad_clip_norm);
    nn::optimizer_step(agents[agent_index].critic, grads, cfg.lr_critic);
    return loss;
}

/// Actor objective and its gradient without applying an update. The agent's
/// own stored action is replaced by its online actor's output; the loss is
/// -mean Q_i plus actor_logit_reg * mean(logits^2). Without the logit pull
/// the softmax head saturates within a few hundred updates and its gradient
/// dies, freezing the policy.
inline std::pair<double, Gradients> actor_loss_grads(std::span<AgentNets> agents, std::size_t agent_index,
                                                     std::span<const Transition> chunk,
                                                     const TrainConfig& cfg) {
    if (chunk.empty()) throw ParameterError("actor update: empty chunk");
    AgentNets& self = agents[agent_index];
    const std::size_t batch = chunk.size();
    const std::size_t act_dim = env::WorldConfig::action_dim;

    const Tensor2 own_obs = detail::agent_obs_batch(chunk, agent_index, false);
    const Tensor2 own_logits = nn::mlp_forward(self.actor, own_obs);
    const Tensor2 own_actions = nn::softmax_with_temperature(own_logits, cfg.policy_temperature);

    Tensor2 action_block = detail::stored_action_block(chunk);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t c = 0; c < act_dim; ++c)
            action_block(b, agent_index * act_dim + c) = own_actions(b, c);

    const Tensor2 x = detail::assemble_batch(chunk, false, action_block);
    const Tensor2 q = nn::mlp_forward(self.critic, x);
    double mean_q = 0.0;
    for (std::size_t b = 0; b < batch; ++b) mean_q += q(b, 0);
    mean_q /= static_cast<double>(batch);

    // dL/dQ = -1/B; pull the value gradient back to the critic inputs, slice
    // out this agent's action block, then chain through the softmax head and
    // the actor body.
    Tensor2 upstream(batch, 1, -1.0 / static_cast<double>(batch));
    Tensor2 input_grad;
    nn::mlp_backward(self.critic, x, upstream, &input_grad);

    const std::size_t action_offset = self.n_agents * self.obs_dim + agent_index * act_dim;
    Tensor2 d_action(batch, act_dim);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t c = 0; c < act_dim; ++c)
            d_action(b, c) = input_grad(b, action_offset + c);

    Tensor2 d_logits = detail::softmax_backward(own_actions, d_action, cfg.policy_temperature);
    double reg = 0.0;
    if (cfg.actor_logit_reg > 0.0) {
        const double scale = 2.0 * cfg.actor_logit_reg / static_cast<double>(own_logits.data.size());
        for (std::size_t i = 0; i < own_logits.data.size(); ++i) {
            reg += own_logits.data[i] * own_logits.data[i];
            d_logits.data[i] += scale * own_logits.data[i];
        }
        reg *= cfg.actor_logit_reg / static_cast<double>(own_logits.data.size());
    }
    Gradients grads = nn::mlp_backward(self.actor, own_obs, d_logits);
    return {-mean_q + reg, std::move(grads)};
}

/// One actor step through the frozen critic; returns the pre-step objective
/// value (-mean Q).
inline double actor_update(std::span<AgentNets> agents, std::size_t agent_index,
                           std::span<const Transition> chunk, const TrainConfig& cfg) {
    auto [loss, grads] = actor_loss_grads(agents, agent_index, chunk, cfg);
    if (!std::isfinite(loss)) throw NumericError("actor_update: non-finite loss");
    nn::clip_gradients(grads, cfg.grad_clip_norm);
    nn::optimizer_step(agents[agent_index].actor, grads, cfg.lr_actor);
    return loss;
}

namespace detail {

inline void soft_update_params(MlpParams& target, const MlpParams& online, double tau) {
    for (std::size_t k = 0; k < target.layers.size(); ++k) {
        Tensor2& tw = target.layers[k].weight;
        const Tensor2& ow = online.layers[k].weight;
        for (std::size_t i = 0; i < tw.data.size(); ++i)
            tw.data[i] = tau * ow.data[i] + (1.0 - tau) * tw.data[i];
        Tensor2& tb = target.layers[k].bias;
        const Tensor2& ob = online.layers[k].bias;
        for (std::size_t i = 0; i < tb.data.size(); ++i)
            tb.data[i] = tau * ob.data[i] + (1.0 - tau) * tb.data[i];
    }
}

} // namespace detail

/// target <- tau * online + (1 - tau) * target for both target networks.
inline void soft_update(AgentNets& nets, double tau) {
    if (tau <= 0.0 || tau > 1.0) throw ParameterError("soft_update: tau must be in (0,1]");
    detail::soft_update_params(nets.target_actor, nets.actor, tau);
    detail::soft_update_params(nets.target_critic, nets.critic, tau);
}

} // namespace knowsr::maddpg
