#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "knowsr/errors.hpp"
#include "knowsr/losses.hpp"
#include "knowsr/maddpg.hpp"
#include "knowsr/mlp.hpp"
#include "knowsr/tensor.hpp"

namespace knowsr::sharing {

using maddpg::AgentNets;
using maddpg::TrainConfig;
using nn::Gradients;
using nn::Tensor2;

enum class Phase { SelfTrain, Share };

inline const char* phase_name(Phase p) { return p == Phase::SelfTrain ? "self" : "share"; }

enum class ShareLossKind { Mse, Kd };

/// Alternation plan: after share_start_episode, update slots cycle through
/// self_steps self-training slots followed by share_steps sharing slots.
struct ShareSchedule {
    std::size_t self_steps = 7;
    std::size_t share_steps = 3;
    std::size_t share_start_episode = 200; // sharing begins strictly after this episode
    ShareLossKind share_loss = ShareLossKind::Mse;
    double share_temperature = 1.0; // only read for the Kd loss

    void validate() const {
        if (self_steps == 0 && share_steps == 0)
            throw ConfigError("ShareSchedule: self_steps and share_steps cannot both be 0");
        if (share_loss == ShareLossKind::Kd && share_temperature <= 0.0)
            throw ConfigError("ShareSchedule: share_temperature must be > 0");
    }

    std::size_t cycle_length() const { return self_steps + share_steps; }
};

/// Phase of one update slot. slot_index counts update slots since sharing
/// became eligible (0-based); before and at share_start_episode every slot is
/// self-training and the counter does not advance.
inline Phase schedule_phase(const ShareSchedule& sched, std::size_t episode, std::size_t slot_index) {
    if (episode <= sched.share_start_episode) return Phase::SelfTrain;
    if (sched.self_steps == 0) return Phase::Share;
    if (sched.share_steps == 0) return Phase::SelfTrain;
    return slot_index % sched.cycle_length() < sched.self_steps ? Phase::SelfTrain : Phase::Share;
}

/// Peer policy outputs on a common observation batch: advice[k] holds peer
/// k's logits (peers in agent-index order, the advised agent skipped), each
/// batch x action_dim.
struct AdviceBatch {
    std::vector<Tensor2> peer_logits;
    std::vector<std::size_t> peer_indices;
};

/// Evaluates every peer's online actor on the advised agent's observation
/// batch. Reads peers only; collect for all agents before any of them
/// updates to make a sharing round synchronous.
inline AdviceBatch collect_advice(std::span<const AgentNets> agents, std::size_t agent_index,
                                  const Tensor2& obs_batch) {
    if (agents.size() < 2)
        throw ConfigError("collect_advice: sharing needs at least two agents");
    if (agent_index >= agents.size())
        throw ParameterError("collect_advice: agent index out of range");
    AdviceBatch advice;
    for (std::size_t k = 0; k < agents.size(); ++k) {
        if (k == agent_index) continue;
        advice.peer_logits.push_back(nn::mlp_forward(agents[k].actor, obs_batch));
        advice.peer_indices.push_back(k);
    }
    return advice;
}

/// Sharing objective and its actor gradient without applying an update:
/// the advised agent's logits are pulled toward each peer's logits, averaged
/// over peers. Mse compares raw logits; Kd compares tempered distributions.
inline std::pair<double, Gradients> share_loss_and_grads(const AgentNets& self, const Tensor2& obs_batch,
                                                         const AdviceBatch& advice,
                                                         const ShareSchedule& sched) {
    if (advice.peer_logits.empty())
        throw ConfigError("share update: no advice collected");
    const Tensor2 own_logits = nn::mlp_forward(self.actor, obs_batch);
    const double peer_weight = 1.0 / static_cast<double>(advice.peer_logits.size());

    double loss = 0.0;
    Tensor2 d_logits(own_logits.rows, own_logits.cols);
    for (const Tensor2& peer : advice.peer_logits) {
        nn::require_same_shape(own_logits, peer, "share update: peer logits");
        if (sched.share_loss == ShareLossKind::Mse) {
            loss += peer_weight * nn::mse_share_loss(own_logits, peer);
            const Tensor2 g = nn::mse_share_loss_grad(own_logits, peer);
            for (std::size_t i = 0; i < d_logits.data.size(); ++i)
                d_logits.data[i] += peer_weight * g.data[i];
        } else {
            loss += peer_weight * nn::kd_loss(own_logits, peer, sched.share_temperature);
            const Tensor2 g = nn::kd_loss_grad(own_logits, peer, sched.share_temperature);
            for (std::size_t i = 0; i < d_logits.data.size(); ++i)
                d_logits.data[i] += peer_weight * g.data[i];
        }
    }
    Gradients grads = nn::mlp_backward(self.actor, obs_batch, d_logits);
    return {loss, std::move(grads)};
}

/// One sharing step on the advised agent's actor (its critic and targets are
/// untouched); returns the pre-step loss. Advice must have been collected
/// beforehand so simultaneous updates see consistent peers.
inline double share_update(AgentNets& self, const Tensor2& obs_batch, const AdviceBatch& advice,
                           const ShareSchedule& sched, const TrainConfig& cfg) {
    auto [loss, grads] = share_loss_and_grads(self, obs_batch, advice, sched);
    if (!std::isfinite(loss)) throw NumericError("share_update: non-finite loss");
    nn::clip_gradients(grads, cfg.grad_clip_norm);
    nn::optimizer_step(self.actor, grads, cfg.share_lr());
    return loss;
}

} // namespace knowsr::sharing
