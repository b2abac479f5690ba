#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "knowsr/env.hpp"
#include "knowsr/fdcheck.hpp"
#include "knowsr/losses.hpp"
#include "knowsr/maddpg.hpp"
#include "knowsr/metrics.hpp"
#include "knowsr/mlp.hpp"
#include "knowsr/rng.hpp"
#include "knowsr/sharing.hpp"
#include "knowsr/textio.hpp"
#include "knowsr/trainer.hpp"

namespace knowsr::verify {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace detail {

inline nn::Tensor2 random_batch(std::size_t rows, std::size_t cols, Rng& rng) {
    nn::Tensor2 t(rows, cols);
    for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
    return t;
}

inline nn::Tensor2 hcat(const nn::Tensor2& a, const nn::Tensor2& b) {
    nn::Tensor2 out(a.rows, a.cols + b.cols);
    for (std::size_t r = 0; r < a.rows; ++r) {
        for (std::size_t c = 0; c < a.cols; ++c) out(r, c) = a(r, c);
        for (std::size_t c = 0; c < b.cols; ++c) out(r, a.cols + c) = b(r, c);
    }
    return out;
}

// Regression loss mean (f(x) - y)^2 and its analytic parameter gradient.
inline double mse_regression_loss(const nn::MlpParams& p, const nn::Tensor2& x, const nn::Tensor2& y) {
    const nn::Tensor2 q = nn::mlp_forward(p, x);
    double loss = 0.0;
    for (std::size_t b = 0; b < q.rows; ++b) {
        const double d = q(b, 0) - y(b, 0);
        loss += d * d;
    }
    return loss / static_cast<double>(q.rows);
}

inline nn::Gradients mse_regression_grads(const nn::MlpParams& p, const nn::Tensor2& x,
                                          const nn::Tensor2& y) {
    const nn::Tensor2 q = nn::mlp_forward(p, x);
    nn::Tensor2 upstream(q.rows, 1);
    for (std::size_t b = 0; b < q.rows; ++b)
        upstream(b, 0) = 2.0 * (q(b, 0) - y(b, 0)) / static_cast<double>(q.rows);
    return nn::mlp_backward(p, x, upstream);
}

// Value objective -mean critic([obs | softmax(actor(obs))]) and its gradient
// with respect to the actor parameters, the chain the policy update relies on.
inline double neg_q_loss(const nn::MlpParams& actor, const nn::MlpParams& critic,
                         const nn::Tensor2& obs) {
    const nn::Tensor2 a = maddpg::policy_forward(actor, obs);
    const nn::Tensor2 q = nn::mlp_forward(critic, hcat(obs, a));
    double mean_q = 0.0;
    for (std::size_t b = 0; b < q.rows; ++b) mean_q += q(b, 0);
    return -mean_q / static_cast<double>(q.rows);
}

inline nn::Gradients neg_q_grads(const nn::MlpParams& actor, const nn::MlpParams& critic,
                                 const nn::Tensor2& obs) {
    const nn::Tensor2 a = maddpg::policy_forward(actor, obs);
    const nn::Tensor2 x = hcat(obs, a);
    nn::Tensor2 upstream(x.rows, 1, -1.0 / static_cast<double>(x.rows));
    nn::Tensor2 input_grad;
    nn::mlp_backward(critic, x, upstream, &input_grad);
    nn::Tensor2 d_action(a.rows, a.cols);
    for (std::size_t b = 0; b < a.rows; ++b)
        for (std::size_t c = 0; c < a.cols; ++c) d_action(b, c) = input_grad(b, obs.cols + c);
    const nn::Tensor2 d_logits = maddpg::detail::softmax_backward(a, d_action);
    return nn::mlp_backward(actor, obs, d_logits);
}

inline bool params_equal(const nn::MlpParams& a, const nn::MlpParams& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t k = 0; k < a.layers.size(); ++k) {
        if (a.layers[k].weight.data != b.layers[k].weight.data) return false;
        if (a.layers[k].bias.data != b.layers[k].bias.data) return false;
    }
    return true;
}

} // namespace detail

/// Backprop vs central finite differences on randomly built toy networks,
/// one round per network: a regression loss, the actor-through-critic value
/// objective, the logit-matching loss, and the distillation loss at several
/// temperatures. Returns the worst relative error seen.
inline CheckResult check_gradient_suite(std::size_t n_nets = 20, std::uint64_t seed = 42) {
    CheckResult res;
    res.name = "gradient_suite";
    double worst = 0.0;
    std::string worst_at = "none";
    const auto consider = [&](double err, const std::string& where, std::size_t net) {
        if (err > worst) {
            worst = err;
            worst_at = where + " (net " + std::to_string(net) + ")";
        }
    };

    for (std::size_t i = 0; i < n_nets; ++i) {
        Rng rng(derive_seed(seed, i));
        const std::size_t d_obs = 2 + rng.uniform_index(3);  // 2..4
        const std::size_t d_act = 2 + rng.uniform_index(3);  // 2..4
        const std::size_t hidden = 3 + rng.uniform_index(6); // 3..8
        const std::size_t batch = 3;
        const nn::Tensor2 obs = detail::random_batch(batch, d_obs, rng);

        { // regression loss on a scalar-output net
            const nn::MlpParams net = nn::make_mlp({d_obs, hidden, 1}, rng);
            const nn::Tensor2 y = detail::random_batch(batch, 1, rng);
            const auto loss = [&](const nn::MlpParams& p) { return detail::mse_regression_loss(p, obs, y); };
            consider(nn::max_rel_error(detail::mse_regression_grads(net, obs, y),
                                       nn::fd_gradients(net, loss)),
                     "regression", i);
        }
        { // value objective through a frozen scalar net
            const nn::MlpParams actor = nn::make_mlp({d_obs, hidden, d_act}, rng);
            const nn::MlpParams critic = nn::make_mlp({d_obs + d_act, hidden, 1}, rng);
            const auto loss = [&](const nn::MlpParams& p) { return detail::neg_q_loss(p, critic, obs); };
            consider(nn::max_rel_error(detail::neg_q_grads(actor, critic, obs),
                                       nn::fd_gradients(actor, loss)),
                     "neg_q", i);
        }
        { // logit matching and distillation against fixed advice
            const nn::MlpParams actor = nn::make_mlp({d_obs, hidden, d_act}, rng);
            const nn::Tensor2 advice = detail::random_batch(batch, d_act, rng);
            const auto mse_loss = [&](const nn::MlpParams& p) {
                return nn::mse_share_loss(nn::mlp_forward(p, obs), advice);
            };
            consider(nn::max_rel_error(
                         nn::mlp_backward(actor, obs,
                                          nn::mse_share_loss_grad(nn::mlp_forward(actor, obs), advice)),
                         nn::fd_gradients(actor, mse_loss)),
                     "mse_share", i);
            for (const double t : {1.0, 2.0, 5.0}) {
                const auto kd = [&](const nn::MlpParams& p) {
                    return nn::kd_loss(nn::mlp_forward(p, obs), advice, t);
                };
                consider(nn::max_rel_error(
                             nn::mlp_backward(actor, obs,
                                              nn::kd_loss_grad(nn::mlp_forward(actor, obs), advice, t)),
                             nn::fd_gradients(actor, kd)),
                         "kd T=" + std::to_string(static_cast<int>(t)), i);
            }
        }
    }
    res.passed = worst < 1e-4;
    std::ostringstream detail;
    detail << n_nets << " nets, worst rel err " << format_double(worst) << " at " << worst_at;
    res.detail = detail.str();
    return res;
}

/// Hand-computed loss values: a two-logit softmax, a two-bin divergence, and
/// the logit-matching loss on a fixed pair.
inline CheckResult check_loss_values() {
    CheckResult res;
    res.name = "loss_values";
    const nn::Tensor2 logits = nn::Tensor2::from_rows({{1.0, 0.0}});
    const nn::Tensor2 sm = nn::softmax_with_temperature(logits, 1.0);
    const bool softmax_ok =
        std::abs(sm(0, 0) - 0.7310585786300049) < 1e-5 && std::abs(sm(0, 1) - 0.2689414213699951) < 1e-5;

    const nn::Tensor2 p = nn::Tensor2::from_rows({{0.5, 0.5}});
    const nn::Tensor2 q = nn::Tensor2::from_rows({{0.25, 0.75}});
    const double kl = nn::kl_divergence(p, q);
    const bool kl_ok = std::abs(kl - 0.14384103622589045) < 1e-5;

    const double mse = nn::mse_share_loss(nn::Tensor2::from_rows({{1.0, 2.0}}),
                                          nn::Tensor2::from_rows({{3.0, 4.0}}));
    const bool mse_ok = mse == 4.0;

    res.passed = softmax_ok && kl_ok && mse_ok;
    std::ostringstream detail;
    detail << "softmax " << (softmax_ok ? "ok" : "BAD") << ", kl " << format_double(kl)
           << (kl_ok ? " ok" : " BAD") << ", mse " << format_double(mse) << (mse_ok ? " ok" : " BAD");
    res.detail = detail.str();
    return res;
}

/// Identically initialized agents advising each other have nothing to learn:
/// the sharing loss is exactly zero and parameters stay bit-identical across
/// 100 rounds.
inline CheckResult check_consensus_fixed_point(std::size_t rounds = 100) {
    CheckResult res;
    res.name = "consensus_fixed_point";
    maddpg::TrainConfig train;
    train.hidden = {8, 8};
    sharing::ShareSchedule sched;
    Rng rng(7);
    const std::size_t obs_dim = 6;
    std::vector<maddpg::AgentNets> agents;
    agents.push_back(maddpg::make_agent_nets(0, obs_dim, 3, train, rng));
    for (std::size_t i = 1; i < 3; ++i) {
        maddpg::AgentNets copy = agents[0];
        copy.index = i;
        agents.push_back(std::move(copy));
    }
    const std::vector<maddpg::AgentNets> reference = agents;
    const nn::Tensor2 obs = detail::random_batch(4, obs_dim, rng);

    bool loss_zero = true;
    for (std::size_t round = 0; round < rounds; ++round) {
        std::vector<sharing::AdviceBatch> advice;
        for (std::size_t i = 0; i < agents.size(); ++i)
            advice.push_back(sharing::collect_advice(agents, i, obs));
        for (std::size_t i = 0; i < agents.size(); ++i) {
            const double loss = sharing::share_update(agents[i], obs, advice[i], sched, train);
            if (loss != 0.0) loss_zero = false;
        }
    }
    bool unchanged = true;
    for (std::size_t i = 0; i < agents.size(); ++i)
        if (!detail::params_equal(agents[i].actor, reference[i].actor)) unchanged = false;

    res.passed = loss_zero && unchanged;
    res.detail = std::to_string(rounds) + " rounds, loss " + (loss_zero ? "0 throughout" : "NONZERO") +
                 ", params " + (unchanged ? "bit-identical" : "CHANGED");
    return res;
}

/// One hand-integrated physics step (unit force from rest) and the
/// reward-at-zero-iff-covered property.
inline CheckResult check_physics() {
    CheckResult res;
    res.name = "physics";
    env::WorldConfig world;
    world.n_agents = 2;
    world.n_landmarks = 1;
    env::WorldState state;
    state.agent_pos = {{0.0, 0.0}, {50.0, 50.0}};
    state.agent_vel = {{0.0, 0.0}, {0.0, 0.0}};
    state.landmark_pos = {{100.0, 100.0}};

    // force_scale * (a1 - a2) = 5 * 0.2 = 1, so the applied force is (1, 0).
    nn::Tensor2 actions(2, 5);
    actions(0, 1) = 0.2;
    const env::StepResult sr = env::step(state, actions, world);
    const env::Vec2 v = sr.state.agent_vel[0];
    const env::Vec2 p = sr.state.agent_pos[0];
    const bool step_ok = std::abs(v.x - 0.1) < 1e-12 && std::abs(v.y) < 1e-12 &&
                         std::abs(p.x - 0.01) < 1e-12 && std::abs(p.y) < 1e-12;

    env::WorldState covered;
    covered.agent_pos = {{0.3, -0.2}, {-0.6, 0.4}};
    covered.agent_vel = {{0.0, 0.0}, {0.0, 0.0}};
    covered.landmark_pos = {{0.3, -0.2}, {-0.6, 0.4}};
    const bool zero_ok = env::shared_distance_reward(covered) == 0.0;
    covered.agent_pos[0].x += 0.01;
    const bool negative_ok = env::shared_distance_reward(covered) < 0.0;

    res.passed = step_ok && zero_ok && negative_ok;
    res.detail = std::string("one-step ") + (step_ok ? "exact" : "OFF") + ", covered reward " +
                 (zero_ok && negative_ok ? "zero iff covered" : "WRONG");
    return res;
}

/// Two identically configured short runs must serialize to byte-identical
/// metrics text.
inline CheckResult check_determinism() {
    CheckResult res;
    res.name = "determinism";
    trainer::RunConfig cfg;
    cfg.world.n_agents = 2;
    cfg.world.n_landmarks = 2;
    cfg.episodes = 10;
    cfg.train.hidden = {8, 8};
    cfg.train.batch_size = 64;
    cfg.train.chunk_size = 32;
    cfg.train.update_every = 2;
    cfg.schedule.share_start_episode = 4;
    cfg.sharing_enabled = true;

    const auto render = [&]() {
        const trainer::RunResult run = trainer::run_training(cfg, 99);
        std::ostringstream out;
        metrics::write_metrics(out, run.metrics);
        return out.str();
    };
    const std::string first = render();
    const std::string second = render();
    res.passed = first == second;
    res.detail = res.passed ? "10-episode run reproduced byte-identically"
                            : "metrics text DIFFERS between identical runs";
    return res;
}

inline std::vector<CheckResult> run_all() {
    return {check_gradient_suite(), check_loss_values(), check_consensus_fixed_point(),
            check_physics(), check_determinism()};
}

} // namespace knowsr::verify
