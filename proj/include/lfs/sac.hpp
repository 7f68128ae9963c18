#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "lfs/optim.hpp"
#include "lfs/protossl.hpp"

namespace lfs::sac {

using framekit::Observation;
using numgrad::Adam;
using numgrad::Array;
using numgrad::ParamStore;
using numgrad::Tape;
using numgrad::Var;
using protossl::NetworkBank;

struct SacHyper {
    double discount = 0.99;
    int actor_update_frequency = 2;
    int critic_update_frequency = 1;
    int critic_target_update_frequency = 2;
    double critic_target_ema = 0.01;
    double lr = 1e-4;
    double init_temperature = 0.1;
    double log_std_min = -10.0;
    double log_std_max = 2.0;

    void validate() const {
        require(discount > 0.0 && discount < 1.0, "discount must be in (0,1), got ", discount);
        require(actor_update_frequency >= 1 && critic_update_frequency >= 1 && critic_target_update_frequency >= 1,
                "update frequencies must be >= 1");
        require(critic_target_ema > 0.0 && critic_target_ema <= 1.0, "critic target EMA must be in (0,1]");
        require(init_temperature > 0.0, "initial temperature must be positive");
        require(log_std_min < log_std_max, "log stddev bounds inverted");
    }
};

struct SacConfig {
    int latent_dim = 128;
    int feature_dim = 50;
    int hidden = 1024;
    int action_dim = 2;
};

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
constexpr double kSquashEps = 1e-6;

// Feature head (latent -> feature, trained by the SAC losses only), actor
// emitting squashed-Gaussian mean/log-stddev, twin critics and their EMA
// target copies, and the learnable entropy temperature.
class SacNets {
public:
    SacNets(const SacConfig& cfg, const SacHyper& hyper, Rng& rng) : cfg_(cfg) {
        store_.add("feat/w", numgrad::orthogonal(cfg.latent_dim, cfg.feature_dim, rng));
        store_.add("feat/b", Array::zeros({cfg.feature_dim}));
        init_mlp("actor/", cfg.feature_dim, rng);
        store_.add("actor/mu_w", numgrad::orthogonal(cfg.hidden, cfg.action_dim, rng));
        store_.add("actor/mu_b", Array::zeros({cfg.action_dim}));
        store_.add("actor/std_w", numgrad::orthogonal(cfg.hidden, cfg.action_dim, rng));
        store_.add("actor/std_b", Array::zeros({cfg.action_dim}));
        init_critic("critic1/", rng);
        init_critic("critic2/", rng);
        copy_group("critic1/", "tgt_critic1/");
        copy_group("critic2/", "tgt_critic2/");
        store_.add("alpha/log", Array({1}, {std::log(hyper.init_temperature)}));
    }

    const SacConfig& config() const { return cfg_; }
    ParamStore& store() { return store_; }
    const ParamStore& store() const { return store_; }

    std::vector<std::string> critic_group() const {
        return collect({"critic1/", "critic2/", "feat/"});
    }
    std::vector<std::string> actor_group() const { return collect({"actor/"}); }
    std::vector<std::string> alpha_group() const { return {"alpha/log"}; }

    double alpha() const { return std::exp(store_.value("alpha/log").data[0]); }

    Var features(Tape& t, Var h, bool trainable) const {
        auto leaf = [&](const std::string& n) { return trainable ? t.param(n) : t.frozen(n); };
        return t.tanh_(t.affine(h, leaf("feat/w"), leaf("feat/b")));
    }

    struct ActorOut {
        Var mu, log_std;
    };

    ActorOut actor(Tape& t, Var feat, const SacHyper& hyper, bool trainable) const {
        auto leaf = [&](const std::string& n) { return trainable ? t.param(n) : t.frozen(n); };
        Var h = t.relu(t.affine(feat, leaf("actor/l1_w"), leaf("actor/l1_b")));
        h = t.relu(t.affine(h, leaf("actor/l2_w"), leaf("actor/l2_b")));
        Var mu = t.affine(h, leaf("actor/mu_w"), leaf("actor/mu_b"));
        Var log_std = t.clamp(t.affine(h, leaf("actor/std_w"), leaf("actor/std_b")), hyper.log_std_min,
                              hyper.log_std_max);
        return {mu, log_std};
    }

    Var critic(Tape& t, const std::string& prefix, Var feat, Var action, bool trainable) const {
        auto leaf = [&](const std::string& n) { return trainable ? t.param(prefix + n) : t.frozen(prefix + n); };
        Var x = t.concat_cols(feat, action);
        Var h = t.relu(t.affine(x, leaf("l1_w"), leaf("l1_b")));
        h = t.relu(t.affine(h, leaf("l2_w"), leaf("l2_b")));
        return t.affine(h, leaf("out_w"), leaf("out_b"));  // [N x 1]
    }

    Var min_critic(Tape& t, const std::string& p1, const std::string& p2, Var feat, Var action, bool trainable) const {
        return t.minimum(critic(t, p1, feat, action, trainable), critic(t, p2, feat, action, trainable));
    }

    struct Sampled {
        Var action;   // [N x A], tanh-squashed
        Var log_pi;   // [N], log-density of the sampled action
    };

    // reparameterized squashed-Gaussian sample; noise supplied by the caller
    Sampled sample_action(Tape& t, const ActorOut& a, const Array& noise) const {
        Var sigma = t.exp_(a.log_std);
        Var u = t.add(a.mu, t.mul(sigma, t.input(noise)));
        Var act = t.tanh_(u);
        // log N(u; mu, sigma) = -xi^2/2 - log sigma - log(2 pi)/2, with xi the noise
        Array base = noise;
        for (auto& v : base.data) v = -0.5 * v * v - 0.5 * kLogTwoPi;
        Var elems = t.sub(t.input(base), a.log_std);
        // tanh correction: - log(1 - a^2 + eps)
        Var one_minus = t.add_scalar(t.scale(t.mul(act, act), -1.0), 1.0 + kSquashEps);
        elems = t.sub(elems, t.log_(one_minus));
        return {act, t.row_sum(elems)};
    }

    void update_critic_targets(double momentum) {
        numgrad::ema_update_params(store_, target_pairs(), momentum);
    }

    std::vector<std::pair<std::string, std::string>> target_pairs() const {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& n : store_.names())
            if (n.rfind("critic1/", 0) == 0 || n.rfind("critic2/", 0) == 0) out.emplace_back("tgt_" + n, n);
        return out;
    }

private:
    void init_mlp(const std::string& p, int in_dim, Rng& rng) {
        store_.add(p + "l1_w", numgrad::orthogonal(in_dim, cfg_.hidden, rng));
        store_.add(p + "l1_b", Array::zeros({cfg_.hidden}));
        store_.add(p + "l2_w", numgrad::orthogonal(cfg_.hidden, cfg_.hidden, rng));
        store_.add(p + "l2_b", Array::zeros({cfg_.hidden}));
    }

    void init_critic(const std::string& p, Rng& rng) {
        store_.add(p + "l1_w", numgrad::orthogonal(cfg_.feature_dim + cfg_.action_dim, cfg_.hidden, rng));
        store_.add(p + "l1_b", Array::zeros({cfg_.hidden}));
        store_.add(p + "l2_w", numgrad::orthogonal(cfg_.hidden, cfg_.hidden, rng));
        store_.add(p + "l2_b", Array::zeros({cfg_.hidden}));
        store_.add(p + "out_w", numgrad::orthogonal(cfg_.hidden, 1, rng));
        store_.add(p + "out_b", Array::zeros({1}));
    }

    void copy_group(const std::string& from, const std::string& to) {
        std::vector<std::string> names = store_.names();
        for (const auto& n : names)
            if (n.rfind(from, 0) == 0) store_.add(to + n.substr(from.size()), store_.value(n));
    }

    std::vector<std::string> collect(const std::vector<std::string>& prefixes) const {
        std::vector<std::string> out;
        for (const auto& n : store_.names())
            for (const auto& p : prefixes)
                if (n.rfind(p, 0) == 0) {
                    out.push_back(n);
                    break;
                }
        return out;
    }

    SacConfig cfg_;
    ParamStore store_;
};

enum class ActMode { Stochastic, Deterministic };

// encode (gradients disabled), feature head, actor; components land in [-1,1]
inline std::vector<double> act(const Observation& obs, SacNets& nets, const NetworkBank& bank, const SacHyper& hyper,
                               ActMode mode, Rng* rng = nullptr) {
    require(!obs.synthetic, "act expects a real observation");
    Tape t(&nets.store(), /*grad_enabled=*/false);
    Tape tb(const_cast<ParamStore*>(&bank.store()), /*grad_enabled=*/false);
    Array h = [&] {
        Var x = tb.input(protossl::obs_batch_to_array({obs}));
        return tb.val(bank.encode(tb, x, protossl::Branch::Online));
    }();
    Var feat = nets.features(t, t.input(h), false);
    auto aout = nets.actor(t, feat, hyper, false);
    const int a_dim = nets.config().action_dim;
    std::vector<double> action(static_cast<size_t>(a_dim));
    if (mode == ActMode::Deterministic) {
        Var a = t.tanh_(aout.mu);
        for (int i = 0; i < a_dim; ++i) action[static_cast<size_t>(i)] = t.val(a).data[static_cast<size_t>(i)];
    } else {
        require(rng != nullptr, "stochastic act needs an rng");
        Array noise = Array::zeros({1, a_dim});
        for (auto& v : noise.data) v = rng->normal();
        auto s = nets.sample_action(t, aout, noise);
        for (int i = 0; i < a_dim; ++i) action[static_cast<size_t>(i)] = t.val(s.action).data[static_cast<size_t>(i)];
    }
    return action;
}

struct TransitionBatch {
    std::vector<Observation> prev, next;  // augmented, real only
    Array actions;                        // [N x A]
    std::vector<double> rewards;
    std::vector<uint8_t> done;

    int size() const { return static_cast<int>(prev.size()); }

    void validate() const {
        for (const auto& o : prev) require(!o.synthetic, "synthetic observation in a critic batch");
        for (const auto& o : next) require(!o.synthetic, "synthetic observation in a critic batch");
        require(prev.size() == next.size() && rewards.size() == prev.size() && done.size() == prev.size(),
                "ragged transition batch");
    }
};

// One gradient step on the twin critics (and the feature head) toward the
// entropy-regularized Bellman target. Encoder latents enter as constants, so
// encoder parameters are untouched by construction.
inline double critic_update(const TransitionBatch& batch, SacNets& nets, const NetworkBank& bank,
                            const SacHyper& hyper, Adam& critic_opt, Rng& rng, const Array* h_prev_cached = nullptr) {
    hyper.validate();
    batch.validate();
    const int n = batch.size();
    const int a_dim = nets.config().action_dim;

    require(!h_prev_cached || h_prev_cached->dim(0) == n, "cached latent batch size mismatch");
    Array h_prev = h_prev_cached ? *h_prev_cached : bank.encode_batch(batch.prev);
    Array h_next = bank.encode_batch(batch.next);

    // target: r + gamma (min tgt-critic - alpha log pi) on the next state
    Array target({n, 1}, std::vector<double>(static_cast<size_t>(n), 0.0));
    {
        Tape t(&nets.store(), /*grad_enabled=*/false);
        Var featn = nets.features(t, t.input(h_next), false);
        auto aout = nets.actor(t, featn, hyper, false);
        Array noise = Array::zeros({n, a_dim});
        for (auto& v : noise.data) v = rng.normal();
        auto s = nets.sample_action(t, aout, noise);
        Var qmin = nets.min_critic(t, "tgt_critic1/", "tgt_critic2/", featn, s.action, false);
        const double alpha = nets.alpha();
        for (int i = 0; i < n; ++i) {
            const double bootstrap = batch.done[static_cast<size_t>(i)]
                                         ? 0.0
                                         : hyper.discount * (t.val(qmin).data[static_cast<size_t>(i)] -
                                                             alpha * t.val(s.log_pi).data[static_cast<size_t>(i)]);
            target.data[static_cast<size_t>(i)] = batch.rewards[static_cast<size_t>(i)] + bootstrap;
        }
    }

    nets.store().zero_grads();
    double loss_value = 0.0;
    {
        Tape t(&nets.store());
        Var feat = nets.features(t, t.input(h_prev), true);
        Var q1 = nets.critic(t, "critic1/", feat, t.input(batch.actions), true);
        Var q2 = nets.critic(t, "critic2/", feat, t.input(batch.actions), true);
        Var y = t.input(target);
        Var d1 = t.sub(q1, y);
        Var d2 = t.sub(q2, y);
        Var loss = t.add(t.mean(t.mul(d1, d1)), t.mean(t.mul(d2, d2)));
        loss_value = t.backward(loss);
    }
    critic_opt.step();
    return loss_value;
}

// Actor step maximizing min-critic minus alpha log pi (features and critics
// act as constants for the actor), then the temperature step toward the
// target entropy -|A|.
inline std::pair<double, double> actor_alpha_update(const TransitionBatch& batch, SacNets& nets,
                                                    const NetworkBank& bank, const SacHyper& hyper, Adam& actor_opt,
                                                    Adam& alpha_opt, Rng& rng, const Array* h_prev_cached = nullptr) {
    hyper.validate();
    batch.validate();
    const int n = batch.size();
    const int a_dim = nets.config().action_dim;

    Array h_prev = h_prev_cached ? *h_prev_cached : bank.encode_batch(batch.prev);
    Array feat_const;
    {
        Tape t(&nets.store(), /*grad_enabled=*/false);
        feat_const = t.val(nets.features(t, t.input(h_prev), false));
    }

    Array noise = Array::zeros({n, a_dim});
    for (auto& v : noise.data) v = rng.normal();

    double actor_loss = 0.0;
    double mean_log_pi = 0.0;
    nets.store().zero_grads();
    {
        Tape t(&nets.store());
        Var feat = t.input(feat_const);
        auto aout = nets.actor(t, feat, hyper, true);
        auto s = nets.sample_action(t, aout, noise);
        Var qmin = nets.min_critic(t, "critic1/", "critic2/", feat, s.action, false);
        const double alpha = nets.alpha();
        Var obj = t.sub(t.scale(s.log_pi, alpha), t.reshape(qmin, {n}));
        actor_loss = t.backward(t.mean(obj));
        for (int i = 0; i < n; ++i) mean_log_pi += t.val(s.log_pi).data[static_cast<size_t>(i)];
        mean_log_pi /= n;
    }
    actor_opt.step();

    // alpha step: loss = -alpha (E[log pi] + target entropy), target = -|A|
    const double target_entropy = -static_cast<double>(a_dim);
    nets.store().zero_grads();
    {
        Tape t(&nets.store());
        Var alpha = t.exp_(t.param("alpha/log"));
        Var loss = t.scale(alpha, -(mean_log_pi + target_entropy));
        t.backward(t.sum(loss));
    }
    alpha_opt.step();
    return {actor_loss, nets.alpha()};
}

// Average min-critic value over `samples` uniform random actions per
// observation; returns the batch mean and batch max.
inline std::pair<double, double> value_stats(const std::vector<Observation>& observations, SacNets& nets,
                                             const NetworkBank& bank, int samples, Rng& rng) {
    require(!observations.empty(), "value_stats needs at least one observation");
    require(samples >= 1, "value_stats needs at least one action sample");
    const int n = static_cast<int>(observations.size());
    const int a_dim = nets.config().action_dim;

    Array h = bank.encode_batch(observations);
    std::vector<double> value(static_cast<size_t>(n), 0.0);
    Tape t(&nets.store(), /*grad_enabled=*/false);
    Var feat = nets.features(t, t.input(h), false);
    for (int s = 0; s < samples; ++s) {
        Array actions = Array::zeros({n, a_dim});
        for (auto& v : actions.data) v = rng.uniform(-1.0, 1.0);
        Var qmin = nets.min_critic(t, "critic1/", "critic2/", feat, t.input(actions), false);
        for (int i = 0; i < n; ++i) value[static_cast<size_t>(i)] += t.val(qmin).data[static_cast<size_t>(i)];
    }
    double mean = 0.0, mx = -1e300;
    for (auto& v : value) {
        v /= samples;
        mean += v;
        mx = std::max(mx, v);
    }
    return {mean / n, mx};
}

}  // namespace lfs::sac
