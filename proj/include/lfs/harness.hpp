#pragma once

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "lfs/checkpoint.hpp"
#include "lfs/config.hpp"
#include "lfs/framepack.hpp"
#include "lfs/replay.hpp"

namespace lfs::harness {

using framekit::Frame;
using framekit::FrameQueue;
using framekit::Observation;
using framekit::SyntheticPair;
using numgrad::Adam;
using numgrad::Array;
using protossl::NetworkBank;
using replay::RingBuffer;
using replay::Transition;
using sac::SacNets;

// named rng streams derived from the master seed
namespace stream {
constexpr uint64_t kInit = 1;
constexpr uint64_t kEnvEpisode = 2;
constexpr uint64_t kRandomAction = 3;
constexpr uint64_t kActorNoise = 4;
constexpr uint64_t kSampling = 5;
constexpr uint64_t kEval = 6;
constexpr uint64_t kAnalysis = 7;
constexpr uint64_t kVideo = 8;
}  // namespace stream

struct EvalResult {
    double mean = 0.0;
    double stddev = 0.0;
    std::vector<double> returns;
};

// Frame-stack and queue bookkeeping for one episode stream. The initial
// observation repeats the first frame with pre-episode indices so it is a
// real, consecutively-stamped stack.
class Rollout {
public:
    Rollout(const worldsim::EnvSpec& spec, uint64_t master_seed) : spec_(spec), master_seed_(master_seed) {}

    void begin_episode() {
        auto [state, frame] = worldsim::reset(spec_, seed_mix(master_seed_, stream::kEnvEpisode, episodes_));
        ++episodes_;
        state_ = state;
        decision_ = 0;
        stack_.clear();
        Frame f0 = frame;
        f0.index = -2;
        stack_.push_back(f0);
        f0.index = -1;
        stack_.push_back(f0);
        f0.index = 0;
        stack_.push_back(f0);
        obs_ = framekit::stack_frames(stack_[0], stack_[1], stack_[2]);
        queue_.clear();
        queue_.push(obs_);
    }

    const Observation& obs() const { return obs_; }
    const FrameQueue& queue() const { return queue_; }
    int64_t episodes_started() const { return episodes_; }

    struct Outcome {
        Observation prev, next;
        double reward = 0.0;
        bool done = false;
    };

    // one decision step: apply the action `action_repeat` times, sum rewards
    Outcome step(const std::vector<double>& action) {
        Outcome out;
        out.prev = obs_;
        double reward = 0.0;
        worldsim::StepResult sr;
        for (int k = 0; k < spec_.action_repeat; ++k) {
            sr = worldsim::step(spec_, state_, action.data(), decision_ + 1);
            state_ = sr.state;
            reward += sr.reward;
        }
        ++decision_;
        stack_.pop_front();
        stack_.push_back(sr.frame);
        obs_ = framekit::stack_frames(stack_[0], stack_[1], stack_[2]);
        queue_.push(obs_);
        out.next = obs_;
        out.reward = reward;
        out.done = sr.done;
        return out;
    }

private:
    worldsim::EnvSpec spec_;
    uint64_t master_seed_;
    worldsim::EnvState state_;
    std::deque<Frame> stack_;
    FrameQueue queue_;
    Observation obs_;
    int64_t decision_ = 0;
    int64_t episodes_ = 0;
};

// deterministic rollouts with the current policy
inline EvalResult evaluate_policy(const worldsim::EnvSpec& spec, const NetworkBank& bank, SacNets& nets,
                                  const sac::SacHyper& hyper, int episodes, uint64_t eval_seed_base) {
    EvalResult res;
    const int64_t decisions = spec.episode_length / spec.action_repeat;
    for (int e = 0; e < episodes; ++e) {
        Rollout roll(spec, seed_mix(eval_seed_base, stream::kEval, static_cast<uint64_t>(e)));
        roll.begin_episode();
        double ret = 0.0;
        for (int64_t i = 0; i < decisions; ++i) {
            auto action = sac::act(roll.obs(), nets, bank, hyper, sac::ActMode::Deterministic);
            ret += roll.step(action).reward;
        }
        res.returns.push_back(ret);
    }
    for (double r : res.returns) res.mean += r;
    res.mean /= episodes;
    for (double r : res.returns) res.stddev += (r - res.mean) * (r - res.mean);
    res.stddev = episodes > 1 ? std::sqrt(res.stddev / (episodes - 1)) : 0.0;
    return res;
}

// uniform-random policy baseline over full episodes
inline EvalResult random_policy_baseline(const worldsim::EnvSpec& spec, int episodes, uint64_t seed) {
    EvalResult res;
    Rng rng(seed_mix(seed, stream::kRandomAction));
    const int64_t decisions = spec.episode_length / spec.action_repeat;
    std::vector<double> action(static_cast<size_t>(spec.action_dim()));
    for (int e = 0; e < episodes; ++e) {
        Rollout roll(spec, seed_mix(seed, stream::kEval, static_cast<uint64_t>(e)));
        roll.begin_episode();
        double ret = 0.0;
        for (int64_t i = 0; i < decisions; ++i) {
            for (auto& a : action) a = rng.uniform(-1.0, 1.0);
            ret += roll.step(action).reward;
        }
        res.returns.push_back(ret);
    }
    for (double r : res.returns) res.mean += r;
    res.mean /= episodes;
    for (double r : res.returns) res.stddev += (r - res.mean) * (r - res.mean);
    res.stddev = episodes > 1 ? std::sqrt(res.stddev / (episodes - 1)) : 0.0;
    return res;
}

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.8g", v);
    return buf;
}

}  // namespace detail

// one row per gradient update
struct MetricsRow {
    int64_t step = 0;
    bool has_eval = false;
    double episode_return = 0.0;
    bool has_ssl = false;
    double lfs_loss = 0.0;
    int n_selected = 0;
    double critic_loss = 0.0;
    bool has_actor = false;
    double actor_loss = 0.0;
    double alpha = 0.0;
};

class MetricsWriter {
public:
    explicit MetricsWriter(const std::string& path) : os_(path, std::ios::binary) {
        require(static_cast<bool>(os_), "cannot open metrics file: ", path);
        os_ << "step,episode_return,lfs_loss,n_selected,critic_loss,actor_loss,alpha\n";
    }

    void write(const MetricsRow& r) {
        os_ << r.step << ',';
        if (r.has_eval) os_ << detail::format_double(r.episode_return);
        os_ << ',';
        if (r.has_ssl) os_ << detail::format_double(r.lfs_loss);
        os_ << ',';
        if (r.has_ssl) os_ << r.n_selected;
        os_ << ',';
        os_ << detail::format_double(r.critic_loss) << ',';
        if (r.has_actor) os_ << detail::format_double(r.actor_loss);
        os_ << ',' << detail::format_double(r.alpha) << '\n';
    }

    void close() { os_.close(); }

private:
    std::ofstream os_;
};

// Orchestrates Algorithm-1 style end-to-end training: initial random phase
// filling both buffers, then interleaved environment interaction, auxiliary
// (SSL) updates and SAC updates on detached features, with periodic
// evaluation and checkpointing.
class Trainer {
public:
    Trainer(const TrainConfig& cfg, uint64_t seed, const std::string& outdir)
        : cfg_(cfg),
          seed_(seed),
          outdir_(outdir),
          init_rng_(seed_mix(seed, stream::kInit)),
          bank_(cfg.bank_config(), init_rng_),
          nets_(cfg.sac_config(), cfg.sac_hyper(), init_rng_),
          rl_buffer_(cfg.rl_buffer_capacity),
          aux_buffer_(cfg.aux_buffer_capacity),
          rollout_(cfg.env, seed),
          action_rng_(seed_mix(seed, stream::kRandomAction)),
          noise_rng_(seed_mix(seed, stream::kActorNoise)),
          sample_rng_(seed_mix(seed, stream::kSampling)),
          ssl_opt_(&bank_.store(), bank_.trainable_names(), cfg.ssl_hyper().lr),
          critic_opt_(&nets_.store(), nets_.critic_group(), cfg.sac_hyper().lr),
          actor_opt_(&nets_.store(), nets_.actor_group(), cfg.sac_hyper().lr),
          alpha_opt_(&nets_.store(), nets_.alpha_group(), cfg.sac_hyper().lr) {
        cfg_.validate();
        std::filesystem::create_directories(outdir_);
        if (cfg_.mode == "frozen_encoder" && !cfg_.encoder_checkpoint.empty())
            numgrad::load_checkpoint(cfg_.encoder_checkpoint, {{"ssl/", &bank_.store()}}, /*strict=*/false);
    }

    NetworkBank& bank() { return bank_; }
    SacNets& nets() { return nets_; }
    const TrainConfig& config() const { return cfg_; }
    int64_t transitions_pushed() const { return transitions_pushed_; }
    int64_t synthetic_pushed() const { return synthetic_pushed_; }
    int64_t updates_done() const { return updates_; }

    // Full run. On error the partial run directory is preserved with a marker.
    void run() {
        try {
            run_inner();
        } catch (const std::exception& e) {
            std::ofstream marker(outdir_ + "/FAILED");
            marker << e.what() << "\n";
            throw;
        }
    }

private:
    void run_inner() {
        MetricsWriter metrics(outdir_ + "/metrics.csv");
        const sac::SacHyper sh = cfg_.sac_hyper();
        const protossl::SslHyper ssl = cfg_.ssl_hyper();
        const bool frozen = cfg_.mode == "frozen_encoder";
        const bool push_synthetic = !cfg_.disable_fm && !frozen;
        const int64_t init_decisions = cfg_.init_steps / cfg_.env.action_repeat;
        const int64_t total_decisions = cfg_.total_steps / cfg_.env.action_repeat;
        const int64_t ckpt_interval = cfg_.checkpoint_interval > 0 ? cfg_.checkpoint_interval : cfg_.eval_interval;
        std::vector<double> action(static_cast<size_t>(cfg_.env.action_dim()));

        rollout_.begin_episode();
        for (int64_t i = 1; i <= total_decisions; ++i) {
            const bool random_phase = i <= init_decisions;
            if (random_phase) {
                for (auto& a : action) a = action_rng_.uniform(-1.0, 1.0);
            } else {
                action = sac::act(rollout_.obs(), nets_, bank_, sh, sac::ActMode::Stochastic, &noise_rng_);
            }
            auto outcome = rollout_.step(action);
            Transition tr;
            tr.prev = outcome.prev;
            tr.action = action;
            tr.reward = outcome.reward;
            tr.next = outcome.next;
            tr.done = outcome.done;
            rl_buffer_.push(std::move(tr));
            ++transitions_pushed_;
            if (push_synthetic && rollout_.queue().full()) {
                aux_buffer_.push(rollout_.queue().frame_mask());
                ++synthetic_pushed_;
            }
            if (outcome.done) rollout_.begin_episode();

            const int64_t env_step = i * cfg_.env.action_repeat;
            if (!random_phase) {
                MetricsRow row;
                row.step = env_step;
                if (env_step % cfg_.eval_interval == 0) {
                    auto ev = evaluate_policy(cfg_.env, bank_, nets_, sh, cfg_.eval_episodes,
                                              seed_mix(seed_, stream::kEval, static_cast<uint64_t>(env_step)));
                    row.has_eval = true;
                    row.episode_return = ev.mean;
                    eval_history_.emplace_back(env_step, ev.mean);
                }
                update(row, ssl, sh, frozen);
                metrics.write(row);
                if (env_step % ckpt_interval == 0) save_checkpoint_file("ckpt_" + std::to_string(env_step) + ".lfsc");
            }
        }
        save_checkpoint_file("final.lfsc");
        metrics.close();
    }

    void update(MetricsRow& row, const protossl::SslHyper& ssl, const sac::SacHyper& sh, bool frozen) {
        ++updates_;
        const int m = cfg_.batch_size;
        require(rl_buffer_.size() >= m, "RL buffer not warm at first update: have ", rl_buffer_.size(), ", need ", m,
                "; raise init_steps");

        // sample + augment the RL batch once; SSL real pairs reuse it
        const auto idx = rl_buffer_.sample_indices(m, sample_rng_);
        sac::TransitionBatch batch;
        batch.prev.reserve(static_cast<size_t>(m));
        batch.next.reserve(static_cast<size_t>(m));
        batch.actions = Array::zeros({m, cfg_.env.action_dim()});
        batch.rewards.resize(static_cast<size_t>(m));
        batch.done.resize(static_cast<size_t>(m));
        for (int b = 0; b < m; ++b) {
            const Transition& tr = rl_buffer_.at(idx[static_cast<size_t>(b)]);
            batch.prev.push_back(framekit::random_shift(tr.prev, cfg_.random_shift_pad, sample_rng_));
            batch.next.push_back(framekit::random_shift(tr.next, cfg_.random_shift_pad, sample_rng_));
            for (int a = 0; a < cfg_.env.action_dim(); ++a)
                batch.actions.data[static_cast<size_t>(b) * cfg_.env.action_dim() + a] = tr.action[static_cast<size_t>(a)];
            batch.rewards[static_cast<size_t>(b)] = tr.reward;
            batch.done[static_cast<size_t>(b)] = tr.done ? 1 : 0;
        }

        // auxiliary clustering objective with LNC batch assembly
        if (!frozen) {
            std::vector<SyntheticPair> syn;
            if (!cfg_.disable_fm && aux_buffer_.size() >= m) syn = aux_buffer_.sample_batch(m, sample_rng_);
            protossl::SslMode mode;
            mode.disable_fm = cfg_.disable_fm;
            mode.disable_lnc = cfg_.disable_lnc;
            mode.fixed_synthetic_count = cfg_.fixed_synthetic_count;
            auto sm = protossl::ssl_update_step(batch.prev, batch.next, syn, bank_, ssl_opt_, ssl, cfg_.lnc, mode,
                                                sample_rng_, updates_, cfg_.checked_mode);
            row.has_ssl = true;
            row.lfs_loss = sm.loss;
            row.n_selected = sm.n_selected;
        }

        // SAC on detached features of the just-updated encoder; one shared
        // latent batch feeds both the critic and the actor step
        const Array h_prev = bank_.encode_batch(batch.prev);
        if (updates_ % sh.critic_update_frequency == 0)
            row.critic_loss = sac::critic_update(batch, nets_, bank_, sh, critic_opt_, noise_rng_, &h_prev);
        if (updates_ % sh.actor_update_frequency == 0) {
            auto [aloss, alpha] = sac::actor_alpha_update(batch, nets_, bank_, sh, actor_opt_, alpha_opt_, noise_rng_, &h_prev);
            row.has_actor = true;
            row.actor_loss = aloss;
        }
        if (updates_ % sh.critic_target_update_frequency == 0) nets_.update_critic_targets(sh.critic_target_ema);
        row.alpha = nets_.alpha();
    }

    void save_checkpoint_file(const std::string& name) {
        numgrad::save_checkpoint(outdir_ + "/" + name, {{"ssl/", &bank_.store()}, {"sac/", &nets_.store()}});
    }

public:
    const std::vector<std::pair<int64_t, double>>& eval_history() const { return eval_history_; }

private:
    TrainConfig cfg_;
    uint64_t seed_;
    std::string outdir_;
    Rng init_rng_;
    NetworkBank bank_;
    SacNets nets_;
    RingBuffer<Transition> rl_buffer_;
    RingBuffer<SyntheticPair> aux_buffer_;
    Rollout rollout_;
    Rng action_rng_, noise_rng_, sample_rng_;
    Adam ssl_opt_, critic_opt_, actor_opt_, alpha_opt_;
    int64_t transitions_pushed_ = 0;
    int64_t synthetic_pushed_ = 0;
    int64_t updates_ = 0;
    std::vector<std::pair<int64_t, double>> eval_history_;
};

inline void train_end_to_end(const TrainConfig& cfg, uint64_t seed, const std::string& outdir) {
    Trainer t(cfg, seed, outdir);
    t.run();
}

// Random-policy demonstration videos: one frame per simulator tick
// (action repeat 1), episode_length frames per episode, u8-quantized.
inline void generate_videos(const worldsim::EnvSpec& spec_in, int episodes, const std::string& out_path,
                            uint64_t seed) {
    worldsim::EnvSpec spec = spec_in;
    spec.action_repeat = 1;
    spec.validate();
    Rng rng(seed_mix(seed, stream::kVideo));
    std::vector<Frame> frames;
    frames.reserve(static_cast<size_t>(episodes) * spec.episode_length);
    std::vector<double> action(static_cast<size_t>(spec.action_dim()));
    for (int e = 0; e < episodes; ++e) {
        auto [state, frame] = worldsim::reset(spec, seed_mix(seed, stream::kVideo, static_cast<uint64_t>(e) + 1));
        (void)frame;
        for (int t = 0; t < spec.episode_length; ++t) {
            for (auto& a : action) a = rng.uniform(-1.0, 1.0);
            auto sr = worldsim::step(spec, state, action.data(), t);
            state = sr.state;
            frames.push_back(std::move(sr.frame));
        }
    }
    write_framepack(out_path, frames, spec.episode_length, PackDtype::U8);
}

// Action-free pre-training data: per-episode frame arrays with lazily
// materialized observations. Follows queue semantics, so synthetic pairs need
// five stacked observations (frames t-6..t exist from t >= 6 with the first
// stack at t = 2; episodes shorter than 7 frames are skipped).
class VideoDataset {
public:
    VideoDataset(const std::vector<std::string>& pack_paths, std::ostream& log = std::cerr) {
        require(!pack_paths.empty(), "pretraining needs at least one frame pack");
        for (const auto& path : pack_paths) {
            FramePack pack = read_framepack(path);
            if (h_ == 0) {
                h_ = pack.h;
                w_ = pack.w;
                c_ = pack.c;
            } else {
                require(pack.h == h_ && pack.w == w_ && pack.c == c_, "mixed frame geometries across packs: ", path);
            }
            for (int e = 0; e < pack.episodes(); ++e) {
                std::vector<Frame> ep(pack.frames.begin() + static_cast<int64_t>(e) * pack.episode_length,
                                      pack.frames.begin() + static_cast<int64_t>(e + 1) * pack.episode_length);
                if (static_cast<int>(ep.size()) < 7) {
                    log << "warning: skipping episode with " << ep.size() << " frames (< 7, queue cannot warm up)\n";
                    continue;
                }
                episodes_.push_back(std::move(ep));
            }
        }
        require(!episodes_.empty(), "no usable episodes in the supplied packs");
        for (size_t e = 0; e < episodes_.size(); ++e) {
            const int len = static_cast<int>(episodes_[e].size());
            for (int t = 3; t < len; ++t) real_index_.emplace_back(static_cast<int>(e), t);
            for (int t = 6; t < len; ++t) syn_index_.emplace_back(static_cast<int>(e), t);
        }
    }

    int h() const { return h_; }
    int w() const { return w_; }
    int c() const { return c_; }
    int64_t real_pairs() const { return static_cast<int64_t>(real_index_.size()); }
    int64_t synthetic_pairs() const { return static_cast<int64_t>(syn_index_.size()); }

    Observation obs_at(int e, int t) const {
        const auto& ep = episodes_[static_cast<size_t>(e)];
        return framekit::stack_frames(ep[static_cast<size_t>(t - 2)], ep[static_cast<size_t>(t - 1)],
                                      ep[static_cast<size_t>(t)]);
    }

    // real neighbor pair (O_{t-1}, O_t)
    std::pair<Observation, Observation> real_pair(int64_t idx) const {
        const auto [e, t] = real_index_[static_cast<size_t>(idx)];
        return {obs_at(e, t - 1), obs_at(e, t)};
    }

    // synthetic pair via the exact queue + frame-mask path
    SyntheticPair synthetic_pair(int64_t idx) const {
        const auto [e, t] = syn_index_[static_cast<size_t>(idx)];
        FrameQueue q;
        for (int s = t - 4; s <= t; ++s) q.push(obs_at(e, s));
        return q.frame_mask();
    }

private:
    int h_ = 0, w_ = 0, c_ = 0;
    std::vector<std::vector<Frame>> episodes_;
    std::vector<std::pair<int, int>> real_index_;
    std::vector<std::pair<int, int>> syn_index_;
};

// Optimizes the auxiliary objective over sequential video observations (no
// actions or rewards anywhere) and emits the frozen encoder checkpoint.
inline std::string pretrain_on_videos(const TrainConfig& cfg, const std::vector<std::string>& pack_paths,
                                      uint64_t seed, const std::string& outdir) {
    cfg.validate();
    std::filesystem::create_directories(outdir);
    try {
        VideoDataset data(pack_paths);
        require(data.h() == cfg.env.frame_height && data.w() == cfg.env.frame_width && data.c() == cfg.env.channels,
                "pack geometry ", data.h(), "x", data.w(), "x", data.c(), " does not match the configured encoder ",
                cfg.env.frame_height, "x", cfg.env.frame_width, "x", cfg.env.channels);

        Rng init_rng(seed_mix(seed, stream::kInit));
        NetworkBank bank(cfg.bank_config(), init_rng);
        Adam opt(&bank.store(), bank.trainable_names(), cfg.ssl_hyper().lr);
        Rng sample_rng(seed_mix(seed, stream::kSampling));
        const protossl::SslHyper ssl = cfg.ssl_hyper();
        protossl::SslMode mode;
        mode.disable_fm = cfg.disable_fm;
        mode.disable_lnc = cfg.disable_lnc;
        mode.fixed_synthetic_count = cfg.fixed_synthetic_count;

        MetricsWriter metrics(outdir + "/metrics.csv");
        const int m = cfg.batch_size;
        require(data.real_pairs() >= m && data.synthetic_pairs() >= 1, "not enough video pairs for batch size ", m);

        std::vector<Observation> real_prev, real_next;
        std::vector<SyntheticPair> syn;
        for (int64_t u = 1; u <= cfg.pretrain_updates; ++u) {
            real_prev.clear();
            real_next.clear();
            syn.clear();
            for (int b = 0; b < m; ++b) {
                auto [prev, next] = data.real_pair(sample_rng.uniform_int(static_cast<int>(data.real_pairs())));
                real_prev.push_back(framekit::random_shift(prev, cfg.random_shift_pad, sample_rng));
                real_next.push_back(framekit::random_shift(next, cfg.random_shift_pad, sample_rng));
            }
            if (!mode.disable_fm)
                for (int b = 0; b < m; ++b)
                    syn.push_back(data.synthetic_pair(sample_rng.uniform_int(static_cast<int>(data.synthetic_pairs()))));
            auto sm = protossl::ssl_update_step(real_prev, real_next, syn, bank, opt, ssl, cfg.lnc, mode, sample_rng,
                                                u, cfg.checked_mode);
            MetricsRow row;
            row.step = u;
            row.has_ssl = true;
            row.lfs_loss = sm.loss;
            row.n_selected = sm.n_selected;
            metrics.write(row);
        }
        metrics.close();
        const std::string ckpt = outdir + "/pretrained.lfsc";
        numgrad::save_checkpoint(ckpt, {{"ssl/", &bank.store()}});
        return ckpt;
    } catch (const std::exception& e) {
        std::ofstream marker(outdir + "/FAILED");
        marker << e.what() << "\n";
        throw;
    }
}

// Rebuilds networks from a policy checkpoint, inferring dimensions from the
// stored parameter shapes. The frame geometry comes from the environment
// spec; a flat-dimension mismatch is a geometry failure.
struct LoadedPolicy {
    TrainConfig cfg;
    std::unique_ptr<NetworkBank> bank;
    std::unique_ptr<SacNets> nets;
};

inline LoadedPolicy load_policy(const std::string& ckpt_path, const worldsim::EnvSpec& spec) {
    auto entries = numgrad::read_checkpoint_entries(ckpt_path);
    auto find = [&](const std::string& name) -> const Array* {
        for (const auto& [n, a] : entries)
            if (n == name) return &a;
        return nullptr;
    };
    const Array* fc_w = find("ssl/enc/fc_w");
    const Array* proj = find("ssl/proj/l1_w");
    const Array* proto = find("ssl/proto/c");
    const Array* feat = find("sac/feat/w");
    const Array* actor = find("sac/actor/l1_w");
    const Array* mu = find("sac/actor/mu_w");
    require(fc_w && proj && proto, "checkpoint ", ckpt_path, " is missing encoder parameters");
    require(feat && actor && mu, "checkpoint ", ckpt_path, " has no policy (sac/) parameters");

    LoadedPolicy p;
    p.cfg.env = spec;
    p.cfg.latent_dim = fc_w->dim(1);
    p.cfg.predictor_hidden_units = proj->dim(1);
    p.cfg.num_prototypes = proto->dim(0);
    p.cfg.feature_dim = feat->dim(1);
    p.cfg.actor_hidden_units = actor->dim(1);
    require(mu->dim(1) == spec.action_dim(), "checkpoint action dimension ", mu->dim(1),
            " does not match environment ", spec.action_dim());
    require(p.cfg.bank_config().flat_dim() == fc_w->dim(0), "frame geometry mismatch: checkpoint encoder expects flat ",
            fc_w->dim(0), ", environment yields ", p.cfg.bank_config().flat_dim());

    Rng rng(1);
    p.bank = std::make_unique<NetworkBank>(p.cfg.bank_config(), rng);
    p.nets = std::make_unique<SacNets>(p.cfg.sac_config(), p.cfg.sac_hyper(), rng);
    numgrad::load_checkpoint(ckpt_path, {{"ssl/", &p.bank->store()}, {"sac/", &p.nets->store()}});
    return p;
}

// Critic-value comparison of LNC-selected synthetic vs real observations
// under a uniform policy, aggregated over consecutive update-style samples.
struct ValueAnalysis {
    double syn_mean = 0.0, syn_max = -1e300;
    double real_mean = 0.0, real_max = -1e300;
    int64_t syn_count = 0, real_count = 0;
    int updates_with_selection = 0;
    int updates_total = 0;
};

inline ValueAnalysis analyze_values(const TrainConfig& cfg, const std::string& ckpt_path, uint64_t seed,
                                    int updates = 1000) {
    cfg.validate();
    Rng init_rng(seed_mix(seed, stream::kInit));
    NetworkBank bank(cfg.bank_config(), init_rng);
    SacNets nets(cfg.sac_config(), cfg.sac_hyper(), init_rng);
    numgrad::load_checkpoint(ckpt_path, {{"ssl/", &bank.store()}, {"sac/", &nets.store()}});

    // refill both buffers by rolling the loaded stochastic policy
    RingBuffer<Transition> rl(cfg.rl_buffer_capacity);
    RingBuffer<SyntheticPair> aux(cfg.aux_buffer_capacity);
    Rollout roll(cfg.env, seed_mix(seed, stream::kAnalysis));
    Rng noise(seed_mix(seed, stream::kAnalysis, 1));
    Rng sample_rng(seed_mix(seed, stream::kAnalysis, 2));
    Rng value_rng(seed_mix(seed, stream::kAnalysis, 3));
    const sac::SacHyper sh = cfg.sac_hyper();
    const int64_t refill_decisions = cfg.init_steps / cfg.env.action_repeat;
    roll.begin_episode();
    for (int64_t i = 0; i < refill_decisions; ++i) {
        auto action = sac::act(roll.obs(), nets, bank, sh, sac::ActMode::Stochastic, &noise);
        auto out = roll.step(action);
        Transition tr;
        tr.prev = out.prev;
        tr.action = action;
        tr.reward = out.reward;
        tr.next = out.next;
        tr.done = out.done;
        rl.push(std::move(tr));
        if (roll.queue().full()) aux.push(roll.queue().frame_mask());
        if (out.done) roll.begin_episode();
    }
    const int m = cfg.batch_size;
    require(rl.size() >= m && aux.size() >= m, "analysis refill too short: rl=", rl.size(), " aux=", aux.size(),
            "; raise init_steps");

    ValueAnalysis va;
    va.updates_total = updates;
    for (int u = 0; u < updates; ++u) {
        std::vector<Observation> real_prev;
        real_prev.reserve(static_cast<size_t>(m));
        for (int idx : rl.sample_indices(m, sample_rng))
            real_prev.push_back(framekit::random_shift(rl.at(idx).prev, cfg.random_shift_pad, sample_rng));
        auto syn = aux.sample_batch(m, sample_rng);
        protossl::SslMode mode;  // plain LNC selection
        auto selected = protossl::select_synthetic(real_prev, syn, bank, cfg.lnc, mode, sample_rng);
        auto [rm, rx] = sac::value_stats(real_prev, nets, bank, cfg.value_action_samples, value_rng);
        va.real_mean += rm * m;
        va.real_count += m;
        va.real_max = std::max(va.real_max, rx);
        if (!selected.empty()) {
            std::vector<Observation> syn_prev;
            for (const auto& sp : selected) syn_prev.push_back(sp.prev);
            auto [sm, sx] = sac::value_stats(syn_prev, nets, bank, cfg.value_action_samples, value_rng);
            va.syn_mean += sm * static_cast<double>(syn_prev.size());
            va.syn_count += static_cast<int64_t>(syn_prev.size());
            va.syn_max = std::max(va.syn_max, sx);
            ++va.updates_with_selection;
        }
    }
    if (va.real_count > 0) va.real_mean /= static_cast<double>(va.real_count);
    if (va.syn_count > 0) va.syn_mean /= static_cast<double>(va.syn_count);
    return va;
}

}  // namespace lfs::harness
