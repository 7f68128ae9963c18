#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>

#include "lfs/common.hpp"
#include "lfs/lnc.hpp"
#include "lfs/protossl.hpp"
#include "lfs/sac.hpp"
#include "lfs/worldsim.hpp"

namespace lfs::harness {

// Flat key/value training configuration. Keys mirror the environment and
// hyper-parameter tables; unknown keys are rejected to catch typos.
struct TrainConfig {
    worldsim::EnvSpec env;
    int frame_stack = 3;  // fixed at 3

    int64_t total_steps = 500000;  // I_total, environment steps
    int64_t init_steps = 4000;     // I_init, initial random steps
    int64_t eval_interval = 20000;
    int eval_episodes = 10;

    int batch_size = 512;
    int num_prototypes = 0;  // 0 -> defaults to batch_size
    int latent_dim = 128;
    int predictor_hidden_units = 1024;  // projector and predictor MLPs
    int actor_hidden_units = 1024;      // actor and critic MLPs
    int feature_dim = 50;
    double learning_rate = 1e-4;
    int random_shift_pad = 4;
    int rl_buffer_capacity = 40000;
    int aux_buffer_capacity = 40000;

    lnc::LncConfig lnc;
    double softmax_temperature = 0.1;
    double encoder_target_ema_momentum = 0.05;
    int encoder_target_update_frequency = 1;
    double sinkhorn_epsilon = 0.05;
    int sinkhorn_iterations = 3;

    double sac_initial_temperature = 0.1;
    double discount = 0.99;
    int actor_update_frequency = 2;
    int critic_update_frequency = 1;
    int critic_target_update_frequency = 2;
    double critic_target_ema_momentum = 0.01;
    double actor_log_stddev_min = -10.0;
    double actor_log_stddev_max = 2.0;

    std::string mode = "end_to_end";  // end_to_end | frozen_encoder
    bool disable_lnc = false;
    bool disable_fm = false;
    int fixed_synthetic_count = -1;  // <0 -> round(0.1 * batch_size)
    std::string encoder_checkpoint;  // frozen_encoder: optional pre-trained weights

    int64_t pretrain_updates = 60000;
    int value_action_samples = 10;
    bool checked_mode = false;
    int64_t checkpoint_interval = 0;  // env steps; 0 -> eval_interval

    int prototypes() const { return num_prototypes > 0 ? num_prototypes : batch_size; }

    protossl::SslHyper ssl_hyper() const {
        protossl::SslHyper h;
        h.tau = softmax_temperature;
        h.eta = encoder_target_ema_momentum;
        h.epsilon = sinkhorn_epsilon;
        h.sinkhorn_iters = sinkhorn_iterations;
        h.lr = learning_rate;
        h.target_update_frequency = encoder_target_update_frequency;
        return h;
    }

    sac::SacHyper sac_hyper() const {
        sac::SacHyper h;
        h.discount = discount;
        h.actor_update_frequency = actor_update_frequency;
        h.critic_update_frequency = critic_update_frequency;
        h.critic_target_update_frequency = critic_target_update_frequency;
        h.critic_target_ema = critic_target_ema_momentum;
        h.lr = learning_rate;
        h.init_temperature = sac_initial_temperature;
        h.log_std_min = actor_log_stddev_min;
        h.log_std_max = actor_log_stddev_max;
        return h;
    }

    protossl::BankConfig bank_config() const {
        protossl::BankConfig b;
        b.frame_h = env.frame_height;
        b.frame_w = env.frame_width;
        b.obs_channels = 3 * env.channels;
        b.latent_dim = latent_dim;
        b.hidden = predictor_hidden_units;
        b.prototypes = prototypes();
        return b;
    }

    sac::SacConfig sac_config() const {
        sac::SacConfig s;
        s.latent_dim = latent_dim;
        s.feature_dim = feature_dim;
        s.hidden = actor_hidden_units;
        s.action_dim = env.action_dim();
        return s;
    }

    void validate() const {
        env.validate();
        require(frame_stack == 3, "frame_stack is fixed at 3, got ", frame_stack);
        require(init_steps < total_steps, "init_steps must be below total_steps");
        require(init_steps % env.action_repeat == 0 && total_steps % env.action_repeat == 0,
                "init_steps and total_steps must be divisible by action_repeat");
        require(eval_interval >= 1 && eval_episodes >= 1, "eval settings must be positive");
        require(batch_size >= 2, "batch_size must be >= 2");
        require(random_shift_pad >= 0, "random_shift_pad must be nonnegative");
        require(mode == "end_to_end" || mode == "frozen_encoder", "unknown mode '", mode, "'");
        require(value_action_samples >= 1, "value_action_samples must be >= 1");
        lnc.validate();
        ssl_hyper().validate();
        sac_hyper().validate();
        bank_config().validate();
    }
};

namespace detail {

inline bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail("config key '", key, "' expects a boolean, got '", v, "'");
}

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace detail

inline void apply_config_entry(TrainConfig& c, const std::string& key, const std::string& value) {
    auto as_i64 = [&]() -> int64_t {
        try {
            return std::stoll(value);
        } catch (...) {
            fail("config key '", key, "' expects an integer, got '", value, "'");
        }
    };
    auto as_int = [&]() { return static_cast<int>(as_i64()); };
    auto as_f64 = [&]() -> double {
        try {
            return std::stod(value);
        } catch (...) {
            fail("config key '", key, "' expects a number, got '", value, "'");
        }
    };

    if (key == "env_name") c.env.env_name = value;
    else if (key == "frame_height") c.env.frame_height = as_int();
    else if (key == "frame_width") c.env.frame_width = as_int();
    else if (key == "frame_channels") c.env.channels = as_int();
    else if (key == "episode_length") c.env.episode_length = as_int();
    else if (key == "action_repeat") c.env.action_repeat = as_int();
    else if (key == "frame_stack") c.frame_stack = as_int();
    else if (key == "total_steps") c.total_steps = as_i64();
    else if (key == "init_steps") c.init_steps = as_i64();
    else if (key == "eval_interval") c.eval_interval = as_i64();
    else if (key == "eval_episodes") c.eval_episodes = as_int();
    else if (key == "batch_size") c.batch_size = as_int();
    else if (key == "num_prototypes") c.num_prototypes = as_int();
    else if (key == "latent_dim") c.latent_dim = as_int();
    else if (key == "predictor_hidden_units") c.predictor_hidden_units = as_int();
    else if (key == "actor_hidden_units") c.actor_hidden_units = as_int();
    else if (key == "feature_dim") c.feature_dim = as_int();
    else if (key == "learning_rate") c.learning_rate = as_f64();
    else if (key == "random_shift_pad") c.random_shift_pad = as_int();
    else if (key == "rl_buffer_capacity") c.rl_buffer_capacity = as_int();
    else if (key == "aux_buffer_capacity") c.aux_buffer_capacity = as_int();
    else if (key == "lnc_k") c.lnc.k = as_int();
    else if (key == "lnc_center_coefficient") c.lnc.c = as_f64();
    else if (key == "lnc_range_coefficient") c.lnc.r = as_f64();
    else if (key == "softmax_temperature") c.softmax_temperature = as_f64();
    else if (key == "encoder_target_ema_momentum") c.encoder_target_ema_momentum = as_f64();
    else if (key == "encoder_target_update_frequency") c.encoder_target_update_frequency = as_int();
    else if (key == "sinkhorn_epsilon") c.sinkhorn_epsilon = as_f64();
    else if (key == "sinkhorn_iterations") c.sinkhorn_iterations = as_int();
    else if (key == "sac_initial_temperature") c.sac_initial_temperature = as_f64();
    else if (key == "discount") c.discount = as_f64();
    else if (key == "actor_update_frequency") c.actor_update_frequency = as_int();
    else if (key == "critic_update_frequency") c.critic_update_frequency = as_int();
    else if (key == "critic_target_update_frequency") c.critic_target_update_frequency = as_int();
    else if (key == "critic_target_ema_momentum") c.critic_target_ema_momentum = as_f64();
    else if (key == "actor_log_stddev_min") c.actor_log_stddev_min = as_f64();
    else if (key == "actor_log_stddev_max") c.actor_log_stddev_max = as_f64();
    else if (key == "mode") c.mode = value;
    else if (key == "disable_lnc") c.disable_lnc = detail::parse_bool(value, key);
    else if (key == "disable_fm") c.disable_fm = detail::parse_bool(value, key);
    else if (key == "fixed_synthetic_count") c.fixed_synthetic_count = as_int();
    else if (key == "encoder_checkpoint") c.encoder_checkpoint = value;
    else if (key == "pretrain_updates") c.pretrain_updates = as_i64();
    else if (key == "value_action_samples") c.value_action_samples = as_int();
    else if (key == "checked_mode") c.checked_mode = detail::parse_bool(value, key);
    else if (key == "checkpoint_interval") c.checkpoint_interval = as_i64();
    else fail("unknown config key '", key, "'");
}

inline TrainConfig parse_config_text(const std::string& text) {
    TrainConfig c;
    size_t pos = 0;
    int lineno = 0;
    while (pos < text.size()) {
        size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string line = detail::trim(text.substr(pos, end - pos));
        pos = end + 1;
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        require(eq != std::string::npos, "config line ", lineno, " is not 'key = value': '", line, "'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        require(!key.empty() && !value.empty(), "config line ", lineno, " is missing a key or value");
        apply_config_entry(c, key, value);
    }
    return c;
}

inline TrainConfig load_config(const std::string& path) {
    std::ifstream is(path);
    require(static_cast<bool>(is), "cannot open config file: ", path);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    TrainConfig c = parse_config_text(text);
    c.validate();
    return c;
}

}  // namespace lfs::harness
