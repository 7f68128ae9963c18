#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "lfs/common.hpp"
#include "lfs/framekit.hpp"
#include "lfs/rng.hpp"

namespace lfs::worldsim {

using framekit::Frame;

struct EnvSpec {
    std::string env_name = "speedworld";
    int frame_height = 16;
    int frame_width = 16;
    int channels = 1;
    int episode_length = 250;  // in frames (simulator ticks)
    int action_repeat = 2;
    uint64_t seed = 0;

    int action_dim() const { return 2; }  // both built-in tasks use 2-D actions

    void validate() const {
        require(env_name == "speedworld" || env_name == "toyreach", "unknown env '", env_name,
                "' (expected speedworld or toyreach)");
        require(frame_height >= 8 && frame_width >= 8, "frame dims must be >= 8, got ", frame_height, "x",
                frame_width);
        require(channels == 1, "built-in tasks render grayscale (channels=1), got ", channels);
        require(action_repeat >= 1, "action repeat must be >= 1, got ", action_repeat);
        require(episode_length >= 1 && episode_length % action_repeat == 0,
                "episode length must be a positive multiple of action repeat, got ", episode_length, " with repeat ",
                action_repeat);
    }
};

// Task-specific continuous state plus the step counter. speedworld: planar
// double integrator on the unit torus; toyreach: 2-joint kinematic arm with a
// per-episode target.
struct EnvState {
    double px = 0.5, py = 0.5;  // speedworld position
    double vx = 0.0, vy = 0.0;  // speedworld velocity
    double th1 = 0.0, th2 = 0.0;  // toyreach joint angles
    double tx = 0.5, ty = 0.5;    // toyreach target
    int step = 0;  // ticks elapsed this episode
};

namespace detail {

// speedworld dynamics constants
constexpr double kDt = 0.06;
constexpr double kAccel = 1.6;
constexpr double kDamping = 0.08;   // per tick
constexpr double kVmax = 0.9;
// toyreach constants
constexpr double kArmL1 = 0.22;
constexpr double kArmL2 = 0.18;
constexpr double kOmega = 0.35;     // rad per tick at full action
constexpr double kTargetRmin = 0.10;
constexpr double kTargetRmax = 0.38;
constexpr double kReachTol = 0.05;

inline double wrap01(double x) {
    x = std::fmod(x, 1.0);
    return x < 0.0 ? x + 1.0 : x;
}

// anti-aliased Gaussian blob splat with toroidal wrapping; max-blended so
// overlapping blobs keep their identities
inline void splat(Frame& f, double cx, double cy, double sigma_px, double intensity, bool wrap) {
    const int H = f.h, W = f.w;
    const double cxp = cx * W - 0.5, cyp = cy * H - 0.5;
    const int r = static_cast<int>(std::ceil(3.0 * sigma_px));
    const int ci = static_cast<int>(std::floor(cyp)), cj = static_cast<int>(std::floor(cxp));
    for (int di = -r; di <= r + 1; ++di) {
        for (int dj = -r; dj <= r + 1; ++dj) {
            int i = ci + di, j = cj + dj;
            double dy = static_cast<double>(ci + di) - cyp;
            double dx = static_cast<double>(cj + dj) - cxp;
            if (wrap) {
                i = ((i % H) + H) % H;
                j = ((j % W) + W) % W;
            } else if (i < 0 || i >= H || j < 0 || j >= W) {
                continue;
            }
            const double v = intensity * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma_px * sigma_px));
            double& px = f.px[static_cast<size_t>(i) * W + j];
            px = std::min(1.0, std::max(px, v));
        }
    }
}

}  // namespace detail

// deterministic function of state: agent/target blobs, values in [0,1]
inline Frame render(const EnvSpec& spec, const EnvState& s, int64_t frame_index = 0) {
    Frame f(spec.frame_height, spec.frame_width, spec.channels, frame_index);
    const double sigma = 0.09 * std::min(spec.frame_height, spec.frame_width);
    if (spec.env_name == "speedworld") {
        detail::splat(f, s.px, s.py, sigma, 1.0, /*wrap=*/true);
    } else {
        const double ax = 0.5, ay = 0.5;
        const double ex1 = ax + detail::kArmL1 * std::cos(s.th1);
        const double ey1 = ay + detail::kArmL1 * std::sin(s.th1);
        const double ex2 = ex1 + detail::kArmL2 * std::cos(s.th1 + s.th2);
        const double ey2 = ey1 + detail::kArmL2 * std::sin(s.th1 + s.th2);
        detail::splat(f, s.tx, s.ty, sigma * 0.8, 1.0, /*wrap=*/false);       // target: brightest
        detail::splat(f, ex1, ey1, sigma * 0.7, 0.35, /*wrap=*/false);        // elbow: faint
        detail::splat(f, ex2, ey2, sigma, 0.7, /*wrap=*/false);               // end effector
    }
    return f;
}

// state drawn from the initial distribution, deterministic given seed
inline std::pair<EnvState, Frame> reset(const EnvSpec& spec, uint64_t seed) {
    spec.validate();
    Rng rng(seed * 0x9e3779b97f4a7c15ULL + 0xd1b54a32d192ed03ULL);
    EnvState s;
    s.step = 0;
    if (spec.env_name == "speedworld") {
        s.px = rng.uniform(0.2, 0.8);
        s.py = rng.uniform(0.2, 0.8);
        s.vx = s.vy = 0.0;  // start at rest
    } else {
        s.th1 = rng.uniform(-3.14159265358979, 3.14159265358979);
        s.th2 = rng.uniform(-1.5, 1.5);
        const double r = std::sqrt(rng.uniform(detail::kTargetRmin * detail::kTargetRmin,
                                               detail::kTargetRmax * detail::kTargetRmax));
        const double phi = rng.uniform(0.0, 2.0 * 3.14159265358979);
        s.tx = 0.5 + r * std::cos(phi);
        s.ty = 0.5 + r * std::sin(phi);
    }
    return {s, render(spec, s)};
}

struct StepResult {
    EnvState state;
    Frame frame;
    double reward = 0.0;
    bool done = false;
    bool action_clamped = false;  // diagnostics: out-of-range action was clamped
};

// One simulator tick. speedworld reward = |velocity| scaled to [0,1];
// toyreach reward = 1 inside the tolerance, else negative distance.
inline StepResult step(const EnvSpec& spec, const EnvState& state, const double* action, int64_t frame_index = 0) {
    require(state.step < spec.episode_length, "step called on a finished episode");
    StepResult out;
    out.state = state;
    double a0 = action[0], a1 = action[1];
    if (a0 < -1.0 || a0 > 1.0 || a1 < -1.0 || a1 > 1.0) {
        out.action_clamped = true;
        a0 = std::clamp(a0, -1.0, 1.0);
        a1 = std::clamp(a1, -1.0, 1.0);
    }
    EnvState& s = out.state;
    if (spec.env_name == "speedworld") {
        s.vx = (s.vx + a0 * detail::kAccel * detail::kDt) * (1.0 - detail::kDamping);
        s.vy = (s.vy + a1 * detail::kAccel * detail::kDt) * (1.0 - detail::kDamping);
        const double v = std::sqrt(s.vx * s.vx + s.vy * s.vy);
        if (v > detail::kVmax) {
            s.vx *= detail::kVmax / v;
            s.vy *= detail::kVmax / v;
        }
        s.px = detail::wrap01(s.px + s.vx * detail::kDt);
        s.py = detail::wrap01(s.py + s.vy * detail::kDt);
        out.reward = std::min(std::sqrt(s.vx * s.vx + s.vy * s.vy) / detail::kVmax, 1.0);
    } else {
        s.th1 += a0 * detail::kOmega;
        s.th2 += a1 * detail::kOmega;
        s.th2 = std::clamp(s.th2, -2.8, 2.8);  // elbow joint limit
        const double ex = 0.5 + detail::kArmL1 * std::cos(s.th1) + detail::kArmL2 * std::cos(s.th1 + s.th2);
        const double ey = 0.5 + detail::kArmL1 * std::sin(s.th1) + detail::kArmL2 * std::sin(s.th1 + s.th2);
        const double dist = std::hypot(ex - s.tx, ey - s.ty);
        out.reward = dist <= detail::kReachTol ? 1.0 : -dist;
    }
    s.step = state.step + 1;
    out.done = s.step >= spec.episode_length;
    out.frame = render(spec, s, frame_index);
    return out;
}

// end-effector position, exposed for tests
inline std::pair<double, double> toyreach_effector(const EnvState& s) {
    const double ex = 0.5 + detail::kArmL1 * std::cos(s.th1) + detail::kArmL2 * std::cos(s.th1 + s.th2);
    const double ey = 0.5 + detail::kArmL1 * std::sin(s.th1) + detail::kArmL2 * std::sin(s.th1 + s.th2);
    return {ex, ey};
}

inline double speedworld_vmax() { return detail::kVmax; }
inline double toyreach_tolerance() { return detail::kReachTol; }
inline std::pair<double, double> toyreach_target_radii() { return {detail::kTargetRmin, detail::kTargetRmax}; }

}  // namespace lfs::worldsim
