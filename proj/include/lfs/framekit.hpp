#pragma once

#include <cstdint>
#include <deque>

#include "lfs/array.hpp"
#include "lfs/common.hpp"
#include "lfs/rng.hpp"

namespace lfs::framekit {

// Single rendered image, channel-planar [C][H][W], values in [0,1].
struct Frame {
    int h = 0, w = 0, c = 0;
    int64_t index = 0;
    std::vector<double> px;

    Frame() = default;
    Frame(int height, int width, int channels, int64_t idx)
        : h(height), w(width), c(channels), index(idx), px(static_cast<size_t>(height) * width * channels, 0.0) {}

    int64_t plane() const { return static_cast<int64_t>(h) * w; }
    int64_t size() const { return static_cast<int64_t>(px.size()); }
    bool same_geometry(const Frame& o) const { return h == o.h && w == o.w && c == o.c; }
};

// Stack of 3 frames, channel-planar [3C][H][W], oldest first. The stack count
// is fixed at three; channel slices reconstruct the constituent frames.
struct Observation {
    int h = 0, w = 0, c = 0;  // c = channels of ONE frame
    int64_t t = 0;            // timestamp of the newest frame
    bool synthetic = false;
    std::vector<double> px;   // 3*c planes

    int channels() const { return 3 * c; }
    int64_t plane() const { return static_cast<int64_t>(h) * w; }
    int64_t size() const { return static_cast<int64_t>(px.size()); }
    bool same_geometry(const Observation& o) const { return h == o.h && w == o.w && c == o.c; }

    // pixels of constituent frame s (0 oldest, 2 newest)
    const double* slice(int s) const { return px.data() + static_cast<int64_t>(s) * c * plane(); }
    double* slice(int s) { return px.data() + static_cast<int64_t>(s) * c * plane(); }

    bool slice_equals(int s, const Frame& f) const {
        if (f.h != h || f.w != w || f.c != c) return false;
        const double* p = slice(s);
        for (int64_t i = 0; i < f.size(); ++i)
            if (p[i] != f.px[static_cast<size_t>(i)]) return false;
        return true;
    }
};

// channel concatenation oldest-first: (f_a, f_b, f_c) with f_c the newest
inline Observation stack_frames(const Frame& f_a, const Frame& f_b, const Frame& f_c) {
    require(f_a.same_geometry(f_b) && f_b.same_geometry(f_c), "stack_frames: geometry mismatch between frames (",
            f_a.h, "x", f_a.w, "x", f_a.c, "), (", f_b.h, "x", f_b.w, "x", f_b.c, "), (", f_c.h, "x", f_c.w, "x",
            f_c.c, ")");
    Observation o;
    o.h = f_a.h;
    o.w = f_a.w;
    o.c = f_a.c;
    o.t = f_c.index;
    o.synthetic = !(f_b.index == f_a.index + 1 && f_c.index == f_b.index + 1);
    o.px.resize(static_cast<size_t>(3) * f_a.size());
    std::copy(f_a.px.begin(), f_a.px.end(), o.px.begin());
    std::copy(f_b.px.begin(), f_b.px.end(), o.px.begin() + f_a.size());
    std::copy(f_c.px.begin(), f_c.px.end(), o.px.begin() + 2 * f_a.size());
    return o;
}

// frame-masked observation and its masked neighbor; no action or reward
struct SyntheticPair {
    Observation prev;  // earlier member, stack(F_{t-4}, F_{t-3}, F_{t-1})
    Observation next;  // later member,  stack(F_{t-3}, F_{t-1}, F_t)
    int64_t source_t = 0;
};

namespace detail {

inline bool slices_equal(const Observation& a, int sa, const Observation& b, int sb) {
    const int64_t n = static_cast<int64_t>(a.c) * a.plane();
    const double* pa = a.slice(sa);
    const double* pb = b.slice(sb);
    for (int64_t i = 0; i < n; ++i)
        if (pa[i] != pb[i]) return false;
    return true;
}

inline Frame extract_slice(const Observation& o, int s) {
    Frame f(o.h, o.w, o.c, o.t - 2 + s);
    const double* p = o.slice(s);
    std::copy(p, p + f.size(), f.px.begin());
    return f;
}

}  // namespace detail

// Ring of the 5 most recent real observations of one episode (equivalently
// the 7 most recent frames). Consecutive entries must overlap: each entry's
// newest two frames equal the next entry's oldest two.
class FrameQueue {
public:
    static constexpr int kCapacity = 5;

    void push(const Observation& obs) {
        require(!obs.synthetic, "FrameQueue accepts real observations only");
        if (!buf_.empty()) {
            require(obs.same_geometry(buf_.back()), "FrameQueue geometry changed mid-episode");
            require(obs.t == buf_.back().t + 1, "FrameQueue requires consecutive timestamps, got ", buf_.back().t,
                    " then ", obs.t);
        }
        buf_.push_back(obs);
        if (static_cast<int>(buf_.size()) > kCapacity) buf_.pop_front();
    }

    bool full() const { return static_cast<int>(buf_.size()) == kCapacity; }
    int size() const { return static_cast<int>(buf_.size()); }
    void clear() { buf_.clear(); }

    const Observation& entry(int i) const { return buf_[static_cast<size_t>(i)]; }

    // Masks the middle frame F_{t-2}: from the queued observations, extracts
    // F_{t-4}, F_{t-3}, F_{t-1}, F_t and stacks them into the synthetic pair
    //   prev = (F_{t-4}, F_{t-3}, F_{t-1}),  next = (F_{t-3}, F_{t-1}, F_t).
    // The overlap identities between queue entries are checked first; a
    // violation means the buffer was corrupted.
    SyntheticPair frame_mask() const {
        require(full(), "frame_mask requires a full queue (5 observations), have ", size());
        const Observation& q0 = buf_[0];  // O_{t-4}
        const Observation& q2 = buf_[2];  // O_{t-2}
        const Observation& q3 = buf_[3];  // O_{t-1}
        const Observation& q4 = buf_[4];  // O_t

        require(detail::slices_equal(q0, 2, q2, 0), "frame_mask overlap assert failed (entry0[2] vs entry2[0]): buffer corruption");
        require(detail::slices_equal(q2, 2, q4, 0), "frame_mask overlap assert failed (entry2[2] vs entry4[0]): buffer corruption");
        require(detail::slices_equal(q2, 2, q3, 1), "frame_mask overlap assert failed (entry2[2] vs entry3[1]): buffer corruption");

        const Frame f_tm4 = detail::extract_slice(q2, 0);  // F_{t-4}
        const Frame f_tm3 = detail::extract_slice(q2, 1);  // F_{t-3}
        const Frame f_tm1 = detail::extract_slice(q4, 1);  // F_{t-1}
        const Frame f_t = detail::extract_slice(q4, 2);    // F_t

        SyntheticPair pair;
        pair.prev = stack_frames(f_tm4, f_tm3, f_tm1);
        pair.next = stack_frames(f_tm3, f_tm1, f_t);
        require(pair.prev.channels() == 3 * q4.c && pair.prev.h == q4.h && pair.prev.w == q4.w,
                "frame_mask produced wrong observation shape");
        pair.prev.synthetic = true;
        pair.next.synthetic = true;
        pair.source_t = q4.t;
        return pair;
    }

private:
    std::deque<Observation> buf_;
};

// Replicate-pads by `pad` pixels per side, then crops a random HxW window at
// integer offsets; the same offset applies to all channels. pad=0 is identity.
inline Observation random_shift(const Observation& obs, int pad, Rng& rng) {
    require(pad >= 0, "random_shift pad must be nonnegative, got ", pad);
    require(2 * pad < std::min(obs.h, obs.w), "random_shift pad ", pad, " too large for ", obs.h, "x", obs.w);
    if (pad == 0) return obs;

    const int oy = rng.uniform_int(2 * pad + 1);
    const int ox = rng.uniform_int(2 * pad + 1);
    Observation out = obs;
    const int H = obs.h, W = obs.w;
    for (int ch = 0; ch < obs.channels(); ++ch) {
        const double* src = obs.px.data() + static_cast<int64_t>(ch) * obs.plane();
        double* dst = out.px.data() + static_cast<int64_t>(ch) * obs.plane();
        for (int i = 0; i < H; ++i) {
            // source row in replicate-padded coordinates
            const int si = std::min(std::max(i + oy - pad, 0), H - 1);
            for (int j = 0; j < W; ++j) {
                const int sj = std::min(std::max(j + ox - pad, 0), W - 1);
                dst[static_cast<int64_t>(i) * W + j] = src[static_cast<int64_t>(si) * W + sj];
            }
        }
    }
    return out;
}

}  // namespace lfs::framekit
