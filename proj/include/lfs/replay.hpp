#pragma once

#include <vector>

#include "lfs/common.hpp"
#include "lfs/framekit.hpp"
#include "lfs/rng.hpp"

namespace lfs::replay {

using framekit::Observation;
using framekit::SyntheticPair;

// (O_{t-1}, a_{t-1}, r_{t-1}, O_t) for the RL buffer
struct Transition {
    Observation prev;
    std::vector<double> action;
    double reward = 0.0;
    Observation next;
    bool done = false;
};

inline void validate_item(const Transition& tr) {
    require(!tr.prev.synthetic && !tr.next.synthetic, "B_rl accepts real observations only");
    require(tr.next.t == tr.prev.t + 1, "transition timestamps must be consecutive, got ", tr.prev.t, " then ",
            tr.next.t);
}

inline void validate_item(const SyntheticPair& p) {
    require(p.prev.synthetic && p.next.synthetic, "B_a accepts synthetic pairs only");
}

// Fixed-capacity ring: oldest item evicted first, sampling uniform with
// replacement over stored items.
template <typename T>
class RingBuffer {
public:
    explicit RingBuffer(int capacity) : capacity_(capacity) {
        require(capacity >= 1, "buffer capacity must be positive, got ", capacity);
    }

    int capacity() const { return capacity_; }
    int size() const { return static_cast<int>(items_.size()); }

    void push(T item) {
        validate_item(item);
        if (size() < capacity_) {
            items_.push_back(std::move(item));
        } else {
            items_[static_cast<size_t>(cursor_)] = std::move(item);
            cursor_ = (cursor_ + 1) % capacity_;
        }
    }

    // i-th stored item in an arbitrary but stable order
    const T& at(int i) const { return items_[static_cast<size_t>(i)]; }

    // Uniform with replacement; a single stored item can fill a whole batch.
    std::vector<int> sample_indices(int m, Rng& rng) const {
        require(size() >= 1, "buffer is empty, cannot sample a batch of ", m, "; defer training until warm");
        std::vector<int> idx(static_cast<size_t>(m));
        for (int i = 0; i < m; ++i) idx[static_cast<size_t>(i)] = rng.uniform_int(size());
        return idx;
    }

    std::vector<T> sample_batch(int m, Rng& rng) const {
        std::vector<T> out;
        out.reserve(static_cast<size_t>(m));
        for (int i : sample_indices(m, rng)) out.push_back(items_[static_cast<size_t>(i)]);
        return out;
    }

private:
    int capacity_;
    int cursor_ = 0;  // next eviction slot once full
    std::vector<T> items_;
};

}  // namespace lfs::replay
