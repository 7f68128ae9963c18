#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "lfs/array.hpp"
#include "lfs/common.hpp"
#include "lfs/framekit.hpp"
#include "lfs/rng.hpp"

namespace lfs::lnc {

using numgrad::Array;

struct LncConfig {
    int k = 1;       // nearest-neighbor order
    double c = 0.9;  // clip center coefficient
    double r = 0.1;  // clip range coefficient

    void validate() const {
        require(k >= 1, "LNC k must be >= 1, got ", k);
        require(r >= 0.0 && c > r / 2.0, "LNC requires c > r/2 >= 0, got c=", c, " r=", r);
    }
};

struct LncResult {
    double scale = 0.0;              // D, the internal distance scale
    std::vector<double> distances;   // D_j per synthetic pair
    std::vector<int> selected;       // indices inside the clip band, order preserved
    int n() const { return static_cast<int>(selected.size()); }
};

namespace detail {

// k-th smallest (dist, index) among candidates, ties broken by lower index
inline double kth_nearest(std::vector<std::pair<double, int>>& cand, int k) {
    auto cmp = [](const std::pair<double, int>& a, const std::pair<double, int>& b) {
        return a.first < b.first || (a.first == b.first && a.second < b.second);
    };
    std::nth_element(cand.begin(), cand.begin() + (k - 1), cand.end(), cmp);
    return cand[static_cast<size_t>(k - 1)].first;
}

}  // namespace detail

// Mean over the batch of each embedding's distance to its k-th nearest OTHER
// embedding. The self distance is verified to be exactly zero, then dropped.
inline double internal_knn_scale(const Array& real, int k) {
    require(real.rank() == 2, "internal_knn_scale expects an M x d array, got ", shape_str(real.shape));
    const int m = real.dim(0), d = real.dim(1);
    require(m > k, "internal_knn_scale needs batch size > k, got M=", m, " k=", k);

    double total = 0.0;
    std::vector<std::pair<double, int>> cand;
    for (int i = 0; i < m; ++i) {
        const double* xi = real.data.data() + static_cast<int64_t>(i) * d;
        require(numgrad::squared_distance(xi, xi, d) == 0.0, "self distance must be exactly zero before dropping");
        cand.clear();
        for (int j = 0; j < m; ++j) {
            if (j == i) continue;
            const double* xj = real.data.data() + static_cast<int64_t>(j) * d;
            cand.emplace_back(std::sqrt(numgrad::squared_distance(xi, xj, d)), j);
        }
        total += detail::kth_nearest(cand, k);
    }
    return total / static_cast<double>(m);
}

// D_j = distance from synthetic embedding j to its k-th nearest real
// embedding; the sets are disjoint, so no self exclusion.
inline std::vector<double> cross_knn_distance(const Array& syn, const Array& real, int k) {
    require(syn.rank() == 2 && real.rank() == 2, "cross_knn_distance expects M x d arrays");
    require(syn.dim(1) == real.dim(1), "embedding dimension mismatch: synthetic ", shape_str(syn.shape), " vs real ",
            shape_str(real.shape));
    const int ms = syn.dim(0), mr = real.dim(0), d = syn.dim(1);
    require(ms >= 1 && mr >= k, "cross_knn_distance needs nonempty synthetic batch and real count >= k");

    std::vector<double> out(static_cast<size_t>(ms));
    std::vector<std::pair<double, int>> cand;
    for (int j = 0; j < ms; ++j) {
        const double* sj = syn.data.data() + static_cast<int64_t>(j) * d;
        cand.clear();
        for (int i = 0; i < mr; ++i) {
            const double* ri = real.data.data() + static_cast<int64_t>(i) * d;
            cand.emplace_back(std::sqrt(numgrad::squared_distance(sj, ri, d)), i);
        }
        out[static_cast<size_t>(j)] = detail::kth_nearest(cand, k);
    }
    return out;
}

// indices j with (c - r/2) D < D_j < (c + r/2) D, strictly; order preserved
inline std::vector<int> clip_select(const std::vector<double>& dj, double scale, const LncConfig& cfg) {
    cfg.validate();
    require(scale >= 0.0, "clip_select needs a nonnegative scale, got ", scale);
    const double lo = (cfg.c - cfg.r / 2.0) * scale;
    const double hi = (cfg.c + cfg.r / 2.0) * scale;
    std::vector<int> out;
    for (size_t j = 0; j < dj.size(); ++j)
        if (dj[j] > lo && dj[j] < hi) out.push_back(static_cast<int>(j));
    return out;
}

inline LncResult select(const Array& syn, const Array& real, const LncConfig& cfg) {
    LncResult res;
    res.scale = internal_knn_scale(real, cfg.k);
    res.distances = cross_knn_distance(syn, real, cfg.k);
    res.selected = clip_select(res.distances, res.scale, cfg);
    return res;
}

// The auxiliary batch: N selected synthetic pairs mixed with M-N distinct
// randomly chosen real pairs from the same RL batch, order shuffled.
struct AuxBatch {
    std::vector<framekit::Observation> prev, next;
    std::vector<uint8_t> synthetic;
    int size() const { return static_cast<int>(prev.size()); }
};

inline AuxBatch assemble_aux_batch(const std::vector<framekit::SyntheticPair>& selected,
                                   const std::vector<framekit::Observation>& real_prev,
                                   const std::vector<framekit::Observation>& real_next, int m, Rng& rng) {
    const int n = static_cast<int>(selected.size());
    require(n <= m, "selected synthetic count ", n, " exceeds batch size ", m);
    require(static_cast<int>(real_prev.size()) >= m - n && real_prev.size() == real_next.size(),
            "not enough real pairs to fill the auxiliary batch");

    AuxBatch batch;
    batch.prev.reserve(static_cast<size_t>(m));
    batch.next.reserve(static_cast<size_t>(m));
    batch.synthetic.reserve(static_cast<size_t>(m));
    for (const auto& p : selected) {
        batch.prev.push_back(p.prev);
        batch.next.push_back(p.next);
        batch.synthetic.push_back(1);
    }
    const auto picks = rng.sample_without_replacement(static_cast<int>(real_prev.size()), m - n);
    for (int i : picks) {
        batch.prev.push_back(real_prev[static_cast<size_t>(i)]);
        batch.next.push_back(real_next[static_cast<size_t>(i)]);
        batch.synthetic.push_back(0);
    }

    std::vector<int> order(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) order[static_cast<size_t>(i)] = i;
    rng.shuffle(order);
    AuxBatch out;
    out.prev.reserve(static_cast<size_t>(m));
    out.next.reserve(static_cast<size_t>(m));
    out.synthetic.reserve(static_cast<size_t>(m));
    for (int i : order) {
        out.prev.push_back(std::move(batch.prev[static_cast<size_t>(i)]));
        out.next.push_back(std::move(batch.next[static_cast<size_t>(i)]));
        out.synthetic.push_back(batch.synthetic[static_cast<size_t>(i)]);
    }
    return out;
}

}  // namespace lfs::lnc
