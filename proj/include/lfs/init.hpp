#pragma once

#include <cmath>

#include "lfs/array.hpp"
#include "lfs/rng.hpp"

namespace lfs::numgrad {

// Orthogonal initialization: Gaussian fill, then modified Gram-Schmidt on the
// shorter side. For a [rows x cols] matrix with rows >= cols the columns come
// out orthonormal, otherwise the rows do.
inline Array orthogonal(int rows, int cols, Rng& rng) {
    Array w = Array::zeros({rows, cols});
    for (auto& v : w.data) v = rng.normal();

    const bool by_rows = rows <= cols;
    const int vecs = by_rows ? rows : cols;
    const int len = by_rows ? cols : rows;
    auto elem = [&](int v, int i) -> double& {
        return by_rows ? w.data[static_cast<size_t>(v) * cols + i] : w.data[static_cast<size_t>(i) * cols + v];
    };
    for (int v = 0; v < vecs; ++v) {
        for (int u = 0; u < v; ++u) {
            double d = 0.0;
            for (int i = 0; i < len; ++i) d += elem(v, i) * elem(u, i);
            for (int i = 0; i < len; ++i) elem(v, i) -= d * elem(u, i);
        }
        double norm = 0.0;
        for (int i = 0; i < len; ++i) norm += elem(v, i) * elem(v, i);
        norm = std::sqrt(norm);
        if (norm < 1e-12) {
            // degenerate draw; re-randomize this vector and retry once
            for (int i = 0; i < len; ++i) elem(v, i) = rng.normal();
            --v;
            continue;
        }
        for (int i = 0; i < len; ++i) elem(v, i) /= norm;
    }
    return w;
}

// conv weight [O, C, kh, kw]: orthogonal over the flattened [O, C*kh*kw] view
inline Array orthogonal_conv(int out_ch, int in_ch, int kh, int kw, Rng& rng) {
    Array flat = orthogonal(out_ch, in_ch * kh * kw, rng);
    flat.shape = {out_ch, in_ch, kh, kw};
    return flat;
}

inline Array gaussian(std::vector<int> shape, Rng& rng, double stddev = 1.0) {
    Array a = Array::zeros(std::move(shape));
    for (auto& v : a.data) v = stddev * rng.normal();
    return a;
}

}  // namespace lfs::numgrad
