#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "lfs/common.hpp"

namespace lfs::numgrad {

// Dense row-major 64-bit float array.
struct Array {
    std::vector<int> shape;
    std::vector<double> data;

    Array() = default;
    Array(std::vector<int> shp, std::vector<double> values) : shape(std::move(shp)), data(std::move(values)) {
        require(size_of(shape) == static_cast<int64_t>(data.size()), "array shape ", shape_str(shape),
                " does not match data length ", data.size());
    }

    static int64_t size_of(const std::vector<int>& shp) {
        int64_t n = 1;
        for (int d : shp) {
            require(d > 0, "array dims must be positive, got ", shape_str(shp));
            n *= d;
        }
        return n;
    }

    static Array zeros(std::vector<int> shp) {
        const int64_t n = size_of(shp);
        return Array(std::move(shp), std::vector<double>(static_cast<size_t>(n), 0.0));
    }

    static Array full(std::vector<int> shp, double v) {
        const int64_t n = size_of(shp);
        return Array(std::move(shp), std::vector<double>(static_cast<size_t>(n), v));
    }

    static Array scalar(double v) { return Array({1}, {v}); }

    int64_t size() const { return static_cast<int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }

    double& at(int64_t i) { return data[static_cast<size_t>(i)]; }
    double at(int64_t i) const { return data[static_cast<size_t>(i)]; }

    bool same_shape(const Array& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    // NaN/Inf rejection, used by checked-mode construction paths
    void validate(const char* what) const {
        require(all_finite(), "non-finite value in ", what, " with shape ", shape_str(shape));
    }
};

inline double l2_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline double squared_distance(const double* a, const double* b, int d) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) {
        const double t = a[i] - b[i];
        s += t * t;
    }
    return s;
}

}  // namespace lfs::numgrad
