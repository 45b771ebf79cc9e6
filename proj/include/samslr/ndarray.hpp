#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "samslr/errors.hpp"

namespace samslr {

using Shape = std::vector<int>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << ")";
    return os.str();
}

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int d : s) {
        if (d <= 0) throw input_error("non-positive extent in shape " + shape_str(s));
        n *= d;
    }
    return n;
}

// Dense row-major multi-dimensional array. Storage is double; file formats
// use little-endian float32 and convert at the boundary.
class NdArray {
public:
    NdArray() = default;
    explicit NdArray(Shape shape) : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0) {}
    NdArray(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (static_cast<int64_t>(data_.size()) != shape_numel(shape_))
            throw input_error("data length does not match shape " + shape_str(shape_));
    }

    static NdArray zeros(Shape shape) { return NdArray(std::move(shape)); }
    static NdArray full(Shape shape, double v) {
        NdArray a(std::move(shape));
        std::fill(a.data_.begin(), a.data_.end(), v);
        return a;
    }
    static NdArray eye(int n) {
        NdArray a({n, n});
        for (int i = 0; i < n; ++i) a.at({i, i}) = 1.0;
        return a;
    }

    const Shape& shape() const { return shape_; }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int64_t size() const { return static_cast<int64_t>(data_.size()); }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    double& at(std::initializer_list<int> idx) { return data_[offset(idx)]; }
    double at(std::initializer_list<int> idx) const { return data_[offset(idx)]; }

    bool same_shape(const NdArray& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    NdArray reshaped(Shape s) const {
        if (shape_numel(s) != size())
            throw input_error("reshape " + shape_str(shape_) + " -> " + shape_str(s) + " changes element count");
        return NdArray(std::move(s), data_);
    }

private:
    size_t offset(std::initializer_list<int> idx) const {
        size_t off = 0;
        size_t k = 0;
        for (int i : idx) {
            off = off * static_cast<size_t>(shape_[k]) + static_cast<size_t>(i);
            ++k;
        }
        return off;
    }

    Shape shape_;
    std::vector<double> data_;
};

// ---- plain (non-differentiable) helpers, used by model code and the CLI ----

NdArray matmul(const NdArray& a, const NdArray& b);
NdArray conv_temporal(const NdArray& x, const NdArray& kernel, int stride);
NdArray pool_avg_temporal(const NdArray& x);

inline NdArray add(const NdArray& a, const NdArray& b) {
    if (!a.same_shape(b)) throw input_error("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    NdArray out = a;
    for (int64_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

inline NdArray scale(const NdArray& a, double s) {
    NdArray out = a;
    for (int64_t i = 0; i < out.size(); ++i) out[i] *= s;
    return out;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double swish(double x) { return x * sigmoid(x); }

inline NdArray swish(const NdArray& a) {
    NdArray out = a;
    for (int64_t i = 0; i < out.size(); ++i) out[i] = swish(out[i]);
    return out;
}

inline double max_abs_diff(const NdArray& a, const NdArray& b) {
    if (!a.same_shape(b)) throw input_error("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

}  // namespace samslr
