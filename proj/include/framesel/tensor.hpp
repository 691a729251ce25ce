#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "framesel/errors.hpp"

namespace framesel {

// Dense row-major tensor of rank 1 or 2. Scalars are rank-1 tensors of size 1.
// All model state in the project (weights, activations, gradients) is one of
// these; 32-bit instantiations are used for training, 64-bit for verification.
template <typename T>
struct Tensor {
    std::vector<T> data;
    std::uint32_t dims[2] = {0, 1};
    std::uint8_t rank = 1;

    Tensor() = default;

    static Tensor vec(std::size_t n, T fill = T(0)) {
        Tensor t;
        t.assign_vec(n);
        for (auto& v : t.data) v = fill;
        return t;
    }

    static Tensor mat(std::size_t r, std::size_t c, T fill = T(0)) {
        Tensor t;
        t.assign_mat(r, c);
        for (auto& v : t.data) v = fill;
        return t;
    }

    static Tensor scalar(T v) {
        Tensor t;
        t.assign_vec(1);
        t.data[0] = v;
        return t;
    }

    static Tensor of(std::initializer_list<T> vals) {
        Tensor t;
        t.assign_vec(vals.size());
        std::size_t i = 0;
        for (T v : vals) t.data[i++] = v;
        return t;
    }

    static Tensor mat_of(std::size_t r, std::size_t c, std::initializer_list<T> vals) {
        Tensor t;
        t.assign_mat(r, c);
        if (vals.size() != t.data.size()) throw ShapeError("mat_of: initializer size mismatch");
        std::size_t i = 0;
        for (T v : vals) t.data[i++] = v;
        return t;
    }

    // Reshape in place; reuses the vector's capacity. Contents undefined.
    void assign_vec(std::size_t n) {
        rank = 1;
        dims[0] = static_cast<std::uint32_t>(n);
        dims[1] = 1;
        data.resize(n);
    }

    void assign_mat(std::size_t r, std::size_t c) {
        rank = 2;
        dims[0] = static_cast<std::uint32_t>(r);
        dims[1] = static_cast<std::uint32_t>(c);
        data.resize(r * c);
    }

    void assign_like(const Tensor& o) {
        rank = o.rank;
        dims[0] = o.dims[0];
        dims[1] = o.dims[1];
        data.resize(o.data.size());
    }

    std::size_t size() const { return data.size(); }
    std::size_t rows() const { return dims[0]; }
    std::size_t cols() const { return dims[1]; }
    bool is_scalar() const { return data.size() == 1; }

    T& operator[](std::size_t i) { return data[i]; }
    const T& operator[](std::size_t i) const { return data[i]; }

    T& at(std::size_t r, std::size_t c) { return data[r * dims[1] + c]; }
    const T& at(std::size_t r, std::size_t c) const { return data[r * dims[1] + c]; }

    const T* row_ptr(std::size_t r) const { return data.data() + r * dims[1]; }
    T* row_ptr(std::size_t r) { return data.data() + r * dims[1]; }

    void zero() { std::fill(data.begin(), data.end(), T(0)); }
    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    bool same_shape(const Tensor& o) const {
        return rank == o.rank && dims[0] == o.dims[0] && dims[1] == o.dims[1];
    }

    std::string shape_str() const {
        if (rank == 1) return "[" + std::to_string(dims[0]) + "]";
        return "[" + std::to_string(dims[0]) + "x" + std::to_string(dims[1]) + "]";
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        if (rank == 2)
            out.assign_mat(dims[0], dims[1]);
        else
            out.assign_vec(dims[0]);
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

template <typename T>
inline bool all_finite(const Tensor<T>& t) {
    for (T v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

template <typename T>
inline void require_finite(const Tensor<T>& t, const char* where) {
    if (!all_finite(t)) throw NumericError(std::string("non-finite value in ") + where);
}

} // namespace framesel
