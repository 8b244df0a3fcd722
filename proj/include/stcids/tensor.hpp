#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "stcids/common.hpp"

namespace stcids::neural {

struct ShapeMismatch : Error {
    using Error::Error;
};
struct NumericalFault : Error {
    using Error::Error;
};

// Dense row-major tensor of rank <= 4.
template <class T>
struct Ten {
    int rank = 0;
    std::array<int, 4> ext{1, 1, 1, 1};
    std::vector<T> d;

    Ten() = default;
    explicit Ten(std::initializer_list<int> shape) { reshape(shape); }

    void reshape(std::initializer_list<int> shape) {
        rank = static_cast<int>(shape.size());
        if (rank < 1 || rank > 4) throw ShapeMismatch("tensor rank must be 1..4");
        ext = {1, 1, 1, 1};
        int i = 0;
        size_t n = 1;
        for (int e : shape) {
            if (e <= 0) throw ShapeMismatch("tensor extents must be positive");
            ext[i++] = e;
            n *= static_cast<size_t>(e);
        }
        d.assign(n, T{0});
    }

    size_t size() const { return d.size(); }
    T* data() { return d.data(); }
    const T* data() const { return d.data(); }

    T& at(int i) { return d[static_cast<size_t>(i)]; }
    T& at(int i, int j) { return d[static_cast<size_t>(i) * ext[1] + j]; }
    T& at(int i, int j, int k) { return d[(static_cast<size_t>(i) * ext[1] + j) * ext[2] + k]; }
    T& at(int i, int j, int k, int l) {
        return d[((static_cast<size_t>(i) * ext[1] + j) * ext[2] + k) * ext[3] + l];
    }
    const T& at(int i) const { return d[static_cast<size_t>(i)]; }
    const T& at(int i, int j) const { return d[static_cast<size_t>(i) * ext[1] + j]; }
    const T& at(int i, int j, int k) const {
        return d[(static_cast<size_t>(i) * ext[1] + j) * ext[2] + k];
    }
    const T& at(int i, int j, int k, int l) const {
        return d[((static_cast<size_t>(i) * ext[1] + j) * ext[2] + k) * ext[3] + l];
    }

    bool same_shape(const Ten& o) const { return rank == o.rank && ext == o.ext; }

    std::string shape_str() const {
        std::string s = "[";
        for (int i = 0; i < rank; ++i) {
            if (i) s += ",";
            s += std::to_string(ext[i]);
        }
        return s + "]";
    }

    void fill(T v) { std::fill(d.begin(), d.end(), v); }

    bool all_finite() const {
        for (T v : d)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }
};

template <class T>
void require_shape(const Ten<T>& t, std::initializer_list<int> shape, const char* what) {
    Ten<T> probe;
    probe.rank = static_cast<int>(shape.size());
    int i = 0;
    for (int e : shape) probe.ext[i++] = e;
    if (t.rank != probe.rank || t.ext != probe.ext)
        throw ShapeMismatch(std::string(what) + ": got " + t.shape_str());
}

// A named parameter with its gradient. `decay` marks weight matrices and
// convolution kernels, the only tensors the L2 penalty covers.
template <class T>
struct Param {
    std::string name;
    Ten<T> value;
    Ten<T> grad;
    bool decay = false;

    void init_shape(std::initializer_list<int> shape) {
        value.reshape(shape);
        grad.reshape(shape);
    }
    void zero_grad() { grad.fill(T{0}); }
};

// C[m,n] += A[m,k] * B[k,n]; plain loops ordered so the inner loop runs over
// contiguous memory in B and C.
template <class T>
void matmul_acc(const T* a, const T* b, T* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const T* arow = a + static_cast<size_t>(i) * k;
        T* crow = c + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            T av = arow[p];
            if (av == T{0}) continue;
            const T* brow = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m,n] += A^T[m,k] * B[k,n] where A is stored [k,m].
template <class T>
void matmul_at_b_acc(const T* a, const T* b, T* c, int m, int k, int n) {
    for (int p = 0; p < k; ++p) {
        const T* arow = a + static_cast<size_t>(p) * m;
        const T* brow = b + static_cast<size_t>(p) * n;
        for (int i = 0; i < m; ++i) {
            T av = arow[i];
            if (av == T{0}) continue;
            T* crow = c + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m,n] += A[m,k] * B^T[k,n] where B is stored [n,k].
template <class T>
void matmul_a_bt_acc(const T* a, const T* b, T* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const T* arow = a + static_cast<size_t>(i) * k;
        T* crow = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const T* brow = b + static_cast<size_t>(j) * k;
            T acc{0};
            for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] += acc;
        }
    }
}

}  // namespace stcids::neural
