#pragma once

#include <cstdint>
#include <cstdlib>
#include <new>
#include <numeric>
#include <string>
#include <vector>

#include "mln/core/errors.hpp"

namespace mln::core {

// 64-byte-aligned allocator. Keeping every tensor buffer at a fixed
// alignment pins Eigen's kernel dispatch, which keeps results bit-identical
// across allocations (heap placement must not influence numerics).
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::size_t kAlign = 64;

    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) {}

    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{kAlign}));
    }
    void deallocate(T* p, std::size_t) { ::operator delete(p, std::align_val_t{kAlign}); }

    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const {
        return true;
    }
};

template <typename T>
using AlignedVec = std::vector<T, AlignedAllocator<T>>;

// Dense row-major tensor. Rank is dynamic; most ops treat the data as
// [rows, cols] with cols = last dimension.
template <typename S>
struct Tensor {
    std::vector<int64_t> shape;
    AlignedVec<S> data;

    Tensor() = default;
    explicit Tensor(std::vector<int64_t> sh) : shape(std::move(sh)) {
        data.assign(static_cast<size_t>(numel_of(shape)), S(0));
    }
    Tensor(std::vector<int64_t> sh, AlignedVec<S> d) : shape(std::move(sh)), data(std::move(d)) {
        if (data.size() != static_cast<size_t>(numel_of(shape)))
            throw ShapeError("Tensor: data size does not match shape");
    }
    Tensor(std::vector<int64_t> sh, const std::vector<S>& d)
        : shape(std::move(sh)), data(d.begin(), d.end()) {
        if (data.size() != static_cast<size_t>(numel_of(shape)))
            throw ShapeError("Tensor: data size does not match shape");
    }
    Tensor(std::vector<int64_t> sh, std::initializer_list<S> d)
        : shape(std::move(sh)), data(d.begin(), d.end()) {
        if (data.size() != static_cast<size_t>(numel_of(shape)))
            throw ShapeError("Tensor: data size does not match shape");
    }

    static int64_t numel_of(const std::vector<int64_t>& sh) {
        int64_t n = 1;
        for (int64_t d : sh) n *= d;
        return n;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int64_t dim(int i) const { return shape[static_cast<size_t>(i)]; }
    int64_t last_dim() const { return shape.empty() ? 1 : shape.back(); }
    int64_t rows() const { return last_dim() == 0 ? 0 : numel() / last_dim(); }

    S* ptr() { return data.data(); }
    const S* ptr() const { return data.data(); }

    void fill(S v) { std::fill(data.begin(), data.end(), v); }

    template <typename T>
    Tensor<T> cast() const {
        Tensor<T> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<T>(data[i]);
        return out;
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

inline std::string shape_str(const std::vector<int64_t>& sh) {
    std::string s = "[";
    for (size_t i = 0; i < sh.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(sh[i]);
    }
    return s + "]";
}

}  // namespace mln::core
