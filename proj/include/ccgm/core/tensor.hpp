#pragma once

#include <array>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "ccgm/core/errors.hpp"

namespace ccgm {

// Dense row-major tensor of up to 4 dimensions. Images are C x H x W,
// batches N x C x H x W. Unused leading dimensions are 1.
template <typename T>
class TensorT {
public:
    TensorT() : dims_{0, 0, 0, 0}, rank_(0) {}

    TensorT(std::initializer_list<std::size_t> shape) { reshape_to(shape.begin(), shape.end()); }

    explicit TensorT(std::span<const std::size_t> shape) { reshape_to(shape.begin(), shape.end()); }

    static TensorT zeros(std::initializer_list<std::size_t> shape) { return TensorT(shape); }

    static TensorT full(std::initializer_list<std::size_t> shape, T value) {
        TensorT t(shape);
        std::fill(t.data_.begin(), t.data_.end(), value);
        return t;
    }

    std::size_t rank() const { return rank_; }
    std::size_t dim(std::size_t i) const { return dims_[i]; }
    std::size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::array<std::size_t, 4> dims() const { return dims_; }
    std::vector<std::size_t> shape() const {
        return std::vector<std::size_t>(dims_.begin(), dims_.begin() + rank_);
    }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::span<T> flat() { return std::span<T>(data_); }
    std::span<const T> flat() const { return std::span<const T>(data_); }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    // 3-D access: (c, h, w)
    T& operator()(std::size_t c, std::size_t h, std::size_t w) {
        return data_[(c * dims_[rank_ - 2] + h) * dims_[rank_ - 1] + w];
    }
    const T& operator()(std::size_t c, std::size_t h, std::size_t w) const {
        return data_[(c * dims_[rank_ - 2] + h) * dims_[rank_ - 1] + w];
    }

    // 4-D access: (n, c, h, w); requires rank 4.
    T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
        return data_[((n * dims_[1] + c) * dims_[2] + h) * dims_[3] + w];
    }
    const T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
        return data_[((n * dims_[1] + c) * dims_[2] + h) * dims_[3] + w];
    }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

    bool same_shape(const TensorT& other) const {
        return rank_ == other.rank_ && dims_ == other.dims_;
    }

    bool operator==(const TensorT& other) const {
        return same_shape(other) && data_ == other.data_;
    }

    // Same data, new dims (element count must match).
    TensorT reshaped(std::initializer_list<std::size_t> shape) const {
        TensorT out(shape);
        if (out.numel() != numel()) throw DomainError("reshape changes element count");
        out.data_ = data_;
        return out;
    }

    template <typename U>
    TensorT<U> cast() const {
        TensorT<U> out;
        out.reshape_to(dims_.begin(), dims_.begin() + rank_);
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return out;
    }

    template <typename Iter>
    void reshape_to(Iter begin, Iter end) {
        rank_ = static_cast<std::size_t>(std::distance(begin, end));
        if (rank_ > 4) throw DomainError("tensor rank > 4 unsupported");
        dims_ = {1, 1, 1, 1};
        std::size_t n = 1;
        std::size_t i = 0;
        for (Iter it = begin; it != end; ++it, ++i) {
            dims_[i] = static_cast<std::size_t>(*it);
            n *= dims_[i];
        }
        for (std::size_t j = rank_; j < 4; ++j) dims_[j] = 1;
        data_.assign(n, T(0));
    }

private:
    template <typename U>
    friend class TensorT;

    std::array<std::size_t, 4> dims_;
    std::size_t rank_;
    std::vector<T> data_;
};

using Tensor = TensorT<float>;

}  // namespace ccgm
