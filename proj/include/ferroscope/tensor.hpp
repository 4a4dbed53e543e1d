// Dense float32 tensor (up to 4 axes) plus the small row-major GEMM kernels
// the layer implementations are built on.

#pragma once

#include <array>
#include <numeric>
#include <string>
#include <vector>

#include "ferroscope/core.hpp"

namespace ferroscope::nn {

struct Tensor {
    std::vector<int> shape;    // 1..4 axes
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, float fill = 0.0f) : shape(std::move(s)) {
        data.assign(numel_of(shape), fill);
    }

    static std::size_t numel_of(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) {
            if (d <= 0) throw ShapeError("tensor axis must be positive");
            n *= std::size_t(d);
        }
        return n;
    }

    std::size_t numel() const { return data.size(); }
    int rank() const { return int(shape.size()); }
    int dim(int i) const { return shape[std::size_t(i)]; }

    // NCHW accessor for rank-4 tensors
    float& at(int n, int c, int h, int w) {
        return data[((std::size_t(n) * std::size_t(shape[1]) + std::size_t(c)) * std::size_t(shape[2]) +
                     std::size_t(h)) * std::size_t(shape[3]) + std::size_t(w)];
    }
    const float& at(int n, int c, int h, int w) const {
        return data[((std::size_t(n) * std::size_t(shape[1]) + std::size_t(c)) * std::size_t(shape[2]) +
                     std::size_t(h)) * std::size_t(shape[3]) + std::size_t(w)];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }

    void zero() { std::fill(data.begin(), data.end(), 0.0f); }
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* where) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(where) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

// ---------------------------------------------------------------------------
// Row-major GEMM kernels. Inner loops run over contiguous rows so the
// compiler can vectorize them.
// ---------------------------------------------------------------------------

// C[M,N] += A[M,K] * B[K,N]
inline void gemm_nn(int M, int N, int K, const float* A, const float* B, float* C) {
    for (int m = 0; m < M; ++m) {
        float* c = C + std::size_t(m) * std::size_t(N);
        const float* a = A + std::size_t(m) * std::size_t(K);
        for (int k = 0; k < K; ++k) {
            const float av = a[k];
            const float* b = B + std::size_t(k) * std::size_t(N);
            for (int n = 0; n < N; ++n) c[n] += av * b[n];
        }
    }
}

// C[M,N] += A[K,M]^T * B[K,N]
inline void gemm_tn(int M, int N, int K, const float* A, const float* B, float* C) {
    for (int k = 0; k < K; ++k) {
        const float* a = A + std::size_t(k) * std::size_t(M);
        const float* b = B + std::size_t(k) * std::size_t(N);
        for (int m = 0; m < M; ++m) {
            const float av = a[m];
            float* c = C + std::size_t(m) * std::size_t(N);
            for (int n = 0; n < N; ++n) c[n] += av * b[n];
        }
    }
}

// C[M,N] += A[M,K] * B[N,K]^T
inline void gemm_nt(int M, int N, int K, const float* A, const float* B, float* C) {
    for (int m = 0; m < M; ++m) {
        const float* a = A + std::size_t(m) * std::size_t(K);
        float* c = C + std::size_t(m) * std::size_t(N);
        for (int n = 0; n < N; ++n) {
            const float* b = B + std::size_t(n) * std::size_t(K);
            float acc = 0.0f;
            for (int k = 0; k < K; ++k) acc += a[k] * b[k];
            c[n] += acc;
        }
    }
}

}  // namespace ferroscope::nn
