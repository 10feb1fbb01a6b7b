#pragma once

// Dense evaluation of the whitened Milstein coefficients straight from the
// operator form of the shift diffusion, used to cross-check the banded fast
// path. Nothing here knows about bands or sparsity.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "amlmc/model.hpp"
#include "amlmc/noise.hpp"

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

/// G(v) restricted to H_N x span{e_1..e_K}: column k holds the first N
/// coefficients of G(v) e_k = ((v, e_{k-1}) + (g, e_k)) e_k.
inline Matrix G(std::span<const double> v, std::span<const double> g, std::size_t N,
                std::size_t K) {
    Matrix m(N, std::vector<double>(K, 0.0));
    for (std::size_t k = 0; k < K; ++k) {
        const double vk1 = (k >= 1 && k - 1 < v.size()) ? v[k - 1] : 0.0;
        const double coeff = vk1 + g[k];
        for (std::size_t n = 0; n < N; ++n) m[n][k] = (n == k) ? coeff : 0.0;
    }
    return m;
}

/// Frechet derivative G'(v)h; independent of v because G is affine.
inline Matrix dG(std::span<const double> h, std::size_t N, std::size_t K) {
    Matrix m(N, std::vector<double>(K, 0.0));
    for (std::size_t k = 0; k < K; ++k) {
        const double hk1 = (k >= 1 && k - 1 < h.size()) ? h[k - 1] : 0.0;
        for (std::size_t n = 0; n < N; ++n) m[n][k] = (n == k) ? hk1 : 0.0;
    }
    return m;
}

/// sum_k sqrt(eta_k) (G(y) e_k, f_n) dw_k.
inline std::vector<double> diffusion(std::span<const double> y, std::span<const double> g,
                                     std::span<const double> sqrt_eta, std::span<const double> dw,
                                     std::size_t K) {
    const std::size_t N = y.size();
    const Matrix Gy = G(y, g, N, K);
    std::vector<double> out(N, 0.0);
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t k = 0; k < K; ++k) out[n] += sqrt_eta[k] * Gy[n][k] * dw[k];
    return out;
}

/// 1/2 sum_{k,l} sqrt(eta_k eta_l) (G'(y)(P_N G(y) e_l) e_k, f_n) (dw_k dw_l - delta_kl dt).
inline std::vector<double> correction(std::span<const double> y, std::span<const double> g,
                                      std::span<const double> sqrt_eta,
                                      std::span<const double> dw, double dt, std::size_t K) {
    const std::size_t N = y.size();
    const Matrix Gy = G(y, g, N, K);
    std::vector<double> out(N, 0.0);
    for (std::size_t l = 0; l < K; ++l) {
        std::vector<double> col(N);
        for (std::size_t n = 0; n < N; ++n) col[n] = Gy[n][l];
        const Matrix D = dG(col, N, K);
        for (std::size_t k = 0; k < K; ++k) {
            const double br = amlmc::bracket(dw, dt, k, l);
            for (std::size_t n = 0; n < N; ++n) {
                out[n] += 0.5 * sqrt_eta[k] * sqrt_eta[l] * D[n][k] * br;
            }
        }
    }
    return out;
}

}  // namespace oracle
