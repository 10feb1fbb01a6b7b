#pragma once

// Diffusion models in eigenbasis coordinates and the shift-coupled stochastic
// heat equation used for the convergence experiments.
//
// A model acts on whitened increments dw_k ~ N(0, dt). It owns every factor
// of sqrt(eta_k), so the whitened diffusion coefficient is
//   B_{n,k}(y)  = sqrt(eta_k) (G(Y) e_k, f_n)
// and the whitened Milstein coefficient is
//   D_{n,kl}(y) = sqrt(eta_k eta_l) (G'(Y)(P_N G(Y) e_l) e_k, f_n),
// contracted against bracket(dw, dt, k, l).

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "amlmc/noise.hpp"
#include "amlmc/spectral.hpp"

namespace amlmc {

/// All `add_*` members accumulate into `out`, which has the length of `y`.
template <class M>
concept DiffusionModel = requires(const M& m, std::span<const double> y,
                                  std::span<const double> dw, double dt, std::size_t k,
                                  std::span<double> out) {
    { m.add_drift(y, dt, out) };
    { m.add_diffusion(y, dw, k, out) };
    { m.add_correction(y, dw, dt, k, out) };
    { m.cost_per_step(k, k) } -> std::convertible_to<double>;
    { m.noise_band(k) } -> std::convertible_to<std::size_t>;
};

template <DiffusionModel Model>
std::vector<double> apply_diffusion(const Model& model, std::span<const double> y,
                                    std::span<const double> dw, std::size_t k) {
    std::vector<double> out(y.size(), 0.0);
    model.add_diffusion(y, dw, k, out);
    return out;
}

template <DiffusionModel Model>
std::vector<double> apply_correction(const Model& model, std::span<const double> y,
                                     std::span<const double> dw, double dt, std::size_t k) {
    std::vector<double> out(y.size(), 0.0);
    model.add_correction(y, dw, dt, k, out);
    return out;
}

struct ShiftModelOptions {
    double eps = 0.01;
    /// When false the state-dependent shift term is dropped and G(Y) = g.
    bool state_coupling = true;
    /// Multiplies the data coefficients g; 0 gives a noise-free model.
    double g_scale = 1.0;
};

/// dX = Laplacian X dt + G(X) dW with
///   G(v) e_k-direction = ((v, e_{k-1}) + (g, e_k)) e_k,
/// (g, e_k) = k^{-1/2-eps} and (X0, e_k) = k^{-1/2-2/d-eps}. Mode k is driven
/// by noise mode k with amplitude depending on mode k-1, so the diffusion is
/// non-commutative and band limited.
class ShiftHeatModel {
public:
    ShiftHeatModel(ModeBasis basis, ShiftModelOptions opts) : basis_(std::move(basis)), opts_(opts) {
        if (!(opts_.eps > 0.0)) {
            throw std::invalid_argument("ShiftHeatModel: eps must be positive");
        }
        const std::size_t n = basis_.size();
        const double d = static_cast<double>(basis_.dimension());
        g_.resize(n);
        x0_.resize(n);
        sqrt_eta_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double k = static_cast<double>(i + 1);
            g_[i] = opts_.g_scale * std::pow(k, -0.5 - opts_.eps);
            x0_[i] = std::pow(k, -0.5 - 2.0 / d - opts_.eps);
            sqrt_eta_[i] = std::sqrt(basis_.eta(i));
        }
    }

    const ModeBasis& basis() const noexcept { return basis_; }
    const ShiftModelOptions& options() const noexcept { return opts_; }
    std::span<const double> g_coeffs() const noexcept { return g_; }
    std::span<const double> x0_coeffs() const noexcept { return x0_; }
    std::span<const double> sqrt_etas() const noexcept { return sqrt_eta_; }
    std::size_t capacity() const noexcept { return g_.size(); }

    SpectralState initial_state(std::size_t n) const {
        check_capacity(n);
        return SpectralState(std::vector<double>(x0_.begin(), x0_.begin() + static_cast<long>(n)));
    }

    void add_drift(std::span<const double>, double, std::span<double>) const noexcept {}

    void add_diffusion(std::span<const double> y, std::span<const double> dw, std::size_t k,
                       std::span<double> out) const {
        const std::size_t n = active(y.size(), dw.size(), k, out.size());
        const bool couple = opts_.state_coupling;
        for (std::size_t i = 0; i < n; ++i) {
            const double amp = (couple && i >= 1 ? y[i - 1] : 0.0) + g_[i];
            out[i] += amp * (sqrt_eta_[i] * dw[i]);
        }
    }

    // The diagonal -delta_kl dt part of the bracket never contributes because
    // D_{n,kl} is supported on k = l + 1 only.
    void add_correction(std::span<const double> y, std::span<const double> dw, double,
                        std::size_t k, std::span<double> out) const {
        if (!opts_.state_coupling) return;
        const std::size_t n = active(y.size(), dw.size(), k, out.size());
        for (std::size_t i = 1; i < n; ++i) {
            const double amp = (i >= 2 ? y[i - 2] : 0.0) + g_[i - 1];
            out[i] += 0.5 * amp * (sqrt_eta_[i] * dw[i]) * (sqrt_eta_[i - 1] * dw[i - 1]);
        }
    }

    /// Operation count of one step: band-limited noise terms plus the
    /// componentwise propagator.
    double cost_per_step(std::size_t n, std::size_t k) const noexcept {
        return static_cast<double>(n) + 2.0 * static_cast<double>(std::min(n, k));
    }

    /// Noise modes beyond N never reach an N-mode system.
    std::size_t noise_band(std::size_t n) const noexcept { return n; }

private:
    void check_capacity(std::size_t n) const {
        if (n > g_.size()) {
            throw std::invalid_argument("ShiftHeatModel: " + std::to_string(n) +
                                        " modes requested, model holds " +
                                        std::to_string(g_.size()));
        }
    }

    std::size_t active(std::size_t ny, std::size_t ndw, std::size_t k, std::size_t nout) const {
        check_capacity(ny);
        if (nout != ny) throw std::invalid_argument("ShiftHeatModel: output length mismatch");
        if (k > ndw) {
            throw std::invalid_argument("ShiftHeatModel: truncation K=" + std::to_string(k) +
                                        " exceeds " + std::to_string(ndw) + " increments");
        }
        return std::min(ny, k);
    }

    ModeBasis basis_;
    ShiftModelOptions opts_;
    std::vector<double> g_;
    std::vector<double> x0_;
    std::vector<double> sqrt_eta_;
};

static_assert(DiffusionModel<ShiftHeatModel>);

inline ShiftHeatModel model_data(const ModeBasis& basis, double eps) {
    return ShiftHeatModel(basis, ShiftModelOptions{.eps = eps});
}

inline ShiftHeatModel model_data(int d, double s, double eps, std::size_t n,
                                 double length = 1.0) {
    if (!(eps > 0.0)) throw std::invalid_argument("model_data: eps must be positive");
    return model_data(build_basis(d, n, s, length), eps);
}

/// Diffusion term in the per-mode form used by the displayed recursions:
/// entry n (1-based) is chi_{n<=K} (y_{n-1} + g_n) dW_n with y_0 = 0, where
/// dW are the physical increments (sqrt(eta) already applied).
inline std::vector<double> shift_apply_diffusion(std::span<const double> g,
                                                 std::span<const double> y,
                                                 std::span<const double> dW, std::size_t k) {
    if (y.size() > g.size()) throw std::invalid_argument("shift_apply_diffusion: g too short");
    if (k > dW.size()) throw std::invalid_argument("shift_apply_diffusion: K exceeds increments");
    std::vector<double> out(y.size(), 0.0);
    const std::size_t n = std::min(y.size(), k);
    for (std::size_t i = 0; i < n; ++i) out[i] = ((i >= 1 ? y[i - 1] : 0.0) + g[i]) * dW[i];
    return out;
}

/// Milstein term in the same form: chi_{n<=K} 1/2 (y_{n-2} + g_{n-1}) dW_n dW_{n-1}
/// for n >= 2 and zero for n = 1.
inline std::vector<double> shift_apply_correction(std::span<const double> g,
                                                  std::span<const double> y,
                                                  std::span<const double> dW, std::size_t k) {
    if (y.size() > g.size()) throw std::invalid_argument("shift_apply_correction: g too short");
    if (k > dW.size()) throw std::invalid_argument("shift_apply_correction: K exceeds increments");
    std::vector<double> out(y.size(), 0.0);
    const std::size_t n = std::min(y.size(), k);
    for (std::size_t i = 1; i < n; ++i) {
        out[i] = 0.5 * ((i >= 2 ? y[i - 2] : 0.0) + g[i - 1]) * dW[i] * dW[i - 1];
    }
    return out;
}

inline std::vector<double> shift_apply_diffusion(const ShiftHeatModel& model,
                                                 std::span<const double> y,
                                                 std::span<const double> dW, std::size_t k) {
    return shift_apply_diffusion(model.g_coeffs(), y, dW, k);
}

inline std::vector<double> shift_apply_correction(const ShiftHeatModel& model,
                                                  std::span<const double> y,
                                                  std::span<const double> dW, std::size_t k) {
    return shift_apply_correction(model.g_coeffs(), y, dW, k);
}

}  // namespace amlmc
