#pragma once

// Spectral representation of the Dirichlet Laplacian on [0, L]^d: sorted
// eigen-system, covariance spectrum of Q = (-Laplacian)^{-s}, fractional
// Sobolev norms and rational approximations of the heat semigroup.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace amlmc {

using MultiIndex = std::array<int, 3>;

/// Coefficient vector of a field in the Laplacian eigenbasis. Entry n is the
/// H-inner product with the n-th (0-based) eigenfunction; truncating the
/// vector is the orthogonal projection onto the leading modes.
struct SpectralState {
    std::vector<double> coeffs;

    SpectralState() = default;
    explicit SpectralState(std::size_t n) : coeffs(n, 0.0) {}
    explicit SpectralState(std::vector<double> c) : coeffs(std::move(c)) {}

    std::size_t size() const noexcept { return coeffs.size(); }
    double& operator[](std::size_t i) { return coeffs[i]; }
    double operator[](std::size_t i) const { return coeffs[i]; }
    std::span<const double> view() const noexcept { return coeffs; }
    std::span<double> view() noexcept { return coeffs; }

    bool all_finite() const noexcept {
        return std::all_of(coeffs.begin(), coeffs.end(),
                           [](double v) { return std::isfinite(v); });
    }

    friend bool operator==(const SpectralState&, const SpectralState&) = default;
};

/// Leading `count` Dirichlet eigenpairs of -Laplacian on [0, length]^d,
/// ordered by eigenvalue with ties broken lexicographically on the
/// multi-index. Immutable once built.
class ModeBasis {
public:
    int dimension() const noexcept { return d_; }
    double smoothness() const noexcept { return s_; }
    double length() const noexcept { return length_; }
    std::size_t size() const noexcept { return lambdas_.size(); }

    std::span<const MultiIndex> modes() const noexcept { return modes_; }
    std::span<const double> lambdas() const noexcept { return lambdas_; }
    std::span<const double> etas() const noexcept { return etas_; }
    double lambda(std::size_t n) const { return lambdas_.at(n); }
    double eta(std::size_t n) const { return etas_.at(n); }

    friend ModeBasis build_basis(int d, std::size_t count, double s, double length);

private:
    ModeBasis() = default;

    int d_ = 1;
    double s_ = 1.0;
    double length_ = 1.0;
    std::vector<MultiIndex> modes_;
    std::vector<double> lambdas_;
    std::vector<double> etas_;
};

inline ModeBasis build_basis(int d, std::size_t count, double s, double length = 1.0) {
    if (d < 1 || d > 3) {
        throw std::invalid_argument("build_basis: dimension must be 1, 2 or 3, got " +
                                    std::to_string(d));
    }
    if (count < 1) {
        throw std::invalid_argument("build_basis: mode count must be positive");
    }
    // Q = (-Laplacian)^{-s} is trace class iff s > d/2.
    if (!(s > 0.5 * d)) {
        throw std::invalid_argument("build_basis: smoothness s=" + std::to_string(s) +
                                    " must exceed d/2 for a trace-class covariance");
    }
    if (!(length > 0.0)) {
        throw std::invalid_argument("build_basis: domain length must be positive");
    }

    // Smallest radius whose lattice ball holds at least `count` points; every
    // point with |k|^2 <= R^2 is collected so the first `count` after sorting
    // are exactly the smallest eigenvalues.
    long radius = std::max<long>(
        2, static_cast<long>(std::ceil(std::pow(static_cast<double>(count), 1.0 / d))) + 1);
    std::vector<MultiIndex> pts;
    for (;;) {
        pts.clear();
        const long r2 = radius * radius;
        const int kmax = static_cast<int>(radius);
        const int k2max = d >= 2 ? kmax : 1;
        const int k3max = d >= 3 ? kmax : 1;
        for (int a = 1; a <= kmax; ++a) {
            for (int b = 1; b <= k2max; ++b) {
                for (int c = 1; c <= k3max; ++c) {
                    long q = static_cast<long>(a) * a;
                    if (d >= 2) q += static_cast<long>(b) * b;
                    if (d >= 3) q += static_cast<long>(c) * c;
                    if (q <= r2) pts.push_back({a, d >= 2 ? b : 0, d >= 3 ? c : 0});
                }
            }
        }
        if (pts.size() >= count) break;
        radius *= 2;
    }

    auto norm2 = [](const MultiIndex& k) {
        return static_cast<long>(k[0]) * k[0] + static_cast<long>(k[1]) * k[1] +
               static_cast<long>(k[2]) * k[2];
    };
    std::sort(pts.begin(), pts.end(), [&](const MultiIndex& x, const MultiIndex& y) {
        const long nx = norm2(x);
        const long ny = norm2(y);
        if (nx != ny) return nx < ny;
        return x < y;
    });
    pts.resize(count);

    ModeBasis basis;
    basis.d_ = d;
    basis.s_ = s;
    basis.length_ = length;
    basis.modes_ = std::move(pts);
    basis.lambdas_.reserve(count);
    basis.etas_.reserve(count);
    const double scale = (std::numbers::pi / length) * (std::numbers::pi / length);
    for (const auto& k : basis.modes_) {
        const double lam = scale * static_cast<double>(norm2(k));
        basis.lambdas_.push_back(lam);
        basis.etas_.push_back(std::pow(lam, -s));
    }
    return basis;
}

enum class RationalKind { CrankNicolson, BackwardEuler, Exponential };

inline std::string_view to_string(RationalKind kind) {
    switch (kind) {
        case RationalKind::CrankNicolson: return "crank-nicolson";
        case RationalKind::BackwardEuler: return "backward-euler";
        case RationalKind::Exponential: return "exponential";
    }
    return "unknown";
}

inline RationalKind parse_rational_kind(std::string_view name) {
    if (name == "crank-nicolson" || name == "cn") return RationalKind::CrankNicolson;
    if (name == "backward-euler" || name == "be") return RationalKind::BackwardEuler;
    if (name == "exponential" || name == "exp") return RationalKind::Exponential;
    throw std::invalid_argument("unknown rational approximation '" + std::string(name) + "'");
}

/// r(x) approximating exp(-x) on x >= 0.
inline double rational_eval(RationalKind kind, double x) {
    if (!(x >= 0.0)) {
        throw std::invalid_argument("rational_eval: argument must be non-negative");
    }
    switch (kind) {
        case RationalKind::CrankNicolson: return (1.0 - 0.5 * x) / (1.0 + 0.5 * x);
        case RationalKind::BackwardEuler: return 1.0 / (1.0 + x);
        case RationalKind::Exponential: return std::exp(-x);
    }
    throw std::invalid_argument("rational_eval: unknown kind");
}

/// Per-mode factors r(dt * lambda_n) for the first `n` modes.
inline std::vector<double> propagator_factors(const ModeBasis& basis, RationalKind kind,
                                              double dt, std::size_t n) {
    if (!(dt > 0.0)) throw std::invalid_argument("propagator: time step must be positive");
    if (n > basis.size()) {
        throw std::invalid_argument("propagator: " + std::to_string(n) +
                                    " modes requested from a basis of " +
                                    std::to_string(basis.size()));
    }
    std::vector<double> r(n);
    const auto lam = basis.lambdas();
    for (std::size_t i = 0; i < n; ++i) r[i] = rational_eval(kind, dt * lam[i]);
    return r;
}

inline SpectralState propagate(const ModeBasis& basis, RationalKind kind, double dt,
                               const SpectralState& y) {
    const auto r = propagator_factors(basis, kind, dt, y.size());
    SpectralState out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = r[i] * y[i];
    return out;
}

/// Fractional Sobolev norm sqrt(sum lambda_n^a y_n^2); a = 0 is the H norm.
inline double norm(const SpectralState& y, const ModeBasis& basis, double a = 0.0) {
    if (!(a >= 0.0)) throw std::invalid_argument("norm: exponent must be non-negative");
    if (y.size() > basis.size()) {
        throw std::invalid_argument("norm: state longer than basis");
    }
    const auto lam = basis.lambdas();
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double w = a == 0.0 ? 1.0 : std::pow(lam[i], a);
        acc += w * y[i] * y[i];
    }
    return std::sqrt(acc);
}

/// ||a - b||_H^2 with the shorter vector zero-padded.
inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = std::max(a.size(), b.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = i < a.size() ? a[i] : 0.0;
        const double y = i < b.size() ? b[i] : 0.0;
        const double diff = x - y;
        acc += diff * diff;
    }
    return acc;
}

}  // namespace amlmc
