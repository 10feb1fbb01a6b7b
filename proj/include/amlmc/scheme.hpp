#pragma once

// Time steppers: truncated Milstein and Euler steps, the two-half-step fine
// macro step with its antithetic twin, and path simulations that share one
// increment stream between several discretizations.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "amlmc/model.hpp"
#include "amlmc/noise.hpp"
#include "amlmc/spectral.hpp"

namespace amlmc {

/// Raised when a step produces NaN or infinity.
class NonFiniteState : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct StepConfig {
    RationalKind kind = RationalKind::CrankNicolson;
    double dt = 0.0;
    std::size_t K = 1;
    std::size_t N = 1;
    bool milstein = true;
};

namespace detail {

inline void validate(const StepConfig& cfg) {
    if (!(cfg.dt > 0.0)) throw std::invalid_argument("StepConfig: dt must be positive");
    if (cfg.K < 1 || cfg.N < 1) throw std::invalid_argument("StepConfig: K and N must be >= 1");
}

}  // namespace detail

/// One step with cached propagator factors. `acc` is scratch of any size.
/// Every stepper in this header funnels through here, so all of them share
/// the exact floating-point evaluation order.
template <DiffusionModel Model>
class Stepper {
public:
    Stepper(const ModeBasis& basis, const StepConfig& cfg) : cfg_(cfg) {
        detail::validate(cfg_);
        r_ = propagator_factors(basis, cfg_.kind, cfg_.dt, cfg_.N);
    }

    const StepConfig& config() const noexcept { return cfg_; }
    std::span<const double> factors() const noexcept { return r_; }

    void apply(std::span<double> y, const Model& model, std::span<const double> dw,
               std::vector<double>& acc) const {
        if (y.size() != cfg_.N) {
            throw std::invalid_argument("milstein_step: state has " + std::to_string(y.size()) +
                                        " modes, config expects " + std::to_string(cfg_.N));
        }
        if (dw.size() < cfg_.K) {
            throw std::invalid_argument("milstein_step: " + std::to_string(dw.size()) +
                                        " increments for K=" + std::to_string(cfg_.K));
        }
        acc.assign(y.begin(), y.end());
        const std::span<double> out(acc);
        model.add_drift(y, cfg_.dt, out);
        model.add_diffusion(y, dw, cfg_.K, out);
        if (cfg_.milstein) model.add_correction(y, dw, cfg_.dt, cfg_.K, out);
        bool finite = true;
        for (std::size_t i = 0; i < y.size(); ++i) {
            y[i] = r_[i] * acc[i];
            finite = finite && std::isfinite(y[i]);
        }
        if (!finite) throw NonFiniteState("milstein_step: non-finite state");
    }

private:
    StepConfig cfg_;
    std::vector<double> r_;
};

template <DiffusionModel Model>
SpectralState milstein_step(const SpectralState& y, const StepConfig& cfg, const Model& model,
                            std::span<const double> dw, const ModeBasis& basis) {
    Stepper<Model> stepper(basis, cfg);
    SpectralState out = y;
    std::vector<double> acc;
    stepper.apply(out.view(), model, dw, acc);
    return out;
}

/// Two steps of length dt/2 consuming first_half then second_half.
template <DiffusionModel Model>
SpectralState fine_macro_step(const SpectralState& y, const StepConfig& cfg, const Model& model,
                              const IncrementBlock& block, const ModeBasis& basis) {
    StepConfig half = cfg;
    half.dt = 0.5 * cfg.dt;
    Stepper<Model> stepper(basis, half);
    SpectralState out = y;
    std::vector<double> acc;
    stepper.apply(out.view(), model, block.first_half, acc);
    stepper.apply(out.view(), model, block.second_half, acc);
    return out;
}

template <DiffusionModel Model>
SpectralState antithetic_macro_step(const SpectralState& y, const StepConfig& cfg,
                                    const Model& model, const IncrementBlock& block,
                                    const ModeBasis& basis) {
    return fine_macro_step(y, cfg, model, antithetic_view(block), basis);
}

/// Coarse/fine resolution pair for one coupled sample. The coarse path takes
/// M_coarse steps; fine and antithetic paths take 2*M_coarse half steps.
struct CoupledConfig {
    double T = 1.0;
    std::size_t M_coarse = 1;
    std::size_t N_coarse = 1;
    std::size_t K_coarse = 1;
    std::size_t N_fine = 1;
    std::size_t K_fine = 1;
    RationalKind kind = RationalKind::CrankNicolson;
    bool milstein = true;
    /// Skip the coarse path entirely (bottom level of the telescoping sum).
    bool with_coarse = true;
    /// Keep the per-step squared differences instead of only their maxima.
    bool record_paths = false;
};

struct CoupledResult {
    SpectralState y_coarse;
    SpectralState y_fine;
    SpectralState y_anti;
    SpectralState y_avg;
    double max_sq_diff_avg = 0.0;
    double max_sq_diff_fine = 0.0;
    /// Entry m is the squared H distance at coarse time m (m = 0..M_coarse).
    std::vector<double> sq_diff_avg_path;
    std::vector<double> sq_diff_fine_path;
    double cost = 0.0;
};

inline void validate(const CoupledConfig& c) {
    if (!(c.T > 0.0)) throw std::invalid_argument("simulate_coupled: T must be positive");
    if (c.M_coarse < 1) throw std::invalid_argument("simulate_coupled: need at least one coarse step");
    if (c.N_coarse < 1 || c.K_coarse < 1) {
        throw std::invalid_argument("simulate_coupled: coarse N and K must be >= 1");
    }
    if (c.N_fine < c.N_coarse) {
        throw std::invalid_argument("simulate_coupled: N_fine=" + std::to_string(c.N_fine) +
                                    " below N_coarse=" + std::to_string(c.N_coarse));
    }
    if (c.K_fine < c.K_coarse) {
        throw std::invalid_argument("simulate_coupled: K_fine=" + std::to_string(c.K_fine) +
                                    " below K_coarse=" + std::to_string(c.K_coarse));
    }
}

/// Reusable buffers and steppers for repeated coupled samples with one
/// configuration.
template <DiffusionModel Model>
class CoupledSimulator {
public:
    CoupledSimulator(const CoupledConfig& cfg, const Model& model, const ModeBasis& basis)
        : cfg_((validate(cfg), cfg)),
          model_(&model),
          coarse_(basis, StepConfig{cfg.kind, cfg.T / static_cast<double>(cfg.M_coarse),
                                    cfg.K_coarse, cfg.N_coarse, cfg.milstein}),
          fine_(basis, StepConfig{cfg.kind, 0.5 * (cfg.T / static_cast<double>(cfg.M_coarse)),
                                  cfg.K_fine, cfg.N_fine, cfg.milstein}) {
        if (basis.size() < cfg.N_fine) {
            throw std::invalid_argument("simulate_coupled: basis holds fewer than N_fine modes");
        }
    }

    const CoupledConfig& config() const noexcept { return cfg_; }

    /// Operation count of one sample, independent of the random draws.
    double sample_cost() const {
        const double m = static_cast<double>(cfg_.M_coarse);
        double c = 2.0 * 2.0 * m * model_->cost_per_step(cfg_.N_fine, cfg_.K_fine);
        if (cfg_.with_coarse) c += m * model_->cost_per_step(cfg_.N_coarse, cfg_.K_coarse);
        return c;
    }

    void run(std::span<const double> x0, Stream& stream, CoupledResult& out) {
        if (x0.size() < cfg_.N_fine) {
            throw std::invalid_argument("simulate_coupled: initial state shorter than N_fine");
        }
        const std::size_t nc = cfg_.N_coarse;
        const std::size_t nf = cfg_.N_fine;
        out.y_coarse.coeffs.assign(x0.begin(), x0.begin() + static_cast<long>(nc));
        out.y_fine.coeffs.assign(x0.begin(), x0.begin() + static_cast<long>(nf));
        out.y_anti.coeffs = out.y_fine.coeffs;
        out.sq_diff_avg_path.clear();
        out.sq_diff_fine_path.clear();
        out.max_sq_diff_avg = 0.0;
        out.max_sq_diff_fine = 0.0;
        if (!cfg_.with_coarse) out.y_coarse.coeffs.assign(nc, 0.0);
        observe(out);

        const double dt = cfg_.T / static_cast<double>(cfg_.M_coarse);
        for (std::size_t m = 0; m < cfg_.M_coarse; ++m) {
            sample_block(stream, cfg_.K_fine, dt, block_);
            fine_.apply(out.y_fine.view(), *model_, block_.first_half, acc_);
            fine_.apply(out.y_fine.view(), *model_, block_.second_half, acc_);
            fine_.apply(out.y_anti.view(), *model_, block_.second_half, acc_);
            fine_.apply(out.y_anti.view(), *model_, block_.first_half, acc_);
            if (cfg_.with_coarse) {
                coarse_dw_.resize(cfg_.K_coarse);
                for (std::size_t k = 0; k < cfg_.K_coarse; ++k) {
                    coarse_dw_[k] = block_.first_half[k] + block_.second_half[k];
                }
                coarse_.apply(out.y_coarse.view(), *model_, coarse_dw_, acc_);
            }
            observe(out);
        }
        out.y_avg = average_;
        out.cost = sample_cost();
    }

private:
    void observe(CoupledResult& out) {
        const auto& f = out.y_fine.coeffs;
        const auto& a = out.y_anti.coeffs;
        average_.coeffs.resize(f.size());
        for (std::size_t i = 0; i < f.size(); ++i) average_.coeffs[i] = 0.5 * (f[i] + a[i]);
        const double d_avg = squared_distance(average_.coeffs, out.y_coarse.coeffs);
        const double d_fine = squared_distance(f, out.y_coarse.coeffs);
        out.max_sq_diff_avg = std::max(out.max_sq_diff_avg, d_avg);
        out.max_sq_diff_fine = std::max(out.max_sq_diff_fine, d_fine);
        if (cfg_.record_paths) {
            out.sq_diff_avg_path.push_back(d_avg);
            out.sq_diff_fine_path.push_back(d_fine);
        }
    }

    CoupledConfig cfg_;
    const Model* model_;
    Stepper<Model> coarse_;
    Stepper<Model> fine_;
    IncrementBlock block_;
    std::vector<double> coarse_dw_;
    std::vector<double> acc_;
    SpectralState average_;
};

template <DiffusionModel Model>
CoupledResult simulate_coupled(const CoupledConfig& cfg, const Model& model,
                               const ModeBasis& basis, std::span<const double> x0,
                               Stream& stream) {
    CoupledSimulator<Model> sim(cfg, model, basis);
    CoupledResult out;
    sim.run(x0, stream, out);
    return out;
}

/// One resolution of a single-path run; `milstein = false` gives Euler.
struct PathConfig {
    std::size_t N = 1;
    std::size_t K = 1;
    bool milstein = true;
};

struct PlainConfig {
    double T = 1.0;
    std::size_t M = 1;
    RationalKind kind = RationalKind::CrankNicolson;
};

/// Plain scheme with M steps of length T/M, one fine step of the stream per
/// time step.
template <DiffusionModel Model>
SpectralState simulate_plain(const PlainConfig& run, const PathConfig& path, const Model& model,
                             const ModeBasis& basis, std::span<const double> x0,
                             Stream& stream) {
    if (!(run.T > 0.0) || run.M < 1) throw std::invalid_argument("simulate_plain: bad T or M");
    if (x0.size() < path.N) throw std::invalid_argument("simulate_plain: initial state too short");
    const double dt = run.T / static_cast<double>(run.M);
    Stepper<Model> stepper(basis, StepConfig{run.kind, dt, path.K, path.N, path.milstein});
    SpectralState y(std::vector<double>(x0.begin(), x0.begin() + static_cast<long>(path.N)));
    std::vector<double> dw;
    std::vector<double> acc;
    for (std::size_t m = 0; m < run.M; ++m) {
        draw_increments(stream, path.K, dt, dw);
        stepper.apply(y.view(), model, dw, acc);
    }
    return y;
}

/// Two plain-scheme resolutions driven by identical increments at every step.
/// Returns the squared H distance at each time m = 0..M.
template <DiffusionModel Model>
class PairedSimulator {
public:
    PairedSimulator(const PlainConfig& run, const PathConfig& a, const PathConfig& b,
                    const Model& model, const ModeBasis& basis)
        : run_(run),
          a_(a),
          b_(b),
          model_(&model),
          step_a_(basis, StepConfig{run.kind, run.T / static_cast<double>(run.M), a.K, a.N,
                                    a.milstein}),
          step_b_(basis, StepConfig{run.kind, run.T / static_cast<double>(run.M), b.K, b.N,
                                    b.milstein}) {
        if (!(run.T > 0.0) || run.M < 1) {
            throw std::invalid_argument("simulate_paired: bad T or M");
        }
    }

    double sample_cost() const {
        return static_cast<double>(run_.M) *
               (model_->cost_per_step(a_.N, a_.K) + model_->cost_per_step(b_.N, b_.K));
    }

    void run(std::span<const double> x0, Stream& stream, std::vector<double>& sq_dist) {
        if (x0.size() < std::max(a_.N, b_.N)) {
            throw std::invalid_argument("simulate_paired: initial state too short");
        }
        ya_.assign(x0.begin(), x0.begin() + static_cast<long>(a_.N));
        yb_.assign(x0.begin(), x0.begin() + static_cast<long>(b_.N));
        sq_dist.clear();
        sq_dist.push_back(squared_distance(ya_, yb_));
        const double dt = run_.T / static_cast<double>(run_.M);
        const std::size_t k = std::max(a_.K, b_.K);
        for (std::size_t m = 0; m < run_.M; ++m) {
            draw_increments(stream, k, dt, dw_);
            step_a_.apply(ya_, *model_, dw_, acc_);
            step_b_.apply(yb_, *model_, dw_, acc_);
            sq_dist.push_back(squared_distance(ya_, yb_));
        }
    }

private:
    PlainConfig run_;
    PathConfig a_;
    PathConfig b_;
    const Model* model_;
    Stepper<Model> step_a_;
    Stepper<Model> step_b_;
    std::vector<double> ya_;
    std::vector<double> yb_;
    std::vector<double> dw_;
    std::vector<double> acc_;
};

}  // namespace amlmc
