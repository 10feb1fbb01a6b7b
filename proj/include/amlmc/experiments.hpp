#pragma once

// Convergence sweeps for the shift-coupled heat equation: coupled variance
// decay, spatial error between nested Galerkin spaces, and the gap between
// the Milstein and Euler schemes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "amlmc/mlmc.hpp"
#include "amlmc/model.hpp"
#include "amlmc/noise.hpp"
#include "amlmc/scheme.hpp"
#include "amlmc/stats.hpp"

namespace amlmc {

struct SweepConfig {
    int d = 1;
    double s = 1.0;
    double eps_model = 0.01;
    double T = 1.0;
    double length = 1.0;
    RationalKind kind = RationalKind::CrankNicolson;
    std::uint64_t seed = 0;
    std::uint64_t samples = 1000;
    unsigned workers = 1;
    /// Drop the state-dependent diffusion and scale g by zero.
    bool zero_noise = false;
};

inline ShiftHeatModel make_shift_model(const SweepConfig& cfg, std::size_t n) {
    ShiftModelOptions opts;
    opts.eps = cfg.eps_model;
    if (cfg.zero_noise) {
        opts.state_coupling = false;
        opts.g_scale = 0.0;
    }
    return ShiftHeatModel(build_basis(cfg.d, n, cfg.s, cfg.length), opts);
}

inline void validate(const SweepConfig& cfg) {
    if (cfg.samples < 2) throw std::invalid_argument("sweep: need at least 2 samples");
    if (!(cfg.T > 0.0)) throw std::invalid_argument("sweep: T must be positive");
}

/// Max over times of per-time means, its standard error and the mean of the
/// per-sample maxima.
struct PathSummary {
    double max_mean = 0.0;
    double se = 0.0;
    std::size_t argmax = 0;
    double mean_of_max = 0.0;
    double se_mean_of_max = 0.0;
};

struct PathAccumulator {
    VectorStats path;
    RunningStats max;
    std::uint64_t failures = 0;

    void add(const std::vector<double>& p) {
        path.add(p);
        max.add(*std::max_element(p.begin(), p.end()));
    }
    void merge(const PathAccumulator& o) {
        path.merge(o.path);
        max.merge(o.max);
        failures += o.failures;
    }
    PathSummary summary() const {
        PathSummary s;
        s.argmax = path.argmax();
        s.max_mean = path.mean[s.argmax];
        s.se = std::sqrt(path.variance(s.argmax) / static_cast<double>(path.n));
        s.mean_of_max = max.mean;
        s.se_mean_of_max = max.std_error();
        return s;
    }
};

inline void check_failures(std::uint64_t failures, std::uint64_t total, const std::string& what) {
    if (failures > 0) {
        throw SamplingFailure(what + ": " + std::to_string(failures) + " of " +
                                  std::to_string(total) + " samples produced non-finite states",
                              failures);
    }
}

struct VarianceRow {
    int d = 1;
    double s = 0.0;
    /// Coarse step count; fine and antithetic paths take 2M steps.
    std::uint64_t M = 0;
    LevelParams coarse;
    LevelParams fine;
    PathSummary antithetic;
    PathSummary standard;
    std::uint64_t n_samples = 0;
};

/// For each coarse step count M: balanced coarse (M) and fine (2M)
/// resolutions, max_m E|Ybar_m - Yc_m|^2 and max_m E|Yf_m - Yc_m|^2.
inline std::vector<VarianceRow> variance_decay_sweep(const SweepConfig& cfg,
                                                     const std::vector<std::uint64_t>& Ms) {
    validate(cfg);
    const RateParams rates = make_rates(cfg.d, cfg.s);
    auto band = [](std::size_t n) { return n; };
    std::size_t cap = 1;
    for (auto M : Ms) cap = std::max(cap, balance_for_steps(2 * M, rates, band).N);
    const ShiftHeatModel model = make_shift_model(cfg, cap);
    const auto x0 = model.x0_coeffs();

    std::vector<VarianceRow> rows;
    for (auto M : Ms) {
        if (M < 1 || M > (std::uint64_t{1} << 31)) {
            throw std::invalid_argument("variance_decay_sweep: M out of range");
        }
        VarianceRow row;
        row.d = cfg.d;
        row.s = cfg.s;
        row.M = M;
        row.coarse = balance_for_steps(M, rates, [&](std::size_t n) { return model.noise_band(n); });
        row.fine = balance_for_steps(2 * M, rates, [&](std::size_t n) { return model.noise_band(n); });
        CoupledConfig cc;
        cc.T = cfg.T;
        cc.M_coarse = static_cast<std::size_t>(M);
        cc.N_coarse = row.coarse.N;
        cc.K_coarse = row.coarse.K_effective;
        cc.N_fine = row.fine.N;
        cc.K_fine = row.fine.K_effective;
        cc.kind = cfg.kind;
        cc.record_paths = true;
        struct Acc {
            PathAccumulator anti;
            PathAccumulator std;
        };
        auto blocks = map_blocks<Acc>(
            0, cfg.samples, cfg.workers, [&](std::uint64_t lo, std::uint64_t hi, Acc& acc) {
                CoupledSimulator<ShiftHeatModel> sim(cc, model, model.basis());
                CoupledResult res;
                for (std::uint64_t i = lo; i < hi; ++i) {
                    Stream stream = derive_stream(
                        StreamKey{cfg.seed, static_cast<std::uint32_t>(M), i, StreamRole::Coupled});
                    try {
                        sim.run(x0, stream, res);
                    } catch (const NonFiniteState&) {
                        ++acc.anti.failures;
                        continue;
                    }
                    acc.anti.add(res.sq_diff_avg_path);
                    acc.std.add(res.sq_diff_fine_path);
                }
            });
        Acc total;
        for (const auto& b : blocks) {
            total.anti.merge(b.anti);
            total.std.merge(b.std);
        }
        check_failures(total.anti.failures, cfg.samples, "variance-decay M=" + std::to_string(M));
        row.antithetic = total.anti.summary();
        row.standard = total.std.summary();
        row.n_samples = total.anti.path.n;
        rows.push_back(row);
    }
    return rows;
}

struct SpatialRow {
    int d = 1;
    double s = 0.0;
    std::size_t N = 0;
    std::size_t N_fine = 0;
    std::uint64_t M = 0;
    std::size_t K = 0;
    /// sqrt of max_m E|Y^N_m - Y^{N_fine}_m|^2.
    double l2_diff = 0.0;
    double se = 0.0;
    std::uint64_t n_samples = 0;
};

inline std::size_t refined_modes(std::size_t n) {
    return static_cast<std::size_t>(std::ceil(std::sqrt(2.0) * static_cast<double>(n)));
}

/// `K = 0` selects the model band of the finer resolution; larger K would be
/// bit-identical for a band-limited model.
inline std::vector<SpatialRow> spatial_error_sweep(const SweepConfig& cfg,
                                                   const std::vector<std::size_t>& Ns,
                                                   std::uint64_t M, std::size_t K) {
    validate(cfg);
    if (M < 1) throw std::invalid_argument("spatial_error_sweep: M must be >= 1");
    std::size_t cap = 1;
    for (auto n : Ns) {
        if (n < 1) throw std::invalid_argument("spatial_error_sweep: N must be >= 1");
        cap = std::max(cap, refined_modes(n));
    }
    const ShiftHeatModel model = make_shift_model(cfg, cap);
    const auto x0 = model.x0_coeffs();

    std::vector<SpatialRow> rows;
    for (auto n : Ns) {
        SpatialRow row;
        row.d = cfg.d;
        row.s = cfg.s;
        row.N = n;
        row.N_fine = refined_modes(n);
        row.M = M;
        const std::size_t band = model.noise_band(row.N_fine);
        row.K = K == 0 ? band : std::min(K, band);
        const PlainConfig run{cfg.T, static_cast<std::size_t>(M), cfg.kind};
        const PathConfig coarse{row.N, row.K, true};
        const PathConfig fine{row.N_fine, row.K, true};
        auto blocks = map_blocks<PathAccumulator>(
            0, cfg.samples, cfg.workers,
            [&](std::uint64_t lo, std::uint64_t hi, PathAccumulator& acc) {
                PairedSimulator<ShiftHeatModel> sim(run, coarse, fine, model, model.basis());
                std::vector<double> path;
                for (std::uint64_t i = lo; i < hi; ++i) {
                    Stream stream = derive_stream(
                        StreamKey{cfg.seed, static_cast<std::uint32_t>(n), i, StreamRole::Coupled});
                    try {
                        sim.run(x0, stream, path);
                    } catch (const NonFiniteState&) {
                        ++acc.failures;
                        continue;
                    }
                    acc.add(path);
                }
            });
        PathAccumulator total;
        for (const auto& b : blocks) total.merge(b);
        check_failures(total.failures, cfg.samples, "spatial-error N=" + std::to_string(n));
        const PathSummary sum = total.summary();
        row.l2_diff = std::sqrt(sum.max_mean);
        row.se = row.l2_diff > 0.0 ? sum.se / (2.0 * row.l2_diff) : 0.0;
        row.n_samples = total.path.n;
        rows.push_back(row);
    }
    return rows;
}

struct EulerGapRow {
    int d = 1;
    double s = 0.0;
    std::uint64_t M = 0;
    LevelParams level;
    /// sqrt of max_m E|Y^Mil_m - Y^Eul_m|^2.
    double l2_gap = 0.0;
    double se = 0.0;
    std::uint64_t n_samples = 0;
};

/// `N_fixed = 0` balances N against each M; otherwise all rows use N_fixed
/// modes with the full model band of noise.
inline std::vector<EulerGapRow> euler_gap_sweep(const SweepConfig& cfg,
                                                const std::vector<std::uint64_t>& Ms,
                                                std::size_t N_fixed = 0) {
    validate(cfg);
    const RateParams rates = make_rates(cfg.d, cfg.s);
    auto ident = [](std::size_t n) { return n; };
    std::size_t cap = 1;
    for (auto M : Ms) cap = std::max(cap, balance_for_steps(M, rates, ident).N);
    if (N_fixed > 0) cap = N_fixed;
    const ShiftHeatModel model = make_shift_model(cfg, cap);
    const auto x0 = model.x0_coeffs();

    std::vector<EulerGapRow> rows;
    for (auto M : Ms) {
        if (M < 1 || M > (std::uint64_t{1} << 31)) {
            throw std::invalid_argument("euler_gap_sweep: M out of range");
        }
        EulerGapRow row;
        row.d = cfg.d;
        row.s = cfg.s;
        row.M = M;
        row.level = balance_for_steps(M, rates, [&](std::size_t n) { return model.noise_band(n); });
        if (N_fixed > 0) {
            row.level.N = N_fixed;
            row.level.K_effective = model.noise_band(N_fixed);
        }
        const PlainConfig run{cfg.T, static_cast<std::size_t>(M), cfg.kind};
        const PathConfig mil{row.level.N, row.level.K_effective, true};
        const PathConfig eul{row.level.N, row.level.K_effective, false};
        auto blocks = map_blocks<PathAccumulator>(
            0, cfg.samples, cfg.workers,
            [&](std::uint64_t lo, std::uint64_t hi, PathAccumulator& acc) {
                PairedSimulator<ShiftHeatModel> sim(run, mil, eul, model, model.basis());
                std::vector<double> path;
                for (std::uint64_t i = lo; i < hi; ++i) {
                    Stream stream = derive_stream(
                        StreamKey{cfg.seed, static_cast<std::uint32_t>(M), i, StreamRole::Coupled});
                    try {
                        sim.run(x0, stream, path);
                    } catch (const NonFiniteState&) {
                        ++acc.failures;
                        continue;
                    }
                    acc.add(path);
                }
            });
        PathAccumulator total;
        for (const auto& b : blocks) total.merge(b);
        check_failures(total.failures, cfg.samples, "euler-gap M=" + std::to_string(M));
        const PathSummary sum = total.summary();
        row.l2_gap = std::sqrt(sum.max_mean);
        row.se = row.l2_gap > 0.0 ? sum.se / (2.0 * row.l2_gap) : 0.0;
        row.n_samples = total.path.n;
        rows.push_back(row);
    }
    return rows;
}

struct MlmcRunConfig {
    SweepConfig model;
    MlmcOptions options;
    double eps = 0.01;
};

/// Estimator for Psi(y) = y_1 on the shift model; the model holds enough
/// modes for the level cap.
inline EstimatorReport run_mlmc(const MlmcRunConfig& cfg, const Functional& psi = first_mode()) {
    const RateParams rates = make_rates(cfg.model.d, cfg.model.s);
    auto ident = [](std::size_t n) { return n; };
    const std::size_t cap =
        balance_params(cfg.options.M0, cfg.options.max_levels, rates, ident).N;
    const ShiftHeatModel model = make_shift_model(cfg.model, cap);
    MlmcOptions opt = cfg.options;
    opt.T = cfg.model.T;
    opt.kind = cfg.model.kind;
    opt.seed = cfg.model.seed;
    opt.workers = cfg.model.workers;
    return mlmc_estimate(model, model.basis(), model.x0_coeffs(), rates, cfg.eps, opt, psi);
}

}  // namespace amlmc
