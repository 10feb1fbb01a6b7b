#pragma once

// Level balancing, per-level coupled sampling, sample allocation and the
// antithetic multilevel estimator.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "amlmc/model.hpp"
#include "amlmc/noise.hpp"
#include "amlmc/scheme.hpp"
#include "amlmc/spectral.hpp"
#include "amlmc/stats.hpp"

namespace amlmc {

struct RateParams {
    double alpha = 0.0;
    double alpha_tilde = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    double delta = 0.05;
};

inline RateParams make_rates(int d, double s, double delta = 0.05) {
    if (d < 1 || d > 3) throw std::invalid_argument("make_rates: dimension must be 1, 2 or 3");
    if (!(s > 0.5 * d)) throw std::invalid_argument("make_rates: s must exceed d/2");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("make_rates: delta outside (0,1)");
    RateParams r;
    const double dd = static_cast<double>(d);
    r.alpha = std::min(1.0 + s, 2.0);
    r.alpha_tilde = r.alpha / dd;
    r.beta = (2.0 * s / dd - 1.0) / 2.0;
    r.gamma = dd * std::max(0.5, r.alpha / (2.0 * s - dd));
    r.delta = delta;
    return r;
}

struct LevelParams {
    int ell = 0;
    std::uint64_t M = 0;
    std::size_t N = 0;
    /// Balanced noise truncation; saturates at the uint64 maximum.
    std::uint64_t K = 0;
    std::size_t K_effective = 0;
    bool K_saturated = false;
};

namespace detail {

/// ceil(base^exponent) with a relative guard so exact powers such as
/// 16^0.5 are not pushed up by round-off. Saturates at the uint64 maximum.
inline std::uint64_t ceil_power(double base, double exponent, bool& saturated) {
    const double v = std::pow(base, exponent);
    constexpr double cap = 18446744073709549568.0;  // largest double below 2^64
    if (!std::isfinite(v) || v >= cap) {
        saturated = true;
        return std::numeric_limits<std::uint64_t>::max();
    }
    const double r = std::round(v);
    const double c = std::abs(v - r) <= 1e-9 * std::max(1.0, r) ? r : std::ceil(v);
    return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(c));
}

}  // namespace detail

/// Balanced (N, K) for M time steps; `band(N)` is the model's active noise
/// width, used to clamp K.
template <class Band>
LevelParams balance_for_steps(std::uint64_t M, const RateParams& rates, Band&& band) {
    if (M < 1) throw std::invalid_argument("balance_params: M must be >= 1");
    LevelParams p;
    p.M = M;
    const double m = static_cast<double>(M);
    const double a = std::min(rates.alpha, 2.0);
    bool sat_n = false;
    const std::uint64_t n = detail::ceil_power(m, a / (2.0 * rates.alpha_tilde), sat_n);
    if (sat_n || n > (std::uint64_t{1} << 40)) {
        throw std::overflow_error("balance_params: Galerkin dimension overflows for M=" +
                                  std::to_string(M));
    }
    p.N = static_cast<std::size_t>(n);
    p.K = detail::ceil_power(m, a / (2.0 * rates.beta), p.K_saturated);
    const std::size_t width = band(p.N);
    p.K_effective = static_cast<std::size_t>(std::min<std::uint64_t>(p.K, width));
    return p;
}

template <class Band>
LevelParams balance_params(std::uint64_t M0, int ell, const RateParams& rates, Band&& band) {
    if (M0 < 2) throw std::invalid_argument("balance_params: M0 must be >= 2");
    if (ell < 0 || ell > 40) throw std::invalid_argument("balance_params: level out of range");
    LevelParams p = balance_for_steps(M0 << ell, rates, band);
    p.ell = ell;
    return p;
}

using Functional = std::function<double(std::span<const double>)>;

/// (Y, e_1)_H.
inline Functional first_mode() {
    return [](std::span<const double> y) { return y.empty() ? 0.0 : y[0]; };
}

/// Raised when samples produced non-finite states.
class SamplingFailure : public std::runtime_error {
public:
    SamplingFailure(const std::string& what, std::uint64_t failed)
        : std::runtime_error(what), failed_(failed) {}
    std::uint64_t failed() const noexcept { return failed_; }

private:
    std::uint64_t failed_;
};

/// Raised by the estimator when the bias rule would need more levels than allowed.
class LevelCapExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Level ell >= 1 of the telescoping sum: fine parameters at M0*2^ell, coarse
/// at M0*2^(ell-1). Level 1 has no coarse subtraction.
struct LevelDesign {
    int ell = 1;
    LevelParams fine;
    LevelParams coarse;
    CoupledConfig coupled;
};

template <class Band>
LevelDesign design_level(int ell, std::uint64_t M0, const RateParams& rates, Band&& band,
                         double T, RationalKind kind) {
    if (ell < 1) throw std::invalid_argument("design_level: levels start at 1");
    LevelDesign lv;
    lv.ell = ell;
    lv.fine = balance_params(M0, ell, rates, band);
    lv.coarse = balance_params(M0, ell - 1, rates, band);
    lv.coupled.T = T;
    lv.coupled.M_coarse = static_cast<std::size_t>(lv.coarse.M);
    lv.coupled.N_coarse = lv.coarse.N;
    lv.coupled.K_coarse = lv.coarse.K_effective;
    lv.coupled.N_fine = lv.fine.N;
    lv.coupled.K_fine = lv.fine.K_effective;
    lv.coupled.kind = kind;
    lv.coupled.with_coarse = ell >= 2;
    return lv;
}

struct LevelAccumulator {
    RunningStats diff;
    RunningStats avg;
    RunningStats plain;
    std::uint64_t failures = 0;

    void merge(const LevelAccumulator& o) {
        diff.merge(o.diff);
        avg.merge(o.avg);
        plain.merge(o.plain);
        failures += o.failures;
    }
};

struct LevelStats {
    int ell = 0;
    LevelParams fine;
    std::uint64_t n_samples = 0;
    double mean_diff = 0.0;
    double var_diff = 0.0;
    /// Mean of the antithetic average functional.
    double mean_fine = 0.0;
    /// Variance of the functional of the fine path alone (a plain-scheme sample).
    double var_plain = 0.0;
    double cost_per_sample = 0.0;
    double cost_total = 0.0;
    LevelAccumulator acc;

    double std_error() const noexcept {
        return n_samples > 0 ? std::sqrt(var_diff / static_cast<double>(n_samples)) : 0.0;
    }
};

/// Samples [begin, end) of a level; streams keyed by (seed, ell, index).
template <DiffusionModel Model>
LevelAccumulator sample_level(const Model& model, const ModeBasis& basis,
                              std::span<const double> x0, const LevelDesign& lv,
                              const Functional& psi, std::uint64_t seed, std::uint64_t begin,
                              std::uint64_t end, unsigned workers) {
    auto blocks = map_blocks<LevelAccumulator>(
        begin, end, workers, [&](std::uint64_t lo, std::uint64_t hi, LevelAccumulator& acc) {
            CoupledSimulator<Model> sim(lv.coupled, model, basis);
            CoupledResult res;
            for (std::uint64_t i = lo; i < hi; ++i) {
                Stream stream = derive_stream(
                    StreamKey{seed, static_cast<std::uint32_t>(lv.ell), i, StreamRole::Coupled});
                try {
                    sim.run(x0, stream, res);
                } catch (const NonFiniteState&) {
                    ++acc.failures;
                    continue;
                }
                const double fine = psi(res.y_avg.view());
                const double coarse = lv.coupled.with_coarse ? psi(res.y_coarse.view()) : 0.0;
                acc.diff.add(fine - coarse);
                acc.avg.add(fine);
                acc.plain.add(psi(res.y_fine.view()));
            }
        });
    LevelAccumulator total;
    for (const auto& b : blocks) total.merge(b);
    return total;
}

template <DiffusionModel Model>
double level_cost_per_sample(const Model& model, const ModeBasis& basis, const LevelDesign& lv) {
    return CoupledSimulator<Model>(lv.coupled, model, basis).sample_cost();
}

inline LevelStats finalize_level(const LevelDesign& lv, const LevelAccumulator& acc,
                                 double cost_per_sample) {
    if (acc.failures > 0) {
        throw SamplingFailure("level " + std::to_string(lv.ell) + ": " +
                                  std::to_string(acc.failures) + " of " +
                                  std::to_string(acc.failures + acc.diff.n) +
                                  " samples produced non-finite states",
                              acc.failures);
    }
    LevelStats st;
    st.ell = lv.ell;
    st.fine = lv.fine;
    st.n_samples = acc.diff.n;
    st.mean_diff = acc.diff.mean;
    st.var_diff = acc.diff.variance();
    st.mean_fine = acc.avg.mean;
    st.var_plain = acc.plain.variance();
    st.cost_per_sample = cost_per_sample;
    st.cost_total = cost_per_sample * static_cast<double>(st.n_samples);
    st.acc = acc;
    return st;
}

/// n independent coupled samples of a level, indices [0, n).
template <DiffusionModel Model>
LevelStats estimate_level(const Model& model, const ModeBasis& basis, std::span<const double> x0,
                          const LevelDesign& lv, std::uint64_t n, const Functional& psi,
                          std::uint64_t seed, unsigned workers) {
    if (n < 2) throw std::invalid_argument("estimate_level: need at least 2 samples");
    const auto acc = sample_level(model, basis, x0, lv, psi, seed, 0, n, workers);
    return finalize_level(lv, acc, level_cost_per_sample(model, basis, lv));
}

/// N_l = ceil((2/eps^2) sqrt(V_l/C_l) sum_j sqrt(V_j C_j)); zero-variance levels get `floor`.
inline std::vector<std::uint64_t> allocate_samples(std::span<const double> variances,
                                                   std::span<const double> costs, double eps,
                                                   std::uint64_t floor = 10) {
    if (!(eps > 0.0)) throw std::invalid_argument("allocate_samples: eps must be positive");
    if (variances.size() != costs.size() || variances.empty()) {
        throw std::invalid_argument("allocate_samples: need matching non-empty V and C");
    }
    double total = 0.0;
    for (std::size_t l = 0; l < variances.size(); ++l) {
        if (!(variances[l] >= 0.0) || !(costs[l] > 0.0)) {
            throw std::invalid_argument("allocate_samples: need V >= 0 and C > 0");
        }
        total += std::sqrt(variances[l] * costs[l]);
    }
    std::vector<std::uint64_t> n(variances.size());
    for (std::size_t l = 0; l < variances.size(); ++l) {
        if (variances[l] == 0.0) {
            n[l] = floor;
            continue;
        }
        const double v = std::ceil(2.0 / (eps * eps) * std::sqrt(variances[l] / costs[l]) * total);
        n[l] = v >= 1.8e19 ? std::numeric_limits<std::uint64_t>::max()
                           : std::max<std::uint64_t>(1, static_cast<std::uint64_t>(v));
    }
    return n;
}

inline std::vector<std::uint64_t> allocate_samples(std::span<const LevelStats> stats, double eps,
                                                   std::uint64_t floor = 10) {
    std::vector<double> v;
    std::vector<double> c;
    for (const auto& s : stats) {
        v.push_back(s.var_diff);
        c.push_back(s.cost_per_sample);
    }
    return allocate_samples(v, c, eps, floor);
}

struct MlmcOptions {
    std::uint64_t M0 = 2;
    double T = 1.0;
    RationalKind kind = RationalKind::CrankNicolson;
    std::uint64_t seed = 0;
    unsigned workers = 1;
    std::uint64_t pilot = 100;
    std::uint64_t floor = 10;
    int min_levels = 2;
    int max_levels = 10;
    std::uint64_t max_samples = 100'000'000;
};

struct EstimatorReport {
    double estimate = 0.0;
    std::vector<LevelStats> levels;
    double total_cost = 0.0;
    double epsilon = 0.0;
    double achieved_variance = 0.0;
    /// Plain scheme at the finest level with the same sampling variance.
    std::uint64_t single_level_samples = 0;
    double single_level_cost = 0.0;

    /// Hexfloat text form; equal reports give equal bytes.
    std::string serialize() const {
        std::string out;
        char buf[512];
        std::snprintf(buf, sizeof buf,
                      "estimate %a\nepsilon %a\ntotal_cost %a\nachieved_variance %a\n"
                      "single_level_samples %llu\nsingle_level_cost %a\nlevels %zu\n",
                      estimate, epsilon, total_cost, achieved_variance,
                      static_cast<unsigned long long>(single_level_samples), single_level_cost,
                      levels.size());
        out += buf;
        for (const auto& l : levels) {
            std::snprintf(buf, sizeof buf,
                          "level %d M %llu N %zu K %zu n %llu mean_diff %a var_diff %a "
                          "mean_fine %a var_plain %a cost %a\n",
                          l.ell, static_cast<unsigned long long>(l.fine.M), l.fine.N,
                          l.fine.K_effective, static_cast<unsigned long long>(l.n_samples),
                          l.mean_diff, l.var_diff, l.mean_fine, l.var_plain, l.cost_total);
            out += buf;
        }
        return out;
    }
};

/// Pilot, allocate, extend, then add levels until the extrapolated bias of
/// the finest level is below eps/sqrt(2).
template <DiffusionModel Model>
EstimatorReport mlmc_estimate(const Model& model, const ModeBasis& basis,
                              std::span<const double> x0, const RateParams& rates, double eps,
                              const MlmcOptions& opt, const Functional& psi) {
    if (!(eps > 0.0 && eps < std::exp(-1.0))) {
        throw std::invalid_argument("mlmc_estimate: eps must lie in (0, 1/e)");
    }
    if (opt.pilot < 2) throw std::invalid_argument("mlmc_estimate: pilot must be >= 2");
    if (opt.min_levels < 1 || opt.max_levels < opt.min_levels) {
        throw std::invalid_argument("mlmc_estimate: bad level bounds");
    }
    auto band = [&](std::size_t n) { return model.noise_band(n); };

    std::vector<LevelDesign> designs;
    std::vector<LevelStats> stats;
    auto add_level = [&](int ell) {
        designs.push_back(design_level(ell, opt.M0, rates, band, opt.T, opt.kind));
        const auto acc = sample_level(model, basis, x0, designs.back(), psi, opt.seed, 0,
                                      opt.pilot, opt.workers);
        stats.push_back(finalize_level(designs.back(), acc,
                                       level_cost_per_sample(model, basis, designs.back())));
    };
    for (int ell = 1; ell <= opt.min_levels; ++ell) add_level(ell);

    const double bias_factor = std::pow(2.0, 1.0 - rates.delta) - 1.0;
    for (;;) {
        const auto target = allocate_samples(std::span<const LevelStats>(stats), eps, opt.floor);
        for (std::size_t l = 0; l < stats.size(); ++l) {
            if (target[l] <= stats[l].n_samples) continue;
            if (target[l] > opt.max_samples) {
                throw LevelCapExceeded("mlmc_estimate: level " + std::to_string(l + 1) + " needs " +
                                       std::to_string(target[l]) + " samples, cap is " +
                                       std::to_string(opt.max_samples));
            }
            auto acc = stats[l].acc;
            acc.merge(sample_level(model, basis, x0, designs[l], psi, opt.seed,
                                   stats[l].n_samples, target[l], opt.workers));
            stats[l] = finalize_level(designs[l], acc, stats[l].cost_per_sample);
        }
        const double bias = std::abs(stats.back().mean_diff) / bias_factor;
        if (bias <= eps / std::sqrt(2.0)) break;
        if (static_cast<int>(stats.size()) >= opt.max_levels) {
            throw LevelCapExceeded("mlmc_estimate: eps=" + std::to_string(eps) + " needs more than " +
                                   std::to_string(opt.max_levels) + " levels (cap reached)");
        }
        add_level(static_cast<int>(stats.size()) + 1);
    }

    EstimatorReport rep;
    rep.epsilon = eps;
    for (const auto& s : stats) {
        rep.estimate += s.mean_diff;
        rep.total_cost += s.cost_total;
        rep.achieved_variance += s.var_diff / static_cast<double>(s.n_samples);
    }
    const auto& top = stats.back();
    const double plain_cost =
        static_cast<double>(top.fine.M) * model.cost_per_step(top.fine.N, top.fine.K_effective);
    if (rep.achieved_variance > 0.0) {
        rep.single_level_samples = static_cast<std::uint64_t>(
            std::max(1.0, std::ceil(top.var_plain / rep.achieved_variance)));
    } else {
        rep.single_level_samples = 1;
    }
    rep.single_level_cost = plain_cost * static_cast<double>(rep.single_level_samples);
    rep.levels = std::move(stats);
    return rep;
}

}  // namespace amlmc
