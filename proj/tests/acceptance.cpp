// Acceptance harness: one PASS/FAIL line per criterion, measured values
// alongside the targets. `--criterion N` runs a single check; no argument
// runs all of them. Exit status is nonzero when any selected check fails.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "amlmc/amlmc.hpp"
#include "oracle.hpp"

using namespace amlmc;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void check(bool ok, const std::string& what) {
        pass = pass && ok;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [miss]");
    }
};

std::string fmtd(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// Tolerance: the stated fraction of the target or 3 standard errors, whichever is larger.
void point(const char* label, double got, double se, double want, double rel, Outcome& o) {
    const double tol = std::max(rel * std::abs(want), 3.0 * se);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s %.4e (se %.1e) vs %.4e (%+.0f%%)", label, got, se, want,
                  100.0 * (got - want) / want);
    o.check(std::abs(got - want) <= tol, buf);
}

void series_point(const char* label, const PathSummary& p, double want, double rel, Outcome& o) {
    point(label, p.max_mean, p.se, want, rel, o);
}

void slope_check(const char* label, const std::vector<std::pair<double, double>>& pts, double lo,
                 double hi, Outcome& o) {
    const auto f = fit_slope(pts);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s slope %.3f +- %.3f in [%.2f, %.2f]", label, f.slope,
                  f.stderr_slope, lo, hi);
    o.check(f.slope >= lo && f.slope <= hi, buf);
}

const std::vector<VarianceRow>& figure2_d1() {
    static const std::vector<VarianceRow> rows = [] {
        SweepConfig cfg;
        cfg.d = 1;
        cfg.s = 0.75;
        cfg.samples = 4000;
        cfg.workers = default_workers();
        return variance_decay_sweep(cfg, {2, 4, 8, 16, 32, 64, 128, 256, 512});
    }();
    return rows;
}

const VarianceRow& row_at(const std::vector<VarianceRow>& rows, std::uint64_t M) {
    for (const auto& r : rows) {
        if (r.M == M) return r;
    }
    throw std::logic_error("missing row");
}

Outcome criterion1() {
    Outcome o;
    const auto& rows = figure2_d1();
    series_point("var_anti(2)", row_at(rows, 2).antithetic, 2.976e-2, 0.20, o);
    series_point("var_anti(32)", row_at(rows, 32).antithetic, 2.425e-4, 0.20, o);
    series_point("var_anti(128)", row_at(rows, 128).antithetic, 2.111e-5, 0.20, o);
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : rows) {
        if (r.M >= 8) pts.emplace_back(static_cast<double>(r.M), r.antithetic.max_mean);
    }
    slope_check("M=8..512", pts, -2.0, -1.5, o);
    return o;
}

Outcome criterion2() {
    Outcome o;
    const auto& rows = figure2_d1();
    series_point("var_std(2)", row_at(rows, 2).standard, 4.110e-2, 0.20, o);
    series_point("var_std(128)", row_at(rows, 128).standard, 1.366e-4, 0.20, o);
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : rows) {
        if (r.M >= 8) pts.emplace_back(static_cast<double>(r.M), r.standard.max_mean);
    }
    slope_check("M=8..512", pts, -1.2, -0.8, o);
    return o;
}

Outcome criterion3() {
    Outcome o;
    SweepConfig cfg;
    cfg.d = 2;
    cfg.s = 1.5;
    cfg.samples = 2000;
    cfg.workers = default_workers();
    const auto rows = variance_decay_sweep(cfg, {2, 4, 8, 16, 32, 64, 128});
    series_point("var_anti(2)", rows.front().antithetic, 1.376e-2, 0.25, o);
    series_point("var_std(2)", rows.front().standard, 2.688e-2, 0.25, o);
    return o;
}

Outcome criterion4() {
    Outcome o;
    for (double s : {0.6, 0.75, 1.0, 1.5}) {
        SweepConfig cfg;
        cfg.d = 1;
        cfg.s = s;
        cfg.samples = 4000;
        cfg.workers = default_workers();
        const auto rows = spatial_error_sweep(cfg, {2, 4, 8, 16, 32}, 512, 0);
        std::vector<std::pair<double, double>> pts;
        for (const auto& r : rows) pts.emplace_back(static_cast<double>(r.N), r.l2_diff);
        if (s == 1.0) point("l2(N=16,s=1)", rows[3].l2_diff, rows[3].se, 1.330e-4, 0.25, o);
        if (s == 0.75) point("l2(N=16,s=0.75)", rows[3].l2_diff, rows[3].se, 3.572e-4, 0.25, o);
        const double ref = -std::min(1.0 + s, 2.0);
        const std::string label = "s=" + fmtd("%g", s);
        slope_check(label.c_str(), pts, ref - 0.2, ref + 0.2, o);
    }
    return o;
}

Outcome criterion5() {
    Outcome o;
    SweepConfig cfg;
    cfg.d = 1;
    cfg.s = 1.0;
    cfg.samples = 4000;
    cfg.workers = default_workers();
    const auto rows = euler_gap_sweep(cfg, {4, 8, 16, 32, 64, 128, 256});
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : rows) pts.emplace_back(static_cast<double>(r.M), r.l2_gap * r.l2_gap);
    slope_check("squared gap M=4..256", pts, -1.25, -0.75, o);
    return o;
}

Outcome criterion6() {
    Outcome o;
    const auto m = model_data(1, 0.75, 0.01, 8);
    const ShiftHeatModel zero(build_basis(1, 8, 0.75), ShiftModelOptions{0.01, false, 0.0});
    CoupledConfig c;
    c.M_coarse = 8;
    c.N_coarse = 4;
    c.K_coarse = 4;
    c.N_fine = 8;
    c.K_fine = 8;
    bool fine_plain = true, swapped = true, involution = true, coarse_sum = true, midpoint = true,
         zero_anti = true;
    for (std::uint64_t i = 0; i < 200; ++i) {
        const StreamKey key{11, 1, i, StreamRole::Coupled};
        Stream a = derive_stream(key);
        const auto res = simulate_coupled(c, m, m.basis(), m.x0_coeffs(), a);
        Stream b = derive_stream(key);
        fine_plain = fine_plain && res.y_fine == simulate_plain(PlainConfig{1.0, 16, c.kind},
                                                                PathConfig{8, 8, true}, m,
                                                                m.basis(), m.x0_coeffs(), b);
        for (std::size_t n = 0; n < 8; ++n) {
            midpoint = midpoint && res.y_avg[n] == 0.5 * (res.y_fine[n] + res.y_anti[n]);
        }
        Stream s = derive_stream(key);
        const auto blk = sample_block(s, 8, 0.125);
        const StepConfig step{c.kind, 0.125, 8, 8, true};
        const auto y0 = m.initial_state(8);
        swapped = swapped && antithetic_macro_step(y0, step, m, blk, m.basis()) ==
                                 fine_macro_step(y0, step, m, antithetic_view(blk), m.basis());
        involution = involution && antithetic_view(antithetic_view(blk)) == blk;
        const auto sum = blk.coarse(4);
        for (std::size_t k = 0; k < 4; ++k) {
            coarse_sum = coarse_sum && sum[k] == blk.first_half[k] + blk.second_half[k];
        }
        Stream z = derive_stream(key);
        const auto zres = simulate_coupled(c, zero, zero.basis(), zero.x0_coeffs(), z);
        zero_anti = zero_anti && zres.y_anti == zres.y_fine;
    }
    o.check(fine_plain, "fine == plain at 2M");
    o.check(swapped, "anti == fine on swapped halves");
    o.check(involution, "swap involution");
    o.check(coarse_sum, "coarse == sum of halves");
    o.check(midpoint, "avg == midpoint");
    o.check(zero_anti, "zero-noise anti == fine");

    CoupledConfig e = c;
    e.kind = RationalKind::Exponential;
    e.N_coarse = 8;
    e.K_coarse = 8;
    Stream z = derive_stream(StreamKey{11, 2, 0, StreamRole::Coupled});
    const auto zres = simulate_coupled(e, zero, zero.basis(), zero.x0_coeffs(), z);
    o.check(zres.max_sq_diff_fine == 0.0 && zres.max_sq_diff_avg == 0.0,
            "exponential zero-noise max|fine-coarse|^2 = " + fmtd("%.3e", zres.max_sq_diff_fine) +
                " (exact 0 required)");
    return o;
}

Outcome criterion7() {
    Outcome o;
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> z;
    std::uniform_int_distribution<std::size_t> dim(1, 8);
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t N = dim(rng);
        const std::size_t K = dim(rng);
        const int d = 1 + t % 3;
        const auto m = model_data(d, 0.5 * d + 0.25 + 0.25 * (t % 4), 0.01, std::max(N, K));
        std::vector<double> y(N), dw(std::max(N, K));
        for (auto& v : y) v = z(rng);
        for (auto& v : dw) v = 0.2 * z(rng);
        const double dt = 0.01 + 0.01 * (t % 5);
        const auto b = apply_diffusion(m, y, dw, K);
        const auto c = apply_correction(m, y, dw, dt, K);
        const auto rb = oracle::diffusion(y, m.g_coeffs(), m.sqrt_etas(), dw, K);
        const auto rc = oracle::correction(y, m.g_coeffs(), m.sqrt_etas(), dw, dt, K);
        for (std::size_t n = 0; n < N; ++n) {
            worst = std::max({worst, std::abs(b[n] - rb[n]), std::abs(c[n] - rc[n])});
        }
    }
    o.check(worst <= 1e-12, "max abs deviation " + fmtd("%.3e", worst) + " <= 1e-12");
    return o;
}

Outcome criterion8() {
    Outcome o;
    MlmcRunConfig cfg;
    cfg.model.d = 1;
    cfg.model.s = 1.5;
    cfg.model.seed = 77;
    cfg.eps = 0.01;
    std::string ref;
    for (unsigned w : {1u, 4u, 8u}) {
        cfg.model.workers = w;
        const auto bytes = run_mlmc(cfg).serialize();
        if (ref.empty()) {
            ref = bytes;
            continue;
        }
        o.check(bytes == ref, "workers " + std::to_string(w) + " vs 1: " +
                                  (bytes == ref ? "identical" : "different"));
    }
    o.detail += "; report " + std::to_string(ref.size()) + " bytes";
    return o;
}

Outcome criterion9() {
    Outcome o;
    MlmcRunConfig cfg;
    cfg.model.d = 1;
    cfg.model.s = 1.5;
    cfg.model.seed = 5;
    cfg.model.workers = default_workers();
    for (double eps : {2e-2, 1e-2, 5e-3}) {
        cfg.eps = eps;
        const auto rep = run_mlmc(cfg);
        char buf[200];
        std::snprintf(buf, sizeof buf, "eps=%g: cost %.3e vs single-level %.3e", eps,
                      rep.total_cost, rep.single_level_cost);
        o.check(rep.total_cost < rep.single_level_cost, buf);
        bool monotone = true;
        std::string ns;
        for (std::size_t l = 0; l < rep.levels.size(); ++l) {
            ns += (l ? "," : "") + std::to_string(rep.levels[l].n_samples);
            if (l > 0 && rep.levels[l].n_samples > rep.levels[l - 1].n_samples) monotone = false;
        }
        o.check(monotone, "n_l = " + ns + " non-increasing");
    }
    return o;
}

const std::map<int, std::pair<const char*, std::function<Outcome()>>>& registry() {
    static const std::map<int, std::pair<const char*, std::function<Outcome()>>> r{
        {1, {"variance decay, antithetic, d=1 s=0.75", criterion1}},
        {2, {"variance decay, standard coupling, d=1 s=0.75", criterion2}},
        {3, {"variance decay at M=2, d=2 s=1.5", criterion3}},
        {4, {"spatial error at M=512", criterion4}},
        {5, {"Euler-Milstein gap, d=1 s=1", criterion5}},
        {6, {"exact structural identities", criterion6}},
        {7, {"fast path vs dense oracle", criterion7}},
        {8, {"report bytes across worker counts", criterion8}},
        {9, {"MLMC cost below single level, d=1 s=1.5", criterion9}},
    };
    return r;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
            selected.push_back(std::atoi(argv[++i]));
        } else {
            std::fprintf(stderr, "usage: %s [--criterion N]...\n", argv[0]);
            return 2;
        }
    }
    if (selected.empty()) {
        for (const auto& [k, v] : registry()) selected.push_back(k);
    }
    bool all = true;
    for (int k : selected) {
        const auto it = registry().find(k);
        if (it == registry().end()) {
            std::fprintf(stderr, "unknown criterion %d\n", k);
            return 2;
        }
        Outcome o;
        try {
            o = it->second.second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        std::printf("criterion %d %s (%s): %s\n", k, o.pass ? "PASS" : "FAIL", it->second.first,
                    o.detail.c_str());
        std::fflush(stdout);
        all = all && o.pass;
    }
    return all ? 0 : 1;
}
