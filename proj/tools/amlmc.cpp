// Command-line driver for the convergence experiments and the MLMC estimator.
//
//   amlmc variance-decay --d 1 --s 0.75 --M 2,4,...,512 --samples 4000 --out v.csv
//   amlmc spatial-error  --d 1 --s 1 --N 2,4,8,16,32 --M-fixed 512
//   amlmc euler-gap      --d 1 --s 1 --M 4,8,...,256
//   amlmc mlmc-run       --d 1 --s 1.5 --eps 0.01 --report r.txt
//
// `--config FILE` reads `key = value` lines using the long flag names; flags
// given on the command line win. Exit status: 0 success, 1 invalid input,
// 2 runtime failure.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "amlmc/experiments.hpp"
#include "amlmc/fit.hpp"

namespace {

enum Exit { kOk = 0, kInvalid = 1, kRuntime = 2 };

struct Options {
    int d = 1;
    double s = 1.0;
    double eps_model = 0.01;
    double T = 1.0;
    double length = 1.0;
    std::string kind = "crank-nicolson";
    std::uint64_t seed = 0;
    std::uint64_t samples = 4000;
    unsigned workers = 0;
    std::string out;
    bool zero_noise = false;

    std::string M_list;
    std::string N_list = "2,4,8,16,32";
    std::uint64_t M_fixed = 512;
    std::size_t K_fixed = 0;
    std::size_t N_fixed = 0;
    std::string coupling = "both";

    std::uint64_t M0 = 2;
    int levels = 10;
    double eps = 0.01;
    std::uint64_t pilot = 100;
    std::string report;
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

/// "2,4,...,64" expands geometrically when the second term is an integer
/// multiple of the first, arithmetically otherwise.
std::vector<std::uint64_t> parse_list(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string tok; std::getline(ss, tok, ',');) parts.push_back(trim(tok));
    auto num = [](const std::string& t) {
        if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos) {
            throw std::invalid_argument("list entry '" + t + "' is not a positive integer");
        }
        const auto v = std::stoull(t);
        if (v == 0) throw std::invalid_argument("list entries must be positive");
        return static_cast<std::uint64_t>(v);
    };
    std::vector<std::uint64_t> out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (parts[i] != "...") {
            out.push_back(num(parts[i]));
            continue;
        }
        if (out.size() < 2 || i + 1 >= parts.size()) {
            throw std::invalid_argument("'...' needs two leading terms and a final term");
        }
        const std::uint64_t a = out[out.size() - 2];
        const std::uint64_t b = out.back();
        const std::uint64_t last = num(parts[++i]);
        if (b <= a) throw std::invalid_argument("'...' needs an increasing progression");
        const bool geometric = b % a == 0 && b / a >= 2;
        std::uint64_t v = b;
        while (true) {
            const std::uint64_t next = geometric ? v * (b / a) : v + (b - a);
            if (next > last) break;
            out.push_back(next);
            v = next;
        }
        if (out.back() != last) {
            throw std::invalid_argument("'...' progression does not reach " + std::to_string(last));
        }
    }
    if (out.empty()) throw std::invalid_argument("empty list");
    return out;
}

/// Reads `key = value` lines into flag tokens.
std::vector<std::string> read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read config file " + path);
    std::vector<std::string> tokens;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": empty key");
        if (key == "zero-noise") {
            if (value == "true" || value == "1") tokens.push_back("--zero-noise");
            continue;
        }
        tokens.push_back("--" + key);
        tokens.push_back(value);
    }
    return tokens;
}

/// Moves `--config FILE` out of argv and splices the file's tokens in front
/// of the remaining flags, so command-line values are parsed last.
std::vector<std::string> expand_config(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::vector<std::string> rest;
    std::vector<std::string> from_file;
    for (std::size_t i = 0; i < args.size(); ++i) {
        std::string path;
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw std::invalid_argument("--config needs a file");
            path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        } else {
            rest.push_back(args[i]);
            continue;
        }
        auto t = read_config(path);
        from_file.insert(from_file.end(), t.begin(), t.end());
    }
    std::vector<std::string> out;
    std::size_t cmd = 0;
    while (cmd < rest.size() && rest[cmd].rfind("-", 0) == 0) ++cmd;
    for (std::size_t i = 0; i < rest.size(); ++i) {
        out.push_back(rest[i]);
        if (i == cmd) out.insert(out.end(), from_file.begin(), from_file.end());
    }
    if (cmd >= rest.size()) out.insert(out.end(), from_file.begin(), from_file.end());
    return out;
}

void add_common(CLI::App* sub, Options& o) {
    sub->add_option("--d", o.d, "spatial dimension (1, 2 or 3)")->capture_default_str();
    sub->add_option("--s", o.s, "noise smoothness, s > d/2")->capture_default_str();
    sub->add_option("--eps-model", o.eps_model, "decay offset of the data coefficients")
        ->capture_default_str();
    sub->add_option("--T", o.T, "final time")->capture_default_str();
    sub->add_option("--length", o.length, "side length of the cube domain")->capture_default_str();
    sub->add_option("--kind", o.kind, "crank-nicolson | backward-euler | exponential")
        ->capture_default_str();
    sub->add_option("--seed", o.seed, "master seed")->capture_default_str();
    sub->add_option("--samples", o.samples, "Monte Carlo samples per row")->capture_default_str();
    sub->add_option("--workers", o.workers, "worker threads (0 = available cores)")
        ->capture_default_str();
    sub->add_option("--out", o.out, "CSV output path (default: stdout)");
    sub->add_flag("--zero-noise", o.zero_noise, "switch the noise off");
}

amlmc::SweepConfig sweep_config(const Options& o) {
    if (!(o.T > 0.0)) throw std::invalid_argument("--T must be positive");
    if (o.samples < 2) throw std::invalid_argument("--samples must be at least 2");
    amlmc::SweepConfig c;
    c.d = o.d;
    c.s = o.s;
    c.eps_model = o.eps_model;
    c.T = o.T;
    c.length = o.length;
    c.kind = amlmc::parse_rational_kind(o.kind);
    c.seed = o.seed;
    c.samples = o.samples;
    c.workers = o.workers == 0 ? amlmc::default_workers() : o.workers;
    c.zero_noise = o.zero_noise;
    // Fails early on d or s outside the admissible range.
    (void)amlmc::make_rates(c.d, c.s);
    return c;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// The CSV sink is opened before any sampling so an unwritable path fails fast.
class Output {
public:
    explicit Output(const std::string& path) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
            if (!*file_) throw std::invalid_argument("cannot write output file " + path);
        }
    }
    std::ostream& csv() { return file_ ? static_cast<std::ostream&>(*file_) : std::cout; }
    std::ostream& log() { return file_ ? std::cout : std::cerr; }
    void finish() {
        csv().flush();
        if (!csv()) throw std::runtime_error("write to output failed");
    }

private:
    std::unique_ptr<std::ofstream> file_;
};

void print_fit(std::ostream& log, const char* label, const std::vector<std::pair<double, double>>& pts,
               double reference) {
    std::vector<std::pair<double, double>> ok;
    for (const auto& p : pts) {
        if (p.second > 0.0) ok.push_back(p);
    }
    if (ok.size() < 3) {
        log << label << ": fewer than 3 positive points, no slope fit\n";
        return;
    }
    const auto f = amlmc::fit_slope(ok);
    char buf[200];
    std::snprintf(buf, sizeof buf, "%s: slope %.4f +- %.4f (reference %.4f)\n", label, f.slope,
                  f.stderr_slope, reference);
    log << buf;
}

int run_variance(const Options& o) {
    const auto cfg = sweep_config(o);
    if (o.coupling != "both" && o.coupling != "antithetic" && o.coupling != "standard") {
        throw std::invalid_argument("--coupling must be antithetic, standard or both");
    }
    const auto Ms = parse_list(o.M_list.empty() ? "2,4,...,512" : o.M_list);
    Output out(o.out);
    const auto rows = amlmc::variance_decay_sweep(cfg, Ms);
    auto& csv = out.csv();
    csv << "d,s,M,N,K,K_effective,var_antithetic,se_antithetic,var_standard,se_standard,n_samples\n";
    for (const auto& r : rows) {
        csv << r.d << ',' << fmt(r.s) << ',' << r.M << ',' << r.coarse.N << ',' << r.coarse.K << ','
            << r.coarse.K_effective << ',' << fmt(r.antithetic.max_mean) << ','
            << fmt(r.antithetic.se) << ',' << fmt(r.standard.max_mean) << ','
            << fmt(r.standard.se) << ',' << r.n_samples << '\n';
    }
    out.finish();
    auto& log = out.log();
    log << "variance-decay d=" << cfg.d << " s=" << fmt(cfg.s) << " samples=" << cfg.samples
        << " (M = coarse steps; E[max_m] shown for reference)\n";
    std::vector<std::pair<double, double>> anti;
    std::vector<std::pair<double, double>> stdc;
    for (const auto& r : rows) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "  M=%-6llu anti %.4e (E[max] %.4e)  std %.4e (E[max] %.4e)%s\n",
                      static_cast<unsigned long long>(r.M), r.antithetic.max_mean,
                      r.antithetic.mean_of_max, r.standard.max_mean, r.standard.mean_of_max,
                      r.coarse.K_saturated ? "  [K saturated]" : "");
        log << buf;
        anti.emplace_back(static_cast<double>(r.M), r.antithetic.max_mean);
        stdc.emplace_back(static_cast<double>(r.M), r.standard.max_mean);
    }
    const double ref = -std::min(1.0 + cfg.s, 2.0);
    if (o.coupling != "standard") print_fit(log, "antithetic", anti, ref);
    if (o.coupling != "antithetic") print_fit(log, "standard", stdc, -1.0);
    return kOk;
}

int run_spatial(const Options& o) {
    const auto cfg = sweep_config(o);
    const auto raw = parse_list(o.N_list);
    const std::vector<std::size_t> Ns(raw.begin(), raw.end());
    if (o.M_fixed < 1) throw std::invalid_argument("--M-fixed must be positive");
    Output out(o.out);
    const auto rows = amlmc::spatial_error_sweep(cfg, Ns, o.M_fixed, o.K_fixed);
    auto& csv = out.csv();
    csv << "d,s,N,N_fine,M,K,l2_diff,se,n_samples\n";
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : rows) {
        csv << r.d << ',' << fmt(r.s) << ',' << r.N << ',' << r.N_fine << ',' << r.M << ',' << r.K
            << ',' << fmt(r.l2_diff) << ',' << fmt(r.se) << ',' << r.n_samples << '\n';
        pts.emplace_back(static_cast<double>(r.N), r.l2_diff);
    }
    out.finish();
    auto& log = out.log();
    log << "spatial-error d=" << cfg.d << " s=" << fmt(cfg.s) << " M=" << o.M_fixed
        << " samples=" << cfg.samples << '\n';
    print_fit(log, "l2_diff vs N", pts, -std::min(1.0 + cfg.s, 2.0) / cfg.d);
    return kOk;
}

int run_euler(const Options& o) {
    const auto cfg = sweep_config(o);
    const auto Ms = parse_list(o.M_list.empty() ? "4,8,...,256" : o.M_list);
    Output out(o.out);
    const auto rows = amlmc::euler_gap_sweep(cfg, Ms, o.N_fixed);
    auto& csv = out.csv();
    csv << "d,s,M,l2_gap,se,n_samples\n";
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : rows) {
        csv << r.d << ',' << fmt(r.s) << ',' << r.M << ',' << fmt(r.l2_gap) << ',' << fmt(r.se)
            << ',' << r.n_samples << '\n';
        pts.emplace_back(static_cast<double>(r.M), r.l2_gap * r.l2_gap);
    }
    out.finish();
    auto& log = out.log();
    log << "euler-gap d=" << cfg.d << " s=" << fmt(cfg.s) << " samples=" << cfg.samples << '\n';
    print_fit(log, "squared gap vs M", pts, -1.0);
    return kOk;
}

int run_mlmc(const Options& o) {
    amlmc::MlmcRunConfig cfg;
    cfg.model = sweep_config(o);
    cfg.eps = o.eps;
    cfg.options.M0 = o.M0;
    cfg.options.max_levels = o.levels;
    cfg.options.pilot = o.pilot;
    if (o.levels < 2) throw std::invalid_argument("--levels must be at least 2");
    Output out(o.out);
    std::unique_ptr<std::ofstream> report;
    if (!o.report.empty()) {
        report = std::make_unique<std::ofstream>(o.report, std::ios::binary | std::ios::trunc);
        if (!*report) throw std::invalid_argument("cannot write report file " + o.report);
    }
    const auto rep = amlmc::run_mlmc(cfg);
    auto& csv = out.csv();
    csv << "level,M,N,K,n_samples,mean_diff,var_diff,cost\n";
    for (const auto& l : rep.levels) {
        csv << l.ell << ',' << l.fine.M << ',' << l.fine.N << ',' << l.fine.K_effective << ','
            << l.n_samples << ',' << fmt(l.mean_diff) << ',' << fmt(l.var_diff) << ','
            << fmt(l.cost_total) << '\n';
    }
    out.finish();
    if (report) {
        *report << rep.serialize();
        report->flush();
        if (!*report) throw std::runtime_error("write to report failed");
    }
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "mlmc-run eps=%g: estimate %.8g, levels %zu, cost %.4e, sampling variance %.3e\n"
                  "single-level plain scheme at the same variance: %llu samples, cost %.4e\n",
                  rep.epsilon, rep.estimate, rep.levels.size(), rep.total_cost,
                  rep.achieved_variance, static_cast<unsigned long long>(rep.single_level_samples),
                  rep.single_level_cost);
    out.log() << buf;
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    Options o;
    CLI::App app{"Antithetic multilevel Monte Carlo for the spectral Galerkin heat equation"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    auto* var = app.add_subcommand("variance-decay", "coupled variance against time steps");
    add_common(var, o);
    var->add_option("--M", o.M_list, "coarse step counts, e.g. 2,4,...,512");
    var->add_option("--coupling", o.coupling, "antithetic | standard | both (slope fits shown)")
        ->capture_default_str();

    auto* sp = app.add_subcommand("spatial-error", "L2 distance between N and ceil(sqrt2 N) modes");
    add_common(sp, o);
    sp->add_option("--N", o.N_list, "mode counts")->capture_default_str();
    sp->add_option("--M-fixed", o.M_fixed, "time steps")->capture_default_str();
    sp->add_option("--K-fixed", o.K_fixed, "noise modes (0 = model band)")->capture_default_str();

    auto* eu = app.add_subcommand("euler-gap", "L2 distance between Milstein and Euler paths");
    add_common(eu, o);
    eu->add_option("--M", o.M_list, "step counts, e.g. 4,8,...,256");
    eu->add_option("--N-fixed", o.N_fixed, "modes for every row (0 = balanced against M)")
        ->capture_default_str();

    auto* ml = app.add_subcommand("mlmc-run", "antithetic MLMC estimate of (X(T), e_1)");
    add_common(ml, o);
    ml->add_option("--M0", o.M0, "base step count")->capture_default_str();
    ml->add_option("--levels", o.levels, "maximum number of levels")->capture_default_str();
    ml->add_option("--eps", o.eps, "target root mean square error")->capture_default_str();
    ml->add_option("--pilot", o.pilot, "pilot samples per level")->capture_default_str();
    ml->add_option("--report", o.report, "write the full report in hexfloat form");

    try {
        auto args = expand_config(argc, argv);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInvalid;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInvalid;
    }

    try {
        if (*var) return run_variance(o);
        if (*sp) return run_spatial(o);
        if (*eu) return run_euler(o);
        if (*ml) return run_mlmc(o);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInvalid;
    } catch (const std::overflow_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInvalid;
    } catch (const amlmc::SamplingFailure& e) {
        std::cerr << "sampling failure: " << e.what() << '\n';
        return kRuntime;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << '\n';
        return kRuntime;
    }
    return kRuntime;
}
