#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>

namespace amlmc {

struct SlopeFit {
    double slope = 0.0;
    double stderr_slope = 0.0;
    double intercept = 0.0;
};

/// Ordinary least squares of log y on log x.
inline SlopeFit fit_slope(std::span<const std::pair<double, double>> rows) {
    if (rows.size() < 3) throw std::invalid_argument("fit_slope: need at least 3 points");
    const double n = static_cast<double>(rows.size());
    double sx = 0.0;
    double sy = 0.0;
    for (const auto& [x, y] : rows) {
        if (!(x > 0.0) || !(y > 0.0) || !std::isfinite(x) || !std::isfinite(y)) {
            throw std::invalid_argument("fit_slope: values must be positive and finite");
        }
        sx += std::log(x);
        sy += std::log(y);
    }
    const double mx = sx / n;
    const double my = sy / n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (const auto& [x, y] : rows) {
        const double dx = std::log(x) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(y) - my);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("fit_slope: x values must not all coincide");
    SlopeFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double rss = 0.0;
    for (const auto& [x, y] : rows) {
        const double r = std::log(y) - (fit.intercept + fit.slope * std::log(x));
        rss += r * r;
    }
    fit.stderr_slope = std::sqrt(rss / (n - 2.0) / sxx);
    return fit;
}

}  // namespace amlmc
