#include "qmcgsa/analysis.hpp"

#include <cmath>

#include <fmt/format.h>

#include "qmcgsa/error.hpp"

namespace qmcgsa {

double rmse(double reference, std::span<const double> runs) {
    if (runs.empty()) throw DomainError("rmse needs at least one run");
    double ss = 0.0;
    for (double v : runs) ss += (v - reference) * (v - reference);
    return std::sqrt(ss / static_cast<double>(runs.size()));
}

double PowerLawFit::at(double n) const { return std::exp(k - alpha * std::log(n)); }

double PowerLawFit::log10_intercept(double log10_n) const { return (k - alpha * log10_n * std::log(10.0)) / std::log(10.0); }

PowerLawFit fit_power_law(std::span<const std::pair<double, double>> points) {
    std::vector<double> xs, ys;
    PowerLawFit fit;
    for (auto [n, e] : points) {
        if (!(e > 0.0) || !(n > 0.0)) {
            ++fit.dropped;
            continue;
        }
        xs.push_back(std::log(n));
        ys.push_back(std::log(e));
    }
    const std::size_t m = xs.size();
    if (m < 4) throw DomainError(fmt::format("power-law fit needs >= 4 positive points, got {}", m));
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(m);
    my /= static_cast<double>(m);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (!(sxx > 0.0)) throw DomainError("power-law fit needs at least two distinct N");
    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double r = ys[i] - (intercept + slope * xs[i]);
        sse += r * r;
    }
    const double s2 = sse / static_cast<double>(m - 2);
    fit.alpha = -slope;
    fit.k = intercept;
    fit.alpha_se = std::sqrt(s2 / sxx);
    fit.k_se = std::sqrt(s2 * (1.0 / static_cast<double>(m) + mx * mx / sxx));
    fit.points = m;
    return fit;
}

std::optional<double> n_star(const PowerLawFit& fit, double b, double h, double a, EstimatorKind kind) {
    if (!(fit.alpha > 0.0)) throw DomainError("n_star needs alpha > 0");
    if (!(a > 0.0)) return std::nullopt;
    if (kind == EstimatorKind::Price || b == 0.0) return std::pow(3.0 * std::exp(fit.k) / a, 1.0 / fit.alpha);
    const double floor = 3.0 * std::abs(b) * h * h;
    if (a <= floor) return std::nullopt;
    const double bias2 = 9.0 * b * b * h * h * h * h;
    return std::pow(9.0 * std::exp(2.0 * fit.k) / (a * a - bias2), 1.0 / (2.0 * fit.alpha));
}

std::optional<double> speed_up(std::optional<double> n_star_i, std::optional<double> n_star_j) {
    if (!n_star_i || !n_star_j) return std::nullopt;
    return *n_star_j / *n_star_i;
}

StabilityReport stability(std::span<const double> estimates, std::size_t windows) {
    if (windows < 2) throw DomainError("stability needs at least two windows");
    if (estimates.size() < windows * 2 || estimates.size() % windows != 0) {
        throw DomainError(fmt::format("stability: {} estimates do not split into {} equal windows of >= 2",
                                      estimates.size(), windows));
    }
    const std::size_t len = estimates.size() / windows;
    StabilityReport r;
    for (std::size_t w = 0; w < windows; ++w) {
        auto win = estimates.subspan(w * len, len);
        double mean = 0.0, k = 0.0;
        for (double v : win) mean += (v - mean) / ++k;
        double ss = 0.0;
        for (double v : win) ss += (v - mean) * (v - mean);
        r.means.push_back(mean);
        r.vols.push_back(std::sqrt(ss / static_cast<double>(len - 1)));
    }
    for (std::size_t w = 1; w < windows; ++w) {
        if (r.means[w] > 0.0 && r.means[w - 1] > 0.0) {
            r.logret.emplace_back(std::log(r.means[w] / r.means[w - 1]));
        } else {
            r.logret.emplace_back(std::nullopt);
        }
    }
    return r;
}

}  // namespace qmcgsa
