#pragma once

// RMSE over runs, power-law regression, N*(a) and speed-up, windowed stability.

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace qmcgsa {

/// sqrt((1/L)·Σ (V_ℓ − V)²).
[[nodiscard]] double rmse(double reference, std::span<const double> runs);

/// log ε = k − α·log N with natural logarithms.
struct PowerLawFit {
    double k = 0.0;
    double alpha = 0.0;
    double k_se = 0.0;
    double alpha_se = 0.0;
    std::size_t points = 0;
    std::size_t dropped = 0;  // non-positive ε values skipped

    /// Fitted ε at N.
    [[nodiscard]] double at(double n) const;
    /// log10 ε at N = 10^{log10_n}, the paper's intercept convention (10^2.5).
    [[nodiscard]] double log10_intercept(double log10_n = 2.5) const;
};

/// OLS on (ln N, ln ε). Needs at least 4 usable points (DomainError otherwise).
[[nodiscard]] PowerLawFit fit_power_law(std::span<const std::pair<double, double>> points);

enum class EstimatorKind { Price, FirstDifference, SecondDifference };

/// Paths needed for accuracy a: (3e^k/a)^{1/α} for prices,
/// (9e^{2k}/(a² − 9b²h⁴))^{1/(2α)} for greeks; empty when a ≤ 3|b|h².
[[nodiscard]] std::optional<double> n_star(const PowerLawFit& fit, double b, double h, double a, EstimatorKind kind);

/// S^{(i,j)} = N*_j / N*_i; empty if either is undefined.
[[nodiscard]] std::optional<double> speed_up(std::optional<double> n_star_i, std::optional<double> n_star_j);

struct StabilityReport {
    std::vector<double> means;                   // m_i per window
    std::vector<double> vols;                    // s_i per window (sample standard deviation)
    std::vector<std::optional<double>> logret;   // log(m_i/m_{i−1}), i = 2..W; empty if a mean is ≤ 0
};

/// Splits the estimates into `windows` equal consecutive windows.
[[nodiscard]] StabilityReport stability(std::span<const double> estimates, std::size_t windows = 10);

}  // namespace qmcgsa
