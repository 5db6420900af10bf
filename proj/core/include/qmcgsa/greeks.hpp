#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include "qmcgsa/instruments.hpp"

namespace qmcgsa {

/// Default relative shift: 1e-3 for European, 5e-3 otherwise.
[[nodiscard]] double default_epsilon(InstrumentKind kind) noexcept;

/// Cliquet payoffs depend on returns only, so delta and gamma vanish identically.
[[nodiscard]] bool analytically_null(InstrumentKind kind, Quantity q) noexcept;

struct GreekEstimate {
    PriceEstimate estimate;
    Quantity quantity = Quantity::Price;
    double epsilon = 0.0;
    double shift = 0.0;
    bool analytically_null = false;
};

/// Central difference with path recycling: every bumped pricing sees the
/// same normals. Cliquet delta/gamma return exactly 0 without simulating.
[[nodiscard]] GreekEstimate fd_greek(const InstrumentSpec& spec, const ModelParams& params, const TimeGrid& grid,
                                     Method method, std::uint64_t n, Quantity quantity, double epsilon,
                                     const SampleBlock& block = {}, const RunOptions& options = {});

/// The same central-difference formulas applied to a deterministic pricer V(θ).
[[nodiscard]] double central_difference(const std::function<double(double)>& value, double theta, double h,
                                        Quantity quantity);

/// 7-point stencils, O(h⁴) accurate.
[[nodiscard]] double third_derivative(const std::function<double(double)>& f, double x, double h);
[[nodiscard]] double fourth_derivative(const std::function<double(double)>& f, double x, double h);

struct FdErrorModel {
    double c = 0.0;      // variance constant
    double b = 0.0;      // bias constant
    double alpha = 0.5;  // rate exponent
    int beta = 1;        // 1 for first derivatives, 3 for second
};

/// h_N = (βc / (4b²N^{2α}))^{1/(β+4)}; empty when b = 0 (no bias to balance).
[[nodiscard]] std::optional<double> optimal_shift(const FdErrorModel& model, double n);

/// RMSE² model: c/(N^{2α} h^β) + b²h⁴.
[[nodiscard]] double fd_rmse(const FdErrorModel& model, double n, double h);

[[nodiscard]] constexpr int beta_for(Quantity q) noexcept { return q == Quantity::Gamma ? 3 : 1; }

struct BiasConstant {
    double b = 0.0;
    double uncertainty = 0.0;  // stencil (analytic) or sampling (simulated) error estimate
    bool simulated = false;
};

struct BiasOptions {
    /// Stencil step: rel_step·S_0 for spot, abs_vol_step for σ.
    double rel_step = 0.005;
    double abs_vol_step = 0.005;
    /// Paths per stencil pricing when no closed form exists.
    std::uint64_t simulated_n = std::uint64_t{1} << 23;
    /// Simulated stencils are wider, the sampling noise is amplified by 1/h³ or 1/h⁴.
    double simulated_widening = 8.0;
};

/// b = V'''/6 (delta, vega) or V''''/12 (gamma) of the noise-free reference
/// price in θ = S_0 or σ. Price has no FD bias: b = 0.
[[nodiscard]] BiasConstant bias_constant(const InstrumentSpec& spec, const ModelParams& params, const TimeGrid& grid,
                                         Quantity quantity, const BiasOptions& bias = {},
                                         const RunOptions& options = {});

}  // namespace qmcgsa
