#include "qmcgsa/greeks.hpp"

#include <array>
#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "qmcgsa/error.hpp"
#include "qmcgsa/hash.hpp"

namespace qmcgsa {

double default_epsilon(InstrumentKind kind) noexcept { return kind == InstrumentKind::European ? 1e-3 : 5e-3; }

bool analytically_null(InstrumentKind kind, Quantity q) noexcept {
    return kind == InstrumentKind::Cliquet && (q == Quantity::Delta || q == Quantity::Gamma);
}

GreekEstimate fd_greek(const InstrumentSpec& spec, const ModelParams& params, const TimeGrid& grid, Method method,
                       std::uint64_t n, Quantity quantity, double epsilon, const SampleBlock& block,
                       const RunOptions& options) {
    validate_sample_size(method, n);
    GreekEstimate out;
    out.quantity = quantity;
    out.epsilon = epsilon;
    OptionFunctional f(spec, params, grid, scheme_of(method), quantity, epsilon);
    out.shift = f.shift();
    if (analytically_null(spec.kind, quantity)) {
        out.analytically_null = true;
        out.estimate.method = method;
        out.estimate.n = n;
        if (!is_qmc(method)) out.estimate.std_error = 0.0;
        return out;
    }
    out.estimate = simulate(f, method, n, block, options);
    return out;
}

double central_difference(const std::function<double(double)>& value, double theta, double h, Quantity quantity) {
    switch (quantity) {
        case Quantity::Price: return value(theta);
        case Quantity::Delta:
        case Quantity::Vega: return (value(theta + h) - value(theta - h)) / (2.0 * h);
        case Quantity::Gamma: return (value(theta + h) - 2.0 * value(theta) + value(theta - h)) / (h * h);
    }
    return 0.0;
}

double third_derivative(const std::function<double(double)>& f, double x, double h) {
    return (f(x - 3 * h) - 8 * f(x - 2 * h) + 13 * f(x - h) - 13 * f(x + h) + 8 * f(x + 2 * h) - f(x + 3 * h)) /
           (8 * h * h * h);
}

double fourth_derivative(const std::function<double(double)>& f, double x, double h) {
    return (-f(x - 3 * h) + 12 * f(x - 2 * h) - 39 * f(x - h) + 56 * f(x) - 39 * f(x + h) + 12 * f(x + 2 * h) -
            f(x + 3 * h)) /
           (6 * h * h * h * h);
}

std::optional<double> optimal_shift(const FdErrorModel& model, double n) {
    if (model.b == 0.0) return std::nullopt;
    if (!(model.c > 0.0) || !(n > 0.0)) throw DomainError("optimal_shift needs c > 0 and N > 0");
    const double num = model.beta * model.c;
    const double den = 4.0 * model.b * model.b * std::pow(n, 2.0 * model.alpha);
    return std::pow(num / den, 1.0 / (model.beta + 4));
}

double fd_rmse(const FdErrorModel& model, double n, double h) {
    const double var = model.c / (std::pow(n, 2.0 * model.alpha) * std::pow(h, model.beta));
    return std::sqrt(var + model.b * model.b * h * h * h * h);
}

namespace {

// Spec and params with the spot moved to `spot`; tracking barriers keep B/S_0.
std::pair<InstrumentSpec, ModelParams> at_spot(const InstrumentSpec& spec, const ModelParams& params, double spot) {
    InstrumentSpec s = spec;
    ModelParams p = params;
    if (s.barriers_track_spot && s.lower_barrier && s.upper_barrier) {
        *s.lower_barrier *= spot / params.spot;
        *s.upper_barrier *= spot / params.spot;
    }
    p.spot = spot;
    return {s, p};
}

double stencil(Quantity q, const std::function<double(double)>& f, double x, double h) {
    return q == Quantity::Gamma ? fourth_derivative(f, x, h) / 12.0 : third_derivative(f, x, h) / 6.0;
}

}  // namespace

BiasConstant bias_constant(const InstrumentSpec& spec, const ModelParams& params, const TimeGrid& grid,
                           Quantity quantity, const BiasOptions& bias, const RunOptions& options) {
    BiasConstant out;
    if (quantity == Quantity::Price || analytically_null(spec.kind, quantity)) return out;
    const bool spot_greek = quantity != Quantity::Vega;
    const double theta = spot_greek ? params.spot : params.vol;
    const double base_step = spot_greek ? bias.rel_step * params.spot : bias.abs_vol_step;

    auto spec_params_at = [&](double x) {
        if (spot_greek) return at_spot(spec, params, x);
        ModelParams p = params;
        p.vol = x;
        return std::pair{spec, p};
    };

    if (analytic_reference(spec, params, grid)) {
        const std::function<double(double)> v = [&](double x) {
            auto [s, p] = spec_params_at(x);
            return analytic_reference(s, p, grid)->price;
        };
        out.b = stencil(quantity, v, theta, base_step);
        out.uncertainty = std::abs(out.b - stencil(quantity, v, theta, 0.5 * base_step));
        return out;
    }

    // No closed form: stencil on a common-numbers QMC price, batch by batch.
    const double h = bias.simulated_widening * base_step;
    if (!spot_greek && !(theta - 3 * h > 0.0)) throw ShiftTooLarge("vol stencil reaches sigma <= 0");
    constexpr std::uint64_t kBatches = 16;
    const std::uint64_t per = bias.simulated_n / kBatches;
    if (per < 2) throw ConfigError("bias_constant: simulated_n too small");
    const Method method = default_reference_method(spec.kind);
    std::array<std::vector<double>, 7> prices;
    for (int k = -3; k <= 3; ++k) {
        auto [s, p] = spec_params_at(theta + k * h);
        OptionFunctional f(s, p, grid, scheme_of(method));
        for (std::uint64_t b = 0; b < kBatches; ++b) {
            prices[k + 3].push_back(simulate(f, method, per, SampleBlock{b * per, 0}, options).value);
        }
    }
    std::vector<double> est;
    for (std::uint64_t b = 0; b < kBatches; ++b) {
        const std::function<double(double)> v = [&](double x) {
            return prices[static_cast<std::size_t>(std::lround((x - theta) / h) + 3)][b];
        };
        est.push_back(stencil(quantity, v, theta, h));
    }
    double mean = 0.0;
    for (double e : est) mean += e;
    mean /= kBatches;
    double ss = 0.0;
    for (double e : est) ss += (e - mean) * (e - mean);
    out.b = mean;
    out.uncertainty = std::sqrt(ss / (kBatches - 1) / kBatches);
    out.simulated = true;
    return out;
}

}  // namespace qmcgsa
