#include "qmcgsa/diffusion.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "qmcgsa/error.hpp"

namespace qmcgsa {

void ModelParams::validate() const {
    if (!(spot > 0.0) || !std::isfinite(spot)) throw ConfigError(fmt::format("spot must be positive, got {}", spot));
    if (!(vol >= 0.0) || !std::isfinite(vol)) throw ConfigError(fmt::format("volatility must be >= 0, got {}", vol));
    if (!std::isfinite(rate)) throw ConfigError("rate must be finite");
}

TimeGrid::TimeGrid(std::vector<double> times) : times_(std::move(times)) {
    if (times_.empty()) throw ConfigError("time grid needs at least one date");
    double prev = 0.0;
    for (double t : times_) {
        if (!(t > prev) || !std::isfinite(t)) throw ConfigError("time grid must be strictly increasing from t_1 > 0");
        prev = t;
    }
}

TimeGrid TimeGrid::uniform(double maturity, std::size_t steps) {
    if (steps == 0) throw ConfigError("time grid needs at least one step");
    if (!(maturity > 0.0)) throw ConfigError(fmt::format("maturity must be positive, got {}", maturity));
    std::vector<double> times(steps);
    for (std::size_t j = 0; j < steps; ++j) times[j] = maturity * static_cast<double>(j + 1) / static_cast<double>(steps);
    times.back() = maturity;
    return TimeGrid(std::move(times));
}

BrownianBridge::BrownianBridge(const TimeGrid& grid)
    : size_(grid.size()), terminal_stddev_(std::sqrt(grid.maturity())) {
    steps_.reserve(size_ > 0 ? size_ - 1 : 0);
    std::vector<std::pair<std::size_t, std::size_t>> level{{0, size_}};
    while (!level.empty()) {
        std::vector<std::pair<std::size_t, std::size_t>> next;
        for (auto [i, k] : level) {
            if (k - i < 2) continue;
            const std::size_t j = (i + k) / 2;
            const double ti = grid.time(i), tj = grid.time(j), tk = grid.time(k);
            steps_.push_back({i, j, k, (tk - tj) / (tk - ti), (tj - ti) / (tk - ti),
                              std::sqrt((tk - tj) * (tj - ti) / (tk - ti))});
            next.emplace_back(i, j);
            next.emplace_back(j, k);
        }
        level = std::move(next);
    }
}

void BrownianBridge::build(std::span<const double> z, std::span<double> w) const {
    if (z.size() != size_ || w.size() != size_) throw std::invalid_argument("BrownianBridge::build: length mismatch");
    // W_0 = 0 lives outside the output span; index 0 maps to it.
    auto at = [&](std::size_t idx) { return idx == 0 ? 0.0 : w[idx - 1]; };
    w[size_ - 1] = terminal_stddev_ * z[0];
    std::size_t l = 1;
    for (const Step& s : steps_) {
        w[s.mid - 1] = s.left_weight * at(s.left) + s.right_weight * at(s.right) + s.stddev * z[l++];
    }
}

std::vector<std::size_t> BrownianBridge::fill_order() const {
    std::vector<std::size_t> order{size_};
    for (const Step& s : steps_) order.push_back(s.mid);
    return order;
}

void path_sd(std::span<const double> z, const TimeGrid& grid, std::span<double> w) {
    if (z.size() != grid.size() || w.size() != grid.size()) throw std::invalid_argument("path_sd: length mismatch");
    double acc = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) {
        acc += std::sqrt(grid.dt(j + 1)) * z[j];
        w[j] = acc;
    }
}

std::vector<double> path_sd(std::span<const double> z, const TimeGrid& grid) {
    std::vector<double> w(grid.size());
    path_sd(z, grid, w);
    return w;
}

void path_bbd(std::span<const double> z, const BrownianBridge& bridge, std::span<double> w) { bridge.build(z, w); }

std::vector<double> path_bbd(std::span<const double> z, const TimeGrid& grid) {
    std::vector<double> w(grid.size());
    BrownianBridge(grid).build(z, w);
    return w;
}

void log_path(std::span<const double> w, double rate, double vol, const TimeGrid& grid, std::span<double> x) {
    if (w.size() != grid.size() || x.size() != grid.size()) throw std::invalid_argument("log_path: length mismatch");
    const double drift = rate - 0.5 * vol * vol;
    const auto& t = grid.times();
    for (std::size_t j = 0; j < w.size(); ++j) x[j] = drift * t[j] + vol * w[j];
}

AssetPath gbm_path(std::span<const double> w, const ModelParams& params, const TimeGrid& grid) {
    AssetPath path{params.spot, std::vector<double>(grid.size())};
    log_path(w, params.rate, params.vol, grid, path.values);
    for (double& v : path.values) v = params.spot * std::exp(v);
    return path;
}

}  // namespace qmcgsa
