#pragma once

// Wiener paths under the standard (sequential increments) and Brownian
// bridge discretizations, and the exact log-normal GBM step.

#include <cstddef>
#include <span>
#include <vector>

namespace qmcgsa {

enum class Scheme { Standard, BrownianBridge };

struct ModelParams {
    double spot = 100.0;
    double rate = 0.0;
    double vol = 0.3;

    void validate() const;
};

/// Strictly increasing observation times t_1 < ... < t_D, t_0 = 0 implicit.
class TimeGrid {
public:
    explicit TimeGrid(std::vector<double> times);
    /// t_j = j·T/D.
    static TimeGrid uniform(double maturity, std::size_t steps);

    [[nodiscard]] std::size_t size() const noexcept { return times_.size(); }
    [[nodiscard]] double maturity() const noexcept { return times_.back(); }
    [[nodiscard]] const std::vector<double>& times() const noexcept { return times_; }
    [[nodiscard]] double time(std::size_t j) const { return j == 0 ? 0.0 : times_.at(j - 1); }
    /// Δt_j = t_j − t_{j−1}, j = 1..D.
    [[nodiscard]] double dt(std::size_t j) const { return time(j) - time(j - 1); }

    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

private:
    std::vector<double> times_;
};

/// Precomputed bisection plan for the Brownian bridge on a grid.
/// Z_1 fixes W_D; each following Z_l fills the midpoint ⌊(i+k)/2⌋ of an
/// index range [i, k] whose endpoints are already known, breadth first,
/// left to right.
class BrownianBridge {
public:
    struct Step {
        std::size_t left, mid, right;  // grid indices, 0 = t_0
        double left_weight, right_weight, stddev;
    };

    explicit BrownianBridge(const TimeGrid& grid);

    /// w[j−1] = W(t_j), j = 1..D.
    void build(std::span<const double> z, std::span<double> w) const;

    [[nodiscard]] std::size_t size() const noexcept { return size_; }
    [[nodiscard]] const std::vector<Step>& steps() const noexcept { return steps_; }
    /// Grid index (1-based) filled by Z_1, Z_2, ... in order.
    [[nodiscard]] std::vector<std::size_t> fill_order() const;

private:
    std::size_t size_;
    double terminal_stddev_;
    std::vector<Step> steps_;
};

/// W_j = Σ_{i≤j} √Δt_i · Z_i.
void path_sd(std::span<const double> z, const TimeGrid& grid, std::span<double> w);
[[nodiscard]] std::vector<double> path_sd(std::span<const double> z, const TimeGrid& grid);

void path_bbd(std::span<const double> z, const BrownianBridge& bridge, std::span<double> w);
[[nodiscard]] std::vector<double> path_bbd(std::span<const double> z, const TimeGrid& grid);

struct AssetPath {
    double spot = 0.0;
    std::vector<double> values;  // S_1..S_D
};

/// log(S_j/S_0) = (r − σ²/2)·t_j + σ·W_j.
void log_path(std::span<const double> w, double rate, double vol, const TimeGrid& grid, std::span<double> x);

/// S_j = S_{j−1}·exp[(r − σ²/2)Δt_j + σΔW_j], evaluated in closed form from t_j and W_j.
[[nodiscard]] AssetPath gbm_path(std::span<const double> w, const ModelParams& params, const TimeGrid& grid);

}  // namespace qmcgsa
