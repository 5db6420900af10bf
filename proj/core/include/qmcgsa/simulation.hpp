#pragma once

// Deterministic chunked estimator over a Sobol' or PRNG block.
//
// Work is cut into fixed chunks of points. QMC chunk c starts at point
// offset + c·chunk (Sobol' skip); MC chunk c draws from a PRNG seeded with
// derive_seed(seed, c). Chunk sums are reduced in chunk order, so the
// result does not depend on the number of worker threads.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qmcgsa/diffusion.hpp"
#include "qmcgsa/sequence.hpp"

namespace qmcgsa {

enum class Method { McSd, QmcSd, QmcBbd };

[[nodiscard]] std::string_view to_string(Method m) noexcept;
/// Accepts "mc-sd", "qmc-sd", "qmc-bbd" (case-insensitive, '_' allowed).
[[nodiscard]] Method parse_method(std::string_view name);
[[nodiscard]] constexpr bool is_qmc(Method m) noexcept { return m != Method::McSd; }
[[nodiscard]] constexpr Scheme scheme_of(Method m) noexcept {
    return m == Method::QmcBbd ? Scheme::BrownianBridge : Scheme::Standard;
}

enum class InputSpace { Uniform, Normal };

/// Scalar function of one sample point. Instances keep scratch buffers, so
/// each worker thread evaluates its own clone().
class Integrand {
public:
    virtual ~Integrand() = default;
    [[nodiscard]] virtual std::size_t dimension() const = 0;
    [[nodiscard]] virtual InputSpace input_space() const { return InputSpace::Normal; }
    virtual double evaluate(std::span<const double> x) = 0;
    [[nodiscard]] virtual std::unique_ptr<Integrand> clone() const = 0;
};

class FunctionIntegrand final : public Integrand {
public:
    using Fn = std::function<double(std::span<const double>)>;
    FunctionIntegrand(std::size_t dimension, InputSpace space, Fn fn)
        : dimension_(dimension), space_(space), fn_(std::move(fn)) {}

    std::size_t dimension() const override { return dimension_; }
    InputSpace input_space() const override { return space_; }
    double evaluate(std::span<const double> x) override { return fn_(x); }
    std::unique_ptr<Integrand> clone() const override { return std::make_unique<FunctionIntegrand>(*this); }

private:
    std::size_t dimension_;
    InputSpace space_;
    Fn fn_;
};

/// Where a run draws its points: Sobol' indices [offset, offset + points)
/// for QMC, the PRNG family derived from `seed` for MC.
struct SampleBlock {
    std::uint64_t offset = 0;
    std::uint64_t seed = 0;
};

struct RunOptions {
    std::size_t threads = 1;
    std::uint64_t chunk = 4096;
    std::shared_ptr<const DirectionTable> directions;  // null → DirectionTable::default_table()
};

struct PriceEstimate {
    double value = 0.0;
    /// Pairwise (antithetic) standard error for MC; empty for a single QMC block.
    std::optional<double> std_error;
    std::uint64_t n = 0;
    Method method = Method::McSd;
    /// Uniform variates drawn from the sequence (points × dimension).
    std::uint64_t uniforms_consumed = 0;
};

/// N = 2^p under QMC, even under MC (antithetic pairs); ConfigError otherwise.
void validate_sample_size(Method method, std::uint64_t n);

/// Mean of f over N samples. MC+SD pairs each normal vector with its
/// antithetic mate (N/2 points, N evaluations); QMC uses N points.
[[nodiscard]] PriceEstimate simulate(const Integrand& f, Method method, std::uint64_t n, const SampleBlock& block,
                                     const RunOptions& options = {});

/// Running means V_N along one stream at increasing checkpoints (each even for MC).
[[nodiscard]] std::vector<double> running_means(const Integrand& f, Method method, std::span<const std::uint64_t> checkpoints,
                                                const SampleBlock& block, const RunOptions& options = {});

/// Runs task(i, worker) for i in [0, count) on up to `threads` workers.
/// Task-to-worker assignment is dynamic; callers must write results by index.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t, std::size_t)>& task);

/// Maps uniforms to the integrand's input space (Φ⁻¹ for Normal).
void to_input_space(InputSpace space, std::span<const double> u, std::span<double> out);

}  // namespace qmcgsa
