#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qmcgsa/diffusion.hpp"
#include "qmcgsa/simulation.hpp"

namespace qmcgsa {

enum class InstrumentKind { European, AsianGeometric, DoubleKnockOut, Cliquet };

[[nodiscard]] std::string_view to_string(InstrumentKind k) noexcept;
[[nodiscard]] InstrumentKind parse_instrument(std::string_view name);

struct InstrumentSpec {
    InstrumentKind kind = InstrumentKind::European;
    double strike = 100.0;
    std::optional<double> lower_barrier;  // currency, DOUBLE_KO only
    std::optional<double> upper_barrier;
    /// Barrier levels move with the spot under delta/gamma bumps (B/S_0 fixed).
    bool barriers_track_spot = true;
    std::optional<double> cap;    // local cap C, CLIQUET only
    std::optional<double> floor;  // global floor F
    double maturity = 1.0;

    static InstrumentSpec european(double strike = 100.0, double maturity = 1.0);
    static InstrumentSpec asian_geometric(double strike = 100.0, double maturity = 1.0);
    static InstrumentSpec double_knock_out(double strike = 100.0, double lower = 50.0, double upper = 150.0,
                                           double maturity = 1.0);
    static InstrumentSpec cliquet(double cap = 0.08, double floor = 0.16, double maturity = 1.0);
    /// The four test instruments at spot S_0 = 100.
    static InstrumentSpec defaults(InstrumentKind kind);

    /// Throws ConfigError on missing or inconsistent parameters.
    void validate(const ModelParams& params) const;
    /// Canonical text used for cache keys and manifests.
    [[nodiscard]] std::string canonical() const;
};

enum class Quantity { Price, Delta, Gamma, Vega };

[[nodiscard]] std::string_view to_string(Quantity q) noexcept;
[[nodiscard]] Quantity parse_quantity(std::string_view name);

/// Undiscounted payoff on an explicit asset path (S_0 = path.spot).
[[nodiscard]] double payoff(const InstrumentSpec& spec, const AssetPath& path);

/// Payoff from log-returns x_j = log(S_j/S_0) and the spot. Barriers are
/// scaled by spot/barrier_spot when they track the spot.
[[nodiscard]] double payoff_log(const InstrumentSpec& spec, double spot, std::span<const double> x, double barrier_spot);

struct Greeks {
    double price = 0.0;
    double delta = 0.0;
    double gamma = 0.0;
    double vega = 0.0;

    [[nodiscard]] double get(Quantity q) const noexcept;
};

[[nodiscard]] Greeks bs_reference(const InstrumentSpec& spec, const ModelParams& params);
[[nodiscard]] Greeks asian_geometric_reference(const InstrumentSpec& spec, const ModelParams& params, const TimeGrid& grid);
/// Closed form where one exists (European, geometric Asian).
[[nodiscard]] std::optional<Greeks> analytic_reference(const InstrumentSpec& spec, const ModelParams& params,
                                                       const TimeGrid& grid);

/// Discounted payoff or recycled central-difference composite as a function
/// of the D normals of one path. Every bump reuses the same normals.
class OptionFunctional final : public Integrand {
public:
    OptionFunctional(InstrumentSpec spec, ModelParams params, TimeGrid grid, Scheme scheme,
                     Quantity quantity = Quantity::Price, double epsilon = 0.0);

    std::size_t dimension() const override { return grid_.size(); }
    double evaluate(std::span<const double> z) override;
    std::unique_ptr<Integrand> clone() const override { return std::make_unique<OptionFunctional>(*this); }

    /// Absolute shift h (ε·S_0 for spot greeks, ε for vega).
    [[nodiscard]] double shift() const noexcept { return shift_; }
    [[nodiscard]] Quantity quantity() const noexcept { return quantity_; }
    /// Payoff evaluations made by this instance (bumps included).
    [[nodiscard]] std::uint64_t payoff_evaluations() const noexcept { return payoff_evaluations_; }

private:
    double payoff_at(double spot, double vol);

    InstrumentSpec spec_;
    ModelParams params_;
    TimeGrid grid_;
    Scheme scheme_;
    Quantity quantity_;
    double shift_;
    double discount_;
    std::shared_ptr<const BrownianBridge> bridge_;
    std::vector<double> w_, x_;
    std::uint64_t payoff_evaluations_ = 0;
};

/// V_N = e^{−rT}·mean payoff. QMC needs N = 2^p; MC needs an even N.
[[nodiscard]] PriceEstimate price(const InstrumentSpec& spec, const ModelParams& params, const TimeGrid& grid,
                                  Method method, std::uint64_t n, const SampleBlock& block = {},
                                  const RunOptions& options = {});

struct ReferenceEntry {
    double value = 0.0;
    double std_error = 0.0;  // 0 when not estimable (single QMC block)
    std::uint64_t n = 0;
    std::string timestamp;
    std::string generator_hash;
};

/// Key → reference value, persisted as one JSON document. A corrupt file is
/// treated as empty. Entries whose generator hash differs from the current
/// direction table are ignored.
class ReferenceCache {
public:
    explicit ReferenceCache(std::filesystem::path path);

    [[nodiscard]] std::optional<ReferenceEntry> find(const std::string& key, const std::string& generator_hash) const;
    void store(const std::string& key, const ReferenceEntry& entry);
    [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }
    [[nodiscard]] bool was_corrupt() const noexcept { return corrupt_; }

private:
    void save() const;

    std::filesystem::path path_;
    std::map<std::string, ReferenceEntry> entries_;
    bool corrupt_ = false;
    mutable std::mutex mutex_;
};

struct ReferenceRequest {
    Quantity quantity = Quantity::Price;
    double epsilon = 0.0;
    std::uint64_t n = std::uint64_t{1} << 23;
    /// Defaults to QMC+BBD, QMC+SD for Cliquet.
    std::optional<Method> method;
};

[[nodiscard]] Method default_reference_method(InstrumentKind kind) noexcept;

/// Content hash of everything that determines a simulated reference.
[[nodiscard]] std::string reference_key(const InstrumentSpec& spec, const ModelParams& params, const TimeGrid& grid,
                                        Method method, const ReferenceRequest& request, std::string_view generator_hash);

/// Large-N QMC estimate, looked up in / stored to `cache` when given.
[[nodiscard]] ReferenceEntry simulated_reference(const InstrumentSpec& spec, const ModelParams& params,
                                                 const TimeGrid& grid, const ReferenceRequest& request,
                                                 ReferenceCache* cache = nullptr, const RunOptions& options = {});

}  // namespace qmcgsa
