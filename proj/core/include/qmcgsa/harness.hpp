#pragma once

// Experiment configuration, run manifest and the experiment drivers behind
// the command-line tool. Every driver returns its results and, when an
// output directory is configured, writes them as tidy CSV.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qmcgsa/analysis.hpp"
#include "qmcgsa/greeks.hpp"
#include "qmcgsa/gsa.hpp"
#include "qmcgsa/instruments.hpp"

namespace qmcgsa {

[[nodiscard]] std::string_view library_version() noexcept;

enum class ReferencePolicy { Auto, AnalyticOnly, CacheOnly };

struct ExperimentConfig {
    std::vector<InstrumentKind> instruments{InstrumentKind::European, InstrumentKind::AsianGeometric,
                                            InstrumentKind::DoubleKnockOut, InstrumentKind::Cliquet};
    std::vector<Quantity> functions{Quantity::Price, Quantity::Delta, Quantity::Gamma, Quantity::Vega};
    std::vector<Method> methods{Method::McSd, Method::QmcSd, Method::QmcBbd};

    double strike = 100.0;
    double lower_barrier = 50.0;
    double upper_barrier = 150.0;
    bool barriers_track_spot = true;
    double cap = 0.08;
    double floor = 0.16;

    ModelParams model{};
    double maturity = 1.0;
    std::size_t steps = 32;

    std::map<InstrumentKind, double> epsilon{{InstrumentKind::European, 1e-3},
                                             {InstrumentKind::AsianGeometric, 5e-3},
                                             {InstrumentKind::DoubleKnockOut, 5e-3},
                                             {InstrumentKind::Cliquet, 5e-3}};

    std::uint64_t price_n = std::uint64_t{1} << 17;

    std::uint64_t convergence_n_min = std::uint64_t{1} << 9;
    std::uint64_t convergence_n_max = std::uint64_t{1} << 18;
    std::size_t runs = 30;

    std::uint64_t gsa_n = std::uint64_t{1} << 17;
    std::vector<double> gsa_epsilons{1e-4, 1e-3, 1e-2};
    std::vector<Scheme> gsa_schemes{Scheme::Standard, Scheme::BrownianBridge};
    GsaThresholds gsa_thresholds{};

    ReferencePolicy reference_policy = ReferencePolicy::Auto;
    std::uint64_t reference_n = std::uint64_t{1} << 23;
    std::uint64_t bias_n = std::uint64_t{1} << 23;

    std::vector<double> accuracies{1e-2, 1e-3};

    std::uint64_t stability_n_min = 100;
    std::uint64_t stability_n_max = 10000;
    std::uint64_t stability_n_step = 100;
    std::size_t stability_windows = 10;

    std::uint64_t seed = 20250101;
    std::uint64_t chunk = 4096;

    // Execution settings: not part of the config hash, never change results.
    std::size_t threads = 1;
    std::filesystem::path output_dir;

    [[nodiscard]] InstrumentSpec spec(InstrumentKind kind) const;
    [[nodiscard]] TimeGrid grid() const { return TimeGrid::uniform(maturity, steps); }
    [[nodiscard]] double epsilon_for(InstrumentKind kind) const;
    [[nodiscard]] RunOptions run_options(std::size_t threads_override = 0) const;

    /// Throws ConfigError.
    void validate() const;
    /// Flat `key = value` text of every result-relevant field, sorted by key.
    [[nodiscard]] std::string canonical() const;
    [[nodiscard]] std::string hash() const;
};

/// Flat dotted-key document: `key = value` lines, `#` comments.
using ConfigValues = std::map<std::string, std::string>;

[[nodiscard]] ConfigValues parse_config_text(std::string_view text);
[[nodiscard]] ConfigValues read_config_file(const std::filesystem::path& path);
/// Applies values in order; unknown keys and bad values throw ConfigError.
void apply_config(ExperimentConfig& config, const ConfigValues& values);
/// defaults < file < overrides.
[[nodiscard]] ExperimentConfig load_config(const std::optional<std::filesystem::path>& file,
                                           const ConfigValues& overrides = {});
/// Every accepted key with its default, as a config document.
[[nodiscard]] std::string default_config_text();

struct RunManifest {
    std::string id;  // written into every CSV row
    std::string config_hash;
    std::string direction_hash;
    std::string version;
    std::map<std::string, std::string> checksums;  // output file → FNV-1a of its bytes
    std::map<std::string, double> timings;          // step → seconds

    [[nodiscard]] static RunManifest create(const ExperimentConfig& config);
    void record_file(const std::filesystem::path& path);
    void write(const std::filesystem::path& path) const;
};

using Logger = std::function<void(std::string_view)>;

/// Shared state of one CLI invocation.
class Session {
public:
    explicit Session(ExperimentConfig config, Logger log = {});

    [[nodiscard]] const ExperimentConfig& config() const noexcept { return config_; }
    [[nodiscard]] RunManifest& manifest() noexcept { return manifest_; }
    [[nodiscard]] bool writes_files() const noexcept { return !config_.output_dir.empty(); }
    void log(std::string_view message) const;

    /// Reference value of (instrument, function) at the configured ε: the
    /// closed form when one exists, else a cached large-N QMC estimate.
    [[nodiscard]] ReferenceEntry reference(InstrumentKind kind, Quantity q);
    [[nodiscard]] BiasConstant bias(InstrumentKind kind, Quantity q);

    /// Opens `name` under the output directory and records it in the manifest on close.
    void write_csv(const std::string& name, const std::function<void(std::ostream&)>& body);
    void finish();

private:
    ExperimentConfig config_;
    Logger log_;
    RunManifest manifest_;
    std::unique_ptr<ReferenceCache> cache_;
    std::map<std::string, BiasConstant> bias_cache_;
};

struct PriceRow {
    InstrumentKind instrument;
    Quantity function;
    Method method;
    GreekEstimate estimate;
    std::optional<double> reference;
};

struct GsaResult {
    InstrumentKind instrument;
    Quantity function;
    Scheme scheme;
    std::optional<double> epsilon;
    GsaReport report;
};

struct ConvergenceSeries {
    InstrumentKind instrument;
    Quantity function;
    Method method;
    double reference = 0.0;
    double epsilon = 0.0;
    double shift = 0.0;
    double bias_b = 0.0;
    std::vector<std::uint64_t> n;
    std::vector<double> rmse, mean, sd;
    std::vector<bool> excluded;
    PowerLawFit fit;
};

struct SpeedUpRow {
    InstrumentKind instrument;
    Quantity function;
    Method method_i, method_j;
    double accuracy = 0.0;  // relative to |V|
    std::optional<double> n_star_i, n_star_j, speed_up;
};

struct StabilitySeries {
    InstrumentKind instrument;
    Quantity function;
    Method method;
    std::vector<std::uint64_t> n;
    std::vector<double> estimates;
    StabilityReport report;
};

std::vector<PriceRow> run_price(Session& session);
std::vector<PriceRow> run_greeks(Session& session);
std::vector<GsaResult> run_gsa(Session& session);
std::vector<ConvergenceSeries> run_convergence(Session& session);
std::vector<SpeedUpRow> run_speedup(Session& session, const std::vector<ConvergenceSeries>& fits);
std::vector<SpeedUpRow> run_speedup(Session& session);
std::vector<StabilitySeries> run_stability(Session& session);
std::vector<std::pair<std::string, ReferenceEntry>> run_reference(Session& session);

/// One convergence series, without file output.
[[nodiscard]] ConvergenceSeries convergence_series(Session& session, InstrumentKind kind, Quantity q, Method method);
/// N*-based speed-up rows for one series pair set.
[[nodiscard]] std::vector<SpeedUpRow> speedup_rows(Session& session, const std::vector<ConvergenceSeries>& fits);

}  // namespace qmcgsa
