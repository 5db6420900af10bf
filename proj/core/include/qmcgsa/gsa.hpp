#pragma once

// First-order and total Sobol' indices from direct function evaluations,
// effective dimensions and the A/B/C classification.

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "qmcgsa/simulation.hpp"

namespace qmcgsa {

enum class FunctionType { A, B, C };

[[nodiscard]] std::string_view to_string(FunctionType t) noexcept;

/// Classification thresholds. See README for the calibration.
struct GsaThresholds {
    /// d_T: smallest prefix with (mean S_tot of the rest)/(mean S_tot of the prefix) below this.
    double truncation = 0.05;
    /// Type A when d_T ≤ type_a_fraction·D.
    double type_a_fraction = 0.25;
    /// Type B needs Σ S_i at least this...
    double min_sum_first = 0.45;
    /// ...and S_i/S_i^tot at least this on every important input,
    double min_ratio = 0.1;
    /// where "important" means S_i^tot ≥ importance·max S^tot.
    double importance = 0.1;
    /// QMC-favorable flag: d_A ≤ this.
    double favorable_average = 3.0;
};

struct GsaReport {
    std::size_t dimension = 0;
    std::uint64_t n = 0;
    double f0 = 0.0;
    double variance = 0.0;
    /// σ² ≈ 0: indices undefined, vectors left empty.
    bool degenerate = false;

    std::vector<double> first_raw, first;  // S_i
    std::vector<double> total_raw, total;  // S_i^tot
    double sum_first = 0.0;                // Σ S_i (clamped)
    double min_ratio = 0.0;                // min S_i/S_i^tot over important inputs

    std::size_t d_t = 0;
    std::string d_s_class;
    double d_a = 0.0;
    bool qmc_favorable = false;
    FunctionType type = FunctionType::C;
};

/// Estimates the indices with N trials of one 2D-dimensional point split
/// into (x, x′); D + 2 evaluations per trial. Fills the derived fields with
/// `thresholds` (see finalize()).
[[nodiscard]] GsaReport estimate_indices(const Integrand& target, std::uint64_t n, SequenceKind kind = SequenceKind::Sobol,
                                         const SampleBlock& block = {}, const RunOptions& options = {},
                                         const GsaThresholds& thresholds = {});

[[nodiscard]] std::size_t truncation_dimension(std::span<const double> total, double threshold = 0.05);
[[nodiscard]] std::size_t truncation_dimension(const GsaReport& report, double threshold = 0.05);
[[nodiscard]] FunctionType classify(const GsaReport& report, const GsaThresholds& thresholds = {});
[[nodiscard]] double average_dimension(const GsaReport& report);

/// Recomputes clamped indices, d_T, d_S class, d_A and type from the raw indices.
void finalize(GsaReport& report, const GsaThresholds& thresholds = {});

struct GsaLabel {
    std::string instrument;
    std::string function;
    std::string scheme;
    std::optional<double> epsilon;
};

void write_gsa_csv_header(std::ostream& out);
/// One row per input plus a summary row; `manifest` fills the last column.
void write_gsa_csv_rows(std::ostream& out, const GsaLabel& label, const GsaReport& report, std::string_view manifest);

}  // namespace qmcgsa
