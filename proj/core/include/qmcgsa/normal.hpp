#pragma once

#include <span>
#include <vector>

namespace qmcgsa {

/// Standard normal density.
[[nodiscard]] double normal_pdf(double x) noexcept;

/// Standard normal distribution function, via erfc.
[[nodiscard]] double normal_cdf(double x) noexcept;

/// Φ⁻¹(u) for u in (0, 1), Wichura's AS241 rational approximation.
/// Relative accuracy is about 1e-16. Throws DomainError outside [0, 1);
/// u = 0 is remapped to the smallest PRNG draw (2^-53).
[[nodiscard]] double inverse_normal_cdf(double u);

/// Element-wise Φ⁻¹; `out` must have the size of `uniforms`.
void to_normals(std::span<const double> uniforms, std::span<double> out);
[[nodiscard]] std::vector<double> to_normals(std::span<const double> uniforms);

/// Antithetic mate of a normal vector: −z.
void antithetic(std::span<const double> z, std::span<double> out);
[[nodiscard]] std::vector<double> antithetic(std::span<const double> z);

}  // namespace qmcgsa
