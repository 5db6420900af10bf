#pragma once

// Uniform variate sources: a Gray-code Sobol' generator driven by a
// Joe–Kuo style direction-number table, and a seedable Mersenne Twister
// stream. Both are plain values: copy them to fork a stream, move them
// between threads freely. Neither holds shared mutable state.

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace qmcgsa {

enum class SequenceKind { Sobol, Prng };

/// Direction numbers for every supported dimension, parsed from a text table
/// with one line per dimension: `d s a m_1 .. m_s` (dimension 1 is implicit).
class DirectionTable {
public:
    static constexpr int kBits = 32;

    static DirectionTable load(const std::filesystem::path& path);
    static DirectionTable parse(std::string_view text);

    /// Table shipped with the library. `QMCGSA_DIRECTIONS` overrides the path.
    static std::shared_ptr<const DirectionTable> default_table();
    static std::filesystem::path default_path();

    [[nodiscard]] std::size_t max_dimension() const noexcept { return directions_.size(); }
    /// FNV-1a digest of the table text; recorded in reports and cache keys.
    [[nodiscard]] const std::string& hash() const noexcept { return hash_; }
    [[nodiscard]] const std::array<std::uint32_t, kBits>& directions(std::size_t dim) const {
        return directions_.at(dim);
    }

private:
    std::vector<std::array<std::uint32_t, kBits>> directions_;
    std::string hash_;
};

/// Sobol' points in Gray-code order. The all-zero point of the raw
/// construction is treated as already emitted, so the first call to next()
/// returns (0.5, ..., 0.5). Every coordinate is strictly inside (0, 1).
class SobolSequence {
public:
    /// Largest number of points a 32-bit direction table can address.
    static constexpr std::uint64_t kMaxPoints = (std::uint64_t{1} << 32) - 1;

    SobolSequence(std::shared_ptr<const DirectionTable> table, std::size_t dimension);
    explicit SobolSequence(std::size_t dimension);

    void next(std::span<double> point);
    /// Integer form of next(): coordinates scaled by 2^32.
    void next_raw(std::span<std::uint32_t> point);
    /// Advances by n points in O(dimension · 32) work.
    void skip(std::uint64_t n);

    [[nodiscard]] std::size_t dimension() const noexcept { return dimension_; }
    [[nodiscard]] std::uint64_t index() const noexcept { return index_; }
    [[nodiscard]] const DirectionTable& table() const noexcept { return *table_; }

    friend bool operator==(const SobolSequence& a, const SobolSequence& b) {
        return a.table_ == b.table_ && a.dimension_ == b.dimension_ && a.index_ == b.index_;
    }

private:
    void advance_one();

    std::shared_ptr<const DirectionTable> table_;
    std::size_t dimension_;
    std::uint64_t index_ = 0;
    std::vector<std::uint32_t> state_;
};

/// Mersenne Twister (64-bit) uniforms on [2^-53, 1). A raw zero draw is
/// remapped to 2^-53 so Φ⁻¹ never sees 0.
class PseudoRandomSequence {
public:
    static constexpr double kSmallestDraw = 0x1p-53;

    PseudoRandomSequence(std::uint64_t seed, std::size_t dimension);

    void next(std::span<double> point);
    /// Advances by n points (n · dimension draws).
    void skip(std::uint64_t n);

    [[nodiscard]] std::size_t dimension() const noexcept { return dimension_; }
    [[nodiscard]] std::uint64_t index() const noexcept { return index_; }
    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

    friend bool operator==(const PseudoRandomSequence& a, const PseudoRandomSequence& b) {
        return a.seed_ == b.seed_ && a.dimension_ == b.dimension_ && a.index_ == b.index_;
    }

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_;
    std::size_t dimension_;
    std::uint64_t index_ = 0;
};

/// Either kind of stream behind one interface.
class UniformStream {
public:
    UniformStream(SobolSequence s) : impl_(std::move(s)) {}
    UniformStream(PseudoRandomSequence s) : impl_(std::move(s)) {}

    [[nodiscard]] SequenceKind kind() const noexcept {
        return std::holds_alternative<SobolSequence>(impl_) ? SequenceKind::Sobol : SequenceKind::Prng;
    }
    void next(std::span<double> point) {
        std::visit([&](auto& s) { s.next(point); }, impl_);
    }
    void skip(std::uint64_t n) {
        std::visit([&](auto& s) { s.skip(n); }, impl_);
    }
    [[nodiscard]] std::size_t dimension() const {
        return std::visit([](const auto& s) { return s.dimension(); }, impl_);
    }
    [[nodiscard]] std::uint64_t index() const {
        return std::visit([](const auto& s) { return s.index(); }, impl_);
    }

private:
    std::variant<SobolSequence, PseudoRandomSequence> impl_;
};

}  // namespace qmcgsa
