#include "qmcgsa/sequence.hpp"

#include <bit>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "qmcgsa/error.hpp"
#include "qmcgsa/hash.hpp"

#ifndef QMCGSA_BUILD_DATA_DIR
#define QMCGSA_BUILD_DATA_DIR "."
#endif
#ifndef QMCGSA_INSTALL_DATA_DIR
#define QMCGSA_INSTALL_DATA_DIR "."
#endif

namespace qmcgsa {

namespace {

constexpr double kTwoPowMinus32 = 0x1p-32;

}  // namespace

DirectionTable DirectionTable::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(fmt::format("cannot open direction-number table '{}'", path.string()));
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str());
}

DirectionTable DirectionTable::parse(std::string_view text) {
    DirectionTable table;
    table.hash_ = Fnv1a{}.update(text).hex();

    // Dimension 1: all m_k = 1, i.e. the van der Corput sequence.
    std::array<std::uint32_t, kBits> first{};
    for (int k = 0; k < kBits; ++k) first[k] = std::uint32_t{1} << (kBits - 1 - k);
    table.directions_.push_back(first);

    std::istringstream lines{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        if (line.empty() || line.front() == '#' || line.front() == 'd') continue;
        std::istringstream fields(line);
        std::size_t d = 0;
        int s = 0;
        std::uint64_t a = 0;
        if (!(fields >> d >> s >> a)) continue;
        if (d != table.directions_.size() + 1 || s < 1 || s > kBits) {
            throw ConfigError(fmt::format("direction table line {}: unexpected entry for dimension {}", line_no, d));
        }
        std::array<std::uint32_t, kBits> v{};
        for (int k = 0; k < s; ++k) {
            std::uint64_t m = 0;
            if (!(fields >> m) || m % 2 == 0 || m >= (std::uint64_t{1} << (k + 1))) {
                throw ConfigError(fmt::format("direction table line {}: bad m_{}", line_no, k + 1));
            }
            v[k] = static_cast<std::uint32_t>(m << (kBits - 1 - k));
        }
        for (int k = s; k < kBits; ++k) {
            std::uint32_t value = v[k - s] ^ (v[k - s] >> s);
            for (int j = 1; j < s; ++j) {
                if ((a >> (s - 1 - j)) & 1U) value ^= v[k - j];
            }
            v[k] = value;
        }
        table.directions_.push_back(v);
    }
    return table;
}

std::filesystem::path DirectionTable::default_path() {
    if (const char* env = std::getenv("QMCGSA_DIRECTIONS"); env != nullptr && *env != '\0') {
        return env;
    }
    constexpr const char* kFile = "joe-kuo-d8192.txt";
    std::filesystem::path installed = std::filesystem::path(QMCGSA_INSTALL_DATA_DIR) / kFile;
    if (std::filesystem::exists(installed)) return installed;
    return std::filesystem::path(QMCGSA_BUILD_DATA_DIR) / kFile;
}

std::shared_ptr<const DirectionTable> DirectionTable::default_table() {
    static std::once_flag once;
    static std::shared_ptr<const DirectionTable> table;
    std::call_once(once, [] { table = std::make_shared<const DirectionTable>(load(default_path())); });
    return table;
}

SobolSequence::SobolSequence(std::shared_ptr<const DirectionTable> table, std::size_t dimension)
    : table_(std::move(table)), dimension_(dimension), state_(dimension, 0U) {
    if (!table_) throw std::invalid_argument("SobolSequence: null direction table");
    if (dimension_ == 0) throw std::invalid_argument("SobolSequence: dimension must be positive");
    if (dimension_ > table_->max_dimension()) {
        throw UnsupportedDimension(fmt::format("Sobol' dimension {} exceeds the direction table ({} dimensions)",
                                               dimension_, table_->max_dimension()));
    }
}

SobolSequence::SobolSequence(std::size_t dimension) : SobolSequence(DirectionTable::default_table(), dimension) {}

void SobolSequence::advance_one() {
    if (index_ >= kMaxPoints) throw CounterOverflow("Sobol' sequence exhausted (2^32 - 1 points)");
    // Raw point n differs from n-1 in the direction of the lowest zero bit of n-1.
    const int c = std::countr_one(index_);
    for (std::size_t d = 0; d < dimension_; ++d) state_[d] ^= table_->directions(d)[c];
    ++index_;
}

void SobolSequence::next(std::span<double> point) {
    if (point.size() != dimension_) throw std::invalid_argument("SobolSequence::next: wrong point size");
    advance_one();
    for (std::size_t d = 0; d < dimension_; ++d) point[d] = static_cast<double>(state_[d]) * kTwoPowMinus32;
}

void SobolSequence::next_raw(std::span<std::uint32_t> point) {
    if (point.size() != dimension_) throw std::invalid_argument("SobolSequence::next_raw: wrong point size");
    advance_one();
    std::copy(state_.begin(), state_.end(), point.begin());
}

void SobolSequence::skip(std::uint64_t n) {
    if (n == 0) return;
    if (n > kMaxPoints - index_) throw CounterOverflow("Sobol' skip beyond 2^32 - 1 points");
    index_ += n;
    // Gray-code point of index_ directly: XOR of the directions of its set bits.
    const std::uint64_t gray = index_ ^ (index_ >> 1);
    for (std::size_t d = 0; d < dimension_; ++d) {
        const auto& v = table_->directions(d);
        std::uint32_t x = 0;
        for (std::uint64_t bits = gray; bits != 0; bits &= bits - 1) x ^= v[std::countr_zero(bits)];
        state_[d] = x;
    }
}

PseudoRandomSequence::PseudoRandomSequence(std::uint64_t seed, std::size_t dimension)
    : engine_(seed), seed_(seed), dimension_(dimension) {
    if (dimension_ == 0) throw std::invalid_argument("PseudoRandomSequence: dimension must be positive");
}

void PseudoRandomSequence::next(std::span<double> point) {
    if (point.size() != dimension_) throw std::invalid_argument("PseudoRandomSequence::next: wrong point size");
    if (index_ == std::numeric_limits<std::uint64_t>::max()) throw CounterOverflow("PRNG index overflow");
    for (double& x : point) {
        const double u = static_cast<double>(engine_() >> 11) * 0x1p-53;
        x = u == 0.0 ? kSmallestDraw : u;
    }
    ++index_;
}

void PseudoRandomSequence::skip(std::uint64_t n) {
    if (n > std::numeric_limits<std::uint64_t>::max() - index_) throw CounterOverflow("PRNG skip overflow");
    // TODO: mt19937_64 only has linear-time discard; a jump polynomial would make this O(log n).
    engine_.discard(n * dimension_);
    index_ += n;
}

}  // namespace qmcgsa
