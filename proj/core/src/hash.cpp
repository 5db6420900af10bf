#include "qmcgsa/hash.hpp"

#include <fmt/format.h>

namespace qmcgsa {

std::string to_hex(std::uint64_t value) { return fmt::format("{:016x}", value); }

std::string Fnv1a::hex() const { return to_hex(state_); }

std::uint64_t fnv1a(std::string_view bytes) noexcept { return Fnv1a{}.update(bytes).digest(); }

}  // namespace qmcgsa
