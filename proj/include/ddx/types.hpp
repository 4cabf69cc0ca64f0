#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace ddx {

// Dense symptom index. First-layer symptoms occupy [0, F), second-layer [F, M).
struct SymptomId {
  std::size_t value = 0;
  constexpr auto operator<=>(const SymptomId&) const = default;
};

using DiseaseId = std::size_t;

// One byte per bit; 0 or 1.
using BitVector = std::vector<std::uint8_t>;

// Values double as slot offsets inside a symptom's triplet.
enum class SymptomState : std::uint8_t { denied = 0, confirmed = 1, unknown = 2 };

const char* to_string(SymptomState state);

inline std::size_t popcount(const BitVector& bits) {
  std::size_t n = 0;
  for (auto b : bits) n += b != 0;
  return n;
}

}  // namespace ddx
