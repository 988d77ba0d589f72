#pragma once

#include <array>
#include <stdexcept>
#include <string>

namespace phantomqa {

// Slice classes in canonical order. Every confusion matrix, report row and
// probability vector in the project uses this ordering.
enum class SliceLabel : int {
  kAGP = 0,  // adjacent to a gap or section boundary
  kNPS = 1,  // uniform noise/NPS section
  kOoP = 2,  // out of phantom
  kTTF = 3,  // multi-insert TTF section
  kTaS = 4,  // tapered transition section
};

inline constexpr int kNumClasses = 5;

inline constexpr std::array<const char*, kNumClasses> kClassNames = {"AGP", "NPS", "OoP",
                                                                     "TTF", "TaS"};

inline const char* to_string(SliceLabel l) {
  return kClassNames[static_cast<std::size_t>(static_cast<int>(l))];
}

inline SliceLabel label_from_string(const std::string& s) {
  for (int i = 0; i < kNumClasses; ++i) {
    if (s == kClassNames[static_cast<std::size_t>(i)]) return static_cast<SliceLabel>(i);
  }
  throw std::invalid_argument("unknown class name: " + s);
}

}  // namespace phantomqa
