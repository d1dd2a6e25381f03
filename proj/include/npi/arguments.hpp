#pragma once

#include <array>
#include <string>

namespace npi {

// Argument vocabulary: values 0-9, one reserved selector value, and DEFAULT.
inline constexpr int kArgVocab = 12;
inline constexpr int kReservedArg = 10;
inline constexpr int kDefaultArg = 11;

// Action codes carried in the second argument slot of ACT.
namespace action {
inline constexpr int kLeft = 0;
inline constexpr int kRight = 1;
inline constexpr int kWrite = 2;
inline constexpr int kSwap = 3;
inline constexpr int kUp = 4;
inline constexpr int kDown = 5;
}  // namespace action

// The three categorical argument slots. Slot 0 names a pointer or selector,
// slot 1 an action code and slot 2 a value; unused slots hold DEFAULT.
struct Arguments {
  std::array<int, 3> slot{kDefaultArg, kDefaultArg, kDefaultArg};

  static Arguments none() { return {}; }
  static Arguments of(int a, int b, int c) { return Arguments{{a, b, c}}; }

  int operator[](int i) const { return slot[static_cast<std::size_t>(i)]; }
  bool is_default() const {
    return slot[0] == kDefaultArg && slot[1] == kDefaultArg && slot[2] == kDefaultArg;
  }
  bool valid() const {
    for (int v : slot)
      if (v < 0 || v >= kArgVocab) return false;
    return true;
  }
  friend bool operator==(const Arguments&, const Arguments&) = default;

  std::string str() const {
    return std::to_string(slot[0]) + "," + std::to_string(slot[1]) + "," + std::to_string(slot[2]);
  }
};

}  // namespace npi
