#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "npi/observation.hpp"

namespace npi {

// One-row array of digits with two swap pointers and a counter pointer.
class SortPad {
 public:
  static constexpr int kPointers = 3;
  static constexpr int kCounter = 2;
  // Two one-hot readings, start/end bits for 3 pointers, 3 argument slots.
  static constexpr int kFeatureWidth = 2 * 10 + 2 * kPointers + 3 * kArgVocab;
  static constexpr int kObservationLength = 2 + 2 * kPointers;

  SortPad() = default;

  static SortPad reset(std::vector<int> array) {
    if (array.empty()) throw InputError("sorting: array must be nonempty");
    for (int v : array)
      if (v < 0 || v > 9) throw InputError("sorting: entries must be digits 0-9");
    SortPad pad;
    pad.cells_ = std::move(array);
    pad.pointers_.fill(0);
    return pad;
  }

  int size() const { return static_cast<int>(cells_.size()); }
  const std::vector<int>& cells() const { return cells_; }
  int pointer(int p) const { return pointers_.at(p); }
  int value_at(int p) const { return cells_[pointers_.at(p)]; }
  bool at_start(int p) const { return pointers_.at(p) == 0; }
  bool at_end(int p) const { return pointers_.at(p) == size() - 1; }

  // Moves clamp at the edges; the counter only moves right.
  void step(const Arguments& args) {
    if (args[1] == action::kSwap) {
      std::swap(cells_[pointers_[0]], cells_[pointers_[1]]);
      return;
    }
    const int ptr = args[0];
    if (ptr < 0 || ptr >= kPointers)
      throw EnvironmentError("sorting: pointer id " + std::to_string(ptr) + " out of range");
    switch (args[1]) {
      case action::kLeft:
        if (ptr == kCounter) throw EnvironmentError("sorting: the counter pointer only moves right");
        pointers_[ptr] = std::max(0, pointers_[ptr] - 1);
        break;
      case action::kRight:
        pointers_[ptr] = std::min(size() - 1, pointers_[ptr] + 1);
        break;
      default:
        throw EnvironmentError("sorting: unsupported action code " + std::to_string(args[1]));
    }
  }

  Observation observe() const {
    Observation o;
    o.env = EnvKind::sorting;
    o.values = {value_at(0), value_at(1)};
    for (int p = 0; p < kPointers; ++p) {
      o.values.push_back(at_start(p) ? 1 : 0);
      o.values.push_back(at_end(p) ? 1 : 0);
    }
    return o;
  }

  static Vec features(const Observation& obs, const Arguments& args) {
    if (obs.env != EnvKind::sorting || obs.values.size() != kObservationLength)
      throw ConfigError("sorting features: malformed observation");
    Vec f = Vec::Zero(kFeatureWidth);
    f[obs.values[0]] = 1.0;
    f[10 + obs.values[1]] = 1.0;
    for (int k = 0; k < 2 * kPointers; ++k) f[20 + k] = obs.values[2 + k];
    append_arguments(f, 20 + 2 * kPointers, args);
    return f;
  }

  // "9,2,5@0,0,0"
  std::string describe() const {
    std::string s;
    for (std::size_t i = 0; i < cells_.size(); ++i) {
      if (i) s += ',';
      s += std::to_string(cells_[i]);
    }
    s += '@';
    for (int p = 0; p < kPointers; ++p) {
      if (p) s += ',';
      s += std::to_string(pointers_[p]);
    }
    return s;
  }

  // Accepts "9,2,5" or "9,2,5@p1,p2,p3".
  static SortPad parse(std::string_view text) {
    const auto at = text.find('@');
    SortPad pad = reset(parse_list(text.substr(0, at)));
    if (at != std::string_view::npos) {
      const auto ptrs = parse_list(text.substr(at + 1), 1 << 20);
      if (ptrs.size() != kPointers) throw InputError("sorting: expected 3 pointers");
      for (int p = 0; p < kPointers; ++p) {
        if (ptrs[p] >= pad.size()) throw InputError("sorting: pointer out of range");
        pad.pointers_[p] = ptrs[p];
      }
    }
    return pad;
  }

  static std::vector<int> parse_list(std::string_view text, int max_value = 9) {
    std::vector<int> out;
    std::string tok;
    auto flush = [&] {
      if (tok.empty()) throw InputError("sorting: empty entry in '" + std::string(text) + "'");
      const int v = std::stoi(tok);
      if (v < 0 || v > max_value) throw InputError("sorting: entry " + tok + " out of range");
      out.push_back(v);
      tok.clear();
    };
    for (char ch : text) {
      if (ch == ',') flush();
      else if (std::isdigit(static_cast<unsigned char>(ch))) tok += ch;
      else if (ch != ' ' && ch != '[' && ch != ']') throw InputError("sorting: bad character in '" + std::string(text) + "'");
    }
    flush();
    return out;
  }

  friend bool operator==(const SortPad&, const SortPad&) = default;

 private:
  std::vector<int> cells_;
  std::array<int, kPointers> pointers_{};
};

}  // namespace npi
