#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "npi/observation.hpp"

namespace npi {

// Four-row scratch pad for grade-school addition. Rows: input 1, input 2,
// carry, output. Each row has its own pointer; cells hold 0-9 or blank.
class AdditionPad {
 public:
  static constexpr int kRows = 4;
  static constexpr int kBlank = 10;
  static constexpr int kCellCategories = 11;
  // 4 one-hot cells, start/end bits for 4 pointers, 3 argument slots.
  static constexpr int kFeatureWidth = kRows * kCellCategories + 2 * kRows + 3 * kArgVocab;
  static constexpr int kObservationLength = kRows + 2 * kRows;

  AdditionPad() = default;

  // Right-aligns both operands on a pad one column wider than the longer one;
  // all pointers start on the rightmost column.
  static AdditionPad reset(std::string_view a, std::string_view b) {
    check_digits(a);
    check_digits(b);
    AdditionPad pad;
    const int width = static_cast<int>(std::max(a.size(), b.size())) + 1;
    pad.width_ = width;
    pad.cells_.assign(static_cast<std::size_t>(kRows * width), kBlank);
    pad.place(0, a);
    pad.place(1, b);
    pad.pointers_.fill(width - 1);
    return pad;
  }

  static AdditionPad reset(unsigned long long a, unsigned long long b) {
    return reset(std::to_string(a), std::to_string(b));
  }

  int width() const { return width_; }
  int cell(int row, int col) const {
    if (row < 0 || row >= kRows || col < 0 || col >= width_) throw std::out_of_range("addition: cell out of range");
    return at(row, col);
  }
  int pointer(int p) const { return pointers_.at(p); }
  bool at_start(int p) const { return pointers_.at(p) == 0; }
  bool at_end(int p) const { return pointers_.at(p) == width() - 1; }

  // Applies one ACT. Moves past an edge clamp; WRITE is legal only through the
  // carry and output pointers. Throws EnvironmentError on illegal actions.
  void step(const Arguments& args) {
    const int ptr = args[0];
    if (ptr < 0 || ptr >= kRows)
      throw EnvironmentError("addition: pointer id " + std::to_string(ptr) + " out of range");
    switch (args[1]) {
      case action::kLeft:
        pointers_[ptr] = std::max(0, pointers_[ptr] - 1);
        break;
      case action::kRight:
        pointers_[ptr] = std::min(width() - 1, pointers_[ptr] + 1);
        break;
      case action::kWrite: {
        if (ptr < 2) throw EnvironmentError("addition: input rows are read-only");
        const int value = args[2];
        if (value < 0 || value > 9)
          throw EnvironmentError("addition: WRITE value " + std::to_string(value) + " is not a digit");
        at(ptr, pointers_[ptr]) = value;
        break;
      }
      default:
        throw EnvironmentError("addition: unsupported action code " + std::to_string(args[1]));
    }
  }

  Observation observe() const {
    Observation o;
    o.env = EnvKind::addition;
    o.values.reserve(kObservationLength);
    for (int r = 0; r < kRows; ++r) o.values.push_back(at(r, pointers_[r]));
    for (int r = 0; r < kRows; ++r) {
      o.values.push_back(at_start(r) ? 1 : 0);
      o.values.push_back(at_end(r) ? 1 : 0);
    }
    return o;
  }

  static Vec features(const Observation& obs, const Arguments& args) {
    if (obs.env != EnvKind::addition || obs.values.size() != kObservationLength)
      throw ConfigError("addition features: malformed observation");
    Vec f = Vec::Zero(kFeatureWidth);
    for (int r = 0; r < kRows; ++r) f[r * kCellCategories + obs.values[r]] = 1.0;
    for (int k = 0; k < 2 * kRows; ++k) f[kRows * kCellCategories + k] = obs.values[kRows + k];
    append_arguments(f, kRows * kCellCategories + 2 * kRows, args);
    return f;
  }

  // Digits on a row with blanks dropped, e.g. "221".
  std::string row_digits(int row) const {
    std::string s;
    for (int c = 0; c < width_; ++c)
      if (const int v = cell(row, c); v != kBlank) s += static_cast<char>('0' + v);
    return s;
  }
  std::string output() const { return row_digits(3); }

  // "_96/125/____/____@3,3,3,3"
  std::string describe() const {
    std::string s;
    for (int r = 0; r < kRows; ++r) {
      if (r) s += '/';
      for (int c = 0; c < width_; ++c) s += at(r, c) == kBlank ? '_' : static_cast<char>('0' + at(r, c));
    }
    s += '@';
    for (int r = 0; r < kRows; ++r) {
      if (r) s += ',';
      s += std::to_string(pointers_[r]);
    }
    return s;
  }

  // Accepts either "a+b" or the full form produced by describe().
  static AdditionPad parse(std::string_view text) {
    const auto plus = text.find('+');
    if (plus != std::string_view::npos) return reset(text.substr(0, plus), text.substr(plus + 1));
    const auto at = text.find('@');
    if (at == std::string_view::npos) throw InputError("addition: cannot parse '" + std::string(text) + "'");
    AdditionPad pad;
    std::array<std::vector<int>, kRows> cells;
    std::string_view rows = text.substr(0, at);
    for (int r = 0; r < kRows; ++r) {
      const auto slash = rows.find('/');
      std::string_view row = r + 1 < kRows ? rows.substr(0, slash) : rows;
      if (r + 1 < kRows && slash == std::string_view::npos)
        throw InputError("addition: expected 4 rows in '" + std::string(text) + "'");
      for (char ch : row) {
        if (ch == '_') cells[r].push_back(kBlank);
        else if (std::isdigit(static_cast<unsigned char>(ch))) cells[r].push_back(ch - '0');
        else throw InputError("addition: bad cell '" + std::string(1, ch) + "'");
      }
      if (r + 1 < kRows) rows.remove_prefix(slash + 1);
    }
    const auto w = cells[0].size();
    if (w == 0) throw InputError("addition: empty pad");
    for (const auto& row : cells)
      if (row.size() != w) throw InputError("addition: ragged rows");
    pad.width_ = static_cast<int>(w);
    for (const auto& row : cells) pad.cells_.insert(pad.cells_.end(), row.begin(), row.end());
    std::string_view ptrs = text.substr(at + 1);
    for (int r = 0; r < kRows; ++r) {
      const auto comma = ptrs.find(',');
      const std::string tok(r + 1 < kRows ? ptrs.substr(0, comma) : ptrs);
      if (tok.empty() || (r + 1 < kRows && comma == std::string_view::npos))
        throw InputError("addition: expected 4 pointers");
      pad.pointers_[r] = std::stoi(tok);
      if (pad.pointers_[r] < 0 || pad.pointers_[r] >= static_cast<int>(w))
        throw InputError("addition: pointer out of range");
      if (r + 1 < kRows) ptrs.remove_prefix(comma + 1);
    }
    return pad;
  }

  friend bool operator==(const AdditionPad&, const AdditionPad&) = default;

 private:
  static void check_digits(std::string_view s) {
    if (s.empty()) throw InputError("addition: empty operand");
    for (char ch : s)
      if (!std::isdigit(static_cast<unsigned char>(ch)))
        throw InputError("addition: operand '" + std::string(s) + "' is not a digit string");
  }
  void place(int row, std::string_view digits) {
    const int off = width_ - static_cast<int>(digits.size());
    for (std::size_t i = 0; i < digits.size(); ++i) at(row, off + static_cast<int>(i)) = digits[i] - '0';
  }
  int& at(int row, int col) { return cells_[static_cast<std::size_t>(row * width_ + col)]; }
  int at(int row, int col) const { return cells_[static_cast<std::size_t>(row * width_ + col)]; }

  std::vector<int> cells_;  // row-major, kRows x width_
  int width_ = 0;
  std::array<int, kRows> pointers_{};
};

}  // namespace npi
