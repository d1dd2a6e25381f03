#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "npi/arguments.hpp"
#include "npi/errors.hpp"
#include "npi/tensor.hpp"

namespace npi {

enum class EnvKind { addition, sorting, pose };

inline constexpr EnvKind kAllEnvKinds[] = {EnvKind::addition, EnvKind::sorting, EnvKind::pose};

inline std::string to_string(EnvKind k) {
  switch (k) {
    case EnvKind::addition: return "addition";
    case EnvKind::sorting: return "sorting";
    case EnvKind::pose: return "pose";
  }
  return "?";
}

inline EnvKind env_kind_from_string(std::string_view s) {
  if (s == "addition") return EnvKind::addition;
  if (s == "sorting") return EnvKind::sorting;
  if (s == "pose") return EnvKind::pose;
  throw InputError("unknown environment '" + std::string(s) + "'");
}

// Compact symbolic reading of an environment: the pointed-at cells and the
// boundary flags. This is what traces store; the learned encoder turns it
// into a dense state vector.
struct Observation {
  EnvKind env = EnvKind::addition;
  std::vector<int> values;

  friend bool operator==(const Observation&, const Observation&) = default;

  std::string str() const {
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) s += ',';
      s += std::to_string(values[i]);
    }
    return s;
  }
};

// Appends one-hot encodings of the three argument slots.
inline void append_arguments(Vec& features, Eigen::Index offset, const Arguments& args) {
  for (int s = 0; s < 3; ++s) {
    const int v = args[s];
    if (v >= 0 && v < kArgVocab) features[offset + s * kArgVocab + v] = 1.0;
  }
}

}  // namespace npi
