#pragma once

#include <algorithm>
#include <string>
#include <string_view>
#include <variant>

#include "npi/addition_env.hpp"
#include "npi/pose_env.hpp"
#include "npi/sort_env.hpp"

namespace npi {

using Environment = std::variant<AdditionPad, SortPad, PoseState>;

inline EnvKind kind_of(const Environment& env) {
  return static_cast<EnvKind>(env.index());
}

inline Observation observe(const Environment& env) {
  return std::visit([](const auto& e) { return e.observe(); }, env);
}

// f_env. Throws EnvironmentError on illegal actions.
inline void apply_act(Environment& env, const Arguments& args) {
  std::visit([&](auto& e) { e.step(args); }, env);
}

// Like apply_act, but an illegal action leaves the state untouched and
// reports false. Used by the interpreter so that rollouts stay total.
inline bool try_apply_act(Environment& env, const Arguments& args) {
  try {
    apply_act(env, args);
    return true;
  } catch (const EnvironmentError&) {
    return false;
  }
}

inline std::string describe(const Environment& env) {
  return std::visit([](const auto& e) { return e.describe(); }, env);
}

inline Environment parse_environment(EnvKind kind, std::string_view text) {
  switch (kind) {
    case EnvKind::addition: return AdditionPad::parse(text);
    case EnvKind::sorting: return SortPad::parse(text);
    case EnvKind::pose: return PoseState::parse(text);
  }
  throw InputError("unknown environment kind");
}

inline int feature_width(EnvKind kind) {
  switch (kind) {
    case EnvKind::addition: return AdditionPad::kFeatureWidth;
    case EnvKind::sorting: return SortPad::kFeatureWidth;
    case EnvKind::pose: return PoseState::kFeatureWidth;
  }
  return 0;
}

inline std::size_t observation_length(EnvKind kind) {
  switch (kind) {
    case EnvKind::addition: return AdditionPad::kObservationLength;
    case EnvKind::sorting: return SortPad::kObservationLength;
    case EnvKind::pose: return PoseState::kObservationLength;
  }
  return 0;
}

// Raw, pre-encoder feature vector for an observation and the current arguments.
inline Vec features(const Observation& obs, const Arguments& args) {
  switch (obs.env) {
    case EnvKind::addition: return AdditionPad::features(obs, args);
    case EnvKind::sorting: return SortPad::features(obs, args);
    case EnvKind::pose: return PoseState::features(obs, args);
  }
  throw ConfigError("unknown environment kind");
}

// Task families: which environment they run in and which program solves them.
enum class Task { add, sort, go_to, max };

inline constexpr Task kAllTasks[] = {Task::add, Task::sort, Task::go_to, Task::max};

inline std::string to_string(Task t) {
  switch (t) {
    case Task::add: return "add";
    case Task::sort: return "sort";
    case Task::go_to: return "goto";
    case Task::max: return "max";
  }
  return "?";
}

inline Task task_from_string(std::string_view s) {
  if (s == "add" || s == "addition") return Task::add;
  if (s == "sort" || s == "sorting") return Task::sort;
  if (s == "goto" || s == "pose") return Task::go_to;
  if (s == "max") return Task::max;
  throw InputError("unknown task '" + std::string(s) + "'");
}

inline EnvKind env_of(Task t) {
  switch (t) {
    case Task::add: return EnvKind::addition;
    case Task::sort:
    case Task::max: return EnvKind::sorting;
    case Task::go_to: return EnvKind::pose;
  }
  return EnvKind::addition;
}

inline std::string top_program(Task t) {
  switch (t) {
    case Task::add: return "ADD";
    case Task::sort: return "BUBBLESORT";
    case Task::go_to: return "GOTO";
    case Task::max: return "MAX";
  }
  return "";
}

// Decimal addition on digit strings of any length.
inline std::string add_decimal(std::string_view a, std::string_view b) {
  std::string out;
  int carry = 0;
  for (std::size_t i = 0; i < std::max(a.size(), b.size()) || carry; ++i) {
    int s = carry;
    if (i < a.size()) s += a[a.size() - 1 - i] - '0';
    if (i < b.size()) s += b[b.size() - 1 - i] - '0';
    out.push_back(static_cast<char>('0' + s % 10));
    carry = s / 10;
  }
  while (out.size() > 1 && out.back() == '0') out.pop_back();
  std::reverse(out.begin(), out.end());
  return out;
}

inline std::string strip_leading_zeros(std::string s) {
  const auto nz = s.find_first_not_of('0');
  return nz == std::string::npos ? (s.empty() ? s : std::string("0")) : s.substr(nz);
}

// Per-sequence correctness judged on the final environment state.
inline bool task_solved(Task task, const Environment& initial, const Environment& final_env) {
  if (kind_of(initial) != env_of(task) || kind_of(final_env) != env_of(task)) return false;
  switch (task) {
    case Task::add: {
      const auto& a = std::get<AdditionPad>(initial);
      const auto& f = std::get<AdditionPad>(final_env);
      return f.output() == add_decimal(a.row_digits(0), a.row_digits(1));
    }
    case Task::sort: {
      auto expected = std::get<SortPad>(initial).cells();
      std::sort(expected.begin(), expected.end());
      return std::get<SortPad>(final_env).cells() == expected;
    }
    case Task::go_to:
      return std::get<PoseState>(final_env).at_target();
    case Task::max: {
      const auto& cells = std::get<SortPad>(initial).cells();
      return std::get<SortPad>(final_env).value_at(0) == *std::max_element(cells.begin(), cells.end());
    }
  }
  return false;
}

}  // namespace npi
