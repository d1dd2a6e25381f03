#pragma once

#include <algorithm>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "npi/trace.hpp"

namespace npi {

// Program families per environment. ACT is a separate row per environment.
inline std::vector<std::string> program_names(EnvKind env) {
  switch (env) {
    case EnvKind::addition: return {"ADD", "ADD1", "CARRY", "LSHIFT", "ACT"};
    case EnvKind::sorting: return {"BUBBLESORT", "BUBBLE", "RESET", "BSTEP", "COMPSWAP", "LSHIFT", "RSHIFT", "ACT"};
    case EnvKind::pose: return {"GOTO", "HGOTO", "LGOTO", "RGOTO", "VGOTO", "UGOTO", "DGOTO", "ACT"};
  }
  return {};
}

// Programs learned later on top of a trained sorting core.
inline std::vector<std::string> max_program_names() { return {"MAX", "RJMP"}; }

namespace detail {

inline const AdditionPad& addition(const TraceBuilder& tb) { return std::get<AdditionPad>(tb.env()); }
inline const SortPad& sorting(const TraceBuilder& tb) { return std::get<SortPad>(tb.env()); }
inline const PoseState& pose(const TraceBuilder& tb) { return std::get<PoseState>(tb.env()); }

inline int digit_value(int cell) { return cell == AdditionPad::kBlank ? 0 : cell; }

inline void add_lshift(TraceBuilder& tb) {
  for (int p = 0; p < AdditionPad::kRows; ++p) tb.act(Arguments::of(p, action::kLeft, kDefaultArg));
  tb.ret();
}

inline void add_carry(TraceBuilder& tb) {
  tb.act(Arguments::of(2, action::kLeft, kDefaultArg));
  tb.act(Arguments::of(2, action::kWrite, 1));
  tb.act(Arguments::of(2, action::kRight, kDefaultArg));
  tb.ret();
}

inline void add_add1(TraceBuilder& tb) {
  const auto& pad = addition(tb);
  const int sum = digit_value(pad.cell(0, pad.pointer(0))) + digit_value(pad.cell(1, pad.pointer(1))) +
                  digit_value(pad.cell(2, pad.pointer(2)));
  tb.act(Arguments::of(3, action::kWrite, sum % 10));
  if (sum >= 10) tb.call("CARRY", [&] { add_carry(tb); });
  tb.ret();
}

// Column loop: ADD1 on an unwritten column, LSHIFT after it, and return once
// the inputs and carry under the pointers are all blank or column 0 is done.
inline void add_add(TraceBuilder& tb) {
  for (;;) {
    const auto& pad = addition(tb);
    const auto blank = [&](int r) { return pad.cell(r, pad.pointer(r)) == AdditionPad::kBlank; };
    if (blank(0) && blank(1) && blank(2)) break;
    if (blank(3)) tb.call("ADD1", [&] { add_add1(tb); });
    else if (pad.at_start(0)) break;
    else tb.call("LSHIFT", [&] { add_lshift(tb); });
  }
  tb.ret();
}

inline void sort_rshift(TraceBuilder& tb) {
  tb.act(Arguments::of(0, action::kRight, kDefaultArg));
  if (!sorting(tb).at_end(1)) tb.act(Arguments::of(1, action::kRight, kDefaultArg));
  tb.ret();
}

inline void sort_lshift(TraceBuilder& tb) {
  tb.act(Arguments::of(0, action::kLeft, kDefaultArg));
  tb.act(Arguments::of(1, action::kLeft, kDefaultArg));
  tb.ret();
}

inline void sort_compswap(TraceBuilder& tb) {
  const auto& pad = sorting(tb);
  if (pad.value_at(0) > pad.value_at(1)) tb.act(Arguments::of(0, action::kSwap, 1));
  tb.ret();
}

inline void sort_bstep(TraceBuilder& tb) {
  tb.call("COMPSWAP", [&] { sort_compswap(tb); });
  tb.call("RSHIFT", [&] { sort_rshift(tb); });
  tb.ret();
}

// One left-to-right sweep: open the pointer pair, then BSTEP until the left
// pointer reaches the end of the array.
inline void sort_bubble(TraceBuilder& tb) {
  for (;;) {
    const auto& pad = sorting(tb);
    if (pad.at_end(0)) break;
    if (pad.at_start(1)) tb.act(Arguments::of(1, action::kRight, kDefaultArg));
    else tb.call("BSTEP", [&] { sort_bstep(tb); });
  }
  tb.ret();
}

inline void sort_reset(TraceBuilder& tb) {
  while (!sorting(tb).at_start(0)) tb.call("LSHIFT", [&] { sort_lshift(tb); });
  tb.act(Arguments::of(SortPad::kCounter, action::kRight, kDefaultArg));
  tb.ret();
}

// BUBBLE once per counter position: N sweeps for an N-element array.
inline void sort_bubblesort(TraceBuilder& tb) {
  for (;;) {
    tb.call("BUBBLE", [&] { sort_bubble(tb); });
    if (sorting(tb).at_end(SortPad::kCounter)) break;
    tb.call("RESET", [&] { sort_reset(tb); });
  }
  tb.ret();
}

inline void max_rjmp(TraceBuilder& tb) {
  while (!sorting(tb).at_end(0)) tb.call("RSHIFT", [&] { sort_rshift(tb); });
  tb.ret();
}

inline void max_max(TraceBuilder& tb) {
  tb.call("BUBBLESORT", [&] { sort_bubblesort(tb); });
  tb.call("RJMP", [&] { max_rjmp(tb); });
  tb.ret();
}

inline void pose_leaf(TraceBuilder& tb, int act, bool horizontal) {
  for (;;) {
    const auto& s = pose(tb);
    const bool done = horizontal ? s.azimuth() == s.target_azimuth() : s.elevation() == s.target_elevation();
    if (done) break;
    tb.act(Arguments::of(0, act, kDefaultArg));
  }
  tb.ret();
}

// Shortest wrap-around direction; a 180-degree tie goes right.
inline void pose_hgoto(TraceBuilder& tb) {
  const auto& s = pose(tb);
  const int diff = PoseState::wrap(s.target_azimuth() - s.azimuth());
  if (diff != 0) {
    if (diff > PoseState::kGrid / 2) tb.call("LGOTO", [&] { pose_leaf(tb, action::kLeft, true); });
    else tb.call("RGOTO", [&] { pose_leaf(tb, action::kRight, true); });
  }
  tb.ret();
}

inline void pose_vgoto(TraceBuilder& tb) {
  const auto& s = pose(tb);
  if (s.elevation() < s.target_elevation()) tb.call("UGOTO", [&] { pose_leaf(tb, action::kUp, false); });
  else if (s.elevation() > s.target_elevation()) tb.call("DGOTO", [&] { pose_leaf(tb, action::kDown, false); });
  tb.ret();
}

inline void pose_goto(TraceBuilder& tb) {
  tb.call("HGOTO", [&] { pose_hgoto(tb); });
  tb.call("VGOTO", [&] { pose_vgoto(tb); });
  tb.ret();
}

}  // namespace detail

inline Trace oracle_add(std::string_view a, std::string_view b) {
  TraceBuilder tb(Task::add, AdditionPad::reset(a, b));
  tb.invoke("ADD", Arguments::none(), [&] { detail::add_add(tb); });
  return std::move(tb).finish();
}

inline Trace oracle_add(unsigned long long a, unsigned long long b) {
  return oracle_add(std::to_string(a), std::to_string(b));
}

inline Trace oracle_bubblesort(const std::vector<int>& array) {
  TraceBuilder tb(Task::sort, SortPad::reset(array));
  tb.invoke("BUBBLESORT", Arguments::none(), [&] { detail::sort_bubblesort(tb); });
  return std::move(tb).finish();
}

inline Trace oracle_max(const std::vector<int>& array) {
  TraceBuilder tb(Task::max, SortPad::reset(array));
  tb.invoke("MAX", Arguments::none(), [&] { detail::max_max(tb); });
  return std::move(tb).finish();
}

inline Trace oracle_goto(const PoseState& start) {
  TraceBuilder tb(Task::go_to, start);
  tb.invoke("GOTO", Arguments::none(), [&] { detail::pose_goto(tb); });
  return std::move(tb).finish();
}

inline Trace oracle_goto(int azimuth, int elevation, int target_azimuth, int target_elevation) {
  return oracle_goto(PoseState::reset(azimuth, elevation, target_azimuth, target_elevation));
}

// Drives the oracle for a task without recording anything and returns the
// final environment. Much faster than building the trace.
inline Environment oracle_final(Task task, Environment env) {
  TraceBuilder tb(task, std::move(env), false);
  switch (task) {
    case Task::add: tb.invoke("ADD", Arguments::none(), [&] { detail::add_add(tb); }); break;
    case Task::sort: tb.invoke("BUBBLESORT", Arguments::none(), [&] { detail::sort_bubblesort(tb); }); break;
    case Task::max: tb.invoke("MAX", Arguments::none(), [&] { detail::max_max(tb); }); break;
    case Task::go_to: tb.invoke("GOTO", Arguments::none(), [&] { detail::pose_goto(tb); }); break;
  }
  return std::move(tb).final_env();
}

// Runs the oracle for a task on a parsed instance description.
inline Trace oracle_for(Task task, const Environment& env) {
  switch (task) {
    case Task::add: {
      const auto& pad = std::get<AdditionPad>(env);
      return oracle_add(pad.row_digits(0), pad.row_digits(1));
    }
    case Task::sort: return oracle_bubblesort(std::get<SortPad>(env).cells());
    case Task::max: return oracle_max(std::get<SortPad>(env).cells());
    case Task::go_to: return oracle_goto(std::get<PoseState>(env));
  }
  throw InputError("unknown task");
}

// Replays a trace's ACT calls to obtain the final environment.
inline Environment final_environment(const Trace& trace) {
  Environment env = initial_environment(trace);
  for (const auto& s : trace.steps)
    if (s.calls_act()) apply_act(env, s.next_args);
  return env;
}

// ---- Random problem instances -------------------------------------------

// Canonical pose target: azimuth 0, elevation 15 degrees.
inline constexpr int kCanonicalAzimuth = 0;
inline constexpr int kCanonicalElevation = 1;

inline std::string random_number(int digits, Rng& rng) {
  std::uniform_int_distribution<int> d(0, 9), lead(1, 9);
  std::string s;
  for (int i = 0; i < digits; ++i) s += static_cast<char>('0' + (i == 0 && digits > 1 ? lead(rng) : d(rng)));
  return s;
}

inline std::vector<int> random_array(int length, Rng& rng) {
  std::uniform_int_distribution<int> d(0, 9);
  std::vector<int> a(static_cast<std::size_t>(length));
  for (auto& v : a) v = d(rng);
  return a;
}

inline int pose_distance(int azimuth, int elevation, int target_azimuth, int target_elevation) {
  const int d = PoseState::wrap(target_azimuth - azimuth);
  return std::min(d, PoseState::kGrid - d) + std::abs(target_elevation - elevation);
}

// A canonicalization start within `max_moves` grid moves of the canonical
// pose, drawn from azimuth -75..75 degrees and elevation 0..60 degrees.
inline PoseState random_pose(int max_moves, Rng& rng) {
  std::uniform_int_distribution<int> az(-5, 5), el(PoseState::kMinElevation, PoseState::kMaxElevation);
  for (;;) {
    const int a = az(rng), e = el(rng);
    if (pose_distance(a, e, kCanonicalAzimuth, kCanonicalElevation) <= max_moves)
      return PoseState::reset(a, e, kCanonicalAzimuth, kCanonicalElevation);
  }
}

// Random instance of a given size: digits per operand (add), array length
// (sort, max) or maximum move count (goto).
inline Environment random_instance(Task task, int size, Rng& rng) {
  switch (task) {
    case Task::add: {
      const std::string a = random_number(size, rng);
      const std::string b = random_number(size, rng);
      return AdditionPad::reset(a, b);
    }
    case Task::sort:
    case Task::max: return SortPad::reset(random_array(size, rng));
    case Task::go_to: return random_pose(size, rng);
  }
  throw InputError("unknown task");
}

inline Trace random_trace(Task task, int size, Rng& rng) { return oracle_for(task, random_instance(task, size, rng)); }

}  // namespace npi
