#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "npi/environment.hpp"

namespace npi {

inline const std::string kActName = "ACT";

// One core step: the inputs (observation, running program, its arguments)
// and the supervision targets (next program, next arguments, return flag).
// A return step calls nothing; its next_program is empty and next_args DEFAULT.
struct TraceStep {
  int depth = 0;
  std::string program;
  Arguments args;
  Observation obs;
  std::string next_program;
  Arguments next_args;
  bool ret = false;

  bool calls_act() const { return !ret && next_program == kActName; }
  bool calls_program() const { return !ret && !next_program.empty() && next_program != kActName; }
  friend bool operator==(const TraceStep&, const TraceStep&) = default;
};

// A program invocation occupies the contiguous span [begin, end) of the flat
// step list; its own steps are the ones in the span at its depth.
struct Invocation {
  std::string program;
  Arguments args;
  int depth = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
  friend bool operator==(const Invocation&, const Invocation&) = default;
};

struct Trace {
  std::string task;  // "add", "sort", "goto", "max"
  std::string init;  // full description of the initial environment
  std::vector<TraceStep> steps;
  std::vector<Invocation> calls;

  friend bool operator==(const Trace&, const Trace&) = default;
};

// Recomputes the invocation spans from step depths. Calls are listed in
// order of entry (pre-order). Unclosed invocations extend to the end.
inline std::vector<Invocation> rebuild_invocations(const std::vector<TraceStep>& steps) {
  std::vector<Invocation> calls;
  std::vector<std::size_t> open;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    while (static_cast<int>(open.size()) > s.depth + 1) {
      calls[open.back()].end = i;
      open.pop_back();
    }
    if (static_cast<int>(open.size()) == s.depth) {
      calls.push_back(Invocation{s.program, s.args, s.depth, i, steps.size()});
      open.push_back(calls.size() - 1);
    }
    if (s.ret && !open.empty() && calls[open.back()].depth == s.depth) {
      calls[open.back()].end = i + 1;
      open.pop_back();
    }
  }
  return calls;
}

// Indices of the steps executed by the invocation itself (not its callees).
inline std::vector<std::size_t> own_steps(const Trace& trace, const Invocation& call) {
  std::vector<std::size_t> idx;
  for (std::size_t i = call.begin; i < call.end; ++i)
    if (trace.steps[i].depth == call.depth) idx.push_back(i);
  return idx;
}

inline Environment initial_environment(const Trace& trace) {
  return parse_environment(env_of(task_from_string(trace.task)), trace.init);
}

// Cuts out one invocation as a standalone trace. The initial environment is
// obtained by replaying the ACTs that precede the invocation.
inline Trace extract_subtrace(const Trace& trace, std::size_t call_index) {
  const Invocation& call = trace.calls.at(call_index);
  Environment env = initial_environment(trace);
  for (std::size_t i = 0; i < call.begin; ++i)
    if (trace.steps[i].calls_act()) apply_act(env, trace.steps[i].next_args);
  Trace sub;
  sub.task = trace.task;
  sub.init = describe(env);
  for (std::size_t i = call.begin; i < call.end; ++i) {
    TraceStep s = trace.steps[i];
    s.depth -= call.depth;
    sub.steps.push_back(std::move(s));
  }
  sub.calls = rebuild_invocations(sub.steps);
  return sub;
}

// Records oracle executions: every program body issues act/call steps and
// finishes with ret().
class TraceBuilder {
 public:
  // With record off only the environment is driven; no steps are kept.
  TraceBuilder(Task task, Environment env, bool record = true) : env_(std::move(env)), record_(record) {
    if (!record_) return;
    frames_.reserve(8);
    trace_.task = to_string(task);
    trace_.init = describe(env_);
  }

  const Environment& env() const { return env_; }

  template <class Body>
  void invoke(const std::string& program, const Arguments& args, Body&& body) {
    if (!record_) {
      body();
      return;
    }
    frames_.push_back(Frame{&program, args});
    trace_.calls.push_back(Invocation{program, args, depth(), trace_.steps.size(), 0});
    const std::size_t idx = trace_.calls.size() - 1;
    body();
    trace_.calls[idx].end = trace_.steps.size();
    frames_.pop_back();
  }

  void act(const Arguments& a) {
    if (record_) record(kActName, a, false);
    apply_act(env_, a);
  }

  template <class Body>
  void call(const std::string& program, Body&& body) {
    if (record_) record(program, Arguments::none(), false);
    invoke(program, Arguments::none(), std::forward<Body>(body));
  }

  void ret() {
    if (record_) record({}, Arguments::none(), true);
  }

  Trace finish() && { return std::move(trace_); }
  Environment final_env() && { return std::move(env_); }

 private:
  struct Frame {
    const std::string* program;
    Arguments args;
  };
  int depth() const { return static_cast<int>(frames_.size()) - 1; }

  void record(const std::string& next, const Arguments& next_args, bool ret) {
    TraceStep s;
    s.depth = depth();
    s.program = *frames_.back().program;
    s.args = frames_.back().args;
    s.obs = observe(env_);
    s.next_program = next;
    s.next_args = next_args;
    s.ret = ret;
    trace_.steps.push_back(std::move(s));
  }

  Environment env_;
  bool record_ = true;
  Trace trace_;
  std::vector<Frame> frames_;
};

}  // namespace npi
