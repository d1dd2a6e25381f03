#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "npi/oracles.hpp"

namespace npi {

struct ValidationResult {
  bool ok = true;
  std::size_t step = 0;  // first divergent step when !ok
  std::string message;
  explicit operator bool() const { return ok; }
};

namespace detail {
inline bool known_program(EnvKind env, const std::string& name) {
  auto names = program_names(env);
  if (env == EnvKind::sorting)
    for (auto& n : max_program_names()) names.push_back(n);
  return std::find(names.begin(), names.end(), name) != names.end();
}
}  // namespace detail

// Replays a trace from its recorded initial environment, applying every ACT
// through f_env and checking each recorded observation, the call/return
// nesting and the placement of return flags. Uses no oracle code.
inline ValidationResult validate_trace(const Trace& trace) {
  auto fail = [](std::size_t step, std::string msg) { return ValidationResult{false, step, std::move(msg)}; };
  Environment env;
  EnvKind kind;
  try {
    kind = env_of(task_from_string(trace.task));
    env = parse_environment(kind, trace.init);
  } catch (const std::exception& e) {
    return fail(0, std::string("bad trace header: ") + e.what());
  }
  if (trace.steps.empty()) return fail(0, "empty trace");

  struct Open {
    std::string program;
    Arguments args;
  };
  std::vector<Open> stack{{trace.steps.front().program, trace.steps.front().args}};
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const TraceStep& s = trace.steps[i];
    if (stack.empty()) return fail(i, "step after the top-level program returned");
    if (s.depth != static_cast<int>(stack.size()) - 1)
      return fail(i, "nesting error: depth " + std::to_string(s.depth) + ", expected " +
                         std::to_string(stack.size() - 1));
    if (s.program != stack.back().program || !(s.args == stack.back().args))
      return fail(i, "step attributed to " + s.program + " inside invocation of " + stack.back().program);
    if (!detail::known_program(kind, s.program)) return fail(i, "unregistered program " + s.program);
    const Observation actual = observe(env);
    if (!(s.obs == actual))
      return fail(i, "observation mismatch: recorded [" + s.obs.str() + "], replayed [" + actual.str() + "]");
    if (s.ret) {
      if (!s.next_program.empty()) return fail(i, "return step also calls " + s.next_program);
      stack.pop_back();
      continue;
    }
    if (s.next_program.empty()) return fail(i, "nesting error: step neither calls nor returns");
    if (!s.next_args.valid()) return fail(i, "argument out of range");
    if (s.next_program == kActName) {
      if (!try_apply_act(env, s.next_args)) return fail(i, "illegal ACT " + s.next_args.str());
      continue;
    }
    if (!detail::known_program(kind, s.next_program)) return fail(i, "call to unregistered program " + s.next_program);
    stack.push_back(Open{s.next_program, s.next_args});
    if (i + 1 >= trace.steps.size()) return fail(i, "nesting error: call without a body");
  }
  if (!stack.empty())
    return fail(trace.steps.size() - 1, "nesting error: " + std::to_string(stack.size()) + " invocation(s) never return");
  if (!trace.calls.empty() && trace.calls != rebuild_invocations(trace.steps))
    return fail(0, "invocation segmentation does not match step depths");
  return {};
}

}  // namespace npi
