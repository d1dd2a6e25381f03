#pragma once

#include <string>
#include <vector>

#include "npi/model.hpp"
#include "npi/trace.hpp"

namespace npi {

struct RunLimits {
  long step_budget = 100000;  // core steps per top-level run
  int max_depth = 16;         // frames on the call stack
  double threshold = 0.5;     // return when r >= threshold
};

enum class HaltReason { normal, step_budget, depth_budget };

inline std::string to_string(HaltReason h) {
  switch (h) {
    case HaltReason::normal: return "normal";
    case HaltReason::step_budget: return "step-budget";
    case HaltReason::depth_budget: return "depth-budget";
  }
  return "?";
}

struct ExecutionResult {
  Environment final_env;
  Trace trace;
  HaltReason halt = HaltReason::normal;
  long steps() const { return static_cast<long>(trace.steps.size()); }
};

// Greedy inference. Every core step either returns (r >= threshold) or
// dispatches the looked-up program: ACT changes the environment, anything
// else is entered with a fresh zero state. The caller's state is kept in its
// frame and resumes when the callee returns.
inline ExecutionResult run(const Npi& model, int program, const Arguments& args, Environment env,
                           const RunLimits& limits, const std::string& task_tag = "") {
  const ProgramMemory& mem = model.memory();
  if (program < 0 || program >= mem.size()) throw ConfigError("run: program row out of range");
  const EnvKind kind = kind_of(env);
  if (mem.info(program).env != kind)
    throw ConfigError("run: program " + mem.info(program).name + " does not run on the " + to_string(kind) + " environment");

  struct Frame {
    int row;
    Arguments args;
    LstmState state;
  };

  ExecutionResult result;
  result.trace.task = task_tag;
  result.trace.init = describe(env);
  std::vector<Frame> stack;
  stack.push_back(Frame{program, args, model.zero_state()});
  const int act_row = mem.find(kActName, kind);

  while (!stack.empty()) {
    if (result.steps() >= limits.step_budget) {
      result.halt = HaltReason::step_budget;
      break;
    }
    Frame& f = stack.back();
    TraceStep rec;
    rec.depth = static_cast<int>(stack.size()) - 1;
    rec.program = mem.info(f.row).name;
    rec.args = f.args;
    rec.obs = observe(env);
    const auto& candidates = mem.visible_rows(f.row);
    const StepOutput out = model.step(features(rec.obs, f.args), kind, f.row, f.state, candidates);

    if (out.r >= limits.threshold) {
      rec.ret = true;
      rec.next_args = Arguments::none();
      result.trace.steps.push_back(std::move(rec));
      stack.pop_back();
      continue;
    }
    const int next = candidates[static_cast<std::size_t>(argmax(out.scores))];
    Arguments next_args;
    for (int s = 0; s < 3; ++s) next_args.slot[s] = argmax(out.arg_logits[s]);
    rec.next_program = mem.info(next).name;
    rec.next_args = next_args;
    result.trace.steps.push_back(std::move(rec));

    if (next == act_row) {
      try_apply_act(env, next_args);
    } else {
      if (static_cast<int>(stack.size()) >= limits.max_depth) {
        result.halt = HaltReason::depth_budget;
        break;
      }
      stack.push_back(Frame{next, next_args, model.zero_state()});
    }
  }
  result.trace.calls = rebuild_invocations(result.trace.steps);
  result.final_env = std::move(env);
  return result;
}

// Runs a task's top-level program on an instance.
inline ExecutionResult run_task(const Npi& model, Task task, const Environment& env, const RunLimits& limits) {
  const int row = model.memory().row(top_program(task), env_of(task));
  return run(model, row, Arguments::none(), env, limits, to_string(task));
}

}  // namespace npi
