#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "npi/interpreter.hpp"
#include "npi/oracles.hpp"

namespace npi {

struct EvalRow {
  std::string task;
  int size = 0;
  int instances = 0;
  double accuracy = 0.0;     // per-sequence: final environment correct
  double exact_match = 0.0;  // emitted trace equals the oracle trace
  double mean_steps = 0.0;
};

// Seed for the instances of one (task, size) cell, so that every model
// evaluated with the same seed sees the same problems.
inline std::uint64_t cell_seed(std::uint64_t seed, Task task, int size) {
  return seed * 1000003ull + static_cast<std::uint64_t>(task) * 7919ull + static_cast<std::uint64_t>(size);
}

inline std::vector<Environment> eval_instances(Task task, int size, int count, std::uint64_t seed) {
  Rng rng(cell_seed(seed, task, size));
  std::vector<Environment> out;
  for (int i = 0; i < count; ++i) out.push_back(random_instance(task, size, rng));
  return out;
}

inline EvalRow evaluate_instances(const Npi& model, Task task, int size, const std::vector<Environment>& instances,
                                  const RunLimits& limits) {
  EvalRow row{to_string(task), size, static_cast<int>(instances.size()), 0, 0, 0};
  if (instances.empty()) return row;
  double ok = 0, exact = 0, steps = 0;
  for (const auto& env : instances) {
    const ExecutionResult res = run_task(model, task, env, limits);
    const bool solved = res.halt == HaltReason::normal && task_solved(task, env, res.final_env);
    ok += solved;
    exact += res.halt == HaltReason::normal && res.trace.steps == oracle_for(task, env).steps;
    steps += static_cast<double>(res.steps());
  }
  const double n = static_cast<double>(instances.size());
  row.accuracy = ok / n;
  row.exact_match = exact / n;
  row.mean_steps = steps / n;
  return row;
}

inline EvalRow evaluate(const Npi& model, Task task, int size, int count, std::uint64_t seed, const RunLimits& limits) {
  return evaluate_instances(model, task, size, eval_instances(task, size, count, seed), limits);
}

}  // namespace npi
