#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "npi/adam.hpp"
#include "npi/checkpoint.hpp"
#include "npi/model.hpp"
#include "npi/trace.hpp"

namespace npi {

// ---- Segments -------------------------------------------------------------

// One teacher-forced step in compact form.
struct SegmentStep {
  std::array<std::int8_t, 12> obs{};
  std::array<std::int8_t, 3> args{};
  std::array<std::int8_t, 3> next_args{};
  std::int16_t next = -1;  // memory row of the next program, -1 on return steps
  bool ret = false;
};

// The own steps of one program invocation, run from a zero core state.
struct Segment {
  EnvKind env = EnvKind::addition;
  int row = 0;
  std::size_t offset = 0;
  std::size_t length = 0;
};

// Training examples cut from traces, grouped by program.
class SegmentSet {
 public:
  SegmentSet() = default;
  SegmentSet(const ProgramMemory& memory, const std::vector<Trace>& traces) {
    for (const auto& t : traces) add(memory, t);
  }

  void add(const ProgramMemory& memory, const Trace& trace) {
    const EnvKind env = env_of(task_from_string(trace.task));
    for (const auto& call : trace.calls) {
      const int row = lookup(memory, call.program, env);
      Segment seg{env, row, steps_.size(), 0};
      for (std::size_t i : own_steps(trace, call)) {
        const TraceStep& s = trace.steps[i];
        SegmentStep c;
        if (s.obs.values.size() > c.obs.size()) throw DataError("observation too long for a segment step");
        for (std::size_t k = 0; k < s.obs.values.size(); ++k) c.obs[k] = static_cast<std::int8_t>(s.obs.values[k]);
        for (int k = 0; k < 3; ++k) {
          c.args[k] = static_cast<std::int8_t>(s.args[k]);
          c.next_args[k] = static_cast<std::int8_t>(s.next_args[k]);
        }
        c.ret = s.ret;
        if (!s.ret) {
          c.next = static_cast<std::int16_t>(lookup(memory, s.next_program, env));
          callees_.insert(c.next);
        }
        steps_.push_back(c);
      }
      seg.length = steps_.size() - seg.offset;
      if (seg.length == 0) continue;
      by_program_[row].push_back(segments_.size());
      segments_.push_back(seg);
    }
  }

  const std::vector<Segment>& segments() const { return segments_; }
  const std::map<int, std::vector<std::size_t>>& by_program() const { return by_program_; }
  const SegmentStep& step(std::size_t i) const { return steps_[i]; }
  bool empty() const { return segments_.empty(); }
  std::size_t total_steps() const { return steps_.size(); }

  // Rows that some step calls.
  const std::set<int>& callees() const { return callees_; }

  std::vector<int> programs() const {
    std::vector<int> rows;
    for (const auto& [r, _] : by_program_) rows.push_back(r);
    return rows;
  }

  static Observation observation(const SegmentStep& s, EnvKind env) {
    Observation o;
    o.env = env;
    const std::size_t n = observation_length(env);
    o.values.resize(n);
    for (std::size_t k = 0; k < n; ++k) o.values[k] = s.obs[k];
    return o;
  }
  static Arguments arguments(const std::array<std::int8_t, 3>& a) { return Arguments::of(a[0], a[1], a[2]); }

 private:
  static int lookup(const ProgramMemory& memory, const std::string& name, EnvKind env) {
    const int r = memory.find(name, env);
    if (r < 0) throw DataError("trace references unregistered program " + name + " (" + to_string(env) + ")");
    return r;
  }

  std::vector<SegmentStep> steps_;
  std::vector<Segment> segments_;
  std::map<int, std::vector<std::size_t>> by_program_;
  std::set<int> callees_;
};

// ---- Loss -----------------------------------------------------------------

struct LossWeights {
  double program = 1.0;
  double args = 1.0;
  double end = 1.0;
};

struct LossBreakdown {
  double program = 0.0;
  double args = 0.0;
  double end = 0.0;
  std::size_t steps = 0;
  double total() const { return program + args + end; }
  LossBreakdown& operator+=(const LossBreakdown& o) {
    program += o.program;
    args += o.args;
    end += o.end;
    steps += o.steps;
    return *this;
  }
};

// Scratch buffers reused across segments.
struct SegmentWorkspace {
  std::vector<StepCache> caches;
  std::vector<StepOutput> outputs;
};

namespace detail {

inline int candidate_index(const std::vector<int>& candidates, int row) {
  for (std::size_t c = 0; c < candidates.size(); ++c)
    if (candidates[c] == row) return static_cast<int>(c);
  return -1;
}

}  // namespace detail

// Teacher-forced loss of one segment. Accumulates gradients into the model
// when `backward` is set. Program loss is taken on call steps only; the
// argument and end losses on every step. The program softmax runs over
// `restrict_to` when given, otherwise over every row the program can see.
inline LossBreakdown segment_loss(Npi& model, const SegmentSet& data, const Segment& seg, const LossWeights& w,
                                  bool backward, SegmentWorkspace& ws, const std::vector<int>* restrict_to = nullptr) {
  const auto& candidates = restrict_to ? *restrict_to : model.memory().visible_rows(seg.row);
  if (ws.caches.size() < seg.length) {
    ws.caches.resize(seg.length);
    ws.outputs.resize(seg.length);
  }
  LossBreakdown loss;
  loss.steps = seg.length;
  LstmState state = model.zero_state();
  std::vector<StepGrad> grads(seg.length);
  for (std::size_t t = 0; t < seg.length; ++t) {
    const SegmentStep& s = data.step(seg.offset + t);
    const Vec f = features(SegmentSet::observation(s, seg.env), SegmentSet::arguments(s.args));
    ws.outputs[t] = model.step(f, seg.env, seg.row, state, candidates, &ws.caches[t]);
    const StepOutput& out = ws.outputs[t];
    StepGrad& g = grads[t];
    if (!s.ret && w.program != 0.0) {
      const int target = detail::candidate_index(candidates, s.next);
      if (target < 0)
        throw DataError(model.memory().info(seg.row).name + " cannot call " + model.memory().info(s.next).name);
      const auto x = softmax_xent(out.scores, target);
      loss.program += w.program * x.loss;
      g.scores = w.program * x.grad;
    }
    if (w.args != 0.0)
      for (int k = 0; k < 3; ++k) {
        const auto x = softmax_xent(out.arg_logits[k], s.next_args[k]);
        loss.args += w.args * x.loss;
        g.args[k] = w.args * x.grad;
      }
    if (w.end != 0.0) {
      const auto b = sigmoid_bce(out.end_logit, s.ret ? 1 : 0);
      loss.end += w.end * b.loss;
      g.end_logit = w.end * b.grad;
    }
  }
  if (backward) {
    LstmState carry = model.zero_state();
    for (std::size_t t = seg.length; t-- > 0;) model.backward_step(ws.caches[t], ws.outputs[t], grads[t], carry);
  }
  return loss;
}

// Step loss over a whole trace: every invocation is one segment.
inline LossBreakdown trace_loss(Npi& model, const Trace& trace, const LossWeights& w = {}, bool backward = true) {
  SegmentSet data(model.memory(), {trace});
  SegmentWorkspace ws;
  LossBreakdown total;
  for (const auto& seg : data.segments()) total += segment_loss(model, data, seg, w, backward, ws);
  return total;
}

// ---- Error estimation and curriculum ---------------------------------------

// Mean step-level 0/1 error of each program over (at most `max_segments` of)
// its segments. A step is wrong when the next program (on call steps), any
// argument slot, or the thresholded end flag disagrees with the target.
inline std::map<int, double> estimate_errors(const Npi& model, const SegmentSet& heldout, std::size_t max_segments = 16) {
  std::map<int, double> errors;
  for (const auto& [row, ids] : heldout.by_program()) {
    const auto& candidates = model.memory().visible_rows(row);
    std::size_t wrong = 0, total = 0;
    const std::size_t n = std::min(ids.size(), max_segments);
    for (std::size_t j = 0; j < n; ++j) {
      const Segment& seg = heldout.segments()[ids[j]];
      LstmState state = model.zero_state();
      for (std::size_t t = 0; t < seg.length; ++t) {
        const SegmentStep& s = heldout.step(seg.offset + t);
        const Vec f = features(SegmentSet::observation(s, seg.env), SegmentSet::arguments(s.args));
        const StepOutput out = model.step(f, seg.env, seg.row, state, candidates);
        bool bad = (out.r >= 0.5) != s.ret;
        if (!s.ret) bad = bad || candidates[static_cast<std::size_t>(argmax(out.scores))] != s.next;
        for (int k = 0; k < 3; ++k) bad = bad || argmax(out.arg_logits[k]) != s.next_args[k];
        wrong += bad;
        ++total;
      }
    }
    errors[row] = total ? static_cast<double>(wrong) / static_cast<double>(total) : 0.0;
  }
  return errors;
}

// Uniform double in [0, 1) from the raw generator output; identical on every
// standard library.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::size_t uniform_index(std::size_t n, Rng& rng) {
  return std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
}

// Sampling distribution over programs: softmax(error / temperature).
class Curriculum {
 public:
  Curriculum() = default;
  Curriculum(std::vector<int> programs, double temperature) : programs_(std::move(programs)), temperature_(temperature) {
    if (programs_.empty()) throw ConfigError("curriculum needs at least one program");
    if (!(temperature > 0.0)) throw ConfigError("curriculum temperature must be positive");
    errors_.assign(programs_.size(), 0.0);
    recompute();
  }

  void set_errors(const std::map<int, double>& errors) {
    for (std::size_t i = 0; i < programs_.size(); ++i) {
      const auto it = errors.find(programs_[i]);
      errors_[i] = it == errors.end() ? 0.0 : it->second;
      if (errors_[i] < 0.0) throw ConfigError("curriculum errors must be nonnegative");
    }
    recompute();
  }

  int sample(Rng& rng) const {
    const double u = uniform01(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
      acc += probs_[i];
      if (u < acc) return programs_[i];
    }
    return programs_.back();
  }

  const std::vector<int>& programs() const { return programs_; }
  const std::vector<double>& probabilities() const { return probs_; }
  const std::vector<double>& errors() const { return errors_; }
  double temperature() const { return temperature_; }

 private:
  void recompute() {
    Vec z(static_cast<Eigen::Index>(errors_.size()));
    for (std::size_t i = 0; i < errors_.size(); ++i) z[static_cast<Eigen::Index>(i)] = errors_[i] / temperature_;
    const Vec p = softmax(z);
    probs_.assign(p.data(), p.data() + p.size());
  }

  std::vector<int> programs_;
  double temperature_ = 1.0;
  std::vector<double> errors_;
  std::vector<double> probs_;
};

// ---- Training loop ----------------------------------------------------------

struct TrainConfig {
  AdamConfig adam;
  int batch_size = 1;
  double temperature = 1.0;
  long reestimate_interval = 1000;
  LossWeights weights;
  long max_steps = 200000;
  std::uint64_t seed = 1;
  double stop_error = 0.01;   // early stop when every program is below this
  int stop_patience = 2;      // ... for this many consecutive estimations
  std::size_t heldout_segments = 16;
  // Program softmax only over rows that the training data calls. Keys of
  // programs that are never called (top-level ones) then get no gradient.
  bool called_only = false;
  std::string metrics_path;      // CSV, optional
  std::string checkpoint_path;   // written at every estimation, optional
};

struct TrainReport {
  long steps = 0;
  bool early_stopped = false;
  std::map<int, double> final_errors;
  std::vector<std::string> metrics_rows;
};

inline constexpr int kMetricsSchema = 1;

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string metrics_header(const ProgramMemory& mem, const std::vector<int>& programs) {
  std::string h = "schema,step,lr,loss_total,loss_program,loss_args,loss_end";
  for (int r : programs) h += ",err." + to_string(mem.info(r).env) + "." + mem.info(r).name;
  return h;
}

// Parameters copied at the last estimation, restored when a NaN appears.
inline std::vector<Tensor2> snapshot(const ParamList& params) {
  std::vector<Tensor2> s;
  for (const auto* p : params) s.push_back(p->value);
  return s;
}

inline void restore(const ParamList& params, const std::vector<Tensor2>& s) {
  for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = s[k];
}

struct LoopHooks {
  std::function<bool(Rng&, int&)> pick;  // picks a program row; false to use the curriculum
  std::function<void()> after_backward;  // gradient surgery before the update
};

inline TrainReport train_loop(Npi& model, const SegmentSet& data, const SegmentSet& heldout, const TrainConfig& cfg,
                              const std::vector<int>& curriculum_programs, const LoopHooks& hooks) {
  if (data.empty()) throw ConfigError("training set is empty");
  if (cfg.batch_size < 1 || cfg.reestimate_interval < 1) throw ConfigError("batch size and estimation interval must be positive");
  const ParamList params = model.parameters();
  Adam adam(params, cfg.adam);
  Curriculum curriculum(curriculum_programs, cfg.temperature);
  Rng rng(cfg.seed);
  SegmentWorkspace ws;
  TrainReport report;

  std::ofstream metrics;
  if (!cfg.metrics_path.empty()) {
    metrics.open(cfg.metrics_path);
    if (!metrics) throw ConfigError("cannot write metrics file " + cfg.metrics_path);
  }
  const std::string header = metrics_header(model.memory(), curriculum.programs());
  report.metrics_rows.push_back(header);
  if (metrics) metrics << header << '\n';

  std::map<int, std::vector<int>> restricted;
  if (cfg.called_only)
    for (int r : data.programs()) {
      auto& v = restricted[r];
      for (int c : model.memory().visible_rows(r))
        if (data.callees().count(c)) v.push_back(c);
    }

  auto good = snapshot(params);
  LossBreakdown window;
  int calm = 0;
  for (long step = 0; step < cfg.max_steps; ++step) {
    if (step % cfg.reestimate_interval == 0) {
      curriculum.set_errors(estimate_errors(model, heldout.empty() ? data : heldout, cfg.heldout_segments));
      good = snapshot(params);
      if (!cfg.checkpoint_path.empty()) save_checkpoint(model, cfg.checkpoint_path);
    }
    zero_grads(params);
    for (int b = 0; b < cfg.batch_size; ++b) {
      int row = -1;
      if (!(hooks.pick && hooks.pick(rng, row))) row = curriculum.sample(rng);
      const auto& ids = data.by_program().at(row);
      const Segment& seg = data.segments()[ids[uniform_index(ids.size(), rng)]];
      window += segment_loss(model, data, seg, cfg.weights, true, ws, cfg.called_only ? &restricted.at(row) : nullptr);
    }
    if (hooks.after_backward) hooks.after_backward();
    try {
      adam.step(params);
    } catch (const NumericError&) {
      restore(params, good);
      if (!cfg.checkpoint_path.empty()) save_checkpoint(model, cfg.checkpoint_path);
      throw;
    }
    report.steps = step + 1;

    if ((step + 1) % cfg.reestimate_interval == 0 || step + 1 == cfg.max_steps) {
      const auto errors = estimate_errors(model, heldout.empty() ? data : heldout, cfg.heldout_segments);
      report.final_errors = errors;
      const double n = static_cast<double>(std::max<std::size_t>(window.steps, 1));
      std::string row = std::to_string(kMetricsSchema) + "," + std::to_string(step + 1) + "," + fmt(adam.effective_lr(step)) +
                        "," + fmt(window.total() / n) + "," + fmt(window.program / n) + "," + fmt(window.args / n) +
                        "," + fmt(window.end / n);
      bool all_low = true;
      for (int r : curriculum.programs()) {
        const double e = errors.count(r) ? errors.at(r) : 0.0;
        row += "," + fmt(e);
        all_low = all_low && e < cfg.stop_error;
      }
      report.metrics_rows.push_back(row);
      if (metrics) metrics << row << '\n' << std::flush;
      window = LossBreakdown{};
      calm = all_low ? calm + 1 : 0;
      if (calm >= cfg.stop_patience) {
        report.early_stopped = true;
        break;
      }
    }
  }
  if (!cfg.checkpoint_path.empty()) save_checkpoint(model, cfg.checkpoint_path);
  return report;
}

}  // namespace detail

// Trains every program that has segments in `data`, sampling programs by the
// adaptive curriculum and estimating errors on `heldout`.
inline TrainReport train(Npi& model, const SegmentSet& data, const SegmentSet& heldout, const TrainConfig& cfg) {
  return detail::train_loop(model, data, heldout, cfg, data.programs(), {});
}

// Learns new programs (memory rows >= first_new_row) with every other
// parameter frozen. Segments of older programs in `data` are replayed with
// probability `replay_ratio`. Throws std::logic_error if any frozen value
// changes.
inline TrainReport train_fixed_core(Npi& model, int first_new_row, const SegmentSet& data, const SegmentSet& heldout,
                                    const TrainConfig& cfg, double replay_ratio = 0.0) {
  if (first_new_row < 0 || first_new_row > model.memory().size()) throw ConfigError("first new row out of range");
  std::vector<int> fresh, replay;
  for (int r : data.programs()) (r >= first_new_row ? fresh : replay).push_back(r);
  if (fresh.empty()) return TrainReport{};

  model.freeze_core(true);
  const ParamList params = model.parameters();
  std::vector<std::uint64_t> frozen_sums;
  for (const auto* p : params) frozen_sums.push_back(p->frozen ? checksum(p->value) : 0);
  const Tensor2 old_keys = model.memory().keys().value.topRows(first_new_row);
  const Tensor2 old_embeddings = model.memory().embeddings().value.topRows(first_new_row);

  detail::LoopHooks hooks;
  if (!replay.empty() && replay_ratio > 0.0)
    hooks.pick = [&](Rng& rng, int& row) {
      if (uniform01(rng) >= replay_ratio) return false;
      row = replay[uniform_index(replay.size(), rng)];
      return true;
    };
  hooks.after_backward = [&]() {
    for (const auto* p : params)
      if (p->frozen && !p->grad.isZero(0.0)) throw std::logic_error("gradient leaked into frozen block " + p->name);
    model.memory().keys().grad.topRows(first_new_row).setZero();
    model.memory().embeddings().grad.topRows(first_new_row).setZero();
  };

  TrainReport report;
  try {
    report = detail::train_loop(model, data, heldout, cfg, fresh, hooks);
  } catch (...) {
    model.freeze_core(false);
    throw;
  }
  for (std::size_t k = 0; k < params.size(); ++k)
    if (params[k]->frozen && checksum(params[k]->value) != frozen_sums[k])
      throw std::logic_error("frozen block " + params[k]->name + " changed during fixed-core training");
  if (model.memory().keys().value.topRows(first_new_row) != old_keys ||
      model.memory().embeddings().value.topRows(first_new_row) != old_embeddings)
    throw std::logic_error("existing memory rows changed during fixed-core training");
  model.freeze_core(false);
  return report;
}

}  // namespace npi
