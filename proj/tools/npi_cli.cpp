// npi: trace generation, training, evaluation and experiment recipes.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "npi/experiments.hpp"
#include "npi/trace_io.hpp"
#include "npi/validate.hpp"

using namespace npi;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json read_json(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream is(path);
  if (!is) throw InputError("cannot open config '" + path + "'");
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::vector<int> parse_sizes(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto dash = item.find('-');
    try {
      if (dash != std::string::npos && dash > 0) {
        const int lo = std::stoi(item.substr(0, dash)), hi = std::stoi(item.substr(dash + 1));
        if (hi < lo) throw UsageError("bad size range '" + item + "'");
        for (int n = lo; n <= hi; ++n) out.push_back(n);
      } else {
        out.push_back(std::stoi(item));
      }
    } catch (const std::logic_error&) {
      throw UsageError("cannot parse size list '" + text + "'");
    }
  }
  for (int n : out)
    if (n < 1) throw UsageError("sizes must be positive");
  if (out.empty()) throw UsageError("empty size list");
  return out;
}

// Problem size of a parsed instance, in the units random_instance uses.
int instance_size(Task task, const Environment& env) {
  switch (task) {
    case Task::add: {
      const auto& pad = std::get<AdditionPad>(env);
      return static_cast<int>(std::max(strip_leading_zeros(pad.row_digits(0)).size(),
                                       strip_leading_zeros(pad.row_digits(1)).size()));
    }
    case Task::sort:
    case Task::max: return std::get<SortPad>(env).size();
    case Task::go_to: {
      const auto& p = std::get<PoseState>(env);
      return std::max(1, pose_distance(p.azimuth(), p.elevation(), p.target_azimuth(), p.target_elevation()));
    }
  }
  return 1;
}

std::string describe_act(EnvKind env, const Arguments& a) {
  static const char* add_rows[] = {"IN1", "IN2", "CARRY", "OUT"};
  static const char* sort_ptrs[] = {"PTR1", "PTR2", "COUNTER"};
  static const char* moves[] = {"LEFT", "RIGHT", "WRITE", "SWAP", "UP", "DOWN"};
  const int act = a[1];
  const std::string move = act >= 0 && act < 6 ? moves[act] : "?" + std::to_string(act);
  switch (env) {
    case EnvKind::addition: {
      const std::string row = a[0] >= 0 && a[0] < 4 ? add_rows[a[0]] : "?";
      if (act == action::kWrite) return "WRITE " + row + " " + std::to_string(a[2]);
      return "PTR " + row + " " + move;
    }
    case EnvKind::sorting: {
      if (act == action::kSwap) return "SWAP PTR1 PTR2";
      const std::string p = a[0] >= 0 && a[0] < 3 ? sort_ptrs[a[0]] : "?";
      return "PTR " + p + " " + move;
    }
    case EnvKind::pose: return "MOVE " + move;
  }
  return "?";
}

std::string show_args(const Arguments& a) {
  if (a.is_default()) return "";
  std::string s = "(";
  for (int i = 0; i < 3; ++i) {
    if (i) s += ",";
    s += a[i] == kDefaultArg ? "-" : a[i] == kReservedArg ? "*" : std::to_string(a[i]);
  }
  return s + ")";
}

// Nested call tree: one line per program call, ACTs spelled out.
void print_trace(std::ostream& os, const Trace& t, EnvKind env, const std::string& top) {
  os << top << "\n";
  for (const auto& s : t.steps) {
    if (s.ret) continue;
    const std::string indent(2 * static_cast<std::size_t>(s.depth + 1), ' ');
    if (s.calls_act())
      os << indent << "ACT " << describe_act(env, s.next_args) << "\n";
    else if (!s.next_program.empty())
      os << indent << s.next_program << show_args(s.next_args) << "\n";
  }
}

struct TrainFile {
  ModelConfig model = desk_model_config();
  TrainSettings train;
};

TrainFile train_file(const json& j) {
  TrainFile f;
  try {
    if (j.contains("model")) {
      json m = config_to_json(f.model);
      m.update(j.at("model"));
      f.model = config_from_json(m);
    }
    if (j.contains("train")) from_json(j.at("train"), f.train);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  f.model.validate();
  return f;
}

// Held-out traces regenerated from the oracle over the same tasks and size
// ranges as the training traces.
std::vector<Trace> heldout_like(const std::vector<Trace>& traces, std::uint64_t seed) {
  std::map<Task, std::pair<int, int>> ranges;
  for (const auto& t : traces) {
    const Task task = task_from_string(t.task);
    const int n = instance_size(task, parse_environment(env_of(task), t.init));
    auto [it, fresh] = ranges.emplace(task, std::make_pair(n, n));
    if (!fresh) it->second = {std::min(it->second.first, n), std::max(it->second.second, n)};
  }
  std::vector<Trace> out;
  for (const auto& [task, r] : ranges)
    for (auto& t : make_heldout(task, r.first, r.second, seed)) out.push_back(std::move(t));
  return out;
}

RunLimits limits_from(long budget, int depth) {
  if (budget < 1 || depth < 1) throw UsageError("step budget and depth must be positive");
  return RunLimits{budget, depth, 0.5};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural programmer-interpreter: traces, training, evaluation and experiments"};
  app.require_subcommand(1);
  std::uint64_t seed = 1;
  std::string config_path, out;

  // gen-traces
  auto* gen = app.add_subcommand("gen-traces", "Write oracle execution traces");
  std::string gen_task = "sort", gen_format;
  int gen_min = 2, gen_max = 20, gen_count = 64;
  gen->add_option("--task", gen_task, "add | sort | goto | max")->required()->check(CLI::IsMember({"add", "sort", "goto", "max"}));
  gen->add_option("--min", gen_min, "Smallest size (digits, length or max moves)");
  gen->add_option("--max", gen_max, "Largest size");
  gen->add_option("--count", gen_count, "Traces per size");
  gen->add_option("--seq-format", gen_format, "Also emit seq records: sort | add-plain | add-stacked | add-easy")
      ->check(CLI::IsMember({"sort", "add-plain", "add-stacked", "add-easy"}));
  gen->add_option("--seed", seed, "Random seed");
  gen->add_option("--out,-o", out, "Output trace file")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train a model on trace files");
  std::vector<std::string> trace_paths;
  std::string metrics_path;
  long max_steps = -1;
  tr->add_option("--traces", trace_paths, "Trace files")->required()->expected(1, -1);
  tr->add_option("--config", config_path, "JSON file with 'model' and 'train' sections");
  tr->add_option("--seed", seed, "Random seed");
  tr->add_option("--max-steps", max_steps, "Override train.max_steps");
  tr->add_option("--metrics", metrics_path, "Metrics CSV path");
  tr->add_option("--out,-o", out, "Output checkpoint")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint over a size grid");
  std::string ckpt, ev_task = "sort", ev_sizes = "2-20";
  int ev_count = 100;
  long budget = 100000;
  int depth = 16;
  std::uint64_t eval_seed = 12345;
  ev->add_option("--checkpoint,-c", ckpt, "Checkpoint file")->required();
  ev->add_option("--task", ev_task, "add | sort | goto | max")->required()->check(CLI::IsMember({"add", "sort", "goto", "max"}));
  ev->add_option("--sizes", ev_sizes, "Sizes, e.g. 2-20 or 5,10,20");
  ev->add_option("--count", ev_count, "Instances per size");
  ev->add_option("--seed", eval_seed, "Evaluation seed");
  ev->add_option("--step-budget", budget, "Core steps per run");
  ev->add_option("--max-depth", depth, "Maximum call depth");
  ev->add_option("--out,-o", out, "CSV output (default stdout)");

  // run
  auto* rn = app.add_subcommand("run", "Execute one instance and print the call tree");
  std::string rn_task, instance;
  rn->add_option("--checkpoint,-c", ckpt, "Checkpoint file")->required();
  rn->add_option("--task", rn_task, "add | sort | goto | max")->required()->check(CLI::IsMember({"add", "sort", "goto", "max"}));
  rn->add_option("--instance", instance, "e.g. 96+125, 9,2,5 or 3,0>0,1 (az,el>target az,el)")->required();
  rn->add_option("--step-budget", budget, "Core steps per run");
  rn->add_option("--max-depth", depth, "Maximum call depth");
  bool oracle_only = false;
  rn->add_flag("--oracle", oracle_only, "Print the oracle trace instead of running the model");

  // add-program
  auto* ap = app.add_subcommand("add-program", "Register new programs and train them with the core frozen");
  std::vector<std::string> names;
  std::string ap_env = "sorting";
  double replay = 0.0;
  ap->add_option("--checkpoint,-c", ckpt, "Base checkpoint")->required();
  ap->add_option("--names", names, "Program names, e.g. MAX RJMP")->required()->expected(1, -1);
  ap->add_option("--env", ap_env, "addition | sorting | pose")->check(CLI::IsMember({"addition", "sorting", "pose"}));
  ap->add_option("--traces", trace_paths, "Trace files for the new programs")->required()->expected(1, -1);
  ap->add_option("--config", config_path, "JSON file with a 'train' section");
  ap->add_option("--seed", seed, "Random seed");
  ap->add_option("--max-steps", max_steps, "Override train.max_steps");
  ap->add_option("--replay", replay, "Fraction of updates drawn from old programs");
  ap->add_option("--out,-o", out, "Output checkpoint")->required();

  // experiment
  auto* ex = app.add_subcommand("experiment", "Run a named experiment recipe");
  std::string ex_name;
  std::vector<std::uint64_t> ex_seeds;
  bool quiet = false;
  ex->add_option("name", ex_name, "sample-complexity | sort-generalization | add-generalization | multitask | fixed-core-max")
      ->required();
  ex->add_option("--config", config_path, "JSON overrides for the experiment spec");
  ex->add_option("--seed", ex_seeds, "Seeds (repeatable)");
  ex->add_option("--out,-o", out, "Output directory");
  ex->add_flag("--quiet,-q", quiet, "No progress log");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;  // --help is not an error
  }

  try {
    if (*gen) {
      const Task task = task_from_string(gen_task);
      if (gen_count < 0 || gen_min < 1 || gen_max < gen_min)
        throw UsageError("invalid range: need 1 <= --min <= --max and --count >= 0");
      const auto inst = make_instances(task, gen_min, gen_max, gen_count, seed);
      std::vector<Trace> traces = traces_for(task, inst);
      for (const auto& t : traces)
        if (const auto v = validate_trace(t); !v) throw DataError("oracle trace failed validation: " + v.message);
      std::vector<SeqRecord> seqs;
      if (!gen_format.empty())
        for (const auto& e : inst) seqs.push_back(format_record(gen_format, e));
      write_traces(out, traces, seqs);
      std::cerr << "wrote " << traces.size() << " traces";
      if (!seqs.empty()) std::cerr << " and " << seqs.size() << " seq records";
      std::cerr << " to " << out << "\n";
    } else if (*tr) {
      TrainFile f = train_file(read_json(config_path));
      f.model.seed = seed;
      Npi model = Npi::create(f.model);
      std::vector<Trace> traces;
      for (const auto& p : trace_paths)
        for (auto& t : read_trace_file(p).traces) traces.push_back(std::move(t));
      if (traces.empty()) throw DataError("no traces in the given files");
      SegmentSet data(model.memory(), traces);
      SegmentSet held(model.memory(), heldout_like(traces, seed + 1));
      TrainConfig tc = f.train.to_config(seed);
      if (max_steps >= 0) tc.max_steps = max_steps;
      tc.metrics_path = metrics_path;
      tc.checkpoint_path = out;
      const TrainReport rep = train(model, data, held, tc);
      save_checkpoint(model, out);
      std::cerr << "trained " << rep.steps << " updates" << (rep.early_stopped ? " (early stop)" : "") << ", saved "
                << out << "\n";
    } else if (*ev) {
      const Npi model = load_checkpoint(ckpt);
      const Task task = task_from_string(ev_task);
      const RunLimits lim = limits_from(budget, depth);
      std::ostringstream csv;
      csv << "schema,task,size,instances,accuracy,exact_match,mean_steps\n";
      for (int n : parse_sizes(ev_sizes)) {
        const EvalRow r = evaluate(model, task, n, ev_count, eval_seed, lim);
        csv << kResultsSchema << "," << r.task << "," << r.size << "," << r.instances << "," << detail::fmt(r.accuracy)
            << "," << detail::fmt(r.exact_match) << "," << detail::fmt(r.mean_steps) << "\n";
      }
      if (out.empty()) {
        std::cout << csv.str();
      } else {
        std::ofstream os(out, std::ios::binary);
        if (!os) throw InputError("cannot write '" + out + "'");
        os << csv.str();
      }
    } else if (*rn) {
      const Task task = task_from_string(rn_task);
      const EnvKind kind = env_of(task);
      const Environment env = parse_environment(kind, instance);
      if (oracle_only) {
        print_trace(std::cout, oracle_for(task, env), kind, top_program(task));
        std::cout << "final: " << describe(final_environment(oracle_for(task, env))) << "\n";
      } else {
        const Npi model = load_checkpoint(ckpt);
        const ExecutionResult res = run_task(model, task, env, limits_from(budget, depth));
        print_trace(std::cout, res.trace, kind, top_program(task));
        std::cout << "halt: " << to_string(res.halt) << " after " << res.steps() << " steps\n";
        std::cout << "final: " << describe(res.final_env) << "\n";
        std::cout << "solved: " << (res.halt == HaltReason::normal && task_solved(task, env, res.final_env) ? "yes" : "no")
                  << "\n";
      }
    } else if (*ap) {
      Npi model = load_checkpoint(ckpt);
      TrainFile f = train_file(read_json(config_path));
      Rng rng(seed);
      const int first_new = model.memory().add_programs(names, env_kind_from_string(ap_env), rng);
      std::vector<Trace> traces;
      for (const auto& p : trace_paths)
        for (auto& t : read_trace_file(p).traces) traces.push_back(std::move(t));
      SegmentSet data(model.memory(), traces);
      SegmentSet held(model.memory(), heldout_like(traces, seed + 1));
      TrainConfig tc = f.train.to_config(seed);
      if (max_steps >= 0) tc.max_steps = max_steps;
      const TrainReport rep = train_fixed_core(model, first_new, data, held, tc, replay);
      save_checkpoint(model, out);
      std::cerr << "registered " << names.size() << " programs at row " << first_new << ", trained " << rep.steps
                << " updates, saved " << out << "\n";
    } else if (*ex) {
      json j = read_json(config_path);
      j["name"] = ex_name;
      ExperimentSpec spec = spec_from_json(j, ex_name);
      if (!ex_seeds.empty()) spec.seeds = ex_seeds;
      if (!out.empty()) spec.output_dir = out;
      ExperimentRunner runner(spec, quiet ? nullptr : &std::cerr);
      const ExperimentResult res = runner.run();
      std::cout << runner.summarize(res);
      std::cerr << "results in " << runner.directory().string() << "\n";
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
