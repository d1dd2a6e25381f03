#pragma once

#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "npi/trace.hpp"

namespace npi {

// A formatted sequence-to-sequence example stored in the same container.
struct SeqRecord {
  std::string format;                 // sort | add-plain | add-stacked | add-easy
  std::vector<std::string> channels;  // one string of tokens per input channel
  std::string target;
  friend bool operator==(const SeqRecord&, const SeqRecord&) = default;
};

struct TraceFile {
  std::vector<Trace> traces;
  std::vector<SeqRecord> sequences;
};

inline constexpr std::string_view kTraceFileHeader = "# npi-traces v1";

// Line format (one record per line, space-separated key=value fields):
//   trace task=<task> init=<env> steps=<n>
//   step task=<task> depth=<d> prog=<name> args=a,b,c ret=<0|1> next=<name|-> nargs=a,b,c obs=v,v,...
//   seq task=seq format=<fmt> in=<ch1>|<ch2> out=<tokens>
inline void write_step(std::ostream& os, const std::string& task, const TraceStep& s) {
  os << "step task=" << task << " depth=" << s.depth << " prog=" << s.program << " args=" << s.args.str()
     << " ret=" << (s.ret ? 1 : 0) << " next=" << (s.next_program.empty() ? "-" : s.next_program)
     << " nargs=" << s.next_args.str() << " obs=" << s.obs.str() << '\n';
}

inline void write_traces(std::ostream& os, const std::vector<Trace>& traces,
                         const std::vector<SeqRecord>& sequences = {}) {
  os << kTraceFileHeader << '\n';
  for (const auto& t : traces) {
    os << "trace task=" << t.task << " init=" << t.init << " steps=" << t.steps.size() << '\n';
    for (const auto& s : t.steps) write_step(os, t.task, s);
  }
  for (const auto& q : sequences) {
    os << "seq task=seq format=" << q.format << " in=";
    for (std::size_t c = 0; c < q.channels.size(); ++c) os << (c ? "|" : "") << q.channels[c];
    os << " out=" << q.target << '\n';
  }
}

inline void write_traces(const std::string& path, const std::vector<Trace>& traces,
                         const std::vector<SeqRecord>& sequences = {}) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot open '" + path + "' for writing");
  write_traces(os, traces, sequences);
  if (!os) throw InputError("write to '" + path + "' failed");
}

namespace detail {

struct ParseError : DataError {
  ParseError(std::size_t line, const std::string& msg)
      : DataError("line " + std::to_string(line) + ": " + msg) {}
};

inline std::map<std::string, std::string> split_fields(std::string_view line, std::size_t lineno) {
  std::map<std::string, std::string> fields;
  std::size_t pos = line.find(' ');
  while (pos != std::string_view::npos) {
    const std::size_t start = pos + 1;
    const std::size_t next = line.find(' ', start);
    const std::string_view tok = line.substr(start, next == std::string_view::npos ? next : next - start);
    const auto eq = tok.find('=');
    if (eq == std::string_view::npos || eq == 0) throw ParseError(lineno, "malformed field '" + std::string(tok) + "'");
    fields[std::string(tok.substr(0, eq))] = std::string(tok.substr(eq + 1));
    pos = next;
  }
  return fields;
}

inline const std::string& need(const std::map<std::string, std::string>& f, const char* key, std::size_t lineno) {
  auto it = f.find(key);
  if (it == f.end()) throw ParseError(lineno, std::string("missing field '") + key + "'");
  return it->second;
}

inline std::vector<int> parse_ints(const std::string& s, std::size_t lineno) {
  std::vector<int> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = s.find(',', start);
    const std::string tok = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (tok.empty()) throw ParseError(lineno, "empty integer in '" + s + "'");
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) throw ParseError(lineno, "bad integer '" + tok + "'");
    out.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

inline Arguments parse_args(const std::string& s, std::size_t lineno) {
  const auto v = parse_ints(s, lineno);
  if (v.size() != 3) throw ParseError(lineno, "expected three arguments in '" + s + "'");
  Arguments a = Arguments::of(v[0], v[1], v[2]);
  if (!a.valid()) throw ParseError(lineno, "argument out of range in '" + s + "'");
  return a;
}

}  // namespace detail

inline TraceFile read_trace_file(std::istream& is) {
  TraceFile out;
  std::string content((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (content.empty()) return out;
  std::size_t lineno = 0, pos = 0, expected_steps = 0;
  Trace* current = nullptr;
  auto close_current = [&](std::size_t line) {
    if (current && current->steps.size() != expected_steps)
      throw detail::ParseError(line, "trace declares " + std::to_string(expected_steps) + " steps but has " +
                                         std::to_string(current->steps.size()));
    if (current) current->calls = rebuild_invocations(current->steps);
    current = nullptr;
  };
  while (pos < content.size()) {
    ++lineno;
    const std::size_t nl = content.find('\n', pos);
    if (nl == std::string::npos) throw detail::ParseError(lineno, "truncated line (no terminating newline)");
    const std::string_view line(content.data() + pos, nl - pos);
    pos = nl + 1;
    if (line.empty() || line.front() == '#') continue;
    const auto kind = line.substr(0, line.find(' '));
    const auto f = detail::split_fields(line, lineno);
    if (kind == "trace") {
      close_current(lineno);
      Trace t;
      t.task = detail::need(f, "task", lineno);
      t.init = detail::need(f, "init", lineno);
      try {
        initial_environment(t);
        expected_steps = std::stoul(detail::need(f, "steps", lineno));
      } catch (const DataError&) {
        throw;
      } catch (const std::exception& e) {
        throw detail::ParseError(lineno, e.what());
      }
      out.traces.push_back(std::move(t));
      current = &out.traces.back();
    } else if (kind == "step") {
      if (!current) throw detail::ParseError(lineno, "step outside of a trace");
      if (detail::need(f, "task", lineno) != current->task) throw detail::ParseError(lineno, "task does not match trace");
      TraceStep s;
      const auto depth = detail::parse_ints(detail::need(f, "depth", lineno), lineno);
      if (depth.size() != 1 || depth[0] < 0) throw detail::ParseError(lineno, "bad depth");
      s.depth = depth[0];
      s.program = detail::need(f, "prog", lineno);
      s.args = detail::parse_args(detail::need(f, "args", lineno), lineno);
      const auto& ret = detail::need(f, "ret", lineno);
      if (ret != "0" && ret != "1") throw detail::ParseError(lineno, "ret must be 0 or 1");
      s.ret = ret == "1";
      const auto& next = detail::need(f, "next", lineno);
      s.next_program = next == "-" ? "" : next;
      s.next_args = detail::parse_args(detail::need(f, "nargs", lineno), lineno);
      s.obs.env = env_of(task_from_string(current->task));
      s.obs.values = detail::parse_ints(detail::need(f, "obs", lineno), lineno);
      if (s.obs.values.size() != observation_length(s.obs.env))
        throw detail::ParseError(lineno, "observation has " + std::to_string(s.obs.values.size()) + " values");
      if (current->steps.size() >= expected_steps) throw detail::ParseError(lineno, "more steps than declared");
      current->steps.push_back(std::move(s));
    } else if (kind == "seq") {
      close_current(lineno);
      SeqRecord q;
      q.format = detail::need(f, "format", lineno);
      std::string in = detail::need(f, "in", lineno);
      std::size_t start = 0;
      for (;;) {
        const auto bar = in.find('|', start);
        q.channels.push_back(in.substr(start, bar == std::string::npos ? std::string::npos : bar - start));
        if (bar == std::string::npos) break;
        start = bar + 1;
      }
      q.target = detail::need(f, "out", lineno);
      out.sequences.push_back(std::move(q));
    } else {
      throw detail::ParseError(lineno, "unknown record type '" + std::string(kind) + "'");
    }
  }
  close_current(lineno);
  return out;
}

inline TraceFile read_trace_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open '" + path + "'");
  return read_trace_file(is);
}

inline std::vector<Trace> read_traces(std::istream& is) { return read_trace_file(is).traces; }
inline std::vector<Trace> read_traces(const std::string& path) { return read_trace_file(path).traces; }

}  // namespace npi
