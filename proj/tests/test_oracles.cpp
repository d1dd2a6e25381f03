#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <queue>
#include <sstream>

#include "npi/oracles.hpp"
#include "npi/trace_io.hpp"
#include "npi/validate.hpp"

using namespace npi;

namespace {

std::vector<std::string> calls_of(const Trace& t, int depth) {
  std::vector<std::string> out;
  for (const auto& s : t.steps)
    if (s.depth == depth && s.calls_program()) out.push_back(s.next_program);
  return out;
}

int count_calls(const Trace& t, const std::string& name) {
  int n = 0;
  for (const auto& s : t.steps) n += s.calls_program() && s.next_program == name;
  return n;
}

int count_acts(const Trace& t) {
  int n = 0;
  for (const auto& s : t.steps) n += s.calls_act();
  return n;
}

// Independent oracle: breadth-first search over the pose grid.
int bfs_distance(int az, int el, int taz, int tel) {
  std::vector<int> dist(PoseState::kGrid * (PoseState::kMaxElevation + 1), -1);
  auto id = [](int a, int e) { return e * PoseState::kGrid + a; };
  std::queue<std::pair<int, int>> q;
  q.push({az, el});
  dist[id(az, el)] = 0;
  while (!q.empty()) {
    auto [a, e] = q.front();
    q.pop();
    if (a == taz && e == tel) return dist[id(a, e)];
    const std::pair<int, int> next[] = {{(a + 1) % 24, e}, {(a + 23) % 24, e},
                                        {a, std::min(e + 1, PoseState::kMaxElevation)},
                                        {a, std::max(e - 1, PoseState::kMinElevation)}};
    for (auto [na, ne] : next)
      if (dist[id(na, ne)] < 0) {
        dist[id(na, ne)] = dist[id(a, e)] + 1;
        q.push({na, ne});
      }
  }
  return -1;
}

}  // namespace

TEST(OracleAdd, NinetySixPlusOneTwentyFive) {
  const Trace t = oracle_add("96", "125");
  const auto pad = std::get<AdditionPad>(final_environment(t));
  EXPECT_EQ(pad.output(), "221");
  // The first column (6 + 5) carries.
  const auto top = calls_of(t, 0);
  ASSERT_GE(top.size(), 2u);
  EXPECT_EQ(top[0], "ADD1");
  EXPECT_EQ(top[1], "LSHIFT");
  const auto add1 = calls_of(t, 1);
  ASSERT_FALSE(add1.empty());
  EXPECT_EQ(add1[0], "CARRY");
  EXPECT_TRUE(validate_trace(t));
}

TEST(OracleAdd, ZeroPlusZero) {
  const Trace t = oracle_add("0", "0");
  EXPECT_EQ(std::get<AdditionPad>(final_environment(t)).output(), "0");
  EXPECT_EQ(count_calls(t, "CARRY"), 0);
}

TEST(OracleAdd, AgreesWithIntegerAdditionOnSample) {
  Rng rng(1);
  std::uniform_int_distribution<unsigned long long> d(0, 999'999'999);
  for (int i = 0; i < 300; ++i) {
    const auto a = d(rng), b = d(rng);
    const Trace t = oracle_add(a, b);
    ASSERT_EQ(std::get<AdditionPad>(final_environment(t)).output(), std::to_string(a + b));
  }
}

TEST(OracleBubblesort, SortsNineTwoFive) {
  const Trace t = oracle_bubblesort({9, 2, 5});
  EXPECT_EQ(std::get<SortPad>(final_environment(t)).cells(), (std::vector<int>{2, 5, 9}));
  EXPECT_EQ(calls_of(t, 0), (std::vector<std::string>{"BUBBLE", "RESET", "BUBBLE", "RESET", "BUBBLE"}));
  // First sweep: open the pointer pair, then the first COMPSWAP swaps 9 and 2.
  EXPECT_EQ(t.steps[1].program, "BUBBLE");
  EXPECT_EQ(t.steps[1].next_program, "ACT");
  EXPECT_EQ(t.steps[1].next_args, Arguments::of(1, action::kRight, kDefaultArg));
  const auto swap = std::find_if(t.steps.begin(), t.steps.end(), [](const TraceStep& s) {
    return s.calls_act() && s.next_args[1] == action::kSwap;
  });
  ASSERT_NE(swap, t.steps.end());
  EXPECT_EQ(swap->program, "COMPSWAP");
  EXPECT_EQ(swap->obs.values[0], 9);
  EXPECT_EQ(swap->obs.values[1], 2);
  EXPECT_TRUE(validate_trace(t));
}

TEST(OracleBubblesort, SortedInputStillSweepsNTimes) {
  const Trace t = oracle_bubblesort({1, 2, 3});
  EXPECT_EQ(count_calls(t, "BUBBLE"), 3);
  for (const auto& s : t.steps) EXPECT_FALSE(s.calls_act() && s.next_args[1] == action::kSwap);
}

TEST(OracleBubblesort, SingletonAndPairs) {
  EXPECT_EQ(count_calls(oracle_bubblesort({7}), "BUBBLE"), 1);
  EXPECT_TRUE(validate_trace(oracle_bubblesort({7})));
  for (auto a : {std::vector<int>{2, 1}, std::vector<int>{1, 2}, std::vector<int>{3, 3}}) {
    const Trace t = oracle_bubblesort(a);
    auto sorted = a;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(std::get<SortPad>(final_environment(t)).cells(), sorted);
    EXPECT_TRUE(validate_trace(t));
  }
}

TEST(OracleGoto, StartEqualsTargetMakesNoMoves) {
  const Trace t = oracle_goto(0, 1, 0, 1);
  EXPECT_EQ(count_acts(t), 0);
  EXPECT_EQ(calls_of(t, 0), (std::vector<std::string>{"HGOTO", "VGOTO"}));
  EXPECT_TRUE(calls_of(t, 1).empty());
  EXPECT_TRUE(validate_trace(t));
}

TEST(OracleGoto, ReachesFigureTarget) {
  for (int az = 0; az < 24; ++az) {
    const Trace t = oracle_goto(az, 4, 1, 2);
    const auto s = std::get<PoseState>(final_environment(t));
    EXPECT_EQ(s.azimuth(), 1);
    EXPECT_EQ(s.elevation(), 2);
  }
}

TEST(OracleGoto, PathLengthEqualsBfsDistance) {
  for (int az = 0; az < 24; ++az)
    for (int el = 0; el <= 4; ++el) {
      const Trace t = oracle_goto(az, el, kCanonicalAzimuth, kCanonicalElevation);
      EXPECT_EQ(count_acts(t), bfs_distance(az, el, kCanonicalAzimuth, kCanonicalElevation));
    }
}

TEST(OracleGoto, HalfTurnTieGoesRight) {
  const Trace t = oracle_goto(12, 1, 0, 1);
  EXPECT_EQ(calls_of(t, 1).front(), "RGOTO");
}

TEST(OracleMax, PointerEndsOnMaximum) {
  const Trace t = oracle_max({9, 2, 5});
  const auto pad = std::get<SortPad>(final_environment(t));
  EXPECT_EQ(pad.value_at(0), 9);
  EXPECT_TRUE(pad.at_end(0));
  EXPECT_EQ(calls_of(t, 0), (std::vector<std::string>{"BUBBLESORT", "RJMP"}));
  EXPECT_TRUE(validate_trace(t));
  EXPECT_EQ(std::get<SortPad>(final_environment(oracle_max({7}))).value_at(0), 7);
}

TEST(OracleMax, RandomArrays) {
  Rng rng(21);
  std::uniform_int_distribution<int> len(1, 12);
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_array(len(rng), rng);
    const Trace t = oracle_max(a);
    ASSERT_EQ(std::get<SortPad>(final_environment(t)).value_at(0), *std::max_element(a.begin(), a.end()));
  }
}

TEST(Traces, ReturnFlagOnlyOnLastStepOfEachInvocation) {
  const Trace t = oracle_bubblesort({4, 1, 3, 2});
  for (const auto& call : t.calls) {
    const auto own = own_steps(t, call);
    ASSERT_FALSE(own.empty());
    for (std::size_t k = 0; k < own.size(); ++k) EXPECT_EQ(t.steps[own[k]].ret, k + 1 == own.size());
  }
  EXPECT_EQ(t.calls, rebuild_invocations(t.steps));
}

TEST(Traces, SubprogramSegmentsAreStandaloneValidTraces) {
  Rng rng(5);
  for (Task task : {Task::add, Task::sort, Task::go_to, Task::max}) {
    const Trace t = random_trace(task, 4, rng);
    for (std::size_t c = 0; c < t.calls.size(); ++c) {
      const Trace sub = extract_subtrace(t, c);
      const auto v = validate_trace(sub);
      ASSERT_TRUE(v) << to_string(task) << " call " << c << ": " << v.message;
    }
  }
}

TEST(Validate, CorruptedObservationFlagsThatStep) {
  Trace t = oracle_bubblesort({5, 3, 8, 1});
  for (std::size_t k : {std::size_t{0}, std::size_t{7}, t.steps.size() / 2, t.steps.size() - 1}) {
    Trace bad = t;
    bad.steps[k].obs.values[0] = (bad.steps[k].obs.values[0] + 1) % 10;
    const auto v = validate_trace(bad);
    EXPECT_FALSE(v);
    EXPECT_EQ(v.step, k);
  }
}

TEST(Validate, UnbalancedReturnFlagIsNestingError) {
  Trace t = oracle_add("47", "85");
  const auto it = std::find_if(t.steps.begin() + 1, t.steps.end(), [](const TraceStep& s) { return s.ret; });
  ASSERT_NE(it, t.steps.end());
  Trace bad = t;
  bad.steps[it - t.steps.begin()].ret = false;
  auto v = validate_trace(bad);
  EXPECT_FALSE(v);
  EXPECT_NE(v.message.find("nesting"), std::string::npos);

  Trace early = t;
  early.steps[1].ret = true;
  early.steps[1].next_program.clear();
  EXPECT_FALSE(validate_trace(early));
}

TEST(TraceIo, RoundTrip) {
  Rng rng(3);
  std::vector<Trace> traces;
  for (Task task : kAllTasks)
    for (int i = 0; i < 5; ++i) traces.push_back(random_trace(task, 3 + i, rng));
  std::stringstream ss;
  write_traces(ss, traces);
  EXPECT_EQ(read_traces(ss), traces);
}

TEST(TraceIo, EmptyFileIsEmptySet) {
  std::stringstream ss;
  EXPECT_TRUE(read_traces(ss).empty());
  std::stringstream header_only(std::string(kTraceFileHeader) + "\n");
  EXPECT_TRUE(read_traces(header_only).empty());
}

TEST(TraceIo, TruncatedFinalLineIsParseError) {
  std::stringstream ss;
  write_traces(ss, {oracle_bubblesort({3, 1, 2})});
  const std::string full = ss.str();
  for (std::size_t cut : {full.size() - 1, full.size() - 7, full.size() / 2}) {
    std::stringstream truncated(full.substr(0, cut));
    EXPECT_THROW(read_traces(truncated), DataError) << cut;
  }
}

TEST(TraceIo, MalformedLineReportsLineNumber) {
  std::stringstream ss(std::string(kTraceFileHeader) + "\ntrace task=sort init=1,2 steps=1\nstep task=sort depth=x\n");
  try {
    read_traces(ss);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}
