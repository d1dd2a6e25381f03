#include <gtest/gtest.h>

#include <algorithm>

#include "npi/environment.hpp"

using namespace npi;

namespace {
Arguments act(int ptr, int code, int value = kDefaultArg) { return Arguments::of(ptr, code, value); }
}  // namespace

TEST(AdditionPad, ResetLayout) {
  const auto pad = AdditionPad::reset("96", "125");
  EXPECT_EQ(pad.width(), 4);
  EXPECT_EQ(pad.describe(), "__96/_125/____/____@3,3,3,3");
  const auto obs = pad.observe();
  EXPECT_EQ(obs.values[0], 6);
  EXPECT_EQ(obs.values[1], 5);
  EXPECT_EQ(obs.values[2], AdditionPad::kBlank);
  EXPECT_EQ(obs.values[3], AdditionPad::kBlank);
}

TEST(AdditionPad, WidthIsLongerOperandPlusOne) {
  Rng rng(4);
  std::uniform_int_distribution<unsigned long long> d(0, 10'000'000);
  for (int i = 0; i < 200; ++i) {
    const auto a = d(rng), b = d(rng);
    const auto pad = AdditionPad::reset(a, b);
    EXPECT_EQ(pad.width(), static_cast<int>(std::max(std::to_string(a).size(), std::to_string(b).size())) + 1);
  }
  EXPECT_EQ(AdditionPad::reset("0", "0").width(), 2);
}

TEST(AdditionPad, RejectsNonDigits) {
  EXPECT_THROW(AdditionPad::reset("1a", "2"), InputError);
  EXPECT_THROW(AdditionPad::reset("", "2"), InputError);
}

TEST(AdditionPad, WriteUnitDigit) {
  auto pad = AdditionPad::reset("96", "125");
  pad.step(act(3, action::kWrite, 1));
  EXPECT_EQ(pad.cell(3, 3), 1);
  EXPECT_EQ(pad.observe().values[3], 1);
}

TEST(AdditionPad, CarryMarksOneColumnLeft) {
  auto pad = AdditionPad::reset("96", "125");
  pad.step(act(2, action::kLeft));
  pad.step(act(2, action::kWrite, 1));
  pad.step(act(2, action::kRight));
  EXPECT_EQ(pad.cell(2, 2), 1);
  EXPECT_EQ(pad.cell(2, 3), AdditionPad::kBlank);
  EXPECT_EQ(pad.pointer(2), 3);
}

TEST(AdditionPad, LeftAtColumnZeroClamps) {
  auto pad = AdditionPad::reset("5", "7");
  pad.step(act(0, action::kLeft));
  pad.step(act(0, action::kLeft));
  EXPECT_EQ(pad.pointer(0), 0);
  const auto obs = pad.observe();
  EXPECT_EQ(obs.values[4], 1);  // pointer 1 at start
}

TEST(AdditionPad, InputRowsAreReadOnly) {
  auto pad = AdditionPad::reset("5", "7");
  EXPECT_THROW(pad.step(act(0, action::kWrite, 3)), EnvironmentError);
  EXPECT_THROW(pad.step(act(1, action::kWrite, 3)), EnvironmentError);
  EXPECT_THROW(pad.step(act(7, action::kLeft)), EnvironmentError);
}

TEST(AdditionPad, BlankIsItsOwnCategory) {
  const auto pad = AdditionPad::reset("0", "0");
  const Vec f = AdditionPad::features(pad.observe(), Arguments::none());
  EXPECT_EQ(f[0 * 11 + 0], 1.0);   // input 1 reads digit 0
  EXPECT_EQ(f[2 * 11 + 10], 1.0);  // carry reads blank
  EXPECT_EQ(f[2 * 11 + 0], 0.0);
  EXPECT_EQ(f.size(), AdditionPad::kFeatureWidth);
}

TEST(AdditionPad, ParseRoundTrip) {
  auto pad = AdditionPad::reset("96", "125");
  pad.step(act(3, action::kWrite, 1));
  pad.step(act(2, action::kLeft));
  EXPECT_EQ(AdditionPad::parse(pad.describe()), pad);
}

TEST(SortPad, SwapExchangesPointedCells) {
  auto pad = SortPad::reset({9, 2, 5});
  pad.step(act(1, action::kRight));
  pad.step(act(0, action::kSwap, 1));
  EXPECT_EQ(pad.cells(), (std::vector<int>{2, 9, 5}));
}

TEST(SortPad, SwapWithSamePointerIsNoop) {
  auto pad = SortPad::reset({4, 1});
  pad.step(act(0, action::kSwap, 1));
  EXPECT_EQ(pad.cells(), (std::vector<int>{4, 1}));
}

TEST(SortPad, CounterOnlyMovesRight) {
  auto pad = SortPad::reset({1, 2, 3});
  EXPECT_THROW(pad.step(act(2, action::kLeft)), EnvironmentError);
  pad.step(act(2, action::kRight));
  EXPECT_EQ(pad.pointer(2), 1);
}

TEST(SortPad, RejectsBadArrays) {
  EXPECT_THROW(SortPad::reset({}), InputError);
  EXPECT_THROW(SortPad::reset({1, 10}), InputError);
}

TEST(SortPad, MultisetPreservedUnderRandomActions) {
  Rng rng(12);
  auto init = std::vector<int>{3, 1, 4, 1, 5, 9, 2, 6};
  auto pad = SortPad::reset(init);
  std::uniform_int_distribution<int> ptr(0, 2), code(0, 3);
  auto expected = init;
  std::sort(expected.begin(), expected.end());
  for (int i = 0; i < 10000; ++i) {
    Environment env = pad;
    try_apply_act(env, act(ptr(rng), code(rng), 1));
    pad = std::get<SortPad>(env);
    auto now = pad.cells();
    std::sort(now.begin(), now.end());
    ASSERT_EQ(now, expected);
  }
}

TEST(PoseState, AzimuthWraps) {
  auto s = PoseState::reset(23, 1, 0, 1);
  EXPECT_EQ(PoseState::degrees(s.azimuth()), 345);
  s.step(act(0, action::kRight));
  EXPECT_EQ(s.azimuth(), 0);
  s.step(act(0, action::kLeft));
  EXPECT_EQ(s.azimuth(), 23);
}

TEST(PoseState, ElevationClamps) {
  auto s = PoseState::reset(0, PoseState::kMaxElevation, 0, 1);
  s.step(act(0, action::kUp));
  EXPECT_EQ(s.elevation(), PoseState::kMaxElevation);
  EXPECT_EQ(s.observe().values[5], 1);
}

TEST(PoseState, ExampleMovesReachTarget) {
  auto s = PoseState::reset(2, 3, 0, 1);  // (30 deg, 45 deg) -> (0 deg, 15 deg)
  for (int code : {action::kLeft, action::kLeft, action::kDown, action::kDown}) s.step(act(0, code));
  EXPECT_TRUE(s.at_target());
}

TEST(Encoders, FeatureWidthIndependentOfPadSize) {
  for (int n : {1, 5, 40}) {
    const Environment e1 = AdditionPad::reset(std::string(n, '7'), "3");
    const Environment e2 = SortPad::reset(std::vector<int>(n, 4));
    EXPECT_EQ(features(observe(e1), Arguments::none()).size(), feature_width(EnvKind::addition));
    EXPECT_EQ(features(observe(e2), Arguments::none()).size(), feature_width(EnvKind::sorting));
  }
  const Environment p = PoseState::reset(5, 2, 0, 1);
  EXPECT_EQ(features(observe(p), Arguments::none()).size(), feature_width(EnvKind::pose));
}

TEST(Encoders, ObservationIgnoresCellsAwayFromPointers) {
  const auto a = AdditionPad::parse("_196/_125/____/____@3,3,3,3");
  const auto b = AdditionPad::parse("_896/_125/____/____@3,3,3,3");
  EXPECT_EQ(a.observe(), b.observe());
}

TEST(Tasks, AddDecimalMatchesIntegerAddition) {
  Rng rng(8);
  std::uniform_int_distribution<unsigned long long> d(0, 1ull << 60);
  for (int i = 0; i < 500; ++i) {
    const auto a = d(rng), b = d(rng);
    EXPECT_EQ(add_decimal(std::to_string(a), std::to_string(b)), std::to_string(a + b));
  }
}
