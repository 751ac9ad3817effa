// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "loadlm/extractor.hpp"
#include "loadlm/prompt_codec.hpp"
#include "loadlm/rng.hpp"
#include "test_util.hpp"

namespace loadlm {
namespace {

using testing::CodeOf;
using testing::Day;

const std::vector<double> kX = {29979, 29415, 27958, 25579, 28112, 29664, 29516};
const std::vector<double> kY = {22992, 21895, 26303, 28286, 28727, 26488, 24839};

ForecastInstance TableOne() {
  ForecastInstance inst;
  inst.series_id = "icld";
  inst.t0 = Day(2021, 3, 1);
  // 28 observed days; the extremes sit outside the 7 shown inputs.
  inst.x_obs = {30100, 32123, 29000, 28000, 27500, 26000, 25000, 24000, 23000, 22000,
                21000, 20321, 22500, 23500, 24500, 25500, 26500, 27000, 28500, 29200,
                30500, kX[0], kX[1], kX[2], kX[3], kX[4], kX[5], kX[6]};
  inst.x = kX;
  inst.y = kY;
  return inst;
}

TEST(FormatNumber, Examples) {
  EXPECT_EQ(FormatNumber(28603.285714285714, 0), "28603");
  EXPECT_EQ(FormatNumber(0.0, 0), "0");
  EXPECT_EQ(FormatNumber(1184.825, 2), "1184.83");
  EXPECT_EQ(FormatNumber(2.5, 0), "3");
  EXPECT_EQ(FormatNumber(-2.5, 0), "-3");
  EXPECT_EQ(FormatNumber(-0.004, 2), "0.00");
  EXPECT_EQ(FormatNumber(0.5, 1), "0.5");
  EXPECT_EQ(FormatNumber(1e6, 0), "1000000");
  EXPECT_EQ(CodeOf([] { FormatNumber(std::nan(""), 0); }), ErrorCode::kNonFinite);
  EXPECT_EQ(CodeOf([] { FormatNumber(INFINITY, 1); }), ErrorCode::kNonFinite);
}

TEST(FormatNumber, MatchesHalfAwayFromZeroOracle) {
  // Oracle: scale the shortest decimal string by hand, no floating rounding.
  Rng rng(11);
  std::uniform_int_distribution<long long> cents(-10'000'000, 10'000'000);
  for (int i = 0; i < 20000; ++i) {
    const long long thousandths = cents(rng);
    const double v = static_cast<double>(thousandths) / 1000.0;
    long long mag = std::llabs(thousandths);
    long long hundredths = mag / 10 + (mag % 10 >= 5 ? 1 : 0);
    std::string expect = std::to_string(hundredths / 100) + "." +
                         (hundredths % 100 < 10 ? "0" : "") + std::to_string(hundredths % 100);
    if (thousandths < 0 && hundredths != 0) expect = "-" + expect;
    ASSERT_EQ(FormatNumber(v, 2), expect) << v;
  }
}

TEST(ComputeStats, TableOneAndDerivedCases) {
  const auto s = ComputeStats(TableOne());
  EXPECT_EQ(s.max_obs, 32123);
  EXPECT_EQ(s.min_obs, 20321);
  EXPECT_NEAR(s.avg_in, 28603.2857142857, 1e-9);
  EXPECT_EQ(FormatNumber(s.avg_in, 0), "28603");

  ForecastInstance c;
  c.x = {5, 5, 5};
  c.x_obs = {5, 5, 5, 5};
  const auto cs = ComputeStats(c);
  EXPECT_EQ(cs.max_obs, 5);
  EXPECT_EQ(cs.min_obs, 5);
  EXPECT_EQ(cs.avg_in, 5);

  ForecastInstance d;
  d.x_obs = {1, 9, 2, 3};
  d.x = {2, 3};
  const auto ds = ComputeStats(d);
  EXPECT_EQ(ds.max_obs, 9);
  EXPECT_EQ(ds.min_obs, 1);
  EXPECT_EQ(ds.avg_in, 2.5);
}

TEST(PositionWord, Words) {
  EXPECT_EQ(PositionWord(1), "one");
  EXPECT_EQ(PositionWord(7), "seven");
  EXPECT_EQ(PositionWord(13), "thirteen");
  EXPECT_EQ(PositionWord(20), "twenty");
  EXPECT_EQ(PositionWord(24), "twenty-four");
  EXPECT_EQ(PositionWord(99), "ninety-nine");
  EXPECT_EQ(PositionWord(100), "one hundred");
  EXPECT_EQ(CodeOf([] { PositionWord(0); }), ErrorCode::kOutOfRange);
  EXPECT_EQ(CodeOf([] { PositionWord(101); }), ErrorCode::kOutOfRange);
  for (int i = 1; i <= 100; ++i) EXPECT_EQ(PositionFromWord(PositionWord(i)), i);
  EXPECT_EQ(PositionFromWord("zero"), 0);
}

TEST(EncodeText, TableOneStrings) {
  const auto rec = EncodeText(TableOne(), CodecOptions{});
  EXPECT_EQ(rec.input_text,
            "The electricity consumption of each day is as follows, "
            "29979,29415,27958,25579,28112,29664,29516kWh. "
            "What is the daily consumption of next week?");
  EXPECT_EQ(rec.target_text,
            "The electricity consumption of each day is as follows, "
            "22992,21895,26303,28286,28727,26488,24839kWh.");
  EXPECT_EQ(rec.format, Format::kText);
  EXPECT_EQ(rec.expected_len, 7u);
  EXPECT_EQ(rec.instance_ref, "icld#0");
  EXPECT_EQ(rec.target_values, kY);
}

TEST(EncodeText, SingleHourlyValue) {
  ForecastInstance inst;
  inst.series_id = "h";
  inst.x = {5};
  inst.x_obs = {5};
  inst.y = {6};
  CodecOptions o;
  o.step = Resolution::kHourly;
  EXPECT_EQ(EncodeText(inst, o).input_text,
            "The electricity consumption of each hour is as follows, 5kWh. "
            "What is the hourly consumption of next day?");
}

TEST(EncodeTs, TableOneString) {
  const auto rec = EncodeTs(TableOne(), CodecOptions{});
  EXPECT_EQ(rec.input_text,
            "The electricity consumption of each day is as follows, "
            "29979,29415,27958,25579,28112,29664,29516kWh. "
            "The maximum value is 32123, the minimum value is 20321, the average value "
            "is 28603. What is the daily consumption of next week?");
  EXPECT_EQ(rec.target_text, EncodeText(TableOne(), CodecOptions{}).target_text);
  const auto text = EncodeText(TableOne(), CodecOptions{});
  EXPECT_NE(rec.input_text.find("29979,29415,27958,25579,28112,29664,29516kWh."),
            std::string::npos);
}

TEST(EncodeTs, StatsSentenceVariants) {
  ForecastInstance c;
  c.x = std::vector<double>(7, 7.0);
  c.x_obs = std::vector<double>(28, 7.0);
  c.y = std::vector<double>(7, 7.0);
  EXPECT_NE(EncodeTs(c, CodecOptions{}).input_text.find(
                "The maximum value is 7, the minimum value is 7, the average value is 7."),
            std::string::npos);

  ForecastInstance d;
  d.x_obs = {1, 9, 2, 3};
  d.x = {2, 3};
  d.y = {4};
  CodecOptions o;
  o.precision = 1;
  EXPECT_NE(EncodeTs(d, o).input_text.find(
                "The maximum value is 9.0, the minimum value is 1.0, the average value is 2.5."),
            std::string::npos);
}

TEST(EncodeEts, TableOneStrings) {
  const auto rec = EncodeEts(TableOne(), CodecOptions{});
  EXPECT_EQ(rec.input_text,
            "The electricity consumption of day one is 29979, "
            "the electricity consumption of day two is 29415, "
            "the electricity consumption of day three is 27958, "
            "the electricity consumption of day four is 25579, "
            "the electricity consumption of day five is 28112, "
            "the electricity consumption of day six is 29664, "
            "the electricity consumption of day seven is 29516. "
            "The maximum value is 32123, the minimum value is 20321, the average value "
            "is 28603. What is the daily consumption of next week?");
  EXPECT_EQ(rec.target_text,
            "The electricity consumption of day one is 22992, "
            "the electricity consumption of day two is 21895, "
            "the electricity consumption of day three is 26303, "
            "the electricity consumption of day four is 28286, "
            "the electricity consumption of day five is 28727, "
            "the electricity consumption of day six is 26488, "
            "the electricity consumption of day seven is 24839.");
}

TEST(EncodeEts, SingleClause) {
  ForecastInstance inst;
  inst.x = {3};
  inst.x_obs = {3};
  inst.y = {4};
  const auto rec = EncodeEts(inst, CodecOptions{});
  EXPECT_EQ(rec.input_text.rfind("The electricity consumption of day one is 3. The maximum value is", 0),
            0u);
  EXPECT_EQ(rec.target_text, "The electricity consumption of day one is 4.");
}

TEST(EncodeEts, HourlyClauseCountMatchesLengths) {
  Rng rng(3);
  ForecastInstance inst;
  for (int i = 0; i < 96; ++i) inst.x_obs.push_back(static_cast<double>(rng() % 5000));
  inst.x.assign(inst.x_obs.end() - 24, inst.x_obs.end());
  for (int i = 0; i < 24; ++i) inst.y.push_back(static_cast<double>(rng() % 5000));
  CodecOptions o;
  o.step = Resolution::kHourly;
  const auto rec = EncodeEts(inst, o);
  auto count = [](const std::string& s, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
    return n;
  };
  EXPECT_EQ(count(rec.input_text, "consumption of hour "), 24u);
  EXPECT_EQ(count(rec.target_text, "consumption of hour "), 24u);
  EXPECT_NE(rec.target_text.find("hour twenty-four is"), std::string::npos);
  EXPECT_NE(rec.input_text.find("What is the hourly consumption of next day?"), std::string::npos);
}

TEST(Encode, SingleLineAndDispatch) {
  for (Format f : {Format::kText, Format::kTs, Format::kEts}) {
    const auto rec = Encode(TableOne(), f, CodecOptions{});
    EXPECT_EQ(rec.format, f);
    EXPECT_EQ(rec.input_text.find('\n'), std::string::npos);
    EXPECT_EQ(rec.target_text.find('\n'), std::string::npos);
  }
}

TEST(TargetTemplate, RendersLikeEncoder) {
  for (Format f : {Format::kText, Format::kTs, Format::kEts}) {
    const auto tmpl = MakeTargetTemplate(f, Resolution::kDaily, 7);
    std::vector<std::string> vals;
    for (double v : kY) vals.push_back(FormatNumber(v, 0));
    EXPECT_EQ(RenderTarget(tmpl, vals), Encode(TableOne(), f, CodecOptions{}).target_text);
    vals.pop_back();
    EXPECT_EQ(CodeOf([&] { RenderTarget(tmpl, vals); }), ErrorCode::kLengthMismatch);
  }
}

TEST(Codec, RandomRoundTripAllFormats) {
  Rng rng(2024);
  for (int trial = 0; trial < 2000; ++trial) {
    const bool hourly = trial % 2 == 1;
    const std::size_t len = hourly ? 24 : 7;
    const int precision = static_cast<int>(rng() % 3);
    ForecastInstance inst;
    inst.series_id = "r";
    std::uniform_real_distribution<double> val(0.0, 50000.0);
    for (std::size_t i = 0; i < 4 * len; ++i) inst.x_obs.push_back(val(rng));
    inst.x.assign(inst.x_obs.end() - static_cast<long>(len), inst.x_obs.end());
    for (std::size_t i = 0; i < len; ++i) inst.y.push_back(val(rng));
    CodecOptions o;
    o.step = hourly ? Resolution::kHourly : Resolution::kDaily;
    o.precision = precision;
    for (Format f : {Format::kText, Format::kTs, Format::kEts}) {
      const auto rec = Encode(inst, f, o);
      const auto out = ParsePrediction(rec.target_text, {f, len, precision, RepairPolicy::kAuto});
      ASSERT_TRUE(out.verdict.clean()) << rec.target_text;
      for (std::size_t i = 0; i < len; ++i) {
        ASSERT_EQ(FormatNumber(out.repaired[i], precision), FormatNumber(inst.y[i], precision));
        ASSERT_EQ(out.repaired[i], rec.target_values[i]);
      }
    }
  }
}

}  // namespace
}  // namespace loadlm
