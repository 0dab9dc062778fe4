#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "nilm/ingest.hpp"
#include "oracles.hpp"

using namespace nilm;

namespace {

PowerSeries parse(const std::string& text) {
  std::istringstream in(text);
  return parse_channel(in, "test", "test");
}

void write(const std::filesystem::path& p, const std::string& content) {
  std::ofstream(p) << content;
}

}  // namespace

TEST(LoadChannel, ReadsPairsInOrder) {
  const auto s = parse("1303132964 86.0\n1303132967 87.5\n");
  ASSERT_EQ(s.readings.size(), 2u);
  EXPECT_EQ(s.readings[0], (RawReading{1303132964, 86.0}));
  EXPECT_EQ(s.readings[1], (RawReading{1303132967, 87.5}));
}

TEST(LoadChannel, SortsOutOfOrderLines) {
  const auto s = parse("1000 5.0\n900 4.0\n");
  ASSERT_EQ(s.readings.size(), 2u);
  EXPECT_EQ(s.readings[0], (RawReading{900, 4.0}));
  EXPECT_EQ(s.readings[1], (RawReading{1000, 5.0}));
}

TEST(LoadChannel, DuplicateTimestampLastWins) {
  const auto s = parse("1000 5.0\n1000 6.0\n");
  const auto expected = oracle::last_wins({{1000, 5.0}, {1000, 6.0}});
  EXPECT_EQ(s.readings, expected);
  ASSERT_EQ(s.readings.size(), 1u);
  EXPECT_EQ(s.readings[0].power, 6.0);
}

TEST(LoadChannel, MatchesLastWinsOracleOnRandomFiles) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::pair<std::int64_t, double>> lines;
    std::string text;
    const int n = 1 + static_cast<int>(rng() % 40);
    for (int i = 0; i < n; ++i) {
      const std::int64_t t = 1000 + static_cast<std::int64_t>(rng() % 30);
      const double p = static_cast<double>(rng() % 5000) / 4.0;
      lines.emplace_back(t, p);
      text += std::to_string(t) + " " + std::to_string(p) + "\n";
    }
    const auto s = parse(text);
    EXPECT_EQ(s.readings, oracle::last_wins(lines));
    for (std::size_t i = 1; i < s.readings.size(); ++i)
      EXPECT_LT(s.readings[i - 1].timestamp, s.readings[i].timestamp);
  }
}

TEST(LoadChannel, SkipsBlankLinesAndToleratesExtraColumns) {
  const auto s = parse("\n1000 5.0 6.1 240.2\n\n1006 7.0\n");
  ASSERT_EQ(s.readings.size(), 2u);
  EXPECT_EQ(s.readings[0].power, 5.0);
}

TEST(LoadChannel, ReportsMalformedLineNumber) {
  try {
    parse("1000 5.0\n1006 abc\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse("1000\n"), ParseError);
}

TEST(LoadChannel, RejectsNegativePower) {
  EXPECT_THROW(parse("1000 -1.0\n"), ParseError);
}

TEST(LoadChannel, EmptyFileIsEmptySeries) {
  EXPECT_THROW(parse(""), EmptySeries);
  EXPECT_THROW(parse("\n  \n"), EmptySeries);
}

TEST(LoadChannel, MissingFileIsUnreadable) {
  EXPECT_THROW(load_channel("/nonexistent/channel_1.dat"), FileUnreadable);
}

TEST(LoadChannel, Idempotent) {
  testutil::TempDir dir;
  write(dir.path() / "channel_1.dat", "1006 2.0\n1000 1.0\n1003 1.5\n");
  EXPECT_EQ(load_channel(dir.path() / "channel_1.dat"), load_channel(dir.path() / "channel_1.dat"));
}

TEST(ParseLabels, ReadsAndNormalizes) {
  std::istringstream in("1 mains\n2 mains\n5 refrigerator\n3 Washer Dryer\n");
  const auto labels = parse_labels(in);
  EXPECT_EQ(labels.at(1), "mains");
  EXPECT_EQ(labels.at(2), "mains");
  EXPECT_EQ(labels.at(5), "refrigerator");
  EXPECT_EQ(labels.at(3), "washer_dryer");
}

TEST(ParseLabels, DuplicateChannel) {
  std::istringstream in("4 x\n4 y\n");
  try {
    parse_labels(in);
    FAIL();
  } catch (const DuplicateChannel& e) {
    EXPECT_EQ(e.channel(), 4);
  }
}

TEST(ParseLabels, BadLine) {
  std::istringstream in("x mains\n");
  EXPECT_THROW(parse_labels(in), ParseError);
}

TEST(ParseLabels, SerializeRoundTrip) {
  const std::map<int, std::string> labels{{1, "mains"}, {2, "mains"}, {7, "washer_dryer"}, {12, "kettle"}};
  std::istringstream in(serialize_labels(labels));
  EXPECT_EQ(parse_labels(in), labels);
}

TEST(LoadHouse, LoadsDeclaredChannels) {
  testutil::TempDir dir;
  for (int id : {1, 2, 5}) write(channel_path(dir.path(), id), "1000 1.0\n1003 2.0\n");
  HouseLayout layout{"1", {1, 2}, {{"fridge", 5}}, Region::us};
  const auto house = load_house(dir.path(), layout);
  EXPECT_EQ(house.size(), 3u);
  EXPECT_EQ(house.at(5).readings.size(), 2u);
}

TEST(LoadHouse, MissingChannel) {
  testutil::TempDir dir;
  write(channel_path(dir.path(), 1), "1000 1.0\n");
  HouseLayout layout{"1", {1}, {{"kettle", 9}}, Region::uk};
  try {
    load_house(dir.path(), layout);
    FAIL();
  } catch (const MissingChannel& e) {
    EXPECT_EQ(e.channel(), 9);
  }
}

TEST(LoadHouse, EmptyLayoutGivesEmptyMap) {
  testutil::TempDir dir;
  HouseLayout layout{"1", {}, {}, Region::us};
  EXPECT_TRUE(load_house(dir.path(), layout).empty());
}

TEST(HouseLayout, RegionArity) {
  EXPECT_THROW(layout_from_json(nlohmann::json::parse(
                   R"({"house_id":"1","region":"US","mains_channels":[1],"appliance_channels":{}})")),
               InvalidConfig);
  EXPECT_THROW(layout_from_json(nlohmann::json::parse(
                   R"({"house_id":"2","region":"UK","mains_channels":[1,2],"appliance_channels":{}})")),
               InvalidConfig);
  const auto ok = layout_from_json(nlohmann::json::parse(
      R"({"house_id":2,"region":"UK","mains_channels":[1],"appliance_channels":{"kettle":8}})"));
  EXPECT_EQ(ok.house_id, "2");
  EXPECT_EQ(ok.region, Region::uk);
  EXPECT_EQ(ok.appliance_channels.at("kettle"), 8);
}
