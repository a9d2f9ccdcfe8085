#include <gtest/gtest.h>

#include <sstream>

#include "test_util.hpp"
#include "vid/pvlog.hpp"

namespace vid {
namespace {

using testutil::EntrySpec;
using testutil::make_record;

TEST(PvlogParse, SingleLineRoundtrip) {
  const PVRecord r = make_record(
      "pv1", {{.item_id = "a", .clicked = true, .click_offset = 100},
              {.item_id = "b"},
              {.item_id = "c"}});
  std::stringstream stream(serialize_record(r) + "\n");
  const ParseResult parsed = parse_pvlog(stream);
  ASSERT_EQ(parsed.records.size(), 1u);
  EXPECT_TRUE(parsed.skipped.empty());
  EXPECT_EQ(parsed.records[0].results.size(), 3u);
  EXPECT_EQ(parsed.records[0], r);
}

TEST(PvlogParse, DuplicatePositionRejected) {
  PVRecord r = make_record("pv1", {{.item_id = "a"}, {.item_id = "b"}});
  r.results[1].position = r.results[0].position;
  std::stringstream stream(serialize_record(r) + "\n");
  const ParseResult lenient = parse_pvlog(stream);
  EXPECT_TRUE(lenient.records.empty());
  ASSERT_EQ(lenient.skipped.size(), 1u);
  EXPECT_EQ(lenient.skipped[0].first, 1);

  std::stringstream again(serialize_record(r) + "\n");
  try {
    parse_pvlog(again, /*strict=*/true);
    FAIL() << "strict parse should reject duplicate positions";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformedLine);
  }
}

TEST(PvlogParse, EmptyStream) {
  std::stringstream stream("");
  const ParseResult parsed = parse_pvlog(stream);
  EXPECT_TRUE(parsed.records.empty());
  EXPECT_TRUE(parsed.skipped.empty());
}

TEST(PvlogParse, MalformedJsonSkippedWithLineNumber) {
  const PVRecord r = make_record("pv1", {{.item_id = "a"}});
  std::stringstream stream("not json\n" + serialize_record(r) + "\n");
  const ParseResult parsed = parse_pvlog(stream);
  ASSERT_EQ(parsed.records.size(), 1u);
  ASSERT_EQ(parsed.skipped.size(), 1u);
  EXPECT_EQ(parsed.skipped[0].first, 1);
}

TEST(PvlogValidate, ClickFlagRequiresClickTime) {
  PVRecord r = make_record("pv1", {{.item_id = "a", .clicked = true, .click_offset = 5}});
  EXPECT_FALSE(validate_record(r).has_value());
  r.results[0].click_time.reset();
  EXPECT_TRUE(validate_record(r).has_value());
}

TEST(PvlogValidate, ClickTimeBeforePageViewRejected) {
  PVRecord r = make_record("pv1", {{.item_id = "a", .clicked = true, .click_offset = 5}});
  r.results[0].click_time = r.timestamp - 1;
  EXPECT_TRUE(validate_record(r).has_value());
}

TEST(PvlogValidate, ChannelArityMustMatchQuery) {
  PVRecord r = make_record("pv1", {{.item_id = "a"}});
  r.results[0].item_features = {{1.0, 2.0}, {3.0}};  // two channels vs query's one
  EXPECT_TRUE(validate_record(r).has_value());
}

TEST(PvlogValidate, SelectedEqualPredictedRejected) {
  PVRecord r = make_record("pv1", {{.item_id = "a"}}, "top00", "top00");
  EXPECT_TRUE(validate_record(r).has_value());
}

TEST(ClickSummary, SwitchYieldsNegAndHardLabels) {
  const PVRecord r = make_record(
      "pv1",
      {{.item_id = "a", .top = "shoes", .clicked = true, .click_offset = 100},
       {.item_id = "b", .top = "bags"}},
      /*predicted=*/"bags", /*selected=*/"shoes");
  const ClickSummary s = extract_click_summary(r);
  ASSERT_TRUE(s.switch_labels.has_value());
  EXPECT_EQ(s.switch_labels->first, "bags");
  EXPECT_EQ(s.switch_labels->second, "shoes");
}

TEST(ClickSummary, FirstClickWithoutSwitch) {
  const PVRecord r = make_record(
      "pv1",
      {{.item_id = "a", .top = "shoes", .clicked = true, .click_offset = 300},
       {.item_id = "b", .top = "dress", .clicked = true, .click_offset = 100}},
      "shoes");
  const ClickSummary s = extract_click_summary(r);
  ASSERT_TRUE(s.first_click.has_value());
  EXPECT_EQ(s.first_click->first, "b");  // earliest click_time wins
  EXPECT_EQ(s.first_click->second, "dress");
  EXPECT_FALSE(s.switch_labels.has_value());
}

TEST(ClickSummary, FirstClickTieBrokenByPosition) {
  const PVRecord r = make_record(
      "pv1",
      {{.item_id = "a", .top = "shoes", .clicked = true, .click_offset = 100},
       {.item_id = "b", .top = "dress", .clicked = true, .click_offset = 100}});
  const ClickSummary s = extract_click_summary(r);
  ASSERT_TRUE(s.first_click.has_value());
  EXPECT_EQ(s.first_click->first, "a");
}

TEST(ClickSummary, ZeroClicks) {
  const PVRecord r = make_record("pv1", {{.item_id = "a"}, {.item_id = "b"}});
  const ClickSummary s = extract_click_summary(r);
  EXPECT_FALSE(s.first_click.has_value());
  EXPECT_FALSE(s.switch_labels.has_value());
  EXPECT_TRUE(s.clicked_items.empty());
  EXPECT_EQ(s.nonclicked_items.size(), 2u);
}

TEST(ClickSummary, SwitchRequiresClickInSelectedCategory) {
  // Selected category present but the click landed elsewhere: no switch pair.
  const PVRecord r = make_record(
      "pv1",
      {{.item_id = "a", .top = "dress", .clicked = true, .click_offset = 100},
       {.item_id = "b", .top = "shoes"}},
      /*predicted=*/"bags", /*selected=*/"shoes");
  const ClickSummary s = extract_click_summary(r);
  EXPECT_FALSE(s.switch_labels.has_value());
  ASSERT_TRUE(s.first_click.has_value());
}

TEST(ClickSummary, PartitionsResults) {
  const PVRecord r = make_record(
      "pv1", {{.item_id = "a", .clicked = true, .click_offset = 1},
              {.item_id = "b"},
              {.item_id = "c", .clicked = true, .click_offset = 2},
              {.item_id = "d"}});
  const ClickSummary s = extract_click_summary(r);
  EXPECT_EQ(s.clicked_items.size() + s.nonclicked_items.size(), r.results.size());
}

TEST(PvlogWrite, RoundtripManyRecords) {
  std::vector<PVRecord> records;
  records.push_back(make_record("pv1", {{.item_id = "a", .clicked = true, .click_offset = 7}}));
  records.push_back(make_record("pv2", {{.item_id = "b"}, {.item_id = "c"}}, "top01", "top02"));
  std::stringstream stream;
  write_pvlog(stream, records);
  const ParseResult parsed = parse_pvlog(stream);
  ASSERT_EQ(parsed.records.size(), records.size());
  EXPECT_EQ(parsed.records[0], records[0]);
  EXPECT_EQ(parsed.records[1], records[1]);
}

}  // namespace
}  // namespace vid
