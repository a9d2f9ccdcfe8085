// Page-view click-log records: schema, validation, JSON-lines parsing and
// serialization, and per-record click semantics (first-click, switch-click).
#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vid/common.hpp"

namespace vid {

// One feature vector per channel; all entries of a record share channel arity.
using FeatureChannels = std::vector<std::vector<double>>;

struct ResultEntry {
  std::string item_id;
  std::string leaf_category;
  std::string top_category;
  int position = 0;  // 1-based
  bool clicked = false;
  std::optional<std::int64_t> click_time;
  FeatureChannels item_features;

  bool operator==(const ResultEntry&) const = default;
};

struct PVRecord {
  std::string pv_id;
  std::string user_id;
  std::string query_id;
  FeatureChannels query_features;
  std::int64_t timestamp = 0;
  std::string predicted_top_category;
  std::optional<std::string> selected_top_category;
  std::vector<ResultEntry> results;

  bool operator==(const PVRecord&) const = default;
};

struct ClickSummary {
  // (item_id, top_category) of the earliest click; absent when nothing was clicked.
  std::optional<std::pair<std::string, std::string>> first_click;
  // (y_neg, y_hard): abandoned predicted category and the category clicked
  // after the tab switch.
  std::optional<std::pair<std::string, std::string>> switch_labels;
  std::vector<std::string> clicked_items;
  std::vector<std::string> nonclicked_items;
};

// ---------------------------------------------------------------------------
// Validation

// Returns a human-readable reason when the record violates an invariant,
// std::nullopt when valid.
inline std::optional<std::string> validate_record(const PVRecord& record) {
  for (std::size_t i = 0; i < record.results.size(); ++i) {
    const ResultEntry& entry = record.results[i];
    if (entry.position != static_cast<int>(i) + 1) {
      return "result positions must be exactly 1..N in order (got " +
             std::to_string(entry.position) + " at index " + std::to_string(i) + ")";
    }
    if (entry.clicked) {
      if (!entry.click_time.has_value()) {
        return "clicked entry '" + entry.item_id + "' lacks click_ts";
      }
      if (*entry.click_time < record.timestamp) {
        return "click_ts of '" + entry.item_id + "' precedes the record timestamp";
      }
    } else if (entry.click_time.has_value()) {
      return "non-clicked entry '" + entry.item_id + "' carries click_ts";
    }
    if (entry.item_features.size() != record.query_features.size()) {
      return "entry '" + entry.item_id + "' feature-channel arity differs from query";
    }
  }
  // Per-channel dimensions must agree across entries.
  for (std::size_t i = 1; i < record.results.size(); ++i) {
    const FeatureChannels& a = record.results[0].item_features;
    const FeatureChannels& b = record.results[i].item_features;
    for (std::size_t m = 0; m < a.size(); ++m) {
      if (a[m].size() != b[m].size()) {
        return "entry '" + record.results[i].item_id +
               "' channel dimension differs from first entry";
      }
    }
  }
  if (record.selected_top_category.has_value() &&
      *record.selected_top_category == record.predicted_top_category) {
    return "sel_cat equals pred_cat";
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// JSON-lines serialization.
// Schema: {"pv_id","user_id","query_id","query_features","ts","pred_cat",
//          "sel_cat","results":[{"item_id","leaf","top","pos","clicked",
//          "click_ts","features"}]}

inline nlohmann::ordered_json record_to_json(const PVRecord& record) {
  nlohmann::ordered_json j;
  j["pv_id"] = record.pv_id;
  j["user_id"] = record.user_id;
  j["query_id"] = record.query_id;
  j["query_features"] = record.query_features;
  j["ts"] = record.timestamp;
  j["pred_cat"] = record.predicted_top_category;
  if (record.selected_top_category.has_value()) {
    j["sel_cat"] = *record.selected_top_category;
  } else {
    j["sel_cat"] = nullptr;
  }
  nlohmann::ordered_json results = nlohmann::ordered_json::array();
  for (const ResultEntry& entry : record.results) {
    nlohmann::ordered_json e;
    e["item_id"] = entry.item_id;
    e["leaf"] = entry.leaf_category;
    e["top"] = entry.top_category;
    e["pos"] = entry.position;
    e["clicked"] = entry.clicked;
    if (entry.click_time.has_value()) {
      e["click_ts"] = *entry.click_time;
    } else {
      e["click_ts"] = nullptr;
    }
    e["features"] = entry.item_features;
    results.push_back(std::move(e));
  }
  j["results"] = std::move(results);
  return j;
}

inline std::string serialize_record(const PVRecord& record) {
  return record_to_json(record).dump();
}

inline PVRecord record_from_json(const nlohmann::json& j) {
  PVRecord record;
  record.pv_id = j.at("pv_id").get<std::string>();
  record.user_id = j.at("user_id").get<std::string>();
  record.query_id = j.at("query_id").get<std::string>();
  record.query_features = j.at("query_features").get<FeatureChannels>();
  record.timestamp = j.at("ts").get<std::int64_t>();
  record.predicted_top_category = j.at("pred_cat").get<std::string>();
  if (!j.at("sel_cat").is_null()) {
    record.selected_top_category = j.at("sel_cat").get<std::string>();
  }
  for (const auto& e : j.at("results")) {
    ResultEntry entry;
    entry.item_id = e.at("item_id").get<std::string>();
    entry.leaf_category = e.at("leaf").get<std::string>();
    entry.top_category = e.at("top").get<std::string>();
    entry.position = e.at("pos").get<int>();
    entry.clicked = e.at("clicked").get<bool>();
    if (!e.at("click_ts").is_null()) {
      entry.click_time = e.at("click_ts").get<std::int64_t>();
    }
    entry.item_features = e.at("features").get<FeatureChannels>();
    record.results.push_back(std::move(entry));
  }
  return record;
}

struct ParseResult {
  std::vector<PVRecord> records;
  // (line number, reason) of lines skipped in lenient mode.
  std::vector<std::pair<int, std::string>> skipped;
};

// Parses a JSON-lines stream. In strict mode the first unparseable or
// invariant-violating line raises MalformedLine; otherwise such lines are
// recorded in `skipped` and parsing continues.
inline ParseResult parse_pvlog(std::istream& in, bool strict = false) {
  ParseResult out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::string reason;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      PVRecord record = record_from_json(j);
      if (auto bad = validate_record(record); bad.has_value()) {
        reason = *bad;
      } else {
        out.records.push_back(std::move(record));
        continue;
      }
    } catch (const nlohmann::json::exception& e) {
      reason = e.what();
    }
    if (strict) {
      fail(ErrorCode::kMalformedLine,
           "line " + std::to_string(line_no) + ": " + reason);
    }
    out.skipped.emplace_back(line_no, reason);
  }
  return out;
}

inline void write_pvlog(std::ostream& out, const std::vector<PVRecord>& records) {
  for (const PVRecord& record : records) {
    out << serialize_record(record) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Click semantics

// A click counts as post-switch when the clicked entry sits in the selected
// top category; the log carries no switch timestamp, so the category tab a
// click happened on is the observable signal.
inline ClickSummary extract_click_summary(const PVRecord& record) {
  ClickSummary summary;
  const ResultEntry* first = nullptr;
  bool clicked_selected = false;
  for (const ResultEntry& entry : record.results) {
    if (entry.clicked) {
      summary.clicked_items.push_back(entry.item_id);
      if (first == nullptr || *entry.click_time < *first->click_time ||
          (*entry.click_time == *first->click_time &&
           entry.position < first->position)) {
        first = &entry;
      }
      if (record.selected_top_category.has_value() &&
          entry.top_category == *record.selected_top_category) {
        clicked_selected = true;
      }
    } else {
      summary.nonclicked_items.push_back(entry.item_id);
    }
  }
  if (first != nullptr) {
    summary.first_click = {first->item_id, first->top_category};
  }
  if (clicked_selected) {
    summary.switch_labels = {record.predicted_top_category,
                             *record.selected_top_category};
  }
  return summary;
}

}  // namespace vid
