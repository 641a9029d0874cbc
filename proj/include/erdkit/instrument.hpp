#pragma once

#include <algorithm>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "erdkit/csv.hpp"
#include "erdkit/error.hpp"

namespace erdkit {

struct ItemDefinition {
  std::string item_id;
  std::string subscale_id;
  int min_response = 0;
  int max_response = 0;
  bool reverse_scored = false;
};

/// A questionnaire: ordered items grouped into subscales, an optional
/// severity threshold on the total score. Immutable after construction.
struct InstrumentDefinition {
  std::string instrument_id;
  std::vector<ItemDefinition> items;
  std::vector<std::string> subscale_ids;  // first-appearance order; canonical for reports
  std::optional<int> severity_threshold;

  const ItemDefinition& item(const std::string& item_id) const {
    for (const auto& it : items) {
      if (it.item_id == item_id) return it;
    }
    throw ValidationError("instrument '" + instrument_id + "': unknown item '" + item_id + "'");
  }

  bool has_subscale(const std::string& subscale_id) const {
    return std::find(subscale_ids.begin(), subscale_ids.end(), subscale_id) != subscale_ids.end();
  }

  std::vector<std::string> subscale_item_ids(const std::string& subscale_id) const {
    if (!has_subscale(subscale_id)) {
      throw ValidationError("instrument '" + instrument_id + "': unknown subscale '" + subscale_id + "'");
    }
    std::vector<std::string> out;
    for (const auto& it : items) {
      if (it.subscale_id == subscale_id) out.push_back(it.item_id);
    }
    return out;
  }

  std::vector<std::string> item_ids() const {
    std::vector<std::string> out;
    out.reserve(items.size());
    for (const auto& it : items) out.push_back(it.item_id);
    return out;
  }

  int min_total() const {
    int s = 0;
    for (const auto& it : items) s += it.min_response;
    return s;
  }

  int max_total() const {
    int s = 0;
    for (const auto& it : items) s += it.max_response;
    return s;
  }

  int subscale_min(const std::string& subscale_id) const {
    int s = 0;
    for (const auto& it : items) {
      if (it.subscale_id == subscale_id) s += it.min_response;
    }
    return s;
  }

  int subscale_max(const std::string& subscale_id) const {
    int s = 0;
    for (const auto& it : items) {
      if (it.subscale_id == subscale_id) s += it.max_response;
    }
    return s;
  }
};

/// One subject's raw responses to one instrument.
struct ResponseSheet {
  std::string subject_id;
  std::string instrument_id;
  std::map<std::string, int> responses;  // item_id -> raw response
};

/// Validates item set and ordering rules and derives subscale_ids.
inline InstrumentDefinition make_instrument(std::string instrument_id,
                                            std::vector<ItemDefinition> items,
                                            std::optional<int> severity_threshold) {
  if (instrument_id.empty()) throw ValidationError("instrument id must be non-empty");
  if (items.empty()) throw ValidationError("instrument '" + instrument_id + "' has no items");
  InstrumentDefinition def;
  def.instrument_id = std::move(instrument_id);
  std::set<std::string> seen;
  for (const auto& it : items) {
    if (it.item_id.empty()) throw ValidationError("instrument '" + def.instrument_id + "': empty item_id");
    if (!seen.insert(it.item_id).second) {
      throw ValidationError("instrument '" + def.instrument_id + "': duplicate item_id '" + it.item_id + "'");
    }
    if (it.subscale_id.empty()) {
      throw ValidationError("instrument '" + def.instrument_id + "': item '" + it.item_id + "' has empty subscale");
    }
    if (it.min_response >= it.max_response) {
      throw ValidationError("instrument '" + def.instrument_id + "': item '" + it.item_id +
                            "' has min >= max (" + std::to_string(it.min_response) + " >= " +
                            std::to_string(it.max_response) + ")");
    }
    if (std::find(def.subscale_ids.begin(), def.subscale_ids.end(), it.subscale_id) == def.subscale_ids.end()) {
      def.subscale_ids.push_back(it.subscale_id);
    }
  }
  def.items = std::move(items);
  if (severity_threshold) {
    if (*severity_threshold < def.min_total() || *severity_threshold > def.max_total()) {
      throw ValidationError("instrument '" + def.instrument_id + "': threshold " +
                            std::to_string(*severity_threshold) + " outside total range [" +
                            std::to_string(def.min_total()) + ", " + std::to_string(def.max_total()) + "]");
    }
    def.severity_threshold = severity_threshold;
  }
  return def;
}

namespace detail {

inline bool parse_bool_flag(const std::string& token, const std::string& context) {
  const std::string t = csv::strip(token);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw ValidationError(context + ": expected true/false, got '" + token + "'");
}

}  // namespace detail

/// Instrument file format:
///   #instrument <id> threshold=<int|none>
///   item_id,subscale_id,min,max,reverse
///   q1,Clarity,1,5,true
inline InstrumentDefinition load_instrument(std::istream& in, const std::string& name = "instrument") {
  const auto lines = csv::read_lines(in);
  std::size_t ln = 0;
  auto context = [&](std::size_t line_no) { return name + ":" + std::to_string(line_no); };
  while (ln < lines.size() && csv::strip(lines[ln]).empty()) ++ln;
  if (ln >= lines.size()) throw ValidationError(name + ": empty instrument file");

  std::string meta = csv::strip(lines[ln]);
  std::istringstream ms(meta);
  std::string tag, id, thr;
  ms >> tag >> id >> thr;
  if (tag != "#instrument" || id.empty() || thr.rfind("threshold=", 0) != 0) {
    throw ValidationError(context(ln + 1) + ": expected '#instrument <id> threshold=<int|none>'");
  }
  std::optional<int> threshold;
  const std::string thr_value = thr.substr(std::string("threshold=").size());
  if (thr_value != "none") threshold = csv::parse_int(thr_value, context(ln + 1) + " threshold");
  ++ln;

  while (ln < lines.size() && csv::strip(lines[ln]).empty()) ++ln;
  if (ln >= lines.size() || csv::strip(lines[ln]) != "item_id,subscale_id,min,max,reverse") {
    throw ValidationError(context(ln + 1) + ": expected header 'item_id,subscale_id,min,max,reverse'");
  }
  ++ln;

  std::vector<ItemDefinition> items;
  std::set<std::string> seen;
  for (; ln < lines.size(); ++ln) {
    const std::string line = csv::strip(lines[ln]);
    if (line.empty()) continue;
    const auto fields = csv::split(line);
    if (fields.size() != 5) {
      throw ValidationError(context(ln + 1) + ": malformed row, expected 5 fields, got " +
                            std::to_string(fields.size()));
    }
    ItemDefinition item;
    item.item_id = csv::strip(fields[0]);
    item.subscale_id = csv::strip(fields[1]);
    item.min_response = csv::parse_int(fields[2], context(ln + 1) + " min");
    item.max_response = csv::parse_int(fields[3], context(ln + 1) + " max");
    item.reverse_scored = detail::parse_bool_flag(fields[4], context(ln + 1) + " reverse");
    if (item.item_id.empty()) throw ValidationError(context(ln + 1) + ": empty item_id");
    if (item.subscale_id.empty()) {
      throw ValidationError(context(ln + 1) + ": item '" + item.item_id + "' references an unknown (empty) subscale");
    }
    if (!seen.insert(item.item_id).second) {
      throw ValidationError(context(ln + 1) + ": duplicate item_id '" + item.item_id + "'");
    }
    if (item.min_response >= item.max_response) {
      throw ValidationError(context(ln + 1) + ": item '" + item.item_id + "' has min >= max");
    }
    items.push_back(std::move(item));
  }
  return make_instrument(id, std::move(items), threshold);
}

inline InstrumentDefinition load_instrument_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open instrument file: " + path);
  return load_instrument(in, path);
}

inline std::string serialize_instrument(const InstrumentDefinition& def) {
  std::string out = "#instrument " + def.instrument_id + " threshold=";
  out += def.severity_threshold ? std::to_string(*def.severity_threshold) : "none";
  out += "\nitem_id,subscale_id,min,max,reverse\n";
  for (const auto& it : def.items) {
    out += it.item_id + "," + it.subscale_id + "," + std::to_string(it.min_response) + "," +
           std::to_string(it.max_response) + "," + (it.reverse_scored ? "true" : "false") + "\n";
  }
  return out;
}

/// Reverse-scored items reflect the raw response about the scale midpoint.
inline int score_item(const ItemDefinition& item, int raw) {
  if (raw < item.min_response || raw > item.max_response) {
    throw ValidationError("item '" + item.item_id + "': response " + std::to_string(raw) +
                          " outside [" + std::to_string(item.min_response) + ", " +
                          std::to_string(item.max_response) + "]");
  }
  return item.reverse_scored ? item.min_response + item.max_response - raw : raw;
}

/// Checks completeness and per-item ranges.
inline void validate_sheet(const InstrumentDefinition& def, const ResponseSheet& sheet) {
  if (sheet.instrument_id != def.instrument_id) {
    throw ValidationError("sheet for '" + sheet.instrument_id + "' scored against instrument '" +
                          def.instrument_id + "'");
  }
  for (const auto& it : def.items) {
    const auto found = sheet.responses.find(it.item_id);
    if (found == sheet.responses.end()) {
      throw ValidationError("subject '" + sheet.subject_id + "': missing response for item '" + it.item_id + "'");
    }
    score_item(it, found->second);  // range check
  }
  if (sheet.responses.size() != def.items.size()) {
    for (const auto& [item_id, value] : sheet.responses) {
      (void)value;
      bool known = false;
      for (const auto& it : def.items) {
        if (it.item_id == item_id) { known = true; break; }
      }
      if (!known) {
        throw ValidationError("subject '" + sheet.subject_id + "': response for unknown item '" + item_id + "'");
      }
    }
  }
}

inline int subscale_score(const InstrumentDefinition& def, const ResponseSheet& sheet,
                          const std::string& subscale_id) {
  if (!def.has_subscale(subscale_id)) {
    throw ValidationError("instrument '" + def.instrument_id + "': unknown subscale '" + subscale_id + "'");
  }
  int sum = 0;
  for (const auto& it : def.items) {
    if (it.subscale_id != subscale_id) continue;
    const auto found = sheet.responses.find(it.item_id);
    if (found == sheet.responses.end()) {
      throw ValidationError("subject '" + sheet.subject_id + "': missing response for item '" + it.item_id + "'");
    }
    sum += score_item(it, found->second);
  }
  return sum;
}

inline int total_score(const InstrumentDefinition& def, const ResponseSheet& sheet) {
  int sum = 0;
  for (const auto& it : def.items) {
    const auto found = sheet.responses.find(it.item_id);
    if (found == sheet.responses.end()) {
      throw ValidationError("subject '" + sheet.subject_id + "': missing response for item '" + it.item_id + "'");
    }
    sum += score_item(it, found->second);
  }
  return sum;
}

enum class SeverityLabel { negative, positive };

inline const char* to_string(SeverityLabel label) {
  return label == SeverityLabel::positive ? "positive" : "negative";
}

/// Positive at or above the threshold (boundary inclusive).
inline SeverityLabel classify_severity(const InstrumentDefinition& def, int total) {
  if (!def.severity_threshold) {
    throw ValidationError("instrument '" + def.instrument_id + "' has no severity threshold");
  }
  if (total < def.min_total() || total > def.max_total()) {
    throw ValidationError("instrument '" + def.instrument_id + "': total " + std::to_string(total) +
                          " outside [" + std::to_string(def.min_total()) + ", " +
                          std::to_string(def.max_total()) + "]");
  }
  return total >= *def.severity_threshold ? SeverityLabel::positive : SeverityLabel::negative;
}

/// Response sheet CSV: header `subject_id,item_id,response`, one row per
/// (subject, item). Returns sheets keyed by subject in first-appearance order.
inline std::vector<ResponseSheet> load_response_sheets(std::istream& in, const InstrumentDefinition& def,
                                                       const std::string& name = "responses") {
  const auto lines = csv::read_lines(in);
  std::size_t ln = 0;
  while (ln < lines.size() && csv::strip(lines[ln]).empty()) ++ln;
  if (ln >= lines.size() || csv::strip(lines[ln]) != "subject_id,item_id,response") {
    throw ValidationError(name + ": expected header 'subject_id,item_id,response'");
  }
  ++ln;
  std::vector<ResponseSheet> sheets;
  std::unordered_map<std::string, std::size_t> index;
  for (; ln < lines.size(); ++ln) {
    const std::string line = csv::strip(lines[ln]);
    if (line.empty()) continue;
    const auto fields = csv::split(line);
    const std::string context = name + ":" + std::to_string(ln + 1);
    if (fields.size() != 3) throw ValidationError(context + ": malformed row");
    const std::string subject_id = csv::strip(fields[0]);
    const std::string item_id = csv::strip(fields[1]);
    const int response = csv::parse_int(fields[2], context + " response");
    if (subject_id.empty() || item_id.empty()) throw ValidationError(context + ": empty key field");
    auto [it, inserted] = index.try_emplace(subject_id, sheets.size());
    if (inserted) {
      sheets.push_back(ResponseSheet{subject_id, def.instrument_id, {}});
    }
    auto& sheet = sheets[it->second];
    if (!sheet.responses.emplace(item_id, response).second) {
      throw ValidationError(context + ": duplicate response for (" + subject_id + ", " + item_id + ")");
    }
  }
  for (const auto& sheet : sheets) validate_sheet(def, sheet);
  return sheets;
}

inline std::vector<ResponseSheet> load_response_sheets_file(const std::string& path,
                                                            const InstrumentDefinition& def) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open responses file: " + path);
  return load_response_sheets(in, def, path);
}

inline std::string serialize_response_sheets(const std::vector<ResponseSheet>& sheets,
                                             const InstrumentDefinition& def) {
  std::string out = "subject_id,item_id,response\n";
  for (const auto& sheet : sheets) {
    for (const auto& it : def.items) {  // instrument item order
      out += sheet.subject_id + "," + it.item_id + "," + std::to_string(sheet.responses.at(it.item_id)) + "\n";
    }
  }
  return out;
}

}  // namespace erdkit
