#pragma once

#include <cmath>
#include <istream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "erdkit/csv.hpp"
#include "erdkit/error.hpp"

namespace erdkit {

enum class Modality { audio, video, fused };

inline const char* to_string(Modality m) {
  switch (m) {
    case Modality::audio: return "audio";
    case Modality::video: return "video";
    case Modality::fused: return "fused";
  }
  return "?";
}

inline Modality modality_from_string(const std::string& s) {
  if (s == "audio") return Modality::audio;
  if (s == "video") return Modality::video;
  if (s == "fused") return Modality::fused;
  throw ValidationError("unknown modality '" + s + "'");
}

struct FeatureSchema {
  Modality modality = Modality::audio;
  std::vector<std::string> feature_names;

  std::size_t dimension() const { return feature_names.size(); }
};

inline FeatureSchema make_schema(Modality modality, std::vector<std::string> names) {
  if (names.empty()) throw ValidationError("feature schema must have at least one feature");
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (n.empty()) throw ValidationError("feature schema contains an empty name");
    if (!seen.insert(n).second) throw ValidationError("feature schema has duplicate name '" + n + "'");
  }
  return FeatureSchema{modality, std::move(names)};
}

/// Per-(subject, item) feature vectors under one schema. Keyed storage;
/// immutable after load.
struct FeatureTable {
  using Key = std::pair<std::string, std::string>;  // (subject_id, item_id)

  FeatureSchema schema;
  std::map<Key, std::vector<double>> rows;

  const std::vector<double>& row(const std::string& subject_id, const std::string& item_id) const {
    const auto it = rows.find({subject_id, item_id});
    if (it == rows.end()) {
      throw ValidationError("no feature row for (" + subject_id + ", " + item_id + ")");
    }
    return it->second;
  }

  bool has_row(const std::string& subject_id, const std::string& item_id) const {
    return rows.count({subject_id, item_id}) > 0;
  }
};

inline void insert_row(FeatureTable& table, const std::string& subject_id, const std::string& item_id,
                       std::vector<double> values) {
  if (values.size() != table.schema.dimension()) {
    throw ValidationError("feature row for (" + subject_id + ", " + item_id + ") has dimension " +
                          std::to_string(values.size()) + ", schema expects " +
                          std::to_string(table.schema.dimension()));
  }
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw ValidationError("non-finite feature value for (" + subject_id + ", " + item_id + ")");
    }
  }
  if (!table.rows.emplace(FeatureTable::Key{subject_id, item_id}, std::move(values)).second) {
    throw ValidationError("duplicate feature key (" + subject_id + ", " + item_id + ")");
  }
}

/// Feature CSV: header `subject_id,item_id,<feature names...>`; numeric cells
/// in decimal or scientific notation.
inline FeatureTable load_feature_table(std::istream& in, const FeatureSchema& schema,
                                       const std::string& name = "features") {
  const auto lines = csv::read_lines(in);
  std::size_t ln = 0;
  while (ln < lines.size() && csv::strip(lines[ln]).empty()) ++ln;
  if (ln >= lines.size()) throw ValidationError(name + ": empty feature file");

  std::vector<std::string> expected = {"subject_id", "item_id"};
  expected.insert(expected.end(), schema.feature_names.begin(), schema.feature_names.end());
  const auto header = csv::split(csv::strip(lines[ln]));
  if (header != expected) {
    throw ValidationError(name + ":" + std::to_string(ln + 1) + ": header does not match schema (" +
                          std::to_string(header.size()) + " columns, expected " +
                          std::to_string(expected.size()) + ")");
  }
  ++ln;

  FeatureTable table{schema, {}};
  for (; ln < lines.size(); ++ln) {
    const std::string line = csv::strip(lines[ln]);
    if (line.empty()) continue;
    const auto fields = csv::split(line);
    const std::string context = name + ":" + std::to_string(ln + 1);
    if (fields.size() != expected.size()) {
      throw ValidationError(context + ": expected " + std::to_string(expected.size()) + " fields, got " +
                            std::to_string(fields.size()));
    }
    std::vector<double> values;
    values.reserve(schema.dimension());
    for (std::size_t c = 2; c < fields.size(); ++c) {
      const double v = csv::parse_double(fields[c], context + " '" + schema.feature_names[c - 2] + "'");
      if (!std::isfinite(v)) {
        throw ValidationError(context + ": non-finite value in '" + schema.feature_names[c - 2] + "'");
      }
      values.push_back(v);
    }
    const std::string subject_id = csv::strip(fields[0]);
    const std::string item_id = csv::strip(fields[1]);
    if (subject_id.empty() || item_id.empty()) throw ValidationError(context + ": empty key field");
    if (table.rows.count({subject_id, item_id})) {
      throw ValidationError(context + ": duplicate feature key (" + subject_id + ", " + item_id + ")");
    }
    table.rows.emplace(FeatureTable::Key{subject_id, item_id}, std::move(values));
  }
  return table;
}

inline FeatureTable load_feature_table_file(const std::string& path, const FeatureSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open feature file: " + path);
  return load_feature_table(in, schema, path);
}

/// Written back with 9 significant digits; load(save(t)) == t holds because
/// tables are quantized to that precision at generation time.
inline std::string serialize_feature_table(const FeatureTable& table) {
  std::string out = "subject_id,item_id";
  for (const auto& n : table.schema.feature_names) out += "," + n;
  out += "\n";
  for (const auto& [key, values] : table.rows) {
    out += key.first + "," + key.second;
    for (double v : values) out += "," + csv::format_sig9(v);
    out += "\n";
  }
  return out;
}

/// Feature-level fusion: audio names then video names, rows concatenated
/// audio-then-video over the shared key set.
inline FeatureTable fuse(const FeatureTable& audio, const FeatureTable& video) {
  std::vector<std::string> only_audio;
  std::vector<std::string> only_video;
  for (const auto& [key, values] : audio.rows) {
    (void)values;
    if (!video.rows.count(key)) only_audio.push_back("(" + key.first + ", " + key.second + ")");
  }
  for (const auto& [key, values] : video.rows) {
    (void)values;
    if (!audio.rows.count(key)) only_video.push_back("(" + key.first + ", " + key.second + ")");
  }
  if (!only_audio.empty() || !only_video.empty()) {
    std::string msg = "fuse: key sets differ;";
    if (!only_audio.empty()) {
      msg += " only in first:";
      for (const auto& k : only_audio) msg += " " + k;
      msg += ";";
    }
    if (!only_video.empty()) {
      msg += " only in second:";
      for (const auto& k : only_video) msg += " " + k;
    }
    throw ValidationError(msg);
  }

  std::vector<std::string> names = audio.schema.feature_names;
  names.insert(names.end(), video.schema.feature_names.begin(), video.schema.feature_names.end());
  FeatureTable out{make_schema(Modality::fused, std::move(names)), {}};
  for (const auto& [key, a_values] : audio.rows) {
    std::vector<double> row = a_values;
    const auto& v_values = video.rows.at(key);
    row.insert(row.end(), v_values.begin(), v_values.end());
    out.rows.emplace(key, std::move(row));
  }
  return out;
}

/// Componentwise mean of the item vectors; the subscale-level (and
/// subject-level) input construction.
inline std::vector<double> aggregate_items(const FeatureTable& table, const std::string& subject_id,
                                           const std::vector<std::string>& item_ids) {
  if (item_ids.empty()) throw ValidationError("aggregate_items: empty item list");
  std::vector<double> mean(table.schema.dimension(), 0.0);
  for (const auto& item_id : item_ids) {
    const auto& row = table.row(subject_id, item_id);
    for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += row[c];
  }
  const double inv = 1.0 / static_cast<double>(item_ids.size());
  for (double& v : mean) v *= inv;
  return mean;
}

/// Per-feature z-scoring fitted on training rows only. Zero-variance features
/// pass through unchanged.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;  // 1/sd, or 1 for degenerate features

  std::vector<double> apply(const std::vector<double>& x) const {
    if (x.size() != mean.size()) {
      throw ValidationError("standardizer: dimension mismatch (" + std::to_string(x.size()) + " vs " +
                            std::to_string(mean.size()) + ")");
    }
    std::vector<double> out(x.size());
    for (std::size_t c = 0; c < x.size(); ++c) out[c] = (x[c] - mean[c]) * scale[c];
    return out;
  }
};

inline Standardizer fit_standardizer(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw ValidationError("fit_standardizer: no rows");
  const std::size_t dim = rows.front().size();
  Standardizer s;
  s.mean.assign(dim, 0.0);
  s.scale.assign(dim, 1.0);
  for (const auto& row : rows) {
    if (row.size() != dim) throw ValidationError("fit_standardizer: ragged rows");
    for (std::size_t c = 0; c < dim; ++c) s.mean[c] += row[c];
  }
  for (double& m : s.mean) m /= static_cast<double>(rows.size());
  for (std::size_t c = 0; c < dim; ++c) {
    double ss = 0.0;
    for (const auto& row : rows) {
      const double d = row[c] - s.mean[c];
      ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(rows.size()));
    if (sd > 0.0) s.scale[c] = 1.0 / sd;
  }
  return s;
}

}  // namespace erdkit
