#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "erdkit/csv.hpp"
#include "erdkit/error.hpp"
#include "erdkit/features.hpp"
#include "erdkit/instrument.hpp"

namespace erdkit {

enum class Target { MDD, PTSD };

inline const char* to_string(Target t) { return t == Target::MDD ? "MDD" : "PTSD"; }

inline Target target_from_string(const std::string& s) {
  if (s == "MDD") return Target::MDD;
  if (s == "PTSD") return Target::PTSD;
  throw ValidationError("unknown target '" + s + "' (expected MDD or PTSD)");
}

/// Subjects, their response sheets, per-modality feature tables, and severity
/// ground truths. The unit of evaluation; complete and mutually consistent.
struct Cohort {
  InstrumentDefinition interaction;  // the instrument whose items carry feature rows
  std::map<Target, InstrumentDefinition> target_instruments;
  std::vector<std::string> subject_ids;  // sorted
  // instrument_id -> subject_id -> sheet
  std::map<std::string, std::map<std::string, ResponseSheet>> sheets;
  std::map<Modality, FeatureTable> features;  // audio, video, fused
  std::map<Target, std::map<std::string, int>> severities;  // self-reported totals

  const ResponseSheet& sheet(const std::string& instrument_id, const std::string& subject_id) const {
    const auto inst = sheets.find(instrument_id);
    if (inst == sheets.end()) throw ValidationError("cohort has no sheets for instrument '" + instrument_id + "'");
    const auto subj = inst->second.find(subject_id);
    if (subj == inst->second.end()) {
      throw ValidationError("cohort has no '" + instrument_id + "' sheet for subject '" + subject_id + "'");
    }
    return subj->second;
  }

  const FeatureTable& feature_table(Modality m) const {
    const auto it = features.find(m);
    if (it == features.end()) throw ValidationError(std::string("cohort has no ") + to_string(m) + " features");
    return it->second;
  }

  int severity_truth(Target target, const std::string& subject_id) const {
    const auto t = severities.find(target);
    if (t == severities.end()) throw ValidationError(std::string("cohort has no ") + to_string(target) + " severities");
    const auto s = t->second.find(subject_id);
    if (s == t->second.end()) {
      throw ValidationError(std::string("no ") + to_string(target) + " severity for subject '" + subject_id + "'");
    }
    return s->second;
  }
};

/// Full consistency check: every subject appears in every sheet map, feature
/// table, and severity column; sheets validate against their instruments;
/// severities equal the self-reported totals.
inline void validate_cohort(const Cohort& cohort) {
  if (cohort.subject_ids.size() < 2) throw ValidationError("cohort needs at least 2 subjects");
  std::set<std::string> unique(cohort.subject_ids.begin(), cohort.subject_ids.end());
  if (unique.size() != cohort.subject_ids.size()) throw ValidationError("cohort has duplicate subject ids");

  std::vector<const InstrumentDefinition*> instruments = {&cohort.interaction};
  for (const auto& [target, def] : cohort.target_instruments) {
    (void)target;
    instruments.push_back(&def);
  }
  for (const auto* def : instruments) {
    const auto found = cohort.sheets.find(def->instrument_id);
    if (found == cohort.sheets.end()) {
      throw ValidationError("cohort missing sheets for instrument '" + def->instrument_id + "'");
    }
    for (const auto& subject_id : cohort.subject_ids) {
      const auto sheet = found->second.find(subject_id);
      if (sheet == found->second.end()) {
        throw ValidationError("subject '" + subject_id + "' missing '" + def->instrument_id + "' sheet");
      }
      validate_sheet(*def, sheet->second);
    }
  }

  for (const Modality m : {Modality::audio, Modality::video}) {
    const auto& table = cohort.feature_table(m);
    for (const auto& subject_id : cohort.subject_ids) {
      for (const auto& item : cohort.interaction.items) {
        if (!table.has_row(subject_id, item.item_id)) {
          throw ValidationError(std::string(to_string(m)) + " features missing row (" + subject_id + ", " +
                                item.item_id + ")");
        }
      }
    }
    if (table.rows.size() != cohort.subject_ids.size() * cohort.interaction.items.size()) {
      throw ValidationError(std::string(to_string(m)) + " features contain rows outside the cohort grid");
    }
  }

  for (const auto& [target, def] : cohort.target_instruments) {
    const auto severity_column = cohort.severities.find(target);
    if (severity_column == cohort.severities.end()) {
      throw ValidationError(std::string("cohort missing ") + to_string(target) + " severities");
    }
    for (const auto& subject_id : cohort.subject_ids) {
      const auto found = severity_column->second.find(subject_id);
      if (found == severity_column->second.end()) {
        throw ValidationError(std::string("missing ") + to_string(target) + " severity for '" + subject_id + "'");
      }
      const int total = total_score(def, cohort.sheet(def.instrument_id, subject_id));
      if (total != found->second) {
        throw ValidationError(std::string(to_string(target)) + " severity for '" + subject_id + "' (" +
                              std::to_string(found->second) + ") does not match self-reported total (" +
                              std::to_string(total) + ")");
      }
    }
  }
}

/// Directory layout:
///   instruments/<id>.csv   responses/<id>.csv
///   features_audio.csv     features_video.csv
///   severities.csv         (header subject_id,target,total)
inline void save_cohort(const Cohort& cohort, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "instruments", ec);
  fs::create_directories(fs::path(dir) / "responses", ec);
  if (ec) throw ValidationError("cannot create cohort directory: " + dir);

  std::vector<const InstrumentDefinition*> instruments = {&cohort.interaction};
  for (const auto& [target, def] : cohort.target_instruments) {
    (void)target;
    instruments.push_back(&def);
  }
  for (const auto* def : instruments) {
    csv::write_file((fs::path(dir) / "instruments" / (def->instrument_id + ".csv")).string(),
                    serialize_instrument(*def));
    std::vector<ResponseSheet> ordered;
    for (const auto& subject_id : cohort.subject_ids) {
      ordered.push_back(cohort.sheet(def->instrument_id, subject_id));
    }
    csv::write_file((fs::path(dir) / "responses" / (def->instrument_id + ".csv")).string(),
                    serialize_response_sheets(ordered, *def));
  }

  for (const Modality m : {Modality::audio, Modality::video}) {
    csv::write_file((fs::path(dir) / ("features_" + std::string(to_string(m)) + ".csv")).string(),
                    serialize_feature_table(cohort.feature_table(m)));
  }

  std::string severities = "subject_id,target,total\n";
  for (const auto& [target, column] : cohort.severities) {
    for (const auto& subject_id : cohort.subject_ids) {
      severities += subject_id + "," + to_string(target) + "," + std::to_string(column.at(subject_id)) + "\n";
    }
  }
  csv::write_file((fs::path(dir) / "severities.csv").string(), severities);
}

namespace detail {

/// Builds the schema from the file's own header line.
inline FeatureTable load_feature_table_inferred(const std::string& path, Modality modality) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open feature file: " + path);
  std::string header_line;
  if (!std::getline(in, header_line)) throw ValidationError(path + ": empty feature file");
  if (!header_line.empty() && header_line.back() == '\r') header_line.pop_back();
  auto header = csv::split(csv::strip(header_line));
  if (header.size() < 3 || header[0] != "subject_id" || header[1] != "item_id") {
    throw ValidationError(path + ": expected header 'subject_id,item_id,<feature names...>'");
  }
  const FeatureSchema schema = make_schema(modality, {header.begin() + 2, header.end()});
  in.clear();
  in.seekg(0);
  return load_feature_table(in, schema, path);
}

}  // namespace detail

inline Cohort load_cohort(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  if (!fs::is_directory(root / "instruments")) {
    throw ValidationError("not a cohort directory (no instruments/): " + dir);
  }

  std::vector<InstrumentDefinition> instruments;
  std::vector<std::string> instrument_files;
  for (const auto& entry : fs::directory_iterator(root / "instruments")) {
    if (entry.path().extension() == ".csv") instrument_files.push_back(entry.path().string());
  }
  std::sort(instrument_files.begin(), instrument_files.end());
  for (const auto& path : instrument_files) instruments.push_back(load_instrument_file(path));
  if (instruments.empty()) throw ValidationError("cohort has no instrument files: " + dir);

  Cohort cohort;
  std::set<std::string> subjects;
  for (const auto& def : instruments) {
    const std::string path = (root / "responses" / (def.instrument_id + ".csv")).string();
    const auto sheets = load_response_sheets_file(path, def);
    auto& by_subject = cohort.sheets[def.instrument_id];
    for (const auto& sheet : sheets) {
      subjects.insert(sheet.subject_id);
      by_subject.emplace(sheet.subject_id, sheet);
    }
  }
  cohort.subject_ids.assign(subjects.begin(), subjects.end());

  cohort.features.emplace(Modality::audio, detail::load_feature_table_inferred(
                                               (root / "features_audio.csv").string(), Modality::audio));
  cohort.features.emplace(Modality::video, detail::load_feature_table_inferred(
                                               (root / "features_video.csv").string(), Modality::video));

  // The interaction instrument is the one whose item grid the feature tables cover.
  const auto& audio = cohort.features.at(Modality::audio);
  std::set<std::string> feature_items;
  for (const auto& [key, row] : audio.rows) {
    (void)row;
    feature_items.insert(key.second);
  }
  const InstrumentDefinition* interaction = nullptr;
  for (const auto& def : instruments) {
    const auto ids = def.item_ids();
    if (std::set<std::string>(ids.begin(), ids.end()) == feature_items) {
      if (interaction) throw ValidationError("ambiguous interaction instrument: feature items match both '" +
                                             interaction->instrument_id + "' and '" + def.instrument_id + "'");
      interaction = &def;
    }
  }
  if (!interaction) throw ValidationError("no instrument matches the feature tables' item ids");
  cohort.interaction = *interaction;

  {
    std::ifstream in((root / "severities.csv").string());
    if (!in) throw ValidationError("cannot open " + (root / "severities.csv").string());
    const auto lines = csv::read_lines(in);
    if (lines.empty() || csv::strip(lines[0]) != "subject_id,target,total") {
      throw ValidationError("severities.csv: expected header 'subject_id,target,total'");
    }
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
      const std::string line = csv::strip(lines[ln]);
      if (line.empty()) continue;
      const auto fields = csv::split(line);
      const std::string context = "severities.csv:" + std::to_string(ln + 1);
      if (fields.size() != 3) throw ValidationError(context + ": malformed row");
      const Target target = target_from_string(csv::strip(fields[1]));
      const int total = csv::parse_int(fields[2], context + " total");
      if (!cohort.severities[target].emplace(csv::strip(fields[0]), total).second) {
        throw ValidationError(context + ": duplicate severity for (" + fields[0] + ", " + fields[1] + ")");
      }
    }
  }

  // Resolve each target to the instrument whose self-reported totals equal
  // the severity column exactly.
  for (const auto& [target, column] : cohort.severities) {
    const InstrumentDefinition* match = nullptr;
    for (const auto& def : instruments) {
      if (def.instrument_id == cohort.interaction.instrument_id) continue;
      bool all_equal = true;
      for (const auto& subject_id : cohort.subject_ids) {
        const auto found = column.find(subject_id);
        if (found == column.end() ||
            total_score(def, cohort.sheet(def.instrument_id, subject_id)) != found->second) {
          all_equal = false;
          break;
        }
      }
      if (all_equal) {
        if (match) {
          throw ValidationError(std::string("ambiguous instrument for target ") + to_string(target));
        }
        match = &def;
      }
    }
    if (!match) {
      throw ValidationError(std::string("no instrument's totals match the ") + to_string(target) +
                            " severity column");
    }
    cohort.target_instruments.emplace(target, *match);
  }

  cohort.features.emplace(Modality::fused,
                          fuse(cohort.feature_table(Modality::audio), cohort.feature_table(Modality::video)));
  validate_cohort(cohort);
  return cohort;
}

}  // namespace erdkit
