#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "erdkit/cohort.hpp"
#include "erdkit/csv.hpp"
#include "erdkit/error.hpp"
#include "erdkit/parallel.hpp"
#include "erdkit/pipeline.hpp"
#include "erdkit/rng.hpp"

namespace erdkit {

struct LosoFold {
  std::vector<std::string> train_subjects;
  std::string test_subject;
};

/// One fold per subject, in sorted id order; fold i trains on everyone else.
inline std::vector<LosoFold> loso_folds(const std::vector<std::string>& subject_ids) {
  if (subject_ids.size() < 2) throw ValidationError("loso_folds: need at least 2 subjects");
  std::vector<std::string> sorted = subject_ids;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ValidationError("loso_folds: duplicate subject ids");
  }
  std::vector<LosoFold> folds;
  folds.reserve(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    LosoFold fold;
    fold.test_subject = sorted[i];
    fold.train_subjects.reserve(sorted.size() - 1);
    for (std::size_t j = 0; j < sorted.size(); ++j) {
      if (j != i) fold.train_subjects.push_back(sorted[j]);
    }
    folds.push_back(std::move(fold));
  }
  return folds;
}

namespace detail {

inline void check_metric_inputs(const std::vector<double>& predictions, const std::vector<double>& truths,
                                const char* name) {
  if (predictions.empty() || truths.empty()) throw ValidationError(std::string(name) + ": empty input lists");
  if (predictions.size() != truths.size()) {
    throw ValidationError(std::string(name) + ": length mismatch (" + std::to_string(predictions.size()) +
                          " vs " + std::to_string(truths.size()) + ")");
  }
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (!std::isfinite(predictions[i]) || !std::isfinite(truths[i])) {
      throw ValidationError(std::string(name) + ": non-finite value at index " + std::to_string(i));
    }
  }
}

}  // namespace detail

inline double rmse(const std::vector<double>& predictions, const std::vector<double>& truths) {
  detail::check_metric_inputs(predictions, truths, "rmse");
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double e = predictions[i] - truths[i];
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(predictions.size()));
}

inline double mae(const std::vector<double>& predictions, const std::vector<double>& truths) {
  detail::check_metric_inputs(predictions, truths, "mae");
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    sum += std::abs(predictions[i] - truths[i]);
  }
  return sum / static_cast<double>(predictions.size());
}

enum class ExperimentKind { ders_table, selfreport_cascade, severity_compare };

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::ders_table: return "ders";
    case ExperimentKind::selfreport_cascade: return "cascade";
    case ExperimentKind::severity_compare: return "severity";
  }
  return "?";
}

inline ExperimentKind experiment_kind_from_string(const std::string& s) {
  if (s == "ders") return ExperimentKind::ders_table;
  if (s == "cascade") return ExperimentKind::selfreport_cascade;
  if (s == "severity") return ExperimentKind::severity_compare;
  throw ValidationError("unknown experiment '" + s + "' (expected ders, cascade, or severity)");
}

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::ders_table;
  std::vector<Modality> modalities;  // canonical order: audio, video, fused
  std::vector<Approach> approaches;  // canonical order: direct, indirect
  std::vector<Target> targets;       // canonical order: MDD, PTSD
  std::uint64_t master_seed = 0;
};

inline void validate_experiment_spec(const ExperimentSpec& spec) {
  auto no_duplicates = [](auto items, const char* what) {
    std::sort(items.begin(), items.end());
    if (std::adjacent_find(items.begin(), items.end()) != items.end()) {
      throw ValidationError(std::string("experiment spec: duplicate ") + what);
    }
  };
  no_duplicates(spec.modalities, "modalities");
  no_duplicates(spec.approaches, "approaches");
  no_duplicates(spec.targets, "targets");
  switch (spec.kind) {
    case ExperimentKind::ders_table:
      if (spec.modalities.empty()) throw ValidationError("ders experiment needs at least one modality");
      if (spec.approaches.empty()) throw ValidationError("ders experiment needs at least one approach");
      if (!spec.targets.empty()) throw ValidationError("ders experiment does not take targets");
      break;
    case ExperimentKind::selfreport_cascade:
      if (spec.targets.empty()) throw ValidationError("cascade experiment needs at least one target");
      if (!spec.modalities.empty()) {
        throw ValidationError("cascade experiment uses self-reports only; modalities do not apply");
      }
      if (!spec.approaches.empty()) {
        throw ValidationError("cascade experiment uses self-reports only; approaches do not apply");
      }
      break;
    case ExperimentKind::severity_compare:
      if (spec.targets.empty()) throw ValidationError("severity experiment needs at least one target");
      if (spec.modalities.empty()) throw ValidationError("severity experiment needs at least one modality");
      if (!spec.approaches.empty()) {
        throw ValidationError("severity experiment fixes the direct approach; approaches do not apply");
      }
      break;
  }
}

struct ReportRow {
  std::string kind;      // ders | cascade | severity
  std::string target;    // subscale id, or MDD/PTSD
  std::string modality;  // audio | video | fused | -
  std::string route;     // direct | indirect | via_erd | bypass | self_report
  std::string metric;    // rmse | mae
  double value = 0.0;
};

struct EvaluationReport {
  std::vector<ReportRow> rows;
  std::vector<std::string> provenance;  // rendered as leading # comments in the CSV
};

inline void validate_report(const EvaluationReport& report) {
  std::set<std::string> keys;
  for (const auto& row : report.rows) {
    if (!std::isfinite(row.value) || row.value < 0.0) {
      throw ValidationError("report: metric value must be finite and >= 0");
    }
    const std::string key = row.kind + "|" + row.target + "|" + row.modality + "|" + row.route + "|" + row.metric;
    if (!keys.insert(key).second) throw ValidationError("report: duplicate row key " + key);
  }
}

/// Model configuration used inside experiment runs. Forest defaults follow
/// the 10-tree setup; per-fold and per-model seeds derive from the
/// experiment's master seed so fold scheduling cannot affect results.
struct RunOptions {
  ForestConfig forest;
  SvmConfig svm;
  bool normalize_features = false;
  unsigned threads = 1;
};

namespace detail {

struct PooledCell {
  std::vector<double> predictions;
  std::vector<double> truths;
};

inline std::uint64_t fold_seed(std::uint64_t master_seed, const std::string& test_subject) {
  return derive_seed(master_seed, "fold:" + test_subject);
}

}  // namespace detail

inline EvaluationReport run_experiment(const Cohort& cohort, const ExperimentSpec& spec,
                                       const RunOptions& options = {}) {
  validate_experiment_spec(spec);
  for (const Target t : spec.targets) {
    if (!cohort.severities.count(t)) {
      throw ValidationError(std::string("cohort lacks ") + to_string(t) + " severities");
    }
  }
  const auto folds = loso_folds(cohort.subject_ids);

  EvaluationReport report;
  report.provenance.push_back(std::string("experiment = ") + to_string(spec.kind));
  {
    std::string mods, apps, tgts;
    for (const Modality m : spec.modalities) mods += std::string(mods.empty() ? "" : ",") + to_string(m);
    for (const Approach a : spec.approaches) apps += std::string(apps.empty() ? "" : ",") + to_string(a);
    for (const Target t : spec.targets) tgts += std::string(tgts.empty() ? "" : ",") + to_string(t);
    if (!mods.empty()) report.provenance.push_back("modalities = " + mods);
    if (!apps.empty()) report.provenance.push_back("approaches = " + apps);
    if (!tgts.empty()) report.provenance.push_back("targets = " + tgts);
    report.provenance.push_back("seed = " + std::to_string(spec.master_seed));
    report.provenance.push_back("subjects = " + std::to_string(cohort.subject_ids.size()));
  }

  if (spec.kind == ExperimentKind::ders_table) {
    // fold results: [fold][modality][approach] -> 6 estimates
    struct FoldResult {
      std::map<std::string, double> estimate;  // "modality|approach|subscale"
      std::map<std::string, double> truth;     // subscale
    };
    std::vector<FoldResult> results(folds.size());
    parallel_for(folds.size(), options.threads, [&](std::size_t f) {
      const auto& fold = folds[f];
      const std::uint64_t seed = detail::fold_seed(spec.master_seed, fold.test_subject);
      FoldResult& r = results[f];
      for (const auto& subscale_id : cohort.interaction.subscale_ids) {
        r.truth[subscale_id] = static_cast<double>(subscale_score(
            cohort.interaction, cohort.sheet(cohort.interaction.instrument_id, fold.test_subject), subscale_id));
      }
      for (const Modality modality : spec.modalities) {
        for (const Approach approach : spec.approaches) {
          std::vector<SubscaleEstimate> estimates;
          if (approach == Approach::direct) {
            ForestConfig config = options.forest;
            config.seed = derive_seed(seed, std::string("ders:") + to_string(modality));
            estimates = estimate_subscales_direct(cohort, fold.train_subjects, fold.test_subject, modality,
                                                  config, options.normalize_features);
          } else {
            SvmConfig config = options.svm;
            config.seed = derive_seed(seed, std::string("ders:") + to_string(modality));
            estimates = estimate_subscales_indirect(cohort, fold.train_subjects, fold.test_subject, modality,
                                                    config, options.normalize_features);
          }
          for (const auto& e : estimates) {
            r.estimate[std::string(to_string(modality)) + "|" + to_string(approach) + "|" + e.subscale_id] =
                e.estimated_score;
          }
        }
      }
    });
    for (const auto& subscale_id : cohort.interaction.subscale_ids) {
      for (const Modality modality : spec.modalities) {
        for (const Approach approach : spec.approaches) {
          std::vector<double> predictions, truths;
          for (std::size_t f = 0; f < folds.size(); ++f) {
            predictions.push_back(results[f].estimate.at(std::string(to_string(modality)) + "|" +
                                                         to_string(approach) + "|" + subscale_id));
            truths.push_back(results[f].truth.at(subscale_id));
          }
          report.rows.push_back(ReportRow{"ders", subscale_id, to_string(modality), to_string(approach),
                                          "rmse", rmse(predictions, truths)});
        }
      }
    }
  } else if (spec.kind == ExperimentKind::selfreport_cascade) {
    struct FoldResult {
      std::map<Target, double> prediction;
      std::map<Target, double> truth;
    };
    std::vector<FoldResult> results(folds.size());
    parallel_for(folds.size(), options.threads, [&](std::size_t f) {
      const auto& fold = folds[f];
      const std::uint64_t seed = detail::fold_seed(spec.master_seed, fold.test_subject);
      for (const Target target : spec.targets) {
        ForestConfig config = options.forest;
        config.seed = derive_seed(seed, std::string("cascade:") + to_string(target));
        const CascadeModel cascade = train_cascade_on_cohort(cohort, fold.train_subjects, target, config);
        results[f].prediction[target] =
            predict_forest(cascade.forest, self_report_vector(cohort, fold.test_subject));
        results[f].truth[target] = static_cast<double>(cohort.severity_truth(target, fold.test_subject));
      }
    });
    for (const Target target : spec.targets) {
      std::vector<double> predictions, truths;
      for (std::size_t f = 0; f < folds.size(); ++f) {
        predictions.push_back(results[f].prediction.at(target));
        truths.push_back(results[f].truth.at(target));
      }
      report.rows.push_back(ReportRow{"cascade", to_string(target), "-", "self_report", "mae",
                                      mae(predictions, truths)});
      report.rows.push_back(ReportRow{"cascade", to_string(target), "-", "self_report", "rmse",
                                      rmse(predictions, truths)});
    }
  } else {  // severity_compare
    struct FoldResult {
      std::map<std::string, double> prediction;  // "target|modality|route"
      std::map<Target, double> truth;
    };
    std::vector<FoldResult> results(folds.size());
    parallel_for(folds.size(), options.threads, [&](std::size_t f) {
      const auto& fold = folds[f];
      const std::uint64_t seed = detail::fold_seed(spec.master_seed, fold.test_subject);
      FoldResult& r = results[f];
      std::map<Target, CascadeModel> cascades;
      for (const Target target : spec.targets) {
        ForestConfig config = options.forest;
        config.seed = derive_seed(seed, std::string("cascade:") + to_string(target));
        cascades.emplace(target, train_cascade_on_cohort(cohort, fold.train_subjects, target, config));
        r.truth[target] = static_cast<double>(cohort.severity_truth(target, fold.test_subject));
      }
      for (const Modality modality : spec.modalities) {
        ForestConfig direct_config = options.forest;
        direct_config.seed = derive_seed(seed, std::string("severity:") + to_string(modality));
        const auto estimates = estimate_subscales_direct(cohort, fold.train_subjects, fold.test_subject,
                                                         modality, direct_config, options.normalize_features);
        for (const Target target : spec.targets) {
          const auto via = estimate_severity_via_erd(cascades.at(target), estimates);
          r.prediction[std::string(to_string(target)) + "|" + to_string(modality) + "|via_erd"] =
              via.estimated_severity;
          ForestConfig bypass_config = options.forest;
          bypass_config.seed = derive_seed(seed, std::string("severity:") + to_string(modality));
          const auto bypass = estimate_severity_bypass(cohort, fold.train_subjects, fold.test_subject, target,
                                                       modality, bypass_config, options.normalize_features);
          r.prediction[std::string(to_string(target)) + "|" + to_string(modality) + "|bypass"] =
              bypass.estimated_severity;
        }
      }
    });
    for (const Target target : spec.targets) {
      for (const Modality modality : spec.modalities) {
        for (const char* route : {"bypass", "via_erd"}) {
          std::vector<double> predictions, truths;
          for (std::size_t f = 0; f < folds.size(); ++f) {
            predictions.push_back(results[f].prediction.at(std::string(to_string(target)) + "|" +
                                                           to_string(modality) + "|" + route));
            truths.push_back(results[f].truth.at(target));
          }
          report.rows.push_back(ReportRow{"severity", to_string(target), to_string(modality), route, "mae",
                                          mae(predictions, truths)});
          report.rows.push_back(ReportRow{"severity", to_string(target), to_string(modality), route, "rmse",
                                          rmse(predictions, truths)});
        }
      }
    }
  }

  validate_report(report);
  return report;
}

enum class ReportFormat { pretty, csv };

namespace detail {

inline const ReportRow* find_row(const EvaluationReport& report, const std::string& kind,
                                 const std::string& target, const std::string& modality,
                                 const std::string& route, const std::string& metric) {
  for (const auto& row : report.rows) {
    if (row.kind == kind && row.target == target && row.modality == modality && row.route == route &&
        row.metric == metric) {
      return &row;
    }
  }
  return nullptr;
}

inline std::vector<std::string> ordered_values(const EvaluationReport& report, const std::string& kind,
                                               auto key_of) {
  std::vector<std::string> out;
  for (const auto& row : report.rows) {
    if (row.kind != kind) continue;
    const std::string key = key_of(row);
    if (std::find(out.begin(), out.end(), key) == out.end()) out.push_back(key);
  }
  return out;
}

inline std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

inline std::string cell(const EvaluationReport& report, const std::string& kind, const std::string& target,
                        const std::string& modality, const std::string& route, const std::string& metric) {
  const ReportRow* row = find_row(report, kind, target, modality, route, metric);
  return row ? csv::format_fixed(row->value, 2) : std::string("-");
}

inline void render_ders_pretty(const EvaluationReport& report, std::string& out) {
  const auto subscales = ordered_values(report, "ders", [](const ReportRow& r) { return r.target; });
  const auto modalities = ordered_values(report, "ders", [](const ReportRow& r) { return r.modality; });
  const auto approaches = ordered_values(report, "ders", [](const ReportRow& r) { return r.route; });
  if (subscales.empty()) return;

  std::size_t label_width = std::string("subscale").size();
  for (const auto& s : subscales) label_width = std::max(label_width, s.size());
  const std::size_t col = 9;

  out += "DERS subscale score estimation, pooled LOSO RMSE\n";
  out += pad("", label_width + 2);
  for (const auto& approach : approaches) {
    out += pad(approach, col * modalities.size());
  }
  out += "\n";
  out += pad("subscale", label_width + 2);
  for (std::size_t a = 0; a < approaches.size(); ++a) {
    for (const auto& modality : modalities) out += pad(modality, col);
  }
  out += "\n";
  for (const auto& subscale : subscales) {
    out += pad(subscale, label_width + 2);
    for (const auto& approach : approaches) {
      for (const auto& modality : modalities) {
        out += pad(cell(report, "ders", subscale, modality, approach, "rmse"), col);
      }
    }
    out += "\n";
  }
}

inline void render_cascade_pretty(const EvaluationReport& report, std::string& out) {
  const auto targets = ordered_values(report, "cascade", [](const ReportRow& r) { return r.target; });
  if (targets.empty()) return;
  out += "Severity estimation from self-reported subscale scores (LOSO)\n";
  out += pad("target", 10) + pad("MAE", 9) + pad("RMSE", 9) + "\n";
  for (const auto& target : targets) {
    out += pad(target, 10) + pad(cell(report, "cascade", target, "-", "self_report", "mae"), 9) +
           pad(cell(report, "cascade", target, "-", "self_report", "rmse"), 9) + "\n";
  }
}

inline void render_severity_pretty(const EvaluationReport& report, std::string& out) {
  const auto targets = ordered_values(report, "severity", [](const ReportRow& r) { return r.target; });
  const auto modalities = ordered_values(report, "severity", [](const ReportRow& r) { return r.modality; });
  if (targets.empty()) return;
  out += "Severity estimation from features: bypassing vs via estimated subscale scores (LOSO)\n";
  for (const auto& target : targets) {
    out += target + "\n";
    out += pad("modality", 10) + pad("bypass", 18) + pad("via_erd", 18) + "\n";
    out += pad("", 10) + pad("MAE", 9) + pad("RMSE", 9) + pad("MAE", 9) + pad("RMSE", 9) + "\n";
    for (const auto& modality : modalities) {
      out += pad(modality, 10);
      for (const char* route : {"bypass", "via_erd"}) {
        out += pad(cell(report, "severity", target, modality, route, "mae"), 9);
        out += pad(cell(report, "severity", target, modality, route, "rmse"), 9);
      }
      out += "\n";
    }
  }
}

}  // namespace detail

inline std::string render_report(const EvaluationReport& report, ReportFormat format) {
  validate_report(report);
  if (format == ReportFormat::csv) {
    std::string out;
    for (const auto& line : report.provenance) out += "# " + line + "\n";
    out += "kind,target,modality,route,metric,value\n";
    for (const auto& row : report.rows) {
      out += row.kind + "," + row.target + "," + row.modality + "," + row.route + "," + row.metric + "," +
             csv::format_fixed(row.value, 6) + "\n";
    }
    return out;
  }

  std::string out;
  for (const auto& line : report.provenance) out += line + "\n";
  if (!report.provenance.empty()) out += "\n";
  std::string section;
  detail::render_ders_pretty(report, section);
  if (!section.empty()) {
    out += section;
    section.clear();
  }
  detail::render_cascade_pretty(report, section);
  if (!section.empty()) {
    if (out.size() > 0 && out.back() == '\n') out += "\n";
    out += section;
    section.clear();
  }
  detail::render_severity_pretty(report, section);
  if (!section.empty()) {
    if (out.size() > 0 && out.back() == '\n') out += "\n";
    out += section;
    section.clear();
  }
  // rows of any other kind fall back to a flat listing
  for (const auto& row : report.rows) {
    if (row.kind == "ders" || row.kind == "cascade" || row.kind == "severity") continue;
    section += detail::pad(row.kind, 10) + detail::pad(row.target, 16) + detail::pad(row.modality, 8) +
               detail::pad(row.route, 13) + detail::pad(row.metric, 6) + csv::format_fixed(row.value, 2) + "\n";
  }
  if (!section.empty()) {
    if (out.size() > 0 && out.back() == '\n') out += "\n";
    out += section;
  }
  return out;
}

/// Parses what render_report(csv) wrote; leading # comments become provenance.
inline EvaluationReport parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  const auto lines = csv::read_lines(in);
  EvaluationReport report;
  std::size_t ln = 0;
  for (; ln < lines.size() && !lines[ln].empty() && lines[ln][0] == '#'; ++ln) {
    report.provenance.push_back(csv::strip(lines[ln].substr(1)));
  }
  if (ln >= lines.size() || csv::strip(lines[ln]) != "kind,target,modality,route,metric,value") {
    throw ValidationError("report csv: expected header 'kind,target,modality,route,metric,value'");
  }
  for (++ln; ln < lines.size(); ++ln) {
    const std::string line = csv::strip(lines[ln]);
    if (line.empty()) continue;
    const auto fields = csv::split(line);
    if (fields.size() != 6) throw ValidationError("report csv:" + std::to_string(ln + 1) + ": malformed row");
    report.rows.push_back(ReportRow{fields[0], fields[1], fields[2], fields[3], fields[4],
                                    csv::parse_double(fields[5], "report csv value")});
  }
  validate_report(report);
  return report;
}

}  // namespace erdkit
