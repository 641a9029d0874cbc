#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "erdkit/cohort.hpp"
#include "erdkit/error.hpp"
#include "erdkit/features.hpp"
#include "erdkit/forest.hpp"
#include "erdkit/instrument.hpp"
#include "erdkit/svm.hpp"

namespace erdkit {

enum class Approach { direct, indirect };

inline const char* to_string(Approach a) { return a == Approach::direct ? "direct" : "indirect"; }

enum class Route { via_erd, bypass, self_report_cascade };

inline const char* to_string(Route r) {
  switch (r) {
    case Route::via_erd: return "via_erd";
    case Route::bypass: return "bypass";
    case Route::self_report_cascade: return "self_report";
  }
  return "?";
}

struct SubscaleEstimate {
  std::string subject_id;
  std::string subscale_id;
  double estimated_score = 0.0;
  Approach approach = Approach::direct;
  Modality modality = Modality::audio;
};

struct SeverityEstimate {
  std::string subject_id;
  Target target = Target::MDD;
  double estimated_severity = 0.0;
  Route route = Route::via_erd;
};

namespace detail {

inline void check_no_leakage(const std::vector<std::string>& train_subjects, const std::string& test_subject) {
  if (std::find(train_subjects.begin(), train_subjects.end(), test_subject) != train_subjects.end()) {
    throw ValidationError("leakage: test subject '" + test_subject + "' appears in the training set");
  }
  if (train_subjects.empty()) throw ValidationError("empty training set");
  std::set<std::string> unique(train_subjects.begin(), train_subjects.end());
  if (unique.size() != train_subjects.size()) throw ValidationError("duplicate subjects in training set");
}

}  // namespace detail

/// Direct approach: one forest per subscale, trained on aggregated
/// subscale-level feature vectors against self-reported subscale scores.
inline std::vector<SubscaleEstimate> estimate_subscales_direct(const Cohort& cohort,
                                                               const std::vector<std::string>& train_subjects,
                                                               const std::string& test_subject,
                                                               Modality modality,
                                                               const ForestConfig& forest_config,
                                                               bool normalize_features = false) {
  detail::check_no_leakage(train_subjects, test_subject);
  const auto& table = cohort.feature_table(modality);
  const auto& ders = cohort.interaction;

  std::vector<SubscaleEstimate> estimates;
  estimates.reserve(ders.subscale_ids.size());
  for (const auto& subscale_id : ders.subscale_ids) {
    const auto item_ids = ders.subscale_item_ids(subscale_id);
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    x.reserve(train_subjects.size());
    for (const auto& subject_id : train_subjects) {
      x.push_back(aggregate_items(table, subject_id, item_ids));
      y.push_back(static_cast<double>(subscale_score(ders, cohort.sheet(ders.instrument_id, subject_id),
                                                     subscale_id)));
    }
    std::vector<double> probe = aggregate_items(table, test_subject, item_ids);
    if (normalize_features) {
      const Standardizer z = fit_standardizer(x);
      for (auto& row : x) row = z.apply(row);
      probe = z.apply(probe);
    }
    ForestConfig config = forest_config;
    config.seed = derive_seed(forest_config.seed, "direct:" + subscale_id);
    const ForestModel model = train_forest(x, y, config);
    estimates.push_back(SubscaleEstimate{test_subject, subscale_id, predict_forest(model, probe),
                                         Approach::direct, modality});
  }
  return estimates;
}

/// Indirect approach: one classifier per item over that item's feature rows;
/// predicted raw responses are reverse-scored and summed per subscale. Items
/// whose training responses are single-class fall back to that constant.
inline std::vector<SubscaleEstimate> estimate_subscales_indirect(const Cohort& cohort,
                                                                 const std::vector<std::string>& train_subjects,
                                                                 const std::string& test_subject,
                                                                 Modality modality,
                                                                 const SvmConfig& svm_config,
                                                                 bool normalize_features = false) {
  detail::check_no_leakage(train_subjects, test_subject);
  const auto& table = cohort.feature_table(modality);
  const auto& ders = cohort.interaction;

  ResponseSheet predicted;
  predicted.subject_id = test_subject;
  predicted.instrument_id = ders.instrument_id;
  for (const auto& item : ders.items) {
    std::vector<std::vector<double>> x;
    std::vector<int> labels;
    x.reserve(train_subjects.size());
    for (const auto& subject_id : train_subjects) {
      x.push_back(table.row(subject_id, item.item_id));
      labels.push_back(cohort.sheet(ders.instrument_id, subject_id).responses.at(item.item_id));
    }
    const bool single_class = std::all_of(labels.begin(), labels.end(),
                                          [&](int l) { return l == labels.front(); });
    int predicted_raw;
    if (single_class) {
      predicted_raw = labels.front();
    } else {
      std::vector<double> probe = table.row(test_subject, item.item_id);
      if (normalize_features) {
        const Standardizer z = fit_standardizer(x);
        for (auto& row : x) row = z.apply(row);
        probe = z.apply(probe);
      }
      SvmConfig config = svm_config;
      config.seed = derive_seed(svm_config.seed, "indirect:" + item.item_id);
      const SvmModel model = train_svm(x, labels, config);
      predicted_raw = predict_svm(model, probe);
    }
    predicted.responses.emplace(item.item_id, predicted_raw);
  }

  std::vector<SubscaleEstimate> estimates;
  estimates.reserve(ders.subscale_ids.size());
  for (const auto& subscale_id : ders.subscale_ids) {
    estimates.push_back(SubscaleEstimate{test_subject, subscale_id,
                                         static_cast<double>(subscale_score(ders, predicted, subscale_id)),
                                         Approach::indirect, modality});
  }
  return estimates;
}

/// Regression from the six subscale scores to a severity level. Trained on
/// self-reported scores; the subscale order is fixed at training time and
/// inputs are reordered to it at prediction.
struct CascadeModel {
  ForestModel forest;
  std::vector<std::string> subscale_order;
  Target target = Target::MDD;
};

inline CascadeModel train_cascade(const std::vector<std::vector<double>>& subscale_scores,
                                  const std::vector<double>& severities,
                                  const std::vector<std::string>& subscale_order, Target target,
                                  const ForestConfig& forest_config) {
  if (subscale_scores.empty()) throw ValidationError("train_cascade: empty training set");
  if (subscale_scores.size() != severities.size()) {
    throw ValidationError("train_cascade: input/target count mismatch");
  }
  for (const auto& row : subscale_scores) {
    if (row.size() != subscale_order.size()) {
      throw ValidationError("train_cascade: input vector of length " + std::to_string(row.size()) +
                            ", expected " + std::to_string(subscale_order.size()));
    }
  }
  CascadeModel model;
  model.subscale_order = subscale_order;
  model.target = target;
  model.forest = train_forest(subscale_scores, severities, forest_config);
  return model;
}

/// Canonical-order self-reported subscale score vector for one subject.
inline std::vector<double> self_report_vector(const Cohort& cohort, const std::string& subject_id) {
  const auto& ders = cohort.interaction;
  const auto& sheet = cohort.sheet(ders.instrument_id, subject_id);
  std::vector<double> v;
  v.reserve(ders.subscale_ids.size());
  for (const auto& subscale_id : ders.subscale_ids) {
    v.push_back(static_cast<double>(subscale_score(ders, sheet, subscale_id)));
  }
  return v;
}

inline CascadeModel train_cascade_on_cohort(const Cohort& cohort, const std::vector<std::string>& train_subjects,
                                            Target target, const ForestConfig& forest_config) {
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  x.reserve(train_subjects.size());
  for (const auto& subject_id : train_subjects) {
    x.push_back(self_report_vector(cohort, subject_id));
    y.push_back(static_cast<double>(cohort.severity_truth(target, subject_id)));
  }
  return train_cascade(x, y, cohort.interaction.subscale_ids, target, forest_config);
}

/// Severity from estimated subscale scores. The estimates may arrive in any
/// order; they are matched to the cascade's canonical subscale order.
inline SeverityEstimate estimate_severity_via_erd(const CascadeModel& cascade,
                                                  const std::vector<SubscaleEstimate>& estimates) {
  if (estimates.size() != cascade.subscale_order.size()) {
    throw ValidationError("estimate_severity_via_erd: got " + std::to_string(estimates.size()) +
                          " estimates, cascade expects " + std::to_string(cascade.subscale_order.size()));
  }
  const std::string& subject_id = estimates.front().subject_id;
  std::map<std::string, double> by_subscale;
  for (const auto& e : estimates) {
    if (e.subject_id != subject_id) {
      throw ValidationError("estimate_severity_via_erd: estimates mix subjects '" + subject_id + "' and '" +
                            e.subject_id + "'");
    }
    if (!by_subscale.emplace(e.subscale_id, e.estimated_score).second) {
      throw ValidationError("estimate_severity_via_erd: duplicate subscale '" + e.subscale_id + "'");
    }
  }
  std::vector<double> input;
  input.reserve(cascade.subscale_order.size());
  for (const auto& subscale_id : cascade.subscale_order) {
    const auto found = by_subscale.find(subscale_id);
    if (found == by_subscale.end()) {
      throw ValidationError("estimate_severity_via_erd: missing subscale '" + subscale_id + "'");
    }
    input.push_back(found->second);
  }
  return SeverityEstimate{subject_id, cascade.target, predict_forest(cascade.forest, input), Route::via_erd};
}

/// Severity straight from features: forest on subject-level vectors (mean
/// over every item's feature vector) against self-reported severity totals.
inline SeverityEstimate estimate_severity_bypass(const Cohort& cohort,
                                                 const std::vector<std::string>& train_subjects,
                                                 const std::string& test_subject, Target target,
                                                 Modality modality, const ForestConfig& forest_config,
                                                 bool normalize_features = false) {
  detail::check_no_leakage(train_subjects, test_subject);
  const auto& table = cohort.feature_table(modality);
  const auto item_ids = cohort.interaction.item_ids();

  std::vector<std::vector<double>> x;
  std::vector<double> y;
  x.reserve(train_subjects.size());
  for (const auto& subject_id : train_subjects) {
    x.push_back(aggregate_items(table, subject_id, item_ids));
    y.push_back(static_cast<double>(cohort.severity_truth(target, subject_id)));
  }
  std::vector<double> probe = aggregate_items(table, test_subject, item_ids);
  if (normalize_features) {
    const Standardizer z = fit_standardizer(x);
    for (auto& row : x) row = z.apply(row);
    probe = z.apply(probe);
  }
  ForestConfig config = forest_config;
  config.seed = derive_seed(forest_config.seed, std::string("bypass:") + to_string(target));
  const ForestModel model = train_forest(x, y, config);
  return SeverityEstimate{test_subject, target, predict_forest(model, probe), Route::bypass};
}

}  // namespace erdkit
