#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "erdkit/cohort.hpp"
#include "erdkit/csv.hpp"
#include "erdkit/error.hpp"
#include "erdkit/features.hpp"
#include "erdkit/instrument.hpp"
#include "erdkit/rng.hpp"

namespace erdkit {

enum class LatentDistribution { normal, uniform };

inline const char* to_string(LatentDistribution d) {
  return d == LatentDistribution::normal ? "normal" : "uniform";
}

inline LatentDistribution latent_distribution_from_string(const std::string& s) {
  if (s == "normal") return LatentDistribution::normal;
  if (s == "uniform") return LatentDistribution::uniform;
  throw ValidationError("unknown latent distribution '" + s + "'");
}

/// Generator configuration. Latent per-subscale factors drive item responses,
/// item features, and severity totals:
///   latent_s   = loading_s * g + sqrt(1 - loading_s^2) * e_s
///   scored_i   = clamp(round(center_i + slope_i * latent_s + N(0, sigma_response)))
///   feature_c  = a_c * scored_i + b_c + N(0, sigma_feature)
///   severity_t = clamp(round(intercept_t + sum_s w_ts * subscale_s + N(0, sigma_severity)))
/// Weights are listed in the interaction instrument's subscale order.
struct SynthConfig {
  int n_subjects = 25;
  std::uint64_t seed = 0;
  InstrumentDefinition interaction;
  std::vector<std::pair<Target, InstrumentDefinition>> target_instruments;
  FeatureSchema audio_schema;
  FeatureSchema video_schema;
  double sigma_response = 0.6;
  double sigma_feature = 1.5;
  double sigma_severity = 1.0;
  std::map<Target, std::vector<double>> severity_weights;
  std::map<Target, double> severity_intercepts;
  std::vector<double> factor_loadings;  // per subscale, in [0, 1]
  LatentDistribution latent = LatentDistribution::normal;
  std::vector<std::pair<int, int>> latent_duplicates;  // dst subject copies src subject's latents
};

inline void validate_synth_config(const SynthConfig& config) {
  if (config.n_subjects < 2 || config.n_subjects > 9999) {
    throw ValidationError("synth config: n_subjects must be in [2, 9999]");
  }
  for (const double sigma : {config.sigma_response, config.sigma_feature, config.sigma_severity}) {
    if (!(std::isfinite(sigma) && sigma >= 0.0)) {
      throw ValidationError("synth config: noise sigmas must be finite and >= 0");
    }
  }
  if (config.interaction.items.empty()) throw ValidationError("synth config: missing interaction instrument");
  if (config.target_instruments.empty()) throw ValidationError("synth config: no target instruments");
  const std::size_t n_subscales = config.interaction.subscale_ids.size();
  for (const auto& [target, def] : config.target_instruments) {
    (void)def;
    const auto w = config.severity_weights.find(target);
    if (w == config.severity_weights.end() || w->second.size() != n_subscales) {
      throw ValidationError(std::string("synth config: severity weights for ") + to_string(target) +
                            " must list one weight per subscale (" + std::to_string(n_subscales) + ")");
    }
    for (double v : w->second) {
      if (!std::isfinite(v)) throw ValidationError("synth config: non-finite severity weight");
    }
    const auto b = config.severity_intercepts.find(target);
    if (b != config.severity_intercepts.end() && !std::isfinite(b->second)) {
      throw ValidationError("synth config: non-finite severity intercept");
    }
  }
  if (config.factor_loadings.size() != n_subscales) {
    throw ValidationError("synth config: factor_loadings must list one loading per subscale");
  }
  for (double v : config.factor_loadings) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("synth config: factor loadings must lie in [0, 1]");
  }
  for (const auto& [src, dst] : config.latent_duplicates) {
    if (src < 0 || dst < 0 || src >= config.n_subjects || dst >= config.n_subjects || src == dst) {
      throw ValidationError("synth config: latent duplicate indices out of range");
    }
  }
  if (config.audio_schema.feature_names.empty() || config.video_schema.feature_names.empty()) {
    throw ValidationError("synth config: feature schemas must be non-empty");
  }
}

namespace detail {

// fixed width keeps ids stable when a cohort later grows
inline std::string subject_id_for(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s%04d", index + 1);
  return buf;
}

inline double draw_latent(Rng& rng, LatentDistribution d) {
  // both choices have unit variance
  return d == LatentDistribution::normal ? rng.normal() : rng.uniform(-1.7320508075688772, 1.7320508075688772);
}

inline int clamp_round(double v, int lo, int hi) {
  const long r = std::lround(v);
  return static_cast<int>(std::clamp<long>(r, lo, hi));
}

struct ItemResponseMap {
  double center = 0.0;
  double slope = 0.0;
};

struct ItemFeatureMap {
  std::vector<double> slope;
  std::vector<double> intercept;
};

/// Distributes (total - min_total) scored units across items, each capped at
/// its own range, visiting items in a seeded round-robin order.
inline std::map<std::string, int> distribute_total(const InstrumentDefinition& def, int total, Rng& rng) {
  int units = total - def.min_total();
  std::vector<int> scored(def.items.size());
  for (std::size_t k = 0; k < def.items.size(); ++k) scored[k] = def.items[k].min_response;
  std::vector<std::size_t> order(def.items.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  while (units > 0) {
    bool progressed = false;
    for (const std::size_t k : order) {
      if (units == 0) break;
      if (scored[k] < def.items[k].max_response) {
        ++scored[k];
        --units;
        progressed = true;
      }
    }
    if (!progressed) throw ValidationError("distribute_total: total exceeds instrument capacity");
  }
  std::map<std::string, int> responses;
  for (std::size_t k = 0; k < def.items.size(); ++k) {
    const auto& item = def.items[k];
    responses[item.item_id] =
        item.reverse_scored ? item.min_response + item.max_response - scored[k] : scored[k];
  }
  return responses;
}

}  // namespace detail

/// Fully determined by the seed. Per-subject streams keep the first N
/// subjects' data unchanged when n_subjects grows.
inline Cohort generate_cohort(const SynthConfig& config) {
  validate_synth_config(config);
  const auto& ders = config.interaction;
  const std::size_t n_subscales = ders.subscale_ids.size();

  std::map<std::string, std::size_t> subscale_index;
  for (std::size_t s = 0; s < n_subscales; ++s) subscale_index[ders.subscale_ids[s]] = s;

  // item response maps: fixed across subjects
  std::vector<detail::ItemResponseMap> response_maps(ders.items.size());
  for (std::size_t k = 0; k < ders.items.size(); ++k) {
    const auto& item = ders.items[k];
    Rng rng(derive_seed(config.seed, "item-map:" + item.item_id));
    const double half_range = 0.5 * static_cast<double>(item.max_response - item.min_response);
    response_maps[k].center = 0.5 * static_cast<double>(item.min_response + item.max_response);
    response_maps[k].slope = half_range * rng.uniform(0.45, 0.75);
  }

  // item feature maps: fixed across subjects, one per (modality, item)
  std::map<Modality, std::vector<detail::ItemFeatureMap>> feature_maps;
  for (const auto& [modality, schema] :
       {std::pair{Modality::audio, &config.audio_schema}, std::pair{Modality::video, &config.video_schema}}) {
    auto& maps = feature_maps[modality];
    maps.resize(ders.items.size());
    for (std::size_t k = 0; k < ders.items.size(); ++k) {
      Rng rng(derive_seed(config.seed, std::string("feature-map:") + to_string(modality) + ":" +
                                           ders.items[k].item_id));
      auto& map = maps[k];
      map.slope.resize(schema->dimension());
      map.intercept.resize(schema->dimension());
      for (std::size_t c = 0; c < schema->dimension(); ++c) {
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        map.slope[c] = sign * rng.uniform(0.5, 1.5);
        map.intercept[c] = rng.uniform(-2.0, 2.0);
      }
    }
  }

  // latents first, so duplicates can be applied before observation noise
  std::vector<std::vector<double>> latents(static_cast<std::size_t>(config.n_subjects));
  for (int i = 0; i < config.n_subjects; ++i) {
    Rng rng(derive_seed(config.seed, "latent:" + std::to_string(i)));
    const double g = detail::draw_latent(rng, config.latent);
    auto& latent = latents[static_cast<std::size_t>(i)];
    latent.resize(n_subscales);
    for (std::size_t s = 0; s < n_subscales; ++s) {
      const double loading = config.factor_loadings[s];
      latent[s] = loading * g + std::sqrt(1.0 - loading * loading) * detail::draw_latent(rng, config.latent);
    }
  }
  for (const auto& [src, dst] : config.latent_duplicates) {
    latents[static_cast<std::size_t>(dst)] = latents[static_cast<std::size_t>(src)];
  }

  Cohort cohort;
  cohort.interaction = ders;
  for (const auto& [target, def] : config.target_instruments) cohort.target_instruments.emplace(target, def);
  cohort.features.emplace(Modality::audio, FeatureTable{config.audio_schema, {}});
  cohort.features.emplace(Modality::video, FeatureTable{config.video_schema, {}});

  for (int i = 0; i < config.n_subjects; ++i) {
    const std::string subject_id = detail::subject_id_for(i);
    cohort.subject_ids.push_back(subject_id);
    Rng rng(derive_seed(config.seed, "noise:" + std::to_string(i)));
    const auto& latent = latents[static_cast<std::size_t>(i)];

    // responses
    ResponseSheet sheet;
    sheet.subject_id = subject_id;
    sheet.instrument_id = ders.instrument_id;
    std::vector<int> scored_values(ders.items.size());
    for (std::size_t k = 0; k < ders.items.size(); ++k) {
      const auto& item = ders.items[k];
      const auto& map = response_maps[k];
      const double z = latent[subscale_index.at(item.subscale_id)];
      const int scored = detail::clamp_round(map.center + map.slope * z + rng.normal(0.0, config.sigma_response),
                                             item.min_response, item.max_response);
      scored_values[k] = scored;
      sheet.responses[item.item_id] =
          item.reverse_scored ? item.min_response + item.max_response - scored : scored;
    }
    cohort.sheets[ders.instrument_id].emplace(subject_id, std::move(sheet));

    // features
    for (const Modality modality : {Modality::audio, Modality::video}) {
      auto& table = cohort.features.at(modality);
      const auto& maps = feature_maps.at(modality);
      for (std::size_t k = 0; k < ders.items.size(); ++k) {
        std::vector<double> row(table.schema.dimension());
        for (std::size_t c = 0; c < row.size(); ++c) {
          row[c] = csv::quantize_sig9(maps[k].slope[c] * scored_values[k] + maps[k].intercept[c] +
                                      rng.normal(0.0, config.sigma_feature));
        }
        table.rows.emplace(FeatureTable::Key{subject_id, ders.items[k].item_id}, std::move(row));
      }
    }

    // severities and the matching self-report sheets
    std::map<std::string, int> subscale_scores;
    for (const auto& subscale_id : ders.subscale_ids) {
      subscale_scores[subscale_id] =
          subscale_score(ders, cohort.sheet(ders.instrument_id, subject_id), subscale_id);
    }
    for (const auto& [target, def] : config.target_instruments) {
      double level = 0.0;
      const auto intercept = config.severity_intercepts.find(target);
      if (intercept != config.severity_intercepts.end()) level += intercept->second;
      const auto& weights = config.severity_weights.at(target);
      for (std::size_t s = 0; s < n_subscales; ++s) {
        level += weights[s] * static_cast<double>(subscale_scores.at(ders.subscale_ids[s]));
      }
      const int total = detail::clamp_round(level + rng.normal(0.0, config.sigma_severity), def.min_total(),
                                            def.max_total());
      cohort.severities[target][subject_id] = total;
      ResponseSheet target_sheet;
      target_sheet.subject_id = subject_id;
      target_sheet.instrument_id = def.instrument_id;
      target_sheet.responses = detail::distribute_total(def, total, rng);
      cohort.sheets[def.instrument_id].emplace(subject_id, std::move(target_sheet));
    }
  }

  cohort.features.emplace(Modality::fused,
                          fuse(cohort.feature_table(Modality::audio), cohort.feature_table(Modality::video)));
  validate_cohort(cohort);
  return cohort;
}

struct CorrelationRow {
  Target target = Target::MDD;
  std::string subscale_id;
  double correlation = 0.0;  // NaN when degenerate
  double configured_weight = 0.0;
  bool degenerate = false;
  bool below_floor = false;
};

struct CohortDiagnostics {
  std::vector<CorrelationRow> rows;
  std::vector<std::string> degenerate_columns;
  std::vector<std::string> warnings;
};

namespace detail {

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    mean_a += a[i];
    mean_b += b[i];
  }
  mean_a /= n;
  mean_b /= n;
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - mean_a) * (b[i] - mean_b);
    var_a += (a[i] - mean_a) * (a[i] - mean_a);
    var_b += (b[i] - mean_b) * (b[i] - mean_b);
  }
  if (var_a <= 0.0 || var_b <= 0.0) return std::nan("");
  return cov / std::sqrt(var_a * var_b);
}

}  // namespace detail

/// Empirical subscale-vs-severity correlations; flags configured-nonzero
/// subscales whose correlation falls below the floor, and degenerate
/// (zero-variance) columns.
inline CohortDiagnostics validate_cohort_statistics(const Cohort& cohort, const SynthConfig& config,
                                                    double correlation_floor = 0.3) {
  CohortDiagnostics diag;
  const auto& ders = cohort.interaction;

  std::map<std::string, std::vector<double>> subscale_columns;
  for (const auto& subject_id : cohort.subject_ids) {
    for (const auto& subscale_id : ders.subscale_ids) {
      subscale_columns[subscale_id].push_back(static_cast<double>(
          subscale_score(ders, cohort.sheet(ders.instrument_id, subject_id), subscale_id)));
    }
  }

  for (const auto& [target, column] : cohort.severities) {
    std::vector<double> severity;
    severity.reserve(cohort.subject_ids.size());
    for (const auto& subject_id : cohort.subject_ids) {
      severity.push_back(static_cast<double>(column.at(subject_id)));
    }
    const auto weights = config.severity_weights.find(target);
    for (std::size_t s = 0; s < ders.subscale_ids.size(); ++s) {
      CorrelationRow row;
      row.target = target;
      row.subscale_id = ders.subscale_ids[s];
      row.configured_weight =
          weights != config.severity_weights.end() && s < weights->second.size() ? weights->second[s] : 0.0;
      row.correlation = detail::pearson(subscale_columns.at(row.subscale_id), severity);
      if (std::isnan(row.correlation)) {
        row.degenerate = true;
        diag.degenerate_columns.push_back(std::string(to_string(target)) + "/" + row.subscale_id);
      } else if (std::abs(row.configured_weight) > 1e-9 && std::abs(row.correlation) < correlation_floor) {
        row.below_floor = true;
        diag.warnings.push_back(std::string(to_string(target)) + "/" + row.subscale_id + ": correlation " +
                                csv::format_fixed(row.correlation, 3) + " below floor " +
                                csv::format_fixed(correlation_floor, 3));
      }
      diag.rows.push_back(std::move(row));
    }
  }
  return diag;
}

}  // namespace erdkit
