#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "erdkit/synth.hpp"
#include "support/helpers.hpp"

using namespace erdkit;
using testing_support::TempDir;
using testing_support::fixture;
using testing_support::small_synth_config;

namespace {

std::string cohort_fingerprint(const Cohort& cohort) {
  std::string fp;
  for (const auto& [instrument_id, by_subject] : cohort.sheets) {
    fp += instrument_id + "\n";
    for (const auto& [subject_id, sheet] : by_subject) {
      fp += subject_id;
      for (const auto& [item_id, response] : sheet.responses) fp += "," + item_id + "=" + std::to_string(response);
      fp += "\n";
    }
  }
  for (const auto& [modality, table] : cohort.features) {
    fp += to_string(modality);
    fp += "\n" + serialize_feature_table(table);
  }
  for (const auto& [target, column] : cohort.severities) {
    fp += to_string(target);
    for (const auto& [subject_id, total] : column) fp += "," + subject_id + "=" + std::to_string(total);
    fp += "\n";
  }
  return fp;
}

}  // namespace

TEST_CASE("generation is deterministic under a fixed seed", "[synth]") {
  const auto config = small_synth_config(8, 7);
  const Cohort a = generate_cohort(config);
  const Cohort b = generate_cohort(config);
  CHECK(cohort_fingerprint(a) == cohort_fingerprint(b));

  auto other_seed = config;
  other_seed.seed = 8;
  CHECK(cohort_fingerprint(generate_cohort(other_seed)) != cohort_fingerprint(a));
}

TEST_CASE("cohort shape matches the configuration", "[synth]") {
  auto config = testing_support::default_synth_config(0);
  config.n_subjects = 25;
  const Cohort cohort = generate_cohort(config);
  CHECK(cohort.subject_ids.size() == 25);
  CHECK(cohort.interaction.items.size() == 36);
  CHECK(cohort.feature_table(Modality::audio).rows.size() == 25 * 36);
  CHECK(cohort.feature_table(Modality::video).rows.size() == 25 * 36);
  CHECK(cohort.feature_table(Modality::audio).schema.dimension() == 88);
  CHECK(cohort.feature_table(Modality::video).schema.dimension() == 46);
  CHECK(cohort.feature_table(Modality::fused).schema.dimension() == 134);
  CHECK(cohort.severities.at(Target::MDD).size() == 25);
  CHECK(cohort.severities.at(Target::PTSD).size() == 25);
  validate_cohort(cohort);  // instrument + feature invariants all hold
}

TEST_CASE("noise-free cohorts are exact functions of the latents", "[synth]") {
  auto config = small_synth_config(6, 3);
  config.sigma_response = 0.0;
  config.sigma_feature = 0.0;
  config.sigma_severity = 0.0;
  config.latent_duplicates = {{0, 5}};
  const Cohort cohort = generate_cohort(config);

  const std::string src = cohort.subject_ids[0];
  const std::string dst = cohort.subject_ids[5];

  // duplicated latents give identical responses and identical feature rows
  const auto& ders = cohort.interaction;
  CHECK(cohort.sheet(ders.instrument_id, src).responses == cohort.sheet(ders.instrument_id, dst).responses);
  for (const Modality m : {Modality::audio, Modality::video, Modality::fused}) {
    const auto& table = cohort.feature_table(m);
    for (const auto& item : ders.items) {
      CHECK(table.row(src, item.item_id) == table.row(dst, item.item_id));
    }
  }
  CHECK(cohort.severity_truth(Target::MDD, src) == cohort.severity_truth(Target::MDD, dst));
  CHECK(cohort.severity_truth(Target::PTSD, src) == cohort.severity_truth(Target::PTSD, dst));

  // severity is exactly the clamped-rounded weighted sum of subscale scores
  for (const auto& subject_id : cohort.subject_ids) {
    const auto& sheet = cohort.sheet(ders.instrument_id, subject_id);
    for (const auto& [target, def] : cohort.target_instruments) {
      double level = config.severity_intercepts.at(target);
      const auto& weights = config.severity_weights.at(target);
      for (std::size_t s = 0; s < ders.subscale_ids.size(); ++s) {
        level += weights[s] * subscale_score(ders, sheet, ders.subscale_ids[s]);
      }
      const int expected = static_cast<int>(
          std::clamp<long>(std::lround(level), def.min_total(), def.max_total()));
      CHECK(cohort.severity_truth(target, subject_id) == expected);
    }
  }
}

TEST_CASE("growing the cohort preserves the existing subjects", "[synth]") {
  auto base = small_synth_config(5, 11);
  auto grown = base;
  grown.n_subjects = 6;
  const Cohort small = generate_cohort(base);
  const Cohort large = generate_cohort(grown);
  for (int i = 0; i < 5; ++i) {
    const std::string& subject_id = small.subject_ids[static_cast<std::size_t>(i)];
    CHECK(large.subject_ids[static_cast<std::size_t>(i)] == subject_id);
    CHECK(small.sheet("ders36", subject_id).responses == large.sheet("ders36", subject_id).responses);
    for (const auto& item : small.interaction.items) {
      CHECK(small.feature_table(Modality::audio).row(subject_id, item.item_id) ==
            large.feature_table(Modality::audio).row(subject_id, item.item_id));
    }
    CHECK(small.severity_truth(Target::MDD, subject_id) == large.severity_truth(Target::MDD, subject_id));
  }
}

TEST_CASE("single-subscale severity correlates perfectly in the noise-free limit", "[synth]") {
  auto config = small_synth_config(40, 13);
  config.sigma_response = 0.0;
  config.sigma_feature = 0.0;
  config.sigma_severity = 0.0;
  // weight 2 on Strategies keeps noise-free PTSD totals inside [17, 85]
  config.severity_weights[Target::PTSD] = {0, 0, 0, 0, 0, 2.0};
  config.severity_intercepts[Target::PTSD] = 0.0;
  const Cohort cohort = generate_cohort(config);
  const auto diag = validate_cohort_statistics(cohort, config);
  for (const auto& row : diag.rows) {
    if (row.target == Target::PTSD && row.subscale_id == "Strategies") {
      CHECK(row.correlation > 0.995);
    }
  }
}

TEST_CASE("default correlation structure separates Awareness from the rest", "[synth]") {
  auto config = small_synth_config(200, 17);
  const Cohort cohort = generate_cohort(config);
  const auto diag = validate_cohort_statistics(cohort, config, 0.3);
  int checked = 0;
  for (const auto& row : diag.rows) {
    REQUIRE_FALSE(row.degenerate);
    if (row.subscale_id == "Awareness") {
      CHECK(std::abs(row.correlation) < 0.3);
      CHECK_FALSE(row.below_floor);  // configured weight is zero, no warning expected
    } else {
      CHECK(row.correlation > 0.5);
    }
    ++checked;
  }
  CHECK(checked == 12);  // 6 subscales x 2 targets
  CHECK(diag.warnings.empty());
}

TEST_CASE("constant severity columns are reported as degenerate", "[synth]") {
  auto config = small_synth_config(10, 19);
  config.sigma_severity = 0.0;
  config.severity_weights[Target::MDD] = {0, 0, 0, 0, 0, 0};
  config.severity_intercepts[Target::MDD] = 12.0;
  const Cohort cohort = generate_cohort(config);
  const auto diag = validate_cohort_statistics(cohort, config);
  CHECK(diag.degenerate_columns.size() >= 6);  // every MDD pairing is degenerate
  for (const auto& name : diag.degenerate_columns) {
    CHECK(name.rfind("MDD/", 0) == 0);
  }
}

TEST_CASE("below-floor correlations are flagged", "[synth]") {
  auto config = small_synth_config(60, 23);
  // huge noise drowns a tiny configured weight
  config.sigma_severity = 50.0;
  const Cohort cohort = generate_cohort(config);
  const auto diag = validate_cohort_statistics(cohort, config, 0.6);
  CHECK_FALSE(diag.warnings.empty());
}

TEST_CASE("save and load round-trip a cohort directory", "[synth]") {
  const auto config = small_synth_config(6, 29);
  const Cohort cohort = generate_cohort(config);
  TempDir dir("erdkit-cohort");
  save_cohort(cohort, dir.path());
  const Cohort reloaded = load_cohort(dir.path());

  CHECK(reloaded.subject_ids == cohort.subject_ids);
  CHECK(reloaded.interaction.instrument_id == cohort.interaction.instrument_id);
  CHECK(reloaded.target_instruments.at(Target::MDD).instrument_id == "phq8");
  CHECK(reloaded.target_instruments.at(Target::PTSD).instrument_id == "pclc17");
  CHECK(reloaded.severities == cohort.severities);
  for (const auto& subject_id : cohort.subject_ids) {
    CHECK(reloaded.sheet("ders36", subject_id).responses == cohort.sheet("ders36", subject_id).responses);
  }
  for (const Modality m : {Modality::audio, Modality::video}) {
    CHECK(reloaded.feature_table(m).rows == cohort.feature_table(m).rows);
    CHECK(reloaded.feature_table(m).schema.feature_names == cohort.feature_table(m).schema.feature_names);
  }
}

TEST_CASE("invalid generator configs are rejected", "[synth]") {
  auto config = small_synth_config(8, 0);
  config.n_subjects = 1;
  CHECK_THROWS_WITH(generate_cohort(config), Catch::Matchers::ContainsSubstring("n_subjects"));

  config = small_synth_config(8, 0);
  config.sigma_feature = -0.5;
  CHECK_THROWS_AS(generate_cohort(config), ValidationError);

  config = small_synth_config(8, 0);
  config.severity_weights[Target::MDD] = {1.0};  // wrong arity
  CHECK_THROWS_WITH(generate_cohort(config), Catch::Matchers::ContainsSubstring("one weight per subscale"));

  config = small_synth_config(8, 0);
  config.factor_loadings = {2, 0, 0, 0, 0, 0};
  CHECK_THROWS_WITH(generate_cohort(config), Catch::Matchers::ContainsSubstring("loadings"));

  config = small_synth_config(8, 0);
  config.latent_duplicates = {{0, 99}};
  CHECK_THROWS_AS(generate_cohort(config), ValidationError);
}
