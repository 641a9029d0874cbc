#include <catch2/catch_amalgamated.hpp>

#include "erdkit/eval.hpp"
#include "erdkit/synth.hpp"
#include "support/helpers.hpp"

using namespace erdkit;
using testing_support::small_synth_config;

namespace {

EvaluationReport table2_fixture() {
  EvaluationReport report;
  report.rows = {
      {"cascade", "MDD", "-", "self_report", "mae", 1.98},
      {"cascade", "MDD", "-", "self_report", "rmse", 2.57},
      {"cascade", "PTSD", "-", "self_report", "mae", 7.66},
      {"cascade", "PTSD", "-", "self_report", "rmse", 9.28},
  };
  return report;
}

}  // namespace

TEST_CASE("ders experiment produces the full 6x3x2 grid", "[eval]") {
  const Cohort cohort = generate_cohort(small_synth_config(6, 31));
  ExperimentSpec spec;
  spec.kind = ExperimentKind::ders_table;
  spec.modalities = {Modality::audio, Modality::video, Modality::fused};
  spec.approaches = {Approach::direct, Approach::indirect};
  spec.master_seed = 5;
  const auto report = run_experiment(cohort, spec);
  CHECK(report.rows.size() == 36);
  for (const auto& row : report.rows) {
    CHECK(row.kind == "ders");
    CHECK(row.metric == "rmse");
    CHECK(row.value >= 0.0);
  }
  // six rows per subscale, in canonical subscale-major order
  CHECK(report.rows[0].target == "Clarity");
  CHECK(report.rows[35].target == "Strategies");
}

TEST_CASE("severity experiment produces the 2x3x2x2 grid", "[eval]") {
  const Cohort cohort = generate_cohort(small_synth_config(6, 32));
  ExperimentSpec spec;
  spec.kind = ExperimentKind::severity_compare;
  spec.modalities = {Modality::audio, Modality::video, Modality::fused};
  spec.targets = {Target::MDD, Target::PTSD};
  spec.master_seed = 5;
  const auto report = run_experiment(cohort, spec);
  CHECK(report.rows.size() == 24);
  int via = 0, bypass = 0;
  for (const auto& row : report.rows) {
    CHECK(row.kind == "severity");
    via += row.route == "via_erd" ? 1 : 0;
    bypass += row.route == "bypass" ? 1 : 0;
  }
  CHECK(via == 12);
  CHECK(bypass == 12);
}

TEST_CASE("cascade experiment produces MAE and RMSE rows per target", "[eval]") {
  const Cohort cohort = generate_cohort(small_synth_config(6, 33));
  ExperimentSpec spec;
  spec.kind = ExperimentKind::selfreport_cascade;
  spec.targets = {Target::MDD, Target::PTSD};
  spec.master_seed = 5;
  const auto report = run_experiment(cohort, spec);
  REQUIRE(report.rows.size() == 4);
  CHECK(report.rows[0].target == "MDD");
  CHECK(report.rows[0].metric == "mae");
  CHECK(report.rows[1].metric == "rmse");
  CHECK(report.rows[2].target == "PTSD");
  for (const auto& row : report.rows) CHECK(row.route == "self_report");
}

TEST_CASE("experiments are deterministic and scheduling-free", "[eval]") {
  const Cohort cohort = generate_cohort(small_synth_config(5, 34));
  ExperimentSpec spec;
  spec.kind = ExperimentKind::severity_compare;
  spec.modalities = {Modality::fused};
  spec.targets = {Target::MDD, Target::PTSD};
  spec.master_seed = 11;

  RunOptions serial;
  serial.threads = 1;
  RunOptions parallel;
  parallel.threads = 4;

  const std::string a = render_report(run_experiment(cohort, spec, serial), ReportFormat::csv);
  const std::string b = render_report(run_experiment(cohort, spec, serial), ReportFormat::csv);
  const std::string c = render_report(run_experiment(cohort, spec, parallel), ReportFormat::csv);
  CHECK(a == b);
  CHECK(a == c);
}

TEST_CASE("experiment spec validation", "[eval]") {
  ExperimentSpec spec;
  spec.kind = ExperimentKind::selfreport_cascade;
  spec.targets = {Target::MDD};
  spec.modalities = {Modality::audio};
  CHECK_THROWS_WITH(validate_experiment_spec(spec), Catch::Matchers::ContainsSubstring("self-reports"));

  spec.modalities.clear();
  CHECK_NOTHROW(validate_experiment_spec(spec));

  spec.kind = ExperimentKind::ders_table;
  CHECK_THROWS_AS(validate_experiment_spec(spec), ValidationError);  // targets given, no modalities

  spec = ExperimentSpec{};
  spec.kind = ExperimentKind::ders_table;
  spec.modalities = {Modality::audio, Modality::audio};
  spec.approaches = {Approach::direct};
  CHECK_THROWS_WITH(validate_experiment_spec(spec), Catch::Matchers::ContainsSubstring("duplicate"));
}

TEST_CASE("rendering reproduces the severity fixture values verbatim", "[eval]") {
  const auto report = table2_fixture();
  const std::string pretty = render_report(report, ReportFormat::pretty);
  CHECK_THAT(pretty, Catch::Matchers::ContainsSubstring("1.98"));
  CHECK_THAT(pretty, Catch::Matchers::ContainsSubstring("2.57"));
  CHECK_THAT(pretty, Catch::Matchers::ContainsSubstring("7.66"));
  CHECK_THAT(pretty, Catch::Matchers::ContainsSubstring("9.28"));

  const std::string csv = render_report(report, ReportFormat::csv);
  const auto parsed = parse_report_csv(csv);
  REQUIRE(parsed.rows.size() == 4);
  CHECK(parsed.rows[0].value == 1.98);
  CHECK(parsed.rows[1].value == 2.57);
  CHECK(parsed.rows[2].value == 7.66);
  CHECK(parsed.rows[3].value == 9.28);
}

TEST_CASE("pretty cascade table layout is stable", "[eval]") {
  const std::string pretty = render_report(table2_fixture(), ReportFormat::pretty);
  CHECK(pretty ==
        "Severity estimation from self-reported subscale scores (LOSO)\n"
        "target    MAE      RMSE     \n"
        "MDD       1.98     2.57     \n"
        "PTSD      7.66     9.28     \n");
}

TEST_CASE("pretty ders table layout is stable", "[eval]") {
  EvaluationReport report;
  report.rows = {
      {"ders", "Clarity", "audio", "direct", "rmse", 2.27},
      {"ders", "Clarity", "audio", "indirect", "rmse", 2.31},
      {"ders", "Goals", "audio", "direct", "rmse", 5.09},
      {"ders", "Goals", "audio", "indirect", "rmse", 5.10},
  };
  CHECK(render_report(report, ReportFormat::pretty) ==
        "DERS subscale score estimation, pooled LOSO RMSE\n"
        "          direct   indirect \n"
        "subscale  audio    audio    \n"
        "Clarity   2.27     2.31     \n"
        "Goals     5.09     5.10     \n");
}

TEST_CASE("empty report renders a header-only csv", "[eval]") {
  EvaluationReport empty;
  CHECK(render_report(empty, ReportFormat::csv) == "kind,target,modality,route,metric,value\n");
  const auto parsed = parse_report_csv(render_report(empty, ReportFormat::csv));
  CHECK(parsed.rows.empty());
}

TEST_CASE("report csv round-trips keys exactly and values at print precision", "[eval]") {
  const Cohort cohort = generate_cohort(small_synth_config(5, 35));
  ExperimentSpec spec;
  spec.kind = ExperimentKind::selfreport_cascade;
  spec.targets = {Target::MDD, Target::PTSD};
  spec.master_seed = 3;
  const auto report = run_experiment(cohort, spec);
  const auto parsed = parse_report_csv(render_report(report, ReportFormat::csv));
  REQUIRE(parsed.rows.size() == report.rows.size());
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    CHECK(parsed.rows[i].kind == report.rows[i].kind);
    CHECK(parsed.rows[i].target == report.rows[i].target);
    CHECK(parsed.rows[i].modality == report.rows[i].modality);
    CHECK(parsed.rows[i].route == report.rows[i].route);
    CHECK(parsed.rows[i].metric == report.rows[i].metric);
    CHECK(parsed.rows[i].value == Catch::Approx(report.rows[i].value).margin(5e-7));
  }
  CHECK(parsed.provenance == report.provenance);
}

TEST_CASE("reports reject duplicate keys and negative values", "[eval]") {
  EvaluationReport bad;
  bad.rows = {{"ders", "Clarity", "audio", "direct", "rmse", 1.0},
              {"ders", "Clarity", "audio", "direct", "rmse", 2.0}};
  CHECK_THROWS_WITH(validate_report(bad), Catch::Matchers::ContainsSubstring("duplicate row"));

  EvaluationReport negative;
  negative.rows = {{"ders", "Clarity", "audio", "direct", "rmse", -1.0}};
  CHECK_THROWS_AS(validate_report(negative), ValidationError);
}

TEST_CASE("requested subsets shrink the grid accordingly", "[eval]") {
  const Cohort cohort = generate_cohort(small_synth_config(5, 36));
  ExperimentSpec spec;
  spec.kind = ExperimentKind::ders_table;
  spec.modalities = {Modality::video};
  spec.approaches = {Approach::direct};
  spec.master_seed = 1;
  const auto report = run_experiment(cohort, spec);
  CHECK(report.rows.size() == 6);
  for (const auto& row : report.rows) {
    CHECK(row.modality == "video");
    CHECK(row.route == "direct");
  }
}
