// Minimal end-to-end use of the library: generate a small cohort, run the
// severity comparison experiment, print the pretty report.
#include <iostream>

#include "erdkit/cli.hpp"
#include "erdkit/eval.hpp"
#include "erdkit/synth.hpp"

int main(int argc, char** argv) {
  const std::string fixtures = argc > 1 ? argv[1] : "fixtures";

  erdkit::SynthConfig config;
  config.n_subjects = 10;
  config.seed = 42;
  config.interaction = erdkit::load_instrument_file(fixtures + "/instruments/ders36.csv");
  config.target_instruments = {
      {erdkit::Target::MDD, erdkit::load_instrument_file(fixtures + "/instruments/phq8.csv")},
      {erdkit::Target::PTSD, erdkit::load_instrument_file(fixtures + "/instruments/pclc17.csv")},
  };
  config.audio_schema = erdkit::load_schema_file(fixtures + "/schemas/audio6.txt", erdkit::Modality::audio);
  config.video_schema = erdkit::load_schema_file(fixtures + "/schemas/video4.txt", erdkit::Modality::video);
  config.severity_weights = {{erdkit::Target::MDD, {0.2, 0.2, 0.2, 0.2, 0.0, 0.2}},
                             {erdkit::Target::PTSD, {0.566667, 0.566667, 0.566667, 0.566667, 0.0, 0.566667}}};
  config.severity_intercepts = {{erdkit::Target::MDD, -6.0}, {erdkit::Target::PTSD, 0.0}};
  config.factor_loadings = {0.5, 0.5, 0.5, 0.5, 0.0, 0.5};

  const erdkit::Cohort cohort = erdkit::generate_cohort(config);

  erdkit::ExperimentSpec spec;
  spec.kind = erdkit::ExperimentKind::severity_compare;
  spec.modalities = {erdkit::Modality::fused};
  spec.targets = {erdkit::Target::MDD, erdkit::Target::PTSD};
  spec.master_seed = 7;

  const erdkit::EvaluationReport report = erdkit::run_experiment(cohort, spec);
  std::cout << erdkit::render_report(report, erdkit::ReportFormat::pretty);
  return 0;
}
