#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "erdkit/cohort.hpp"
#include "erdkit/csv.hpp"
#include "erdkit/error.hpp"
#include "erdkit/eval.hpp"
#include "erdkit/features.hpp"
#include "erdkit/instrument.hpp"
#include "erdkit/synth.hpp"
#include "erdkit/version.hpp"

namespace erdkit {

/// Exit codes: 0 success, 1 internal error, 2 input/validation error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitInput = 2;

namespace cli_detail {

inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string schema_digest(const FeatureSchema& schema) {
  std::string joined;
  for (const auto& n : schema.feature_names) joined += n + "\n";
  return hex64(fnv1a64(joined));
}

inline std::string resolve_path(const std::string& path, const std::filesystem::path& base) {
  const std::filesystem::path p(path);
  return p.is_absolute() ? p.string() : (base / p).string();
}

inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  for (const auto& field : csv::split(value)) {
    const std::string item = csv::strip(field);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace cli_detail

/// One feature name per line; blank lines and # comments skipped.
inline FeatureSchema load_schema_file(const std::string& path, Modality modality) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open schema file: " + path);
  std::vector<std::string> names;
  for (const auto& raw : csv::read_lines(in)) {
    const std::string line = csv::strip(raw);
    if (line.empty() || line[0] == '#') continue;
    names.push_back(line);
  }
  if (names.empty()) throw ValidationError(path + ": schema file lists no feature names");
  return make_schema(modality, std::move(names));
}

/// Builds a SynthConfig from the JSON config file; relative paths inside the
/// file resolve against the file's own directory.
inline SynthConfig load_synth_config(const std::string& config_path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(csv::read_file(config_path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(config_path + ": invalid JSON: " + e.what());
  }
  const std::filesystem::path base = std::filesystem::path(config_path).parent_path();

  SynthConfig config;
  try {
    config.n_subjects = j.value("n_subjects", 25);
    config.seed = j.value("seed", std::uint64_t{0});
    config.interaction = load_instrument_file(
        cli_detail::resolve_path(j.at("interaction_instrument").get<std::string>(), base));
    for (const auto& [name, path] : j.at("target_instruments").items()) {
      config.target_instruments.emplace_back(
          target_from_string(name), load_instrument_file(cli_detail::resolve_path(path.get<std::string>(), base)));
    }
    std::sort(config.target_instruments.begin(), config.target_instruments.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    config.audio_schema =
        load_schema_file(cli_detail::resolve_path(j.at("audio_schema").get<std::string>(), base), Modality::audio);
    config.video_schema =
        load_schema_file(cli_detail::resolve_path(j.at("video_schema").get<std::string>(), base), Modality::video);
    if (j.contains("noise")) {
      const auto& noise = j.at("noise");
      config.sigma_response = noise.value("response", config.sigma_response);
      config.sigma_feature = noise.value("feature", config.sigma_feature);
      config.sigma_severity = noise.value("severity", config.sigma_severity);
    }
    for (const auto& [name, weights] : j.at("severity_weights").items()) {
      config.severity_weights[target_from_string(name)] = weights.get<std::vector<double>>();
    }
    if (j.contains("severity_intercepts")) {
      for (const auto& [name, value] : j.at("severity_intercepts").items()) {
        config.severity_intercepts[target_from_string(name)] = value.get<double>();
      }
    }
    config.factor_loadings = j.at("factor_loadings").get<std::vector<double>>();
    if (j.contains("latent_distribution")) {
      config.latent = latent_distribution_from_string(j.at("latent_distribution").get<std::string>());
    }
    if (j.contains("latent_duplicates")) {
      for (const auto& pair : j.at("latent_duplicates")) {
        config.latent_duplicates.emplace_back(pair.at(0).get<int>(), pair.at(1).get<int>());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(config_path + ": " + e.what());
  }
  validate_synth_config(config);
  return config;
}

namespace cli_detail {

/// Resolved configuration of a finished run: paths, experiment selections,
/// seeds, schema digests, tool version. Written as `key = value` lines;
/// enough to reproduce the run bit-exactly.
struct RunManifest {
  std::vector<std::pair<std::string, std::string>> entries;

  void add(const std::string& key, const std::string& value) { entries.emplace_back(key, value); }

  std::string render() const {
    std::string text;
    for (const auto& [key, value] : entries) text += key + " = " + value + "\n";
    return text;
  }
};

inline int cmd_score(const std::string& responses_path, const std::string& instrument_path,
                     std::ostream& out) {
  const InstrumentDefinition def = load_instrument_file(instrument_path);
  const auto sheets = load_response_sheets_file(responses_path, def);

  std::size_t subject_width = std::string("subject").size();
  for (const auto& sheet : sheets) subject_width = std::max(subject_width, sheet.subject_id.size());
  auto pad = [](const std::string& s, std::size_t w) {
    return s.size() >= w ? s + "  " : s + std::string(w - s.size() + 2, ' ');
  };
  // a single catch-all subscale would just duplicate the total column
  const bool show_subscales = def.subscale_ids.size() > 1;

  out << pad("subject", subject_width);
  if (show_subscales) {
    for (const auto& subscale_id : def.subscale_ids) {
      out << pad(subscale_id, std::max<std::size_t>(5, subscale_id.size()));
    }
  }
  out << pad("total", 5);
  if (def.severity_threshold) out << "severity";
  out << "\n";
  for (const auto& sheet : sheets) {
    out << pad(sheet.subject_id, subject_width);
    if (show_subscales) {
      for (const auto& subscale_id : def.subscale_ids) {
        out << pad(std::to_string(subscale_score(def, sheet, subscale_id)),
                   std::max<std::size_t>(5, subscale_id.size()));
      }
    }
    const int total = total_score(def, sheet);
    out << pad(std::to_string(total), 5);
    if (def.severity_threshold) out << to_string(classify_severity(def, total));
    out << "\n";
  }
  return kExitOk;
}

inline int cmd_synth(const std::string& config_path, const std::string& out_dir,
                     const std::optional<std::uint64_t>& seed_override, std::ostream& out) {
  SynthConfig config = load_synth_config(config_path);
  if (seed_override) config.seed = *seed_override;
  const Cohort cohort = generate_cohort(config);
  save_cohort(cohort, out_dir);

  RunManifest manifest;
  manifest.add("tool", std::string("erdkit ") + kVersion);
  manifest.add("command", "synth");
  manifest.add("config", std::filesystem::absolute(config_path).string());
  manifest.add("config digest", hex64(fnv1a64(csv::read_file(config_path))));
  manifest.add("seed", std::to_string(config.seed));
  manifest.add("subjects", std::to_string(config.n_subjects));
  manifest.add("interaction instrument", config.interaction.instrument_id);
  for (const auto& [target, def] : config.target_instruments) {
    manifest.add(std::string("target ") + to_string(target), def.instrument_id);
  }
  manifest.add("audio schema digest", schema_digest(config.audio_schema) + " (" +
                                          std::to_string(config.audio_schema.dimension()) + " features)");
  manifest.add("video schema digest", schema_digest(config.video_schema) + " (" +
                                          std::to_string(config.video_schema.dimension()) + " features)");
  csv::write_file((std::filesystem::path(out_dir) / "manifest.txt").string(), manifest.render());

  out << "wrote " << config.n_subjects << "-subject cohort to " << out_dir << "\n";
  return kExitOk;
}

struct RunFlags {
  std::string cohort_dir;
  std::string experiment;
  std::string modalities;
  std::string approaches;
  std::string targets;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  unsigned threads = 1;
  bool normalize = false;
  bool modalities_given = false;
  bool approaches_given = false;
  bool targets_given = false;
};

inline ExperimentSpec build_spec(const RunFlags& flags) {
  ExperimentSpec spec;
  spec.kind = experiment_kind_from_string(flags.experiment);
  spec.master_seed = flags.seed;

  if (flags.modalities_given) {
    if (spec.kind == ExperimentKind::selfreport_cascade) {
      throw ValidationError("--modality does not apply to the cascade experiment (self-reports only)");
    }
    for (const auto& m : split_list(flags.modalities)) spec.modalities.push_back(modality_from_string(m));
  } else if (spec.kind != ExperimentKind::selfreport_cascade) {
    spec.modalities = {Modality::audio, Modality::video, Modality::fused};
  }

  if (flags.approaches_given) {
    if (spec.kind != ExperimentKind::ders_table) {
      throw ValidationError("--approach only applies to the ders experiment");
    }
    for (const auto& a : split_list(flags.approaches)) {
      if (a == "direct") {
        spec.approaches.push_back(Approach::direct);
      } else if (a == "indirect") {
        spec.approaches.push_back(Approach::indirect);
      } else {
        throw ValidationError("unknown approach '" + a + "' (expected direct or indirect)");
      }
    }
  } else if (spec.kind == ExperimentKind::ders_table) {
    spec.approaches = {Approach::direct, Approach::indirect};
  }

  if (flags.targets_given) {
    if (spec.kind == ExperimentKind::ders_table) {
      throw ValidationError("--target does not apply to the ders experiment");
    }
    for (const auto& t : split_list(flags.targets)) spec.targets.push_back(target_from_string(t));
  } else if (spec.kind != ExperimentKind::ders_table) {
    spec.targets = {Target::MDD, Target::PTSD};
  }

  validate_experiment_spec(spec);
  return spec;
}

inline int cmd_run(const RunFlags& flags, std::ostream& out) {
  const ExperimentSpec spec = build_spec(flags);
  const Cohort cohort = load_cohort(flags.cohort_dir);

  RunOptions options;
  options.threads = flags.threads;
  options.normalize_features = flags.normalize;
  const EvaluationReport report = run_experiment(cohort, spec, options);

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(flags.out_dir, ec);
  const std::string csv_path = (fs::path(flags.out_dir) / "report.csv").string();
  const std::string txt_path = (fs::path(flags.out_dir) / "report.txt").string();
  csv::write_file(csv_path, render_report(report, ReportFormat::csv));
  csv::write_file(txt_path, render_report(report, ReportFormat::pretty));

  RunManifest manifest;
  manifest.add("tool", std::string("erdkit ") + kVersion);
  manifest.add("command", "run");
  manifest.add("cohort", fs::absolute(flags.cohort_dir).string());
  for (const auto& line : report.provenance) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) manifest.add(line.substr(0, eq), line.substr(eq + 3));
  }
  manifest.add("threads", std::to_string(flags.threads));
  manifest.add("normalize", flags.normalize ? "true" : "false");
  manifest.add("forest trees", std::to_string(RunOptions{}.forest.n_trees));
  for (const Modality m : {Modality::audio, Modality::video}) {
    manifest.add(std::string(to_string(m)) + " schema digest", schema_digest(cohort.feature_table(m).schema));
  }
  manifest.add("report rows", std::to_string(report.rows.size()));
  manifest.add("report csv digest", hex64(fnv1a64(csv::read_file(csv_path))));
  csv::write_file((fs::path(flags.out_dir) / "manifest.txt").string(), manifest.render());

  out << "wrote " << report.rows.size() << "-row report to " << csv_path << "\n";
  return kExitOk;
}

}  // namespace cli_detail

/// Front end used by the erdkit binary and by tests; args exclude argv[0].
inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"emotion-regulation difficulty assessment pipeline"};
  app.require_subcommand(1);

  auto* score = app.add_subcommand("score", "score response sheets against an instrument");
  std::string responses_path, instrument_path;
  score->add_option("responses", responses_path, "response sheet CSV")->required();
  score->add_option("instrument", instrument_path, "instrument definition file")->required();

  auto* synth = app.add_subcommand("synth", "generate a synthetic cohort directory");
  std::string config_path, synth_out_dir;
  std::uint64_t synth_seed = 0;
  synth->add_option("config", config_path, "generator config JSON")->required();
  synth->add_option("out", synth_out_dir, "output cohort directory")->required();
  auto* seed_opt = synth->add_option("--seed", synth_seed, "override the config seed");

  auto* run = app.add_subcommand("run", "run an experiment over a cohort directory");
  cli_detail::RunFlags flags;
  run->add_option("cohort", flags.cohort_dir, "cohort directory")->required();
  run->add_option("--experiment", flags.experiment, "ders | cascade | severity")->required();
  auto* mod_opt = run->add_option("--modality", flags.modalities, "comma-separated: audio,video,fused");
  auto* app_opt = run->add_option("--approach", flags.approaches, "comma-separated: direct,indirect");
  auto* tgt_opt = run->add_option("--target", flags.targets, "comma-separated: MDD,PTSD");
  run->add_option("--seed", flags.seed, "master seed (default 0)");
  run->add_option("--out", flags.out_dir, "output directory (default .)");
  run->add_option("--threads", flags.threads, "fold-level worker threads (0 = auto)");
  run->add_flag("--normalize", flags.normalize, "z-score features on training folds");

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }

  try {
    if (score->parsed()) return cli_detail::cmd_score(responses_path, instrument_path, out);
    if (synth->parsed()) {
      std::optional<std::uint64_t> seed_override;
      if (seed_opt->count() > 0) seed_override = synth_seed;
      return cli_detail::cmd_synth(config_path, synth_out_dir, seed_override, out);
    }
    flags.modalities_given = mod_opt->count() > 0;
    flags.approaches_given = app_opt->count() > 0;
    flags.targets_given = tgt_opt->count() > 0;
    return cli_detail::cmd_run(flags, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace erdkit
