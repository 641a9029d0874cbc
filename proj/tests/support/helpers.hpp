#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "erdkit/cli.hpp"
#include "erdkit/cohort.hpp"
#include "erdkit/synth.hpp"

#ifndef ERDKIT_FIXTURE_DIR
#define ERDKIT_FIXTURE_DIR "fixtures"
#endif

namespace testing_support {

inline std::string fixture(const std::string& relative) {
  return std::string(ERDKIT_FIXTURE_DIR) + "/" + relative;
}

/// Self-deleting scratch directory under the system temp root.
class TempDir {
 public:
  explicit TempDir(const std::string& stem) {
    auto base = std::filesystem::temp_directory_path();
    std::random_device rd;
    path_ = (base / (stem + "-" + std::to_string(rd()))).string();
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::string& path() const { return path_; }
  std::string sub(const std::string& name) const { return (std::filesystem::path(path_) / name).string(); }

 private:
  std::string path_;
};

/// The shipped small-schema config (8 subjects, tiny feature dimensions);
/// used by pipeline/eval/cli tests to keep model training fast.
inline erdkit::SynthConfig small_synth_config(int n_subjects = 8, std::uint64_t seed = 0) {
  erdkit::SynthConfig config = erdkit::load_synth_config(fixture("synth_small.json"));
  config.n_subjects = n_subjects;
  config.seed = seed;
  return config;
}

/// The shipped default config (25 subjects, full 88/46 schemas).
inline erdkit::SynthConfig default_synth_config(std::uint64_t seed = 0) {
  erdkit::SynthConfig config = erdkit::load_synth_config(fixture("synth_default.json"));
  config.seed = seed;
  return config;
}

}  // namespace testing_support
