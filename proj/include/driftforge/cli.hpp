#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "driftforge/io.hpp"

namespace driftforge::cli {

// One resolved run configuration; serialized next to every output so reruns
// are reproducible from the artifacts alone.
struct RunConfig {
  std::uint64_t seed = 1;
  DatasetConfig dataset;
  int hidden = 32;
  int train_epochs = 200;
  int refine_epochs = 60;
  double refine_lr = 2e-6;
  Vec3d refine_weights = Vec3d::Ones();
  int calib_max_samples = 2000;
};

json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const json& j);

// Entry point used by both the binary and the tests. Commands:
//   simulate | calibrate | train | refine | eval
int run_cli(const std::vector<std::string>& args);

}  // namespace driftforge::cli
