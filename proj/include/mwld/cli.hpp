#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mwld/data.hpp"
#include "mwld/model.hpp"

namespace mwld::cli {

/// Exit codes: 0 success, 1 runtime error, 2 usage error.
int run(int argc, char** argv);
/// Same, with explicit arguments (program name excluded) and streams.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Trained weights plus the encoding they expect.
struct WeightsFile {
  std::vector<std::string> feature_names;  // encoded names, then "(intercept)"
  LinearModel model{std::size_t{0}};
  FeatureManifest manifest;
  std::string config_digest;
};

std::string dump_weights(const WeightsFile& w);
WeightsFile parse_weights(const std::string& text);

}  // namespace mwld::cli
