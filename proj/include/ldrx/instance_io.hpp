#pragma once

#include <string>
#include <vector>

#include "ldrx/system.hpp"
#include "ldrx/uncertainty.hpp"

namespace ldrx {

struct Instance {
  std::string name;
  SystemData system;
  UncertaintyModel uncertainty;
  RiskConfig risk;
};

/// All schema problems found in one pass, each with a JSON-path-like locator.
struct ValidationError : std::runtime_error {
  std::vector<std::string> issues;
  explicit ValidationError(std::vector<std::string> list);
};

/// Parses and fully validates a JSON instance document. The uncertainty
/// factor matrices are assembled from base values, deterministic drifts and
/// per-coordinate additive deltas; nominal system trajectories equal the
/// factors realized at the all-ones vector.
Instance parse_instance(const std::string& json_text);

Instance load_instance(const std::string& path);

}  // namespace ldrx
