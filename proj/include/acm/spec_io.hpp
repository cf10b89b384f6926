#pragma once

#include <string>

#include "acm/data_io.hpp"

namespace acm {

// Simulation requests as JSON objects selected by "kind":
//   "ar":         explicit per-class coefficients and innovation covariance
//   "equal_lag0": the two-class equal lag-0 covariance construction
//   "sine":       noisy sine waves
// Unknown keys and wrong types raise InvalidArgument.
EpochSet simulate_from_json(const std::string& text, unsigned workers = 1);

ArSpec ar_spec_from_json(const std::string& text);
SineSpec sine_spec_from_json(const std::string& text);

// Round-trip precision JSON for a spec (used in run manifests).
std::string ar_spec_to_json(const ArSpec& spec);

}  // namespace acm
