#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slu/numerics.hpp"

namespace slu {

struct CertificationResult {
  std::string component;
  std::uint64_t seed = 0;
  std::vector<GradCheckReport> reports;  // one per checked tensor
  double max_relative_error = 0.0;
};

// Layer-level components (lstm_step, gru_step, bidir_unroll, ...) followed by
// one full-model component per family ("family:<name>").
std::vector<std::string> certification_components();

// Builds a small randomly initialized instance of the component from `seed`,
// computes analytic gradients of a scalar loss and compares them with central
// differences. Layer components are compared entry by entry; family
// components along a few random directions in the full parameter space.
// Invalid argument for an unknown component.
CertificationResult certify_component(const std::string& component, std::uint64_t seed,
                                      double epsilon = 1e-5);

}  // namespace slu
