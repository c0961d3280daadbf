#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "rmlab/params.hpp"

namespace rmlab {

// Builds a scalar loss node on a fresh tape from bound parameters. The
// builder must be a pure function of the parameter values (any data it needs
// is baked into the closure), so that repeated calls are comparable.
using LossBuilder = std::function<NodeId(Tape&, const ParamBinding&)>;

struct GradCheckOptions {
  double epsilon = 1e-5;     // central-difference step
  int coords_per_param = 8;  // sampled per tensor; all coords if fewer
  std::uint64_t seed = 0;    // coordinate sampling stream
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  int worst_coord = -1;
};

// Compares tape gradients against central finite differences on randomly
// sampled coordinates of every parameter. Relative error per coordinate is
// |analytic - numeric| / max(1e-8, |analytic| + |numeric|), except that a
// difference within a few ulps of loss/(2 epsilon) — the rounding noise of
// the central difference itself — counts as exact, so coordinates with a
// true zero gradient are not flagged. Parameter values are perturbed in
// place and restored bit-exactly.
GradCheckReport grad_check(const LossBuilder& builder, ParamStore& params,
                           const GradCheckOptions& options = {});

}  // namespace rmlab
