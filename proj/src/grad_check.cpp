#include "rmlab/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rmlab/rng.hpp"

namespace rmlab {

namespace {

double eval_loss(const LossBuilder& builder, const ParamStore& params) {
  Tape tape;
  ParamBinding binding = bind_params(tape, params);
  NodeId root = builder(tape, binding);
  return tape.value(root).scalar_value();
}

}  // namespace

GradCheckReport grad_check(const LossBuilder& builder, ParamStore& params,
                           const GradCheckOptions& options) {
  // One analytic pass gives every parameter gradient at once.
  Tape tape;
  ParamBinding binding = bind_params(tape, params);
  NodeId root = builder(tape, binding);
  tape.backward(root);

  Rng rng(derive_seed(options.seed, "grad_check_coords"));
  GradCheckReport report;

  // A coordinate the loss does not truly depend on (e.g. a bias that only
  // shifts both sides of a difference) still produces a few ulps of rounding
  // noise in the central difference. Differences below that noise scale are
  // agreement, not error.
  const double base = eval_loss(builder, params);
  const double fd_noise =
      8.0 * std::fabs(base) * std::numeric_limits<double>::epsilon() / (2.0 * options.epsilon);

  for (const auto& name : params.names()) {
    Tensor& tensor = params.get(name);
    const Tensor& analytic = tape.grad(binding.at(name));

    std::vector<int> coords;
    if (tensor.size() <= options.coords_per_param) {
      coords.resize(static_cast<std::size_t>(tensor.size()));
      for (int i = 0; i < tensor.size(); ++i) coords[static_cast<std::size_t>(i)] = i;
    } else {
      // Sample without replacement from a shuffled index list.
      std::vector<int> all(static_cast<std::size_t>(tensor.size()));
      for (int i = 0; i < tensor.size(); ++i) all[static_cast<std::size_t>(i)] = i;
      rng.shuffle(all);
      coords.assign(all.begin(), all.begin() + options.coords_per_param);
    }

    for (int c : coords) {
      const double original = tensor.data[static_cast<std::size_t>(c)];
      tensor.data[static_cast<std::size_t>(c)] = original + options.epsilon;
      const double up = eval_loss(builder, params);
      tensor.data[static_cast<std::size_t>(c)] = original - options.epsilon;
      const double down = eval_loss(builder, params);
      tensor.data[static_cast<std::size_t>(c)] = original;

      const double numeric = (up - down) / (2.0 * options.epsilon);
      const double a = analytic.data[static_cast<std::size_t>(c)];
      const double diff = std::fabs(a - numeric);
      const double rel =
          diff <= fd_noise ? 0.0 : diff / std::max(1e-8, std::fabs(a) + std::fabs(numeric));
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = name;
        report.worst_coord = c;
      }
    }
  }
  return report;
}

}  // namespace rmlab
