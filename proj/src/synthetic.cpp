#include "ggfps/synthetic.hpp"

#include "ggfps/errors.hpp"

#include <cmath>

namespace ggfps {

LabeledSet synth_boltzmann_set(const Surface& surface,
                               double temperature,
                               std::size_t n,
                               std::uint64_t seed,
                               double step,
                               const BoltzmannOptions& options)
{
  if (n == 0)
    throw ConfigError("boltzmann sample: n must be positive (empty set requested)");
  if (!(temperature > 0.0) || !(step > 0.0) || options.thin == 0)
    throw ConfigError("boltzmann sample: temperature, step and thinning must be positive");

  const auto dim = static_cast<Eigen::Index>(surface.dim());
  const auto box = surface.domain();
  auto inside = [&](const Vector& x) {
    return ((x.array() >= box.lower) && (x.array() <= box.upper)).all();
  };
  auto evaluate = [&](const Vector& x) {
    const double f = surface.value(x);
    if (!std::isfinite(f))
      throw NumericalError("boltzmann sample: surface evaluation is not finite");
    return f;
  };

  Rng rng(seed);
  std::uniform_real_distribution<double> start(box.lower, box.upper);
  std::normal_distribution<double> gauss(0.0, step);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Vector x(dim);
  for (Eigen::Index j = 0; j < dim; ++j)
    x[j] = start(rng);
  double fx = evaluate(x);

  Matrix points(static_cast<Eigen::Index>(n), dim);
  Vector proposal(dim);
  const std::size_t total = options.burn_in + n * options.thin;
  std::size_t recorded = 0;
  for (std::size_t it = 1; it <= total; ++it) {
    for (Eigen::Index j = 0; j < dim; ++j)
      proposal[j] = x[j] + gauss(rng);
    const double u = unit(rng);
    if (inside(proposal)) {
      const double fp = evaluate(proposal);
      if (fp <= fx || u < std::exp(-(fp - fx) / temperature)) {
        x = proposal;
        fx = fp;
      }
    }
    if (it > options.burn_in && (it - options.burn_in) % options.thin == 0)
      points.row(static_cast<Eigen::Index>(recorded++)) = x.transpose();
  }

  LabeledSet set = label_points(surface, points);
  for (Eigen::Index i = 0; i < set.gradient_norms.size(); ++i)
    if (!std::isfinite(set.gradient_norms[i]))
      throw NumericalError("boltzmann sample: surface gradient is not finite");
  return set;
}

} // namespace ggfps
