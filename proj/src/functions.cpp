#include "ggfps/functions.hpp"

#include "ggfps/errors.hpp"

#include <cmath>
#include <ostream>

namespace ggfps {

namespace {

class StyblinskiTang final : public Surface
{
public:
  StyblinskiTang(std::size_t dim, Interval domain) : dim_(dim), domain_(domain) {}

  std::size_t dim() const override { return dim_; }
  double value(const Vector& x) const override { return st_value(x); }
  Vector gradient(const Vector& x) const override { return st_gradient(x); }
  Interval domain() const override { return domain_; }

private:
  std::size_t dim_;
  Interval domain_;
};

class AdversarialToy final : public Surface
{
public:
  AdversarialToy(BumpParams bump, Interval domain) : bump_(std::move(bump)), domain_(domain) {}

  std::size_t dim() const override { return 2; }
  double value(const Vector& x) const override
  {
    return adversarial_value_and_gradient(x, bump_).first;
  }
  Vector gradient(const Vector& x) const override
  {
    return adversarial_value_and_gradient(x, bump_).second;
  }
  Interval domain() const override { return domain_; }

private:
  BumpParams bump_;
  Interval domain_;
};

} // namespace

double st_value(const Vector& x)
{
  double sum = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double t = x[i];
    const double t2 = t * t;
    sum += t2 * t2 - 16.0 * t2 + 5.0 * t;
  }
  return 0.5 * sum;
}

Vector st_gradient(const Vector& x)
{
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double t = x[i];
    g[i] = 0.5 * (4.0 * t * t * t - 32.0 * t + 5.0);
  }
  return g;
}

std::pair<double, Vector> adversarial_value_and_gradient(const Vector& x, const BumpParams& bump)
{
  if (x.size() != 2 || bump.center.size() != 2)
    throw ConfigError("adversarial surface is two-dimensional");

  const double r2 = bump.radius * bump.radius;
  const double dx0 = x[0] - bump.center[0];
  const double dx1 = x[1] - bump.center[1];
  const double window = std::exp(-(dx0 * dx0 + dx1 * dx1) / (2.0 * r2));
  const double s0 = std::sin(bump.frequency * x[0]);
  const double s1 = std::sin(bump.frequency * x[1]);
  const double c0 = std::cos(bump.frequency * x[0]);
  const double c1 = std::cos(bump.frequency * x[1]);

  const double f = bump.amplitude * window * s0 * s1;
  Vector g(2);
  g[0] = bump.amplitude * window * s1 * (bump.frequency * c0 - dx0 / r2 * s0);
  g[1] = bump.amplitude * window * s0 * (bump.frequency * c1 - dx1 / r2 * s1);
  return {f, g};
}

void SurfaceSpec::validate() const
{
  if (dim < 1)
    throw ConfigError("surface.dim must be at least 1");
  if (!(domain.lower < domain.upper))
    throw ConfigError("surface.domain lower bound must be below the upper bound");
  if (kind == SurfaceKind::adversarial_toy) {
    if (dim != 2)
      throw ConfigError("surface.dim must be 2 for the adversarial surface");
    if (bump.center.size() != 2)
      throw ConfigError("surface.bump.center must have two coordinates");
    if (!(bump.radius > 0.0))
      throw ConfigError("surface.bump.radius must be positive");
    if (!(bump.frequency > 0.0))
      throw ConfigError("surface.bump.frequency must be positive");
  }
}

std::unique_ptr<Surface> make_surface(const SurfaceSpec& spec)
{
  spec.validate();
  switch (spec.kind) {
  case SurfaceKind::styblinski_tang:
    return std::make_unique<StyblinskiTang>(spec.dim, spec.domain);
  case SurfaceKind::adversarial_toy:
    return std::make_unique<AdversarialToy>(spec.bump, spec.domain);
  }
  throw ConfigError("surface.kind is not recognised");
}

LabeledSet label_points(const Surface& surface, const Matrix& points)
{
  LabeledSet set;
  const auto n = points.rows();
  set.descriptors = descriptor_identity(points);
  set.labels.resize(n);
  set.gradient_norms.resize(n);
  set.ids.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector x = points.row(i).transpose();
    set.labels[i] = surface.value(x);
    set.gradient_norms[i] = surface.gradient(x).norm();
    set.ids.push_back(std::to_string(i));
  }
  return set;
}

LabeledSet uniform_domain_sample(const SurfaceSpec& spec, std::size_t n, std::uint64_t seed)
{
  if (n == 0)
    throw ConfigError("uniform sample: n must be positive");
  auto surface = make_surface(spec);
  Rng rng(seed);
  std::uniform_real_distribution<double> coord(spec.domain.lower, spec.domain.upper);
  Matrix points(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(spec.dim));
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    for (Eigen::Index j = 0; j < points.cols(); ++j)
      points(i, j) = coord(rng);
  return label_points(*surface, points);
}

void write_surface_grid_csv(std::ostream& out, const Surface& surface, std::size_t resolution)
{
  if (surface.dim() != 2)
    throw ConfigError("surface grid export requires a 2D surface");
  if (resolution < 2)
    throw ConfigError("surface grid resolution must be at least 2");
  const auto dom = surface.domain();
  const double step = (dom.upper - dom.lower) / static_cast<double>(resolution - 1);
  out << "x0,x1,value,grad_norm\n";
  Vector x(2);
  for (std::size_t i = 0; i < resolution; ++i) {
    for (std::size_t j = 0; j < resolution; ++j) {
      x[0] = dom.lower + step * static_cast<double>(i);
      x[1] = dom.lower + step * static_cast<double>(j);
      out << format_double(x[0]) << ',' << format_double(x[1]) << ','
          << format_double(surface.value(x)) << ',' << format_double(surface.gradient(x).norm())
          << '\n';
    }
  }
}

} // namespace ggfps
