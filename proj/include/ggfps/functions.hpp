#pragma once

#include "ggfps/common.hpp"
#include "ggfps/dataset.hpp"

#include <iosfwd>
#include <memory>
#include <utility>

namespace ggfps {

/// Closed per-coordinate interval.
struct Interval
{
  double lower = -4.0;
  double upper = 4.0;
};

/// A smooth scalar surface with an analytic gradient over a box domain.
class Surface
{
public:
  virtual ~Surface() = default;

  virtual std::size_t dim() const = 0;
  virtual double value(const Vector& x) const = 0;
  virtual Vector gradient(const Vector& x) const = 0;

  /// Per-coordinate domain; the same interval for every axis.
  virtual Interval domain() const = 0;
};

/// Global minimizer coordinate of the Styblinski-Tang function (per axis).
inline constexpr double kStMinimizer = -2.903534;

double st_value(const Vector& x);
Vector st_gradient(const Vector& x);

struct BumpParams
{
  Vector center = Vector::Constant(2, 2.0);
  double radius = 0.7;
  double amplitude = 50.0;
  double frequency = 6.0;
};

/// amp * exp(-|x-c|^2 / (2 r^2)) * sin(freq x0) * sin(freq x1), and its gradient.
std::pair<double, Vector> adversarial_value_and_gradient(const Vector& x, const BumpParams& bump);

enum class SurfaceKind
{
  styblinski_tang,
  adversarial_toy,
};

struct SurfaceSpec
{
  SurfaceKind kind = SurfaceKind::styblinski_tang;
  std::size_t dim = 2;
  Interval domain;
  BumpParams bump;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

std::unique_ptr<Surface> make_surface(const SurfaceSpec& spec);

/// n i.i.d. uniform points over the domain box, labelled with the surface
/// value and the gradient norm.
LabeledSet uniform_domain_sample(const SurfaceSpec& spec, std::size_t n, std::uint64_t seed);

/// Labels and gradient norms for arbitrary points.
LabeledSet label_points(const Surface& surface, const Matrix& points);

/// Writes `x0,x1,value,grad_norm` on a resolution x resolution grid spanning the
/// domain. Requires a 2D surface.
void write_surface_grid_csv(std::ostream& out, const Surface& surface, std::size_t resolution);

} // namespace ggfps
