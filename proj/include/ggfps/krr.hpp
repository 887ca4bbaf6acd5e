#pragma once

#include "ggfps/common.hpp"
#include "ggfps/dataset.hpp"

#include <json.hpp>

#include <map>
#include <span>
#include <string_view>

namespace ggfps {

enum class KernelKind
{
  gaussian,
  local_gaussian,
};

std::string_view to_string(KernelKind k);
KernelKind parse_kernel_kind(std::string_view s);

struct KernelSpec
{
  KernelKind kind = KernelKind::gaussian;
  double sigma = 1.0;

  void validate() const;
};

/// exp(-|xi - xj|^2 / (2 sigma^2))
double gaussian_kernel(std::span<const double> xi, std::span<const double> xj, double sigma);

/// Sum of Gaussian similarities over all same-species atom pairs.
double local_kernel(const AtomDescriptors& a, const AtomDescriptors& b, double sigma);

/// Same as local_kernel for two flattened descriptor rows sharing one atom layout.
double local_kernel_rows(std::span<const double> a,
                         std::span<const double> b,
                         std::span<const int> atom_species,
                         double sigma);

/// K(i, j) = k(rows[i], cols[j]). local_gaussian needs an atom layout on both sets.
Matrix assemble_kernel(const LabeledSet& rows, const LabeledSet& cols, const KernelSpec& spec);

/// Dual coefficients solving (K + lambda I) alpha = y by Cholesky.
/// Throws FactorizationError with the failing pivot.
Vector fit(const Matrix& K_train, const Vector& y, double lambda);

/// y_hat[q] = sum_i alpha[i] K_test(i, q), with K_test of shape N x Q.
Vector predict(const Matrix& K_test, const Vector& alpha);

/// Cholesky factor of K + lambda I whose leading blocks also factor every
/// leading principal submatrix, so nested training prefixes share one factorization.
class PrefixCholesky
{
public:
  PrefixCholesky(const Eigen::MatrixXd& K, double lambda);

  /// Largest prefix size with a valid factorization (the full size on success).
  std::size_t valid_size() const { return valid_; }
  bool complete() const { return valid_ == static_cast<std::size_t>(factor_.rows()); }

  /// Solves the system restricted to the first m rows/columns (m <= valid_size()).
  Vector solve_prefix(std::size_t m, const Vector& y) const;

private:
  Eigen::MatrixXd factor_;
  std::size_t valid_ = 0;
};

struct KrrModel
{
  KernelSpec kernel;
  double lambda = 1e-8;
  std::vector<std::string> train_ids;
  Vector alpha;
};

KrrModel train_model(const LabeledSet& train, const KernelSpec& kernel, double lambda);

/// Predictions for `test` given the model and the training rows it was fit on.
Vector predict_model(const KrrModel& model, const LabeledSet& train, const LabeledSet& test);

nlohmann::json to_json(const KrrModel& model);
KrrModel model_from_json(const nlohmann::json& doc);

/// Kernel blocks over one LabeledSet by row index. Gaussian kernels reuse a
/// cached squared-distance matrix; local kernels cache one Gram matrix per
/// sigma. Caches are only built when they fit in `memory_budget_bytes`.
class GramSource
{
public:
  static constexpr std::size_t kDefaultBudget = std::size_t{2} << 30;

  GramSource(const LabeledSet& set, KernelKind kind, std::size_t memory_budget_bytes = kDefaultBudget);

  Eigen::MatrixXd block(std::span<const std::size_t> rows,
                        std::span<const std::size_t> cols,
                        double sigma);

  const LabeledSet& set() const { return set_; }

private:
  const LabeledSet& set_;
  KernelKind kind_;
  std::size_t budget_;
  Eigen::MatrixXd sqdist_;
  std::map<double, Eigen::MatrixXd> local_gram_;

  double entry(std::size_t i, std::size_t j, double sigma) const;
};

} // namespace ggfps
