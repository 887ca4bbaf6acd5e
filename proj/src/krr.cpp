#include "ggfps/krr.hpp"

#include "ggfps/errors.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace ggfps {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b)
{
  double s = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    const double t = a[c] - b[c];
    s += t * t;
  }
  return s;
}

std::span<const double> row_span(const Matrix& m, std::size_t i)
{
  return {m.data() + static_cast<std::ptrdiff_t>(i) * m.cols(), static_cast<std::size_t>(m.cols())};
}

} // namespace

std::string_view to_string(KernelKind k)
{
  return k == KernelKind::gaussian ? "gaussian" : "local_gaussian";
}

KernelKind parse_kernel_kind(std::string_view s)
{
  if (s == "gaussian")
    return KernelKind::gaussian;
  if (s == "local_gaussian")
    return KernelKind::local_gaussian;
  throw ConfigError("unknown kernel kind '" + std::string(s) + "'");
}

void KernelSpec::validate() const
{
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw ConfigError("kernel.sigma must be positive");
}

double gaussian_kernel(std::span<const double> xi, std::span<const double> xj, double sigma)
{
  if (xi.size() != xj.size())
    throw ConfigError("gaussian kernel: dimension mismatch");
  return std::exp(-squared_distance(xi, xj) / (2.0 * sigma * sigma));
}

double local_kernel(const AtomDescriptors& a, const AtomDescriptors& b, double sigma)
{
  if (a.values.cols() != b.values.cols())
    throw ConfigError("local kernel: descriptor width mismatch");
  if (a.species.size() != static_cast<std::size_t>(a.values.rows()) ||
      b.species.size() != static_cast<std::size_t>(b.values.rows()))
    throw ConfigError("local kernel: every atom environment needs a species tag");
  const double inv = 1.0 / (2.0 * sigma * sigma);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.species.size(); ++i)
    for (std::size_t j = 0; j < b.species.size(); ++j)
      if (a.species[i] == b.species[j])
        sum += std::exp(-squared_distance(row_span(a.values, i), row_span(b.values, j)) * inv);
  return sum;
}

double local_kernel_rows(std::span<const double> a,
                         std::span<const double> b,
                         std::span<const int> atom_species,
                         double sigma)
{
  const std::size_t m = atom_species.size();
  if (m == 0 || a.size() != b.size() || a.size() % m != 0)
    throw ConfigError("local kernel: rows do not match the atom layout");
  const std::size_t w = a.size() / m;
  const double inv = 1.0 / (2.0 * sigma * sigma);
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (atom_species[i] == atom_species[j])
        sum += std::exp(-squared_distance(a.subspan(i * w, w), b.subspan(j * w, w)) * inv);
  return sum;
}

Matrix assemble_kernel(const LabeledSet& rows, const LabeledSet& cols, const KernelSpec& spec)
{
  spec.validate();
  if (rows.dim() != cols.dim() && rows.size() > 0 && cols.size() > 0)
    throw ConfigError("assemble kernel: descriptor widths differ");
  if (spec.kind == KernelKind::local_gaussian) {
    if (rows.atom_species.empty() || cols.atom_species.empty())
      throw ConfigError("assemble kernel: local_gaussian needs species tags on both sample lists");
    if (rows.atom_species != cols.atom_species)
      throw ConfigError("assemble kernel: sample lists have different atom layouts");
  }

  Matrix K(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const auto a = row_span(rows.descriptors, i);
      const auto b = row_span(cols.descriptors, j);
      K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
        spec.kind == KernelKind::gaussian ? gaussian_kernel(a, b, spec.sigma)
                                          : local_kernel_rows(a, b, rows.atom_species, spec.sigma);
    }
  }
  return K;
}

PrefixCholesky::PrefixCholesky(const Eigen::MatrixXd& K, double lambda) : factor_(K)
{
  if (K.rows() != K.cols())
    throw ConfigError("cholesky: matrix must be square");
  factor_.diagonal().array() += lambda;
  const auto ret = Eigen::internal::llt_inplace<double, Eigen::Lower>::blocked(factor_);
  valid_ = ret < 0 ? static_cast<std::size_t>(factor_.rows()) : static_cast<std::size_t>(ret);
}

Vector PrefixCholesky::solve_prefix(std::size_t m, const Vector& y) const
{
  if (m > valid_)
    throw FactorizationError(static_cast<std::ptrdiff_t>(valid_));
  if (static_cast<std::size_t>(y.size()) != m)
    throw ConfigError("cholesky solve: right-hand side has the wrong length");
  const auto n = static_cast<Eigen::Index>(m);
  const auto block = factor_.topLeftCorner(n, n);
  Vector x = y;
  block.triangularView<Eigen::Lower>().solveInPlace(x);
  block.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
  return x;
}

Vector fit(const Matrix& K_train, const Vector& y, double lambda)
{
  if (!(lambda > 0.0))
    throw ConfigError("fit: lambda must be positive");
  if (K_train.rows() != K_train.cols() || K_train.rows() != y.size())
    throw ConfigError("fit: kernel matrix and labels disagree in size");
  PrefixCholesky chol(K_train, lambda);
  if (!chol.complete())
    throw FactorizationError(static_cast<std::ptrdiff_t>(chol.valid_size()));
  return chol.solve_prefix(static_cast<std::size_t>(y.size()), y);
}

Vector predict(const Matrix& K_test, const Vector& alpha)
{
  if (K_test.rows() != alpha.size())
    throw ConfigError("predict: kernel has " + std::to_string(K_test.rows()) + " rows but alpha has " +
                      std::to_string(alpha.size()) + " entries");
  return K_test.transpose() * alpha;
}

KrrModel train_model(const LabeledSet& train, const KernelSpec& kernel, double lambda)
{
  KrrModel model;
  model.kernel = kernel;
  model.lambda = lambda;
  model.train_ids = train.ids;
  model.alpha = fit(assemble_kernel(train, train, kernel), train.labels, lambda);
  return model;
}

Vector predict_model(const KrrModel& model, const LabeledSet& train, const LabeledSet& test)
{
  if (train.size() != static_cast<std::size_t>(model.alpha.size()))
    throw ConfigError("predict: training set does not match the model");
  return predict(assemble_kernel(train, test, model.kernel), model.alpha);
}

nlohmann::json to_json(const KrrModel& model)
{
  nlohmann::json doc;
  doc["kernel"] = {{"kind", to_string(model.kernel.kind)}, {"sigma", model.kernel.sigma}};
  doc["lambda"] = model.lambda;
  doc["alpha"] = std::vector<double>(model.alpha.begin(), model.alpha.end());
  doc["train_ids"] = model.train_ids;
  return doc;
}

KrrModel model_from_json(const nlohmann::json& doc)
{
  KrrModel model;
  model.kernel.kind = parse_kernel_kind(doc.at("kernel").at("kind").get<std::string>());
  model.kernel.sigma = doc.at("kernel").at("sigma").get<double>();
  model.lambda = doc.at("lambda").get<double>();
  const auto alpha = doc.at("alpha").get<std::vector<double>>();
  model.alpha = Eigen::Map<const Vector>(alpha.data(), static_cast<Eigen::Index>(alpha.size()));
  model.train_ids = doc.at("train_ids").get<std::vector<std::string>>();
  if (model.train_ids.size() != alpha.size())
    throw ConfigError("model: alpha and train_ids differ in length");
  return model;
}

GramSource::GramSource(const LabeledSet& set, KernelKind kind, std::size_t memory_budget_bytes)
  : set_(set), kind_(kind), budget_(memory_budget_bytes)
{
  if (kind_ == KernelKind::local_gaussian && set_.atom_species.empty())
    throw ConfigError("local_gaussian kernel needs species tags on the labeled set");
  const std::size_t n = set_.size();
  if (kind_ == KernelKind::gaussian && n * n * sizeof(double) <= budget_) {
    sqdist_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      sqdist_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        const double s = squared_distance(row_span(set_.descriptors, i), row_span(set_.descriptors, j));
        sqdist_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s;
        sqdist_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = s;
      }
    }
  }
}

double GramSource::entry(std::size_t i, std::size_t j, double sigma) const
{
  const auto a = row_span(set_.descriptors, i);
  const auto b = row_span(set_.descriptors, j);
  if (kind_ == KernelKind::gaussian)
    return gaussian_kernel(a, b, sigma);
  return local_kernel_rows(a, b, set_.atom_species, sigma);
}

Eigen::MatrixXd GramSource::block(std::span<const std::size_t> rows,
                                  std::span<const std::size_t> cols,
                                  double sigma)
{
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  const double inv = 1.0 / (2.0 * sigma * sigma);

  if (kind_ == KernelKind::gaussian && sqdist_.size() > 0) {
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      const auto jc = static_cast<Eigen::Index>(cols[static_cast<std::size_t>(c)]);
      for (Eigen::Index r = 0; r < out.rows(); ++r)
        out(r, c) = std::exp(-sqdist_(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)]), jc) * inv);
    }
    return out;
  }

  const std::size_t n = set_.size();
  const std::size_t gram_bytes = n * n * sizeof(double);
  if (kind_ == KernelKind::local_gaussian &&
      (local_gram_.size() + 1) * gram_bytes <= budget_ && !local_gram_.contains(sigma)) {
    Eigen::MatrixXd gram(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        const double v = entry(i, j, sigma);
        gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        gram(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
      }
    local_gram_.emplace(sigma, std::move(gram));
  }
  if (auto it = local_gram_.find(sigma); it != local_gram_.end()) {
    for (Eigen::Index c = 0; c < out.cols(); ++c)
      for (Eigen::Index r = 0; r < out.rows(); ++r)
        out(r, c) = it->second(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)]),
                               static_cast<Eigen::Index>(cols[static_cast<std::size_t>(c)]));
    return out;
  }

  for (Eigen::Index c = 0; c < out.cols(); ++c)
    for (Eigen::Index r = 0; r < out.rows(); ++r)
      out(r, c) = entry(rows[static_cast<std::size_t>(r)], cols[static_cast<std::size_t>(c)], sigma);
  return out;
}

} // namespace ggfps
