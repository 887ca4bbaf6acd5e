#include "ggfps/sampling.hpp"

#include "ggfps/errors.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <numeric>

namespace ggfps {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

void check_finite_rows(const Matrix& X)
{
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    if (!X.row(i).allFinite())
      throw NumericalError("descriptor row " + std::to_string(i) + " is not finite");
}

// Greedy core shared by FPS and GGFPS. With empty `log_g` the score is the
// min distance itself; otherwise step k (0-based) scores
// beta_k * log(g_j) + log(d_j) unless beta_k is exactly zero.
IndexList greedy_select(const Matrix& X,
                        std::size_t n,
                        std::size_t init,
                        const std::vector<double>& log_g,
                        const std::vector<double>& schedule)
{
  SelectionState state(static_cast<std::size_t>(X.rows()));
  state.add(init, X);
  const auto& d = state.min_dist();

  for (std::size_t k = 1; k < n; ++k) {
    const double beta = log_g.empty() ? 0.0 : schedule[k];
    std::size_t best = kNone;
    double best_key = -kInf;
    for (std::size_t j = 0; j < state.total(); ++j) {
      if (state.is_selected(j))
        continue;
      double key;
      if (beta == 0.0)
        key = d[j];
      else
        key = d[j] > 0.0 ? beta * log_g[j] + std::log(d[j]) : -kInf;
      if (best == kNone || key > best_key) {
        best = j;
        best_key = key;
      }
    }
    state.add(best, X);
  }
  return state.selected();
}

} // namespace

std::string_view to_string(Method m)
{
  switch (m) {
  case Method::urs:
    return "URS";
  case Method::fps:
    return "FPS";
  case Method::ggfps:
    return "GGFPS";
  }
  return "?";
}

std::string_view to_string(BetaMode m)
{
  return m == BetaMode::swept ? "swept" : "constant";
}

std::string_view to_string(InitMode m)
{
  switch (m) {
  case InitMode::random_uniform:
    return "random_uniform";
  case InitMode::gradient_weighted:
    return "gradient_weighted";
  case InitMode::gradient_argmax:
    return "gradient_argmax";
  }
  return "?";
}

Method parse_method(std::string_view s)
{
  if (s == "URS" || s == "urs")
    return Method::urs;
  if (s == "FPS" || s == "fps")
    return Method::fps;
  if (s == "GGFPS" || s == "ggfps")
    return Method::ggfps;
  throw ConfigError("unknown sampling method '" + std::string(s) + "'");
}

BetaMode parse_beta_mode(std::string_view s)
{
  if (s == "swept")
    return BetaMode::swept;
  if (s == "constant")
    return BetaMode::constant;
  throw ConfigError("unknown beta mode '" + std::string(s) + "'");
}

InitMode parse_init_mode(std::string_view s)
{
  if (s == "random_uniform")
    return InitMode::random_uniform;
  if (s == "gradient_weighted")
    return InitMode::gradient_weighted;
  if (s == "gradient_argmax")
    return InitMode::gradient_argmax;
  throw ConfigError("unknown init mode '" + std::string(s) + "'");
}

void SamplerConfig::validate() const
{
  if (n < 1)
    throw ConfigError("sampler.n must be at least 1");
  if (!(beta >= 0.0) || !std::isfinite(beta))
    throw ConfigError("sampler.beta must be a finite nonnegative number");
  if (!(grad_floor_rel >= 0.0))
    throw ConfigError("sampler.grad_floor_rel must be nonnegative");
  if (schedule_length != 0 && schedule_length < n)
    throw ConfigError("sampler.schedule_length must be 0 or at least n");
}

BetaSchedule beta_schedule(double beta, std::size_t n, BetaMode mode, BetaOrdering ordering)
{
  BetaSchedule out;
  if (n == 0)
    return out;
  if (mode == BetaMode::constant) {
    out.values.assign(n, beta);
    return out;
  }
  if (n == 1) {
    out.values.assign(1, beta);
    return out;
  }

  // linspace(-beta, beta, n), 1-based as v[1..n]
  std::vector<double> v(n + 1);
  for (std::size_t i = 1; i <= n; ++i)
    v[i] = -beta + 2.0 * beta * static_cast<double>(i - 1) / static_cast<double>(n - 1);
  v[n] = beta;

  switch (ordering) {
  case BetaOrdering::descending_alternating:
    out.values.resize(n);
    for (std::size_t k = 1; k <= n; ++k)
      out.values[k - 1] = (k % 2 == 1) ? v[n - (k - 1) / 2] : v[k / 2];
    break;
  }
  if (beta == 0.0)
    std::fill(out.values.begin(), out.values.end(), 0.0);
  return out;
}

SelectionState::SelectionState(std::size_t n_total)
  : in_selected_(n_total, 0), min_dist_(n_total, kInf)
{
}

IndexList SelectionState::remaining() const
{
  IndexList out;
  out.reserve(remaining_count());
  for (std::size_t j = 0; j < total(); ++j)
    if (!in_selected_[j])
      out.push_back(j);
  return out;
}

double row_distance(const Matrix& X, std::size_t i, std::size_t j)
{
  const double* a = X.data() + static_cast<std::ptrdiff_t>(i) * X.cols();
  const double* b = X.data() + static_cast<std::ptrdiff_t>(j) * X.cols();
  double s = 0.0;
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    const double t = a[c] - b[c];
    s += t * t;
  }
  return std::sqrt(s);
}

void SelectionState::add(std::size_t new_index, const Matrix& X)
{
  if (new_index >= total())
    throw StateError("selection index " + std::to_string(new_index) + " is out of range");
  if (in_selected_[new_index])
    throw StateError("index " + std::to_string(new_index) + " is already selected");
  in_selected_[new_index] = 1;
  selected_.push_back(new_index);
  min_dist_[new_index] = 0.0;
  for (std::size_t j = 0; j < total(); ++j) {
    if (in_selected_[j])
      continue;
    const double dj = row_distance(X, j, new_index);
    if (dj < min_dist_[j])
      min_dist_[j] = dj;
  }
}

SelectionState min_dist_update(SelectionState state, std::size_t new_index, const Matrix& X)
{
  state.add(new_index, X);
  return state;
}

IndexList urs(std::size_t n_total, std::size_t n, std::uint64_t seed)
{
  if (n > n_total)
    throw CapacityError("cannot draw " + std::to_string(n) + " of " + std::to_string(n_total) +
                        " samples");
  IndexList perm(n_total);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i)
    std::swap(perm[i], perm[i + uniform_index(rng, n_total - i)]);
  perm.resize(n);
  return perm;
}

IndexList fps(const Matrix& X, std::size_t n, std::optional<std::size_t> init, std::uint64_t seed)
{
  const auto total = static_cast<std::size_t>(X.rows());
  if (n == 0)
    throw ConfigError("fps: n must be at least 1");
  if (n > total)
    throw CapacityError("cannot select " + std::to_string(n) + " of " + std::to_string(total) +
                        " samples");
  check_finite_rows(X);
  std::size_t first = 0;
  if (init) {
    if (*init >= total)
      throw ConfigError("fps: initial index out of range");
    first = *init;
  } else {
    Rng rng(seed);
    first = uniform_index(rng, total);
  }
  return greedy_select(X, n, first, {}, {});
}

SelectionResult ggfps(const LabeledSet& set, const SamplerConfig& config)
{
  config.validate();
  set.validate();
  const std::size_t total = set.size();
  if (config.n > total)
    throw CapacityError("cannot select " + std::to_string(config.n) + " of " +
                        std::to_string(total) + " samples");
  check_finite_rows(set.descriptors);

  SelectionResult result;
  result.config = config;

  const auto& g = set.gradient_norms;
  std::size_t first = 0;
  if (config.init_index) {
    if (*config.init_index >= total)
      throw ConfigError("sampler.init_index out of range");
    first = *config.init_index;
  } else {
    Rng rng(config.seed);
    InitMode mode = config.init_mode;
    if (mode == InitMode::gradient_weighted && !(g.sum() > 0.0)) {
      result.warnings.emplace_back(
        "all gradient norms are zero; initial point drawn uniformly instead of gradient-weighted");
      mode = InitMode::random_uniform;
    }
    switch (mode) {
    case InitMode::random_uniform:
      first = uniform_index(rng, total);
      break;
    case InitMode::gradient_argmax: {
      first = 0;
      for (std::size_t j = 1; j < total; ++j)
        if (g[static_cast<Eigen::Index>(j)] > g[static_cast<Eigen::Index>(first)])
          first = j;
      break;
    }
    case InitMode::gradient_weighted: {
      const double target = std::uniform_real_distribution<double>(0.0, g.sum())(rng);
      double acc = 0.0;
      first = kNone;
      std::size_t last_positive = 0;
      for (std::size_t j = 0; j < total; ++j) {
        if (g[static_cast<Eigen::Index>(j)] <= 0.0)
          continue;
        last_positive = j;
        acc += g[static_cast<Eigen::Index>(j)];
        if (target < acc) {
          first = j;
          break;
        }
      }
      if (first == kNone)
        first = last_positive;
      break;
    }
    }
  }

  const std::size_t length = config.schedule_length == 0 ? config.n : config.schedule_length;
  const auto schedule = beta_schedule(config.beta, length, config.beta_mode).values;

  const double gmax = total > 0 ? g.maxCoeff() : 0.0;
  const double floor = std::max(config.grad_floor_rel * gmax, DBL_MIN);
  std::vector<double> log_g(total);
  for (std::size_t j = 0; j < total; ++j)
    log_g[j] = std::log(std::max(g[static_cast<Eigen::Index>(j)], floor));

  result.indices = greedy_select(set.descriptors, config.n, first, log_g, schedule);
  return result;
}

SelectionResult select(const LabeledSet& set, const SamplerConfig& config)
{
  config.validate();
  switch (config.method) {
  case Method::urs: {
    SelectionResult r;
    r.config = config;
    r.indices = urs(set.size(), config.n, config.seed);
    return r;
  }
  case Method::fps: {
    SelectionResult r;
    r.config = config;
    r.indices = fps(set.descriptors, config.n, config.init_index, config.seed);
    return r;
  }
  case Method::ggfps:
    return ggfps(set, config);
  }
  throw ConfigError("unknown sampling method");
}

nlohmann::json to_json(const SelectionResult& result)
{
  const auto& c = result.config;
  nlohmann::json doc;
  doc["method"] = to_string(c.method);
  doc["seed"] = c.seed;
  doc["beta"] = c.beta;
  doc["beta_mode"] = to_string(c.beta_mode);
  doc["init_mode"] = to_string(c.init_mode);
  doc["indices"] = result.indices;
  doc["warnings"] = result.warnings;
  return doc;
}

SelectionResult selection_from_json(const nlohmann::json& doc)
{
  SelectionResult r;
  r.config.method = parse_method(doc.at("method").get<std::string>());
  r.config.seed = doc.at("seed").get<std::uint64_t>();
  r.config.beta = doc.at("beta").get<double>();
  r.config.beta_mode = parse_beta_mode(doc.at("beta_mode").get<std::string>());
  r.config.init_mode = parse_init_mode(doc.at("init_mode").get<std::string>());
  r.indices = doc.at("indices").get<IndexList>();
  r.warnings = doc.at("warnings").get<std::vector<std::string>>();
  r.config.n = r.indices.size();
  return r;
}

} // namespace ggfps
