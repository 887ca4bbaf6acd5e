#include "ggfps/experiments.hpp"

#include "ggfps/errors.hpp"
#include "ggfps/io.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <thread>

namespace ggfps {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Seed stream tags.
enum : std::uint64_t
{
  kTagLabeled = 1,
  kTagCv = 2,
  kTagFinal = 3,
  kTagFolds = 11,
  kTagFoldSampler = 12,
};

std::uint64_t method_tag(Method m)
{
  return static_cast<std::uint64_t>(m) + 100;
}

/// Rethrows a library error with the failing (method, sizes, replicate) prepended.
[[noreturn]] void rethrow_with_context(const Error& e, const std::string& context)
{
  const std::string what = context + ": " + e.what();
  switch (e.code()) {
  case ExitCode::io:
    throw IoError(what);
  case ExitCode::numerical:
    throw NumericalError(what);
  default:
    throw ConfigError(what);
  }
}

std::string replicate_context(Method m, std::size_t labeled, const std::string& train, std::size_t rep)
{
  return "replicate failure (method=" + std::string(to_string(m)) +
         ", labeled_size=" + std::to_string(labeled) + ", train_size=" + train +
         ", replicate=" + std::to_string(rep) + ")";
}

std::size_t fold_train_size(std::size_t n, std::size_t folds)
{
  const double scaled = static_cast<double>(n) * static_cast<double>(folds - 1) / static_cast<double>(folds);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(scaled)));
}

std::vector<double> sorted_copy(std::vector<double> v)
{
  std::sort(v.begin(), v.end());
  return v;
}

IndexList select_chain(const LabeledSet& set,
                       Method method,
                       std::size_t n,
                       double beta,
                       const ExperimentPlan& plan,
                       std::uint64_t seed)
{
  switch (method) {
  case Method::urs:
    return urs(set.size(), n, seed);
  case Method::fps:
    return fps(set.descriptors, n, std::nullopt, seed);
  case Method::ggfps: {
    SamplerConfig cfg;
    cfg.method = Method::ggfps;
    cfg.n = n;
    cfg.beta = beta;
    cfg.beta_mode = plan.beta_mode;
    cfg.init_mode = plan.ggfps_init;
    cfg.seed = seed;
    return ggfps(set, cfg).indices;
  }
  }
  throw ConfigError("unknown sampling method");
}

double fold_cost(const Vector& predicted, const Vector& truth, CvCost cost)
{
  const auto m = error_metrics(predicted, truth);
  const double v = cost == CvCost::rmse ? m.rmse : m.mae;
  return std::isfinite(v) ? v : kInf;
}

template <class T>
std::vector<T> json_list(const nlohmann::json& doc, const char* key, const std::string& path, std::vector<T> fallback)
{
  if (!doc.contains(key))
    return fallback;
  try {
    return doc.at(key).get<std::vector<T>>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(path + "." + key + " must be a list of numbers");
  }
}

template <class T>
T json_value(const nlohmann::json& doc, const char* key, const std::string& path, T fallback)
{
  if (!doc.contains(key))
    return fallback;
  try {
    return doc.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(path + "." + key + " has the wrong type");
  }
}

std::string json_cell(const std::vector<double>& values)
{
  return csv_cell(nlohmann::json(values).dump());
}

} // namespace

std::string_view to_string(CvCost c)
{
  return c == CvCost::rmse ? "RMSE" : "MAE";
}

CvCost parse_cv_cost(std::string_view s)
{
  if (s == "RMSE" || s == "rmse")
    return CvCost::rmse;
  if (s == "MAE" || s == "mae")
    return CvCost::mae;
  throw ConfigError("unknown cv cost '" + std::string(s) + "'");
}

std::vector<double> default_sigma_grid()
{
  std::vector<double> grid(13);
  for (std::size_t i = 0; i < grid.size(); ++i)
    grid[i] = std::pow(10.0, -1.0 + 0.5 * static_cast<double>(i));
  return grid;
}

std::vector<double> default_lambda_grid()
{
  return {1e-10, 1e-8, 1e-6, 1e-4};
}

std::vector<double> default_beta_grid()
{
  std::vector<double> grid(20);
  for (std::size_t i = 0; i < grid.size(); ++i)
    grid[i] = 2.0 * static_cast<double>(i) / 19.0;
  return grid;
}

std::vector<std::pair<std::size_t, std::size_t>> ExperimentPlan::size_pairs() const
{
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (auto n : train_sizes) {
    bool placed = false;
    for (auto l : labeled_sizes)
      if (n < l) {
        placed = true;
        break;
      }
    if (!placed)
      throw ConfigError("plan.train_sizes: " + std::to_string(n) +
                        " is not below any labeled size (no test remainder)");
  }
  for (auto l : labeled_sizes)
    for (auto n : train_sizes)
      if (n < l)
        out.emplace_back(l, n);
  return out;
}

void ExperimentPlan::validate() const
{
  if (labeled_sizes.empty() || train_sizes.empty())
    throw ConfigError("plan: labeled_sizes and train_sizes must be non-empty");
  if (std::find(train_sizes.begin(), train_sizes.end(), std::size_t{0}) != train_sizes.end())
    throw ConfigError("plan.train_sizes must be positive");
  if (bootstraps < 1)
    throw ConfigError("plan.bootstraps must be at least 1");
  if (folds < 2)
    throw ConfigError("plan.folds must be at least 2");
  if (sigma_grid.empty() || lambda_grid.empty() || beta_grid.empty())
    throw ConfigError("plan: sigma_grid, lambda_grid and beta_grid must be non-empty");
  for (double s : sigma_grid)
    if (!(s > 0.0) || !std::isfinite(s))
      throw ConfigError("plan.sigma_grid values must be positive");
  for (double l : lambda_grid)
    if (!(l > 0.0) || !std::isfinite(l))
      throw ConfigError("plan.lambda_grid values must be positive");
  for (double b : beta_grid)
    if (!(b >= 0.0) || !std::isfinite(b))
      throw ConfigError("plan.beta_grid values must be nonnegative");
  if (methods.empty())
    throw ConfigError("plan.methods must be non-empty");
  size_pairs();
}

nlohmann::json to_json(const ExperimentPlan& plan)
{
  nlohmann::json doc;
  doc["labeled_sizes"] = plan.labeled_sizes;
  doc["train_sizes"] = plan.train_sizes;
  doc["bootstraps"] = plan.bootstraps;
  doc["sigma_grid"] = plan.sigma_grid;
  doc["lambda_grid"] = plan.lambda_grid;
  doc["beta_grid"] = plan.beta_grid;
  doc["folds"] = plan.folds;
  doc["cv_cost"] = to_string(plan.cv_cost);
  auto methods = nlohmann::json::array();
  for (auto m : plan.methods)
    methods.push_back(to_string(m));
  doc["methods"] = methods;
  doc["master_seed"] = plan.master_seed;
  doc["kernel"] = to_string(plan.kernel);
  doc["beta_mode"] = to_string(plan.beta_mode);
  doc["ggfps_init"] = to_string(plan.ggfps_init);
  doc["memory_budget_bytes"] = plan.memory_budget_bytes;
  return doc;
}

ExperimentPlan plan_from_json(const nlohmann::json& doc, const std::string& path)
{
  if (!doc.is_object())
    throw ConfigError(path + " must be an object");
  ExperimentPlan plan;
  plan.labeled_sizes = json_list(doc, "labeled_sizes", path, plan.labeled_sizes);
  plan.train_sizes = json_list(doc, "train_sizes", path, plan.train_sizes);
  plan.bootstraps = json_value(doc, "bootstraps", path, plan.bootstraps);
  plan.sigma_grid = json_list(doc, "sigma_grid", path, plan.sigma_grid);
  plan.lambda_grid = json_list(doc, "lambda_grid", path, plan.lambda_grid);
  plan.beta_grid = json_list(doc, "beta_grid", path, plan.beta_grid);
  plan.folds = json_value(doc, "folds", path, plan.folds);
  plan.master_seed = json_value(doc, "master_seed", path, plan.master_seed);
  plan.memory_budget_bytes = json_value(doc, "memory_budget_bytes", path, plan.memory_budget_bytes);
  try {
    if (doc.contains("cv_cost"))
      plan.cv_cost = parse_cv_cost(doc.at("cv_cost").get<std::string>());
    if (doc.contains("methods")) {
      plan.methods.clear();
      for (const auto& m : doc.at("methods"))
        plan.methods.push_back(parse_method(m.get<std::string>()));
    }
    if (doc.contains("kernel"))
      plan.kernel = parse_kernel_kind(doc.at("kernel").get<std::string>());
    if (doc.contains("beta_mode"))
      plan.beta_mode = parse_beta_mode(doc.at("beta_mode").get<std::string>());
    if (doc.contains("ggfps_init"))
      plan.ggfps_init = parse_init_mode(doc.at("ggfps_init").get<std::string>());
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(path + ": method, kernel and mode fields must be strings");
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return plan;
}

std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t folds, std::uint64_t seed)
{
  const auto perm = urs(n, n, seed);
  std::vector<std::size_t> fold_of(n);
  for (std::size_t p = 0; p < n; ++p)
    fold_of[perm[p]] = p % folds;
  return fold_of;
}

std::vector<CvChoice> cross_validate_sizes(const LabeledSet& pool,
                                           std::span<const std::size_t> train_sizes,
                                           const ExperimentPlan& plan,
                                           Method method,
                                           std::uint64_t seed,
                                           GramSource* gram,
                                           const std::vector<std::size_t>* fold_of)
{
  const std::size_t k = plan.folds;
  const std::size_t total = pool.size();
  if (k < 2)
    throw ConfigError("cross-validation needs at least 2 folds");
  if (train_sizes.empty())
    return {};
  if (total < k)
    throw ConfigError("cross-validation: " + std::to_string(total) + " rows cannot fill " +
                      std::to_string(k) + " folds");

  std::vector<std::size_t> labels = fold_of ? *fold_of : fold_assignment(total, k, derive_seed(seed, {kTagFolds}));
  if (labels.size() != total)
    throw ConfigError("cross-validation: fold assignment has the wrong length");

  std::vector<IndexList> fold_train(k), fold_val(k);
  for (std::size_t i = 0; i < total; ++i) {
    if (labels[i] >= k)
      throw ConfigError("cross-validation: fold id out of range");
    for (std::size_t f = 0; f < k; ++f)
      (labels[i] == f ? fold_val[f] : fold_train[f]).push_back(i);
  }
  for (std::size_t f = 0; f < k; ++f)
    if (fold_train[f].empty() || fold_val[f].empty())
      throw ConfigError("cross-validation: fold " + std::to_string(f) +
                        " has an empty training or validation part");

  const std::size_t n_sizes = train_sizes.size();
  std::vector<std::size_t> inner(n_sizes);
  std::size_t inner_max = 0;
  for (std::size_t s = 0; s < n_sizes; ++s) {
    if (train_sizes[s] == 0)
      throw ConfigError("cross-validation: train size must be positive");
    inner[s] = fold_train_size(train_sizes[s], k);
    inner_max = std::max(inner_max, inner[s]);
  }
  for (std::size_t f = 0; f < k; ++f)
    if (inner_max > fold_train[f].size())
      throw CapacityError("cross-validation: fold " + std::to_string(f) + " holds " +
                          std::to_string(fold_train[f].size()) + " training rows, " +
                          std::to_string(inner_max) + " needed");

  const auto sigmas = sorted_copy(plan.sigma_grid);
  const auto lambdas = sorted_copy(plan.lambda_grid);
  const auto betas = method == Method::ggfps ? sorted_copy(plan.beta_grid) : std::vector<double>{0.0};
  if (sigmas.empty() || lambdas.empty() || betas.empty())
    throw ConfigError("cross-validation: grids must be non-empty");

  std::optional<GramSource> own_gram;
  if (!gram) {
    own_gram.emplace(pool, plan.kernel, plan.memory_budget_bytes);
    gram = &*own_gram;
  }

  const std::size_t nS = sigmas.size(), nL = lambdas.size(), nB = betas.size();
  auto at = [&](std::size_t s, std::size_t si, std::size_t li, std::size_t bi, std::size_t f) {
    return (((s * nS + si) * nL + li) * nB + bi) * k + f;
  };
  std::vector<double> costs(n_sizes * nS * nL * nB * k, kInf);

  for (std::size_t f = 0; f < k; ++f) {
    const LabeledSet sub = pool.subset(fold_train[f]);
    const auto& val = fold_val[f];
    Vector y_val(static_cast<Eigen::Index>(val.size()));
    for (std::size_t v = 0; v < val.size(); ++v)
      y_val[static_cast<Eigen::Index>(v)] = pool.labels[static_cast<Eigen::Index>(val[v])];
    const auto sampler_seed = derive_seed(seed, {kTagFoldSampler, f});

    for (std::size_t bi = 0; bi < nB; ++bi) {
      const auto local = select_chain(sub, method, inner_max, betas[bi], plan, sampler_seed);
      IndexList chain(local.size());
      Vector y_chain(static_cast<Eigen::Index>(local.size()));
      for (std::size_t i = 0; i < local.size(); ++i) {
        chain[i] = fold_train[f][local[i]];
        y_chain[static_cast<Eigen::Index>(i)] = pool.labels[static_cast<Eigen::Index>(chain[i])];
      }

      for (std::size_t si = 0; si < nS; ++si) {
        const Eigen::MatrixXd k_chain = gram->block(chain, chain, sigmas[si]);
        const Eigen::MatrixXd k_val = gram->block(chain, val, sigmas[si]);
        for (std::size_t li = 0; li < nL; ++li) {
          const PrefixCholesky chol(k_chain, lambdas[li]);
          for (std::size_t s = 0; s < n_sizes; ++s) {
            const std::size_t m = inner[s];
            if (m > chol.valid_size())
              continue;
            const auto mi = static_cast<Eigen::Index>(m);
            const Vector alpha = chol.solve_prefix(m, y_chain.head(mi));
            const Vector pred = k_val.topRows(mi).transpose() * alpha;
            costs[at(s, si, li, bi, f)] = fold_cost(pred, y_val, plan.cv_cost);
          }
        }
      }
    }
  }

  std::vector<CvChoice> out(n_sizes);
  std::vector<double> fold_costs(k);
  for (std::size_t s = 0; s < n_sizes; ++s) {
    CvChoice best;
    best.cost = kInf;
    bool found = false;
    for (std::size_t si = 0; si < nS; ++si)
      for (std::size_t li = 0; li < nL; ++li)
        for (std::size_t bi = 0; bi < nB; ++bi) {
          for (std::size_t f = 0; f < k; ++f)
            fold_costs[f] = costs[at(s, si, li, bi, f)];
          // Sorted summation keeps the mean independent of fold order.
          std::sort(fold_costs.begin(), fold_costs.end());
          double sum = 0.0;
          for (double c : fold_costs)
            sum += c;
          const double mean = sum / static_cast<double>(k);
          if (std::isfinite(mean) && (!found || mean < best.cost)) {
            best = {sigmas[si], lambdas[li], betas[bi], mean};
            found = true;
          }
        }
    if (!found)
      throw NumericalError("cross-validation: every grid candidate failed for train size " +
                           std::to_string(train_sizes[s]));
    out[s] = best;
  }
  return out;
}

CvChoice cross_validate(const LabeledSet& pool,
                        std::size_t train_size,
                        const ExperimentPlan& plan,
                        Method method,
                        std::uint64_t seed)
{
  const std::size_t sizes[] = {train_size};
  return cross_validate_sizes(pool, sizes, plan, method, seed).front();
}

ErrorMetrics error_metrics(const Vector& predicted, const Vector& truth)
{
  if (predicted.size() != truth.size() || truth.size() == 0)
    throw ConfigError("error metrics: prediction and truth sizes differ or are empty");
  const Vector err = (predicted - truth).cwiseAbs();
  const double n = static_cast<double>(err.size());
  return {err.sum() / n, std::sqrt(err.squaredNorm() / n)};
}

std::pair<double, double> mean_and_variance(std::span<const double> values)
{
  if (values.empty())
    return {0.0, 0.0};
  double sum = 0.0;
  for (double v : values)
    sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values)
    ss += (v - mean) * (v - mean);
  return {mean, ss / static_cast<double>(values.size())};
}

LearningCurveResult learning_curve(const LabeledSet& data, const ExperimentPlan& plan, unsigned threads)
{
  plan.validate();
  data.validate();
  const auto pairs = plan.size_pairs();

  std::vector<std::size_t> labeled_sizes;
  for (auto l : plan.labeled_sizes)
    if (std::find(labeled_sizes.begin(), labeled_sizes.end(), l) == labeled_sizes.end())
      labeled_sizes.push_back(l);
  for (auto l : labeled_sizes)
    if (l > data.size())
      throw CapacityError("plan.labeled_sizes: " + std::to_string(l) + " exceeds the " +
                          std::to_string(data.size()) + " available samples");

  struct Task
  {
    std::size_t labeled_size;
    std::size_t replicate;
  };
  std::vector<Task> tasks;
  for (auto l : labeled_sizes) {
    bool used = false;
    for (const auto& p : pairs)
      used = used || p.first == l;
    if (!used)
      continue;
    for (std::size_t r = 0; r < plan.bootstraps; ++r)
      tasks.push_back({l, r});
  }

  auto run_task = [&](const Task& task) {
    const std::size_t L = task.labeled_size;
    const std::size_t r = task.replicate;
    std::vector<ReplicateRecord> out;

    std::vector<std::size_t> sizes;
    for (auto n : plan.train_sizes)
      if (n < L && std::find(sizes.begin(), sizes.end(), n) == sizes.end())
        sizes.push_back(n);

    const IndexList rows = urs(data.size(), L, derive_seed(plan.master_seed, {kTagLabeled, L, r}));
    const LabeledSet labeled = data.subset(rows);
    GramSource gram(labeled, plan.kernel, plan.memory_budget_bytes);
    const auto cv_seed = derive_seed(plan.master_seed, {kTagCv, L, r});

    for (auto method : plan.methods) {
      std::vector<CvChoice> choices;
      try {
        choices = cross_validate_sizes(labeled, sizes, plan, method, cv_seed, &gram);
      } catch (const Error& e) {
        std::string list;
        for (auto n : sizes)
          list += (list.empty() ? "" : "/") + std::to_string(n);
        rethrow_with_context(e, replicate_context(method, L, list, r));
      }

      const auto final_seed = derive_seed(plan.master_seed, {kTagFinal, method_tag(method), L, r});
      // Every chain is as long as the largest train size, matching the chains scored in CV.
      const std::size_t chain_len = *std::max_element(sizes.begin(), sizes.end());
      std::map<double, IndexList> chains;

      for (std::size_t s = 0; s < sizes.size(); ++s) {
        const std::size_t n = sizes[s];
        const auto& choice = choices[s];
        try {
          auto it = chains.find(choice.beta);
          if (it == chains.end())
            it = chains.emplace(choice.beta, select_chain(labeled, method, chain_len,
                                                          choice.beta, plan, final_seed))
                   .first;
          const IndexList train(it->second.begin(), it->second.begin() + static_cast<std::ptrdiff_t>(n));
          std::vector<char> used(L, 0);
          for (auto i : train)
            used[i] = 1;
          IndexList test;
          for (std::size_t i = 0; i < L; ++i)
            if (!used[i])
              test.push_back(i);

          Vector y_train(static_cast<Eigen::Index>(n));
          for (std::size_t i = 0; i < n; ++i)
            y_train[static_cast<Eigen::Index>(i)] = labeled.labels[static_cast<Eigen::Index>(train[i])];
          Vector y_test(static_cast<Eigen::Index>(test.size()));
          for (std::size_t i = 0; i < test.size(); ++i)
            y_test[static_cast<Eigen::Index>(i)] = labeled.labels[static_cast<Eigen::Index>(test[i])];

          const PrefixCholesky chol(gram.block(train, train, choice.sigma), choice.lambda);
          if (!chol.complete())
            throw FactorizationError(static_cast<std::ptrdiff_t>(chol.valid_size()));
          const Vector alpha = chol.solve_prefix(n, y_train);
          const Vector pred = gram.block(train, test, choice.sigma).transpose() * alpha;

          ReplicateRecord rec;
          rec.method = method;
          rec.labeled_size = L;
          rec.train_size = n;
          rec.replicate = r;
          rec.choice = choice;
          rec.metrics = error_metrics(pred, y_test);
          if (!std::isfinite(rec.metrics.mae) || !std::isfinite(rec.metrics.rmse))
            throw NumericalError("test error is not finite");
          rec.train_rows.reserve(n);
          for (auto i : train)
            rec.train_rows.push_back(rows[i]);
          rec.test_errors.reserve(test.size());
          for (std::size_t i = 0; i < test.size(); ++i)
            rec.test_errors.emplace_back(labeled.gradient_norms[static_cast<Eigen::Index>(test[i])],
                                         std::abs(pred[static_cast<Eigen::Index>(i)] - y_test[static_cast<Eigen::Index>(i)]));
          out.push_back(std::move(rec));
        } catch (const Error& e) {
          rethrow_with_context(e, replicate_context(method, L, std::to_string(n), r));
        }
      }
    }
    return out;
  };

  std::vector<std::vector<ReplicateRecord>> results(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  unsigned workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(1, tasks.size())));

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks.size(); t = next++) {
      try {
        results[t] = run_task(tasks[t]);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e)
      std::rethrow_exception(e);

  // Group by (method, labeled size, train size) in plan order.
  LearningCurveResult result;
  for (auto method : plan.methods) {
    for (const auto& [L, n] : pairs) {
      CurvePoint point;
      point.method = method;
      point.labeled_size = L;
      point.train_size = n;
      std::vector<double> maes, rmses;
      for (std::size_t t = 0; t < tasks.size(); ++t) {
        if (tasks[t].labeled_size != L)
          continue;
        for (const auto& rec : results[t]) {
          if (rec.method != method || rec.train_size != n)
            continue;
          maes.push_back(rec.metrics.mae);
          rmses.push_back(rec.metrics.rmse);
          point.chosen_beta.push_back(rec.choice.beta);
          point.chosen_sigma.push_back(rec.choice.sigma);
          point.chosen_lambda.push_back(rec.choice.lambda);
          result.records.push_back(rec);
        }
      }
      std::tie(point.mae_mean, point.mae_var) = mean_and_variance(maes);
      std::tie(point.rmse_mean, point.rmse_var) = mean_and_variance(rmses);
      result.points.push_back(std::move(point));
    }
  }
  return result;
}

std::vector<ForceNormBin> bin_errors_by_force_norm(std::vector<std::pair<double, double>> test_errors,
                                                   std::size_t bin_capacity)
{
  if (test_errors.empty())
    throw ConfigError("force-norm binning: no test errors");
  if (bin_capacity == 0)
    throw ConfigError("force-norm binning: bin capacity must be positive");
  std::stable_sort(test_errors.begin(), test_errors.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<ForceNormBin> bins;
  std::vector<double> errs;
  for (std::size_t start = 0; start < test_errors.size(); start += bin_capacity) {
    const std::size_t stop = std::min(start + bin_capacity, test_errors.size());
    errs.clear();
    for (std::size_t i = start; i < stop; ++i)
      errs.push_back(test_errors[i].second);
    ForceNormBin bin;
    bin.bin_lo = test_errors[start].first;
    bin.bin_hi = test_errors[stop - 1].first;
    bin.count = stop - start;
    std::tie(bin.abs_err_mean, bin.abs_err_var) = mean_and_variance(errs);
    bins.push_back(bin);
  }
  return bins;
}

double silverman_bandwidth(std::span<const double> samples)
{
  const std::size_t n = samples.size();
  if (n < 2)
    throw NumericalError("kde: at least two samples are needed");
  auto [mean, var_pop] = mean_and_variance(samples);
  (void)mean;
  const double sd = std::sqrt(var_pop * static_cast<double>(n) / static_cast<double>(n - 1));

  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, n - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  if (!(spread > 0.0))
    throw NumericalError("kde: samples have zero spread (degenerate distribution)");
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

std::vector<double> kde_1d(std::span<const double> samples, std::span<const double> eval_grid)
{
  const double h = silverman_bandwidth(samples);
  const double norm = 1.0 / (static_cast<double>(samples.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  std::vector<double> density(eval_grid.size());
  for (std::size_t g = 0; g < eval_grid.size(); ++g) {
    double sum = 0.0;
    for (double s : samples) {
      const double u = (eval_grid[g] - s) / h;
      sum += std::exp(-0.5 * u * u);
    }
    density[g] = sum * norm;
  }
  return density;
}

Eigen::MatrixXi selection_heatmap_2d(std::span<const IndexList> selections,
                                     const LabeledSet& labeled,
                                     const HeatmapGrid& grid)
{
  if (labeled.dim() != 2)
    throw ConfigError("selection heatmap: descriptors must be two-dimensional");
  if (grid.cells == 0 || !(grid.x_lo < grid.x_hi) || !(grid.y_lo < grid.y_hi))
    throw ConfigError("selection heatmap: invalid grid");

  const auto cells = static_cast<Eigen::Index>(grid.cells);
  auto cell_of = [&](double v, double lo, double hi) {
    if (v < lo || v > hi)
      throw ConfigError("selection heatmap: point outside the grid");
    const double w = (hi - lo) / static_cast<double>(grid.cells);
    auto c = static_cast<Eigen::Index>(std::ceil((v - lo) / w)) - 1;
    return std::clamp<Eigen::Index>(c, 0, cells - 1);
  };

  Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(cells, cells);
  for (const auto& sel : selections)
    for (auto i : sel) {
      if (i >= labeled.size())
        throw ConfigError("selection heatmap: index out of range");
      const auto r = static_cast<Eigen::Index>(i);
      ++counts(cell_of(labeled.descriptors(r, 0), grid.x_lo, grid.x_hi),
               cell_of(labeled.descriptors(r, 1), grid.y_lo, grid.y_hi));
    }
  return counts;
}

void write_curves_csv(std::ostream& out, const LearningCurveResult& result)
{
  out << "method,labeled_size,train_size,bootstraps,mae_mean,mae_var,rmse_mean,rmse_var,"
         "chosen_beta,chosen_sigma,chosen_lambda\n";
  for (const auto& p : result.points) {
    out << to_string(p.method) << ',' << p.labeled_size << ',' << p.train_size << ','
        << p.chosen_beta.size() << ',' << format_double(p.mae_mean) << ',' << format_double(p.mae_var)
        << ',' << format_double(p.rmse_mean) << ',' << format_double(p.rmse_var) << ','
        << json_cell(p.chosen_beta) << ',' << json_cell(p.chosen_sigma) << ','
        << json_cell(p.chosen_lambda) << '\n';
  }
}

void write_bins_csv(std::ostream& out, const LearningCurveResult& result, std::size_t bin_capacity)
{
  out << "method,labeled_size,train_size,bin,bin_lo,bin_hi,count,abs_err_mean,abs_err_var\n";
  for (const auto& p : result.points) {
    std::vector<std::pair<double, double>> errors;
    for (const auto& rec : result.records)
      if (rec.method == p.method && rec.labeled_size == p.labeled_size && rec.train_size == p.train_size)
        errors.insert(errors.end(), rec.test_errors.begin(), rec.test_errors.end());
    if (errors.empty())
      continue;
    const auto bins = bin_errors_by_force_norm(std::move(errors), bin_capacity);
    for (std::size_t b = 0; b < bins.size(); ++b)
      out << to_string(p.method) << ',' << p.labeled_size << ',' << p.train_size << ',' << b << ','
          << format_double(bins[b].bin_lo) << ',' << format_double(bins[b].bin_hi) << ','
          << bins[b].count << ',' << format_double(bins[b].abs_err_mean) << ','
          << format_double(bins[b].abs_err_var) << '\n';
  }
}

void write_kde_csv(std::ostream& out, const LabeledSet& data, const LearningCurveResult& result,
                   std::size_t points)
{
  out << "quantity,source,labeled_size,train_size,x,density\n";
  if (points < 2)
    throw ConfigError("kde export: at least two grid points are needed");

  for (int q = 0; q < 2; ++q) {
    const char* quantity = q == 0 ? "grad_norm" : "label";
    const Vector& column = q == 0 ? data.gradient_norms : data.labels;
    const std::vector<double> all(column.begin(), column.end());
    double h = 0.0;
    try {
      h = silverman_bandwidth(all);
    } catch (const NumericalError&) {
      continue;
    }
    const auto [lo_it, hi_it] = std::minmax_element(all.begin(), all.end());
    const double lo = *lo_it - 3.0 * h, hi = *hi_it + 3.0 * h;
    std::vector<double> grid(points);
    for (std::size_t g = 0; g < points; ++g)
      grid[g] = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(points - 1);

    auto emit = [&](const std::string& source, std::size_t L, std::size_t n, const std::vector<double>& values) {
      std::vector<double> dens;
      try {
        dens = kde_1d(values, grid);
      } catch (const NumericalError&) {
        return;
      }
      for (std::size_t g = 0; g < points; ++g)
        out << quantity << ',' << source << ',' << L << ',' << n << ',' << format_double(grid[g]) << ','
            << format_double(dens[g]) << '\n';
    };

    emit("data", data.size(), 0, all);
    for (const auto& p : result.points) {
      std::vector<double> values;
      for (const auto& rec : result.records)
        if (rec.method == p.method && rec.labeled_size == p.labeled_size && rec.train_size == p.train_size)
          for (auto row : rec.train_rows)
            values.push_back(column[static_cast<Eigen::Index>(row)]);
      emit(std::string(to_string(p.method)), p.labeled_size, p.train_size, values);
    }
  }
}

void write_heatmap_csv(std::ostream& out, const LabeledSet& data, const LearningCurveResult& result,
                       std::size_t cells)
{
  if (data.dim() != 2)
    throw ConfigError("heatmap export requires two-dimensional descriptors");
  HeatmapGrid grid;
  grid.cells = cells;
  grid.x_lo = data.descriptors.col(0).minCoeff();
  grid.x_hi = data.descriptors.col(0).maxCoeff();
  grid.y_lo = data.descriptors.col(1).minCoeff();
  grid.y_hi = data.descriptors.col(1).maxCoeff();
  if (!(grid.x_lo < grid.x_hi))
    grid.x_hi = grid.x_lo + 1.0;
  if (!(grid.y_lo < grid.y_hi))
    grid.y_hi = grid.y_lo + 1.0;
  const double wx = (grid.x_hi - grid.x_lo) / static_cast<double>(cells);
  const double wy = (grid.y_hi - grid.y_lo) / static_cast<double>(cells);

  out << "method,labeled_size,train_size,ix,iy,x_lo,x_hi,y_lo,y_hi,count\n";
  for (const auto& p : result.points) {
    std::vector<IndexList> selections;
    for (const auto& rec : result.records)
      if (rec.method == p.method && rec.labeled_size == p.labeled_size && rec.train_size == p.train_size)
        selections.push_back(rec.train_rows);
    const auto counts = selection_heatmap_2d(selections, data, grid);
    for (std::size_t ix = 0; ix < cells; ++ix)
      for (std::size_t iy = 0; iy < cells; ++iy)
        out << to_string(p.method) << ',' << p.labeled_size << ',' << p.train_size << ',' << ix << ','
            << iy << ',' << format_double(grid.x_lo + wx * static_cast<double>(ix)) << ','
            << format_double(grid.x_lo + wx * static_cast<double>(ix + 1)) << ','
            << format_double(grid.y_lo + wy * static_cast<double>(iy)) << ','
            << format_double(grid.y_lo + wy * static_cast<double>(iy + 1)) << ','
            << counts(static_cast<Eigen::Index>(ix), static_cast<Eigen::Index>(iy)) << '\n';
  }
}

} // namespace ggfps
