#pragma once

#include "ggfps/common.hpp"
#include "ggfps/dataset.hpp"
#include "ggfps/krr.hpp"
#include "ggfps/sampling.hpp"

#include <json.hpp>

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ggfps {

enum class CvCost
{
  rmse,
  mae,
};

std::string_view to_string(CvCost c);
CvCost parse_cv_cost(std::string_view s);

/// 13 log-spaced values over [1e-1, 1e5].
std::vector<double> default_sigma_grid();
std::vector<double> default_lambda_grid();
/// 20 linearly spaced values over [0, 2].
std::vector<double> default_beta_grid();

struct ExperimentPlan
{
  std::vector<std::size_t> labeled_sizes = {50, 100, 250, 500, 1000};
  std::vector<std::size_t> train_sizes = {50, 100, 250, 500};
  std::size_t bootstraps = 20;
  std::vector<double> sigma_grid = default_sigma_grid();
  std::vector<double> lambda_grid = default_lambda_grid();
  std::vector<double> beta_grid = default_beta_grid();
  std::size_t folds = 5;
  CvCost cv_cost = CvCost::rmse;
  std::vector<Method> methods = {Method::urs, Method::fps, Method::ggfps};
  std::uint64_t master_seed = 0;

  KernelKind kernel = KernelKind::gaussian;
  BetaMode beta_mode = BetaMode::swept;
  InitMode ggfps_init = InitMode::gradient_weighted;
  std::size_t memory_budget_bytes = GramSource::kDefaultBudget;

  /// (labeled_size, train_size) pairs that are run: every train size strictly
  /// below a labeled size. Throws ConfigError if a train size fits nowhere.
  std::vector<std::pair<std::size_t, std::size_t>> size_pairs() const;

  void validate() const;
};

nlohmann::json to_json(const ExperimentPlan& plan);
/// Missing keys keep their defaults; `path` prefixes field names in errors.
ExperimentPlan plan_from_json(const nlohmann::json& doc, const std::string& path = "plan");

/// One selected hyperparameter combination and its mean fold cost.
struct CvChoice
{
  double sigma = 0.0;
  double lambda = 0.0;
  double beta = 0.0;
  double cost = 0.0;
};

/// Grid-search cross-validation of the whole "select then fit" pipeline.
///
/// The pool is split into `plan.folds` folds. For every fold the sampler picks
/// round(n * (folds-1)/folds) points from the other folds (for GGFPS once per
/// beta candidate), a model is fit for each (sigma, lambda) and scored on the
/// held-out fold. The
/// candidate with the lowest mean fold cost wins; ties go to the smaller sigma,
/// then lambda, then beta. One chain as long as the largest train size is
/// selected per (fold, beta), and every `train_sizes` entry is scored on a
/// prefix of it with one factorization.
///
/// `fold_of`, when given, assigns each pool row a fold id in [0, folds) and
/// replaces the seeded partition.
std::vector<CvChoice> cross_validate_sizes(const LabeledSet& pool,
                                           std::span<const std::size_t> train_sizes,
                                           const ExperimentPlan& plan,
                                           Method method,
                                           std::uint64_t seed,
                                           GramSource* gram = nullptr,
                                           const std::vector<std::size_t>* fold_of = nullptr);

CvChoice cross_validate(const LabeledSet& pool,
                        std::size_t train_size,
                        const ExperimentPlan& plan,
                        Method method,
                        std::uint64_t seed);

/// Seeded fold labels: a random permutation of the rows dealt round-robin.
std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t folds, std::uint64_t seed);

struct ErrorMetrics
{
  double mae = 0.0;
  double rmse = 0.0;
};

ErrorMetrics error_metrics(const Vector& predicted, const Vector& truth);

/// Population mean and variance (divides by the count), two passes.
std::pair<double, double> mean_and_variance(std::span<const double> values);

/// Everything recorded for one (method, labeled size, train size, replicate).
struct ReplicateRecord
{
  Method method = Method::urs;
  std::size_t labeled_size = 0;
  std::size_t train_size = 0;
  std::size_t replicate = 0;
  CvChoice choice;
  ErrorMetrics metrics;
  IndexList train_rows;  // rows of the input set, in selection order
  std::vector<std::pair<double, double>> test_errors;  // (gradient norm, |error|)
};

struct CurvePoint
{
  Method method = Method::urs;
  std::size_t labeled_size = 0;
  std::size_t train_size = 0;
  double mae_mean = 0.0;
  double mae_var = 0.0;
  double rmse_mean = 0.0;
  double rmse_var = 0.0;
  std::vector<double> chosen_beta;
  std::vector<double> chosen_sigma;
  std::vector<double> chosen_lambda;
};

struct LearningCurveResult
{
  std::vector<CurvePoint> points;
  /// Grouped like `points`, replicates in order.
  std::vector<ReplicateRecord> records;
};

/// Bootstrapped learning curves. For each (labeled size, replicate) a labeled
/// set is drawn uniformly from `data` (identical for every method); each method
/// picks its training sets from it, hyperparameters come from
/// cross_validate_sizes, and the rest of the labeled set is the test set.
/// FPS and GGFPS training sets at different sizes are prefixes of one chain
/// per chosen beta, as long as the largest train size. `threads` = 0 uses the hardware concurrency.
LearningCurveResult learning_curve(const LabeledSet& data, const ExperimentPlan& plan, unsigned threads = 1);

struct ForceNormBin
{
  double bin_lo = 0.0;
  double bin_hi = 0.0;
  std::size_t count = 0;
  double abs_err_mean = 0.0;
  double abs_err_var = 0.0;
};

/// Sorts by force norm and fills consecutive bins of `bin_capacity` items.
std::vector<ForceNormBin> bin_errors_by_force_norm(std::vector<std::pair<double, double>> test_errors,
                                                   std::size_t bin_capacity = 30);

/// 0.9 * min(std, IQR / 1.34) * n^(-1/5); falls back to std when the IQR is zero.
double silverman_bandwidth(std::span<const double> samples);

/// Gaussian KDE with the Silverman bandwidth evaluated on `eval_grid`.
std::vector<double> kde_1d(std::span<const double> samples, std::span<const double> eval_grid);

struct HeatmapGrid
{
  std::size_t cells = 20;
  double x_lo = -4.0, x_hi = 4.0;
  double y_lo = -4.0, y_hi = 4.0;
};

/// Counts of selected rows per cell (rows index x cells, columns y cells).
/// Cells are (lo, hi] with the grid's lower edge folded into the first cell,
/// so a point on an interior boundary lands in the lower-index cell.
Eigen::MatrixXi selection_heatmap_2d(std::span<const IndexList> selections,
                                     const LabeledSet& labeled,
                                     const HeatmapGrid& grid);

// ---------------------------------------------------------------------------
// Plot-ready outputs

void write_curves_csv(std::ostream& out, const LearningCurveResult& result);
void write_bins_csv(std::ostream& out, const LearningCurveResult& result, std::size_t bin_capacity = 30);
/// KDEs of gradient norms and labels for the full data and for every
/// (method, labeled size, train size) training pool over replicates.
void write_kde_csv(std::ostream& out, const LabeledSet& data, const LearningCurveResult& result,
                   std::size_t points = 200);
/// Requires 2D descriptors; the grid spans the data bounding box.
void write_heatmap_csv(std::ostream& out, const LabeledSet& data, const LearningCurveResult& result,
                       std::size_t cells = 20);

} // namespace ggfps
