#pragma once

#include "ggfps/common.hpp"
#include "ggfps/dataset.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ggfps {

enum class Method
{
  urs,
  fps,
  ggfps,
};

enum class BetaMode
{
  swept,
  constant,
};

enum class InitMode
{
  random_uniform,
  gradient_weighted,
  gradient_argmax,
};

/// Ordering rule that turns the linearly spaced exponents over [-beta, beta]
/// into the per-iteration sequence. Only one rule exists today.
enum class BetaOrdering
{
  /// Descending magnitude, signs alternating +, -, +, ... starting positive.
  descending_alternating,
};

std::string_view to_string(Method m);
std::string_view to_string(BetaMode m);
std::string_view to_string(InitMode m);
Method parse_method(std::string_view s);
BetaMode parse_beta_mode(std::string_view s);
InitMode parse_init_mode(std::string_view s);

struct SamplerConfig
{
  Method method = Method::ggfps;
  std::size_t n = 1;
  double beta = 0.0;
  BetaMode beta_mode = BetaMode::swept;
  InitMode init_mode = InitMode::gradient_weighted;
  std::uint64_t seed = 0;
  double grad_floor_rel = 1e-12;

  /// Fixed first index; overrides init_mode when set.
  std::optional<std::size_t> init_index;

  /// Length of the swept exponent sequence. 0 means `n`. Selections with a
  /// common schedule length are prefixes of each other.
  std::size_t schedule_length = 0;

  void validate() const;
};

struct BetaSchedule
{
  std::vector<double> values;
};

BetaSchedule beta_schedule(double beta,
                           std::size_t n,
                           BetaMode mode,
                           BetaOrdering ordering = BetaOrdering::descending_alternating);

/// Selected indices in selection order plus, for every index, the distance to
/// the closest selected descriptor row (+inf before the first selection).
class SelectionState
{
public:
  explicit SelectionState(std::size_t n_total);

  const IndexList& selected() const { return selected_; }
  const std::vector<double>& min_dist() const { return min_dist_; }
  bool is_selected(std::size_t i) const { return in_selected_[i]; }
  std::size_t total() const { return min_dist_.size(); }
  std::size_t remaining_count() const { return total() - selected_.size(); }
  IndexList remaining() const;

  /// Moves `new_index` to the selected list and lowers min_dist of every
  /// remaining row to its distance from `new_index` where that is smaller.
  /// Throws StateError if the index is already selected.
  void add(std::size_t new_index, const Matrix& X);

private:
  IndexList selected_;
  std::vector<char> in_selected_;
  std::vector<double> min_dist_;
};

SelectionState min_dist_update(SelectionState state, std::size_t new_index, const Matrix& X);

/// Euclidean distance between rows `i` and `j`.
double row_distance(const Matrix& X, std::size_t i, std::size_t j);

/// n distinct indices drawn without replacement (partial Fisher-Yates, so a
/// smaller n gives a prefix of a larger one).
IndexList urs(std::size_t n_total, std::size_t n, std::uint64_t seed);

/// Furthest point sampling. Starts at `init` when given, else at a uniform
/// draw from `seed`. Ties go to the smallest index.
IndexList fps(const Matrix& X, std::size_t n, std::optional<std::size_t> init, std::uint64_t seed = 0);

struct SelectionResult
{
  SamplerConfig config;
  IndexList indices;
  std::vector<std::string> warnings;
};

/// Gradient-guided furthest point sampling.
SelectionResult ggfps(const LabeledSet& set, const SamplerConfig& config);

/// Dispatches on config.method.
SelectionResult select(const LabeledSet& set, const SamplerConfig& config);

nlohmann::json to_json(const SelectionResult& result);
SelectionResult selection_from_json(const nlohmann::json& doc);

} // namespace ggfps
