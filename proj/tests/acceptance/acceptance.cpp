// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include "ggfps/errors.hpp"
#include "ggfps/experiments.hpp"
#include "ggfps/functions.hpp"
#include "ggfps/io.hpp"
#include "ggfps/krr.hpp"
#include "ggfps/sampling.hpp"
#include "ggfps/synthetic.hpp"

#include "../sampling_oracle.hpp"

#include <Eigen/LU>
#include <Eigen/QR>

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>

using namespace ggfps;
namespace fs = std::filesystem;

namespace {

// Tolerances and scale, pinned.
constexpr double kStAnchorValue = -78.33198;
constexpr double kStAnchorTol = 1e-4;
constexpr double kFdRelTol = 1e-6;
constexpr double kDenseInverseTol = 1e-10;
constexpr double kInterpolationRelTol = 1e-6;
constexpr double kBinTol = 1e-12;
constexpr double kKdeIntegralTol = 1e-3;
constexpr double kKdePeakRelTol = 0.10;
constexpr double kBoltzmannTemperature = 10.0;
constexpr double kBoltzmannStep = 0.5;
constexpr std::size_t kBoltzmannSize = 2000;
constexpr std::size_t kBootstraps = 20;

struct Outcome
{
  bool pass = false;
  std::string detail;
};

struct Criterion
{
  int id;
  const char* name;
  double time_limit_s;
  std::function<Outcome()> body;
};

std::string fmt(const char* f, double a)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Matrix gaussian_matrix(std::mt19937_64& rng, std::size_t n, std::size_t d)
{
  std::normal_distribution<double> g;
  Matrix X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < X.size(); ++i)
    X.data()[i] = g(rng);
  return X;
}

LabeledSet random_instance(std::mt19937_64& rng, std::size_t n, std::size_t d)
{
  std::uniform_real_distribution<double> u(0.01, 10.0);
  LabeledSet s;
  s.descriptors = gaussian_matrix(rng, n, d);
  s.labels = Vector::Zero(static_cast<Eigen::Index>(n));
  s.gradient_norms.resize(static_cast<Eigen::Index>(n));
  for (auto& v : s.gradient_norms)
    v = u(rng);
  for (std::size_t i = 0; i < n; ++i)
    s.ids.push_back(std::to_string(i));
  return s;
}

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi)
{
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

const CurvePoint& point_for(const LearningCurveResult& r, Method m, std::size_t n)
{
  for (const auto& p : r.points)
    if (p.method == m && p.train_size == n)
      return p;
  throw ConfigError("missing curve point");
}

// --------------------------------------------------------------------------

Outcome sampler_oracle()
{
  std::mt19937_64 rng(101);
  int mismatches = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n_total = pick(rng, 2, 64);
    const std::size_t d = pick(rng, 1, 8);
    const auto s = random_instance(rng, n_total, d);
    const std::size_t n = pick(rng, 1, n_total);
    const std::size_t init = pick(rng, 0, n_total - 1);

    if (fps(s.descriptors, n, init) != oracle::greedy(s.descriptors, n, init, {}, {}))
      ++mismatches;

    SamplerConfig cfg;
    cfg.n = n;
    cfg.beta = std::uniform_real_distribution<double>(0.0, 2.0)(rng);
    cfg.beta_mode = t % 2 == 0 ? BetaMode::swept : BetaMode::constant;
    cfg.init_index = init;
    const std::vector<double> g(s.gradient_norms.begin(), s.gradient_norms.end());
    const auto sched = cfg.beta_mode == BetaMode::swept ? oracle::alternating_schedule(cfg.beta, n)
                                                        : std::vector<double>(n, cfg.beta);
    if (ggfps::ggfps(s, cfg).indices != oracle::greedy(s.descriptors, n, init, g, sched))
      ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches in 400 sequences"};
}

Outcome beta_zero_identity()
{
  std::mt19937_64 rng(202);
  int mismatches = 0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t n_total = pick(rng, 2, 64);
    const auto s = random_instance(rng, n_total, pick(rng, 1, 8));
    SamplerConfig cfg;
    cfg.n = pick(rng, 1, n_total);
    cfg.beta = 0.0;
    cfg.beta_mode = t % 2 == 0 ? BetaMode::swept : BetaMode::constant;
    cfg.init_index = pick(rng, 0, n_total - 1);
    if (ggfps::ggfps(s, cfg).indices != fps(s.descriptors, cfg.n, cfg.init_index))
      ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + " of 50 instances differ"};
}

Outcome invariance()
{
  std::mt19937_64 rng(303);
  int mismatches = 0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t n_total = pick(rng, 5, 64);
    const std::size_t d = pick(rng, 1, 8);
    const auto base = random_instance(rng, n_total, d);
    SamplerConfig cfg;
    cfg.n = pick(rng, 1, n_total);
    cfg.beta = std::uniform_real_distribution<double>(0.1, 2.0)(rng);
    cfg.init_mode = InitMode::gradient_weighted;
    cfg.seed = static_cast<std::uint64_t>(t);
    const auto reference = ggfps::ggfps(base, cfg).indices;

    const Eigen::MatrixXd Q = Eigen::MatrixXd(gaussian_matrix(rng, d, d)).householderQr().householderQ();
    const Eigen::RowVectorXd shift = Eigen::MatrixXd(gaussian_matrix(rng, 1, d)) * 10.0;
    for (double c : {1e-3, 1.0, 1e3}) {
      auto moved = base;
      moved.gradient_norms *= c;
      moved.descriptors = ((Eigen::MatrixXd(base.descriptors) * Q).rowwise() + shift);
      if (ggfps::ggfps(moved, cfg).indices != reference)
        ++mismatches;
    }
  }
  return {mismatches == 0, std::to_string(mismatches) + " of 150 transformed runs differ"};
}

Outcome st_anchor()
{
  Vector x(2);
  x << -2.903534, -2.903534;
  const double v = st_value(x);
  const bool anchor_ok = std::abs(v - kStAnchorValue) <= kStAnchorTol;

  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  int fd_bad = 0;
  const double h = 1e-5;
  for (int t = 0; t < 1000; ++t) {
    Vector p(2);
    p << u(rng), u(rng);
    const Vector g = st_gradient(p);
    for (Eigen::Index i = 0; i < 2; ++i) {
      Vector a = p, b = p;
      a[i] += h;
      b[i] -= h;
      const double fd = (st_value(a) - st_value(b)) / (2.0 * h);
      if (std::abs(fd - g[i]) > kFdRelTol * std::max(1.0, std::abs(g[i])))
        ++fd_bad;
    }
  }
  return {anchor_ok && fd_bad == 0,
          "f(anchor) = " + fmt("%.9f", v) + " (stated " + fmt("%.5f", kStAnchorValue) + " +- 1e-4), " +
            std::to_string(fd_bad) + " finite-difference violations"};
}

Outcome krr_correctness()
{
  std::mt19937_64 rng(505);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Matrix A = gaussian_matrix(rng, 8, 8);
    const Eigen::MatrixXd K = Eigen::MatrixXd(A) * A.transpose() + Eigen::MatrixXd::Identity(8, 8);
    const Vector y = gaussian_matrix(rng, 8, 1).col(0);
    const double lambda = 1e-4;
    const Vector expected = (K + lambda * Eigen::MatrixXd::Identity(8, 8)).inverse() * y;
    const Vector alpha = fit(K, y, lambda);
    worst = std::max(worst, (alpha - expected).cwiseAbs().maxCoeff() / std::max(1.0, expected.cwiseAbs().maxCoeff()));
  }

  const auto train = uniform_domain_sample({}, 50, 506);
  const auto model = train_model(train, {KernelKind::gaussian, 1.0}, 1e-12);
  const Vector yhat = predict_model(model, train, train);
  const double rel = (yhat - train.labels).cwiseAbs().maxCoeff() / train.labels.cwiseAbs().maxCoeff();
  return {worst <= kDenseInverseTol && rel <= kInterpolationRelTol,
          "dense-inverse deviation " + fmt("%.2e", worst) + ", interpolation error " + fmt("%.2e", rel)};
}

Outcome st_learning_curve()
{
  const auto data = uniform_domain_sample({}, 2000, 606);
  ExperimentPlan plan;
  plan.labeled_sizes = {1000};
  plan.train_sizes = {50, 100, 250, 500};
  plan.bootstraps = kBootstraps;
  plan.master_seed = 6;
  const auto r = learning_curve(data, plan, 0);
  auto mae = [&](Method m, std::size_t n) { return point_for(r, m, n).mae_mean; };
  bool ok = true;
  std::string detail;
  for (std::size_t n : {100u, 250u}) {
    ok = ok && mae(Method::ggfps, n) < mae(Method::fps, n) && mae(Method::ggfps, n) < mae(Method::urs, n);
  }
  for (std::size_t n : {250u, 500u})
    ok = ok && mae(Method::fps, n) < mae(Method::urs, n);
  for (std::size_t n : plan.train_sizes)
    detail += "N=" + std::to_string(n) + " URS/FPS/GGFPS " + fmt("%.4g", mae(Method::urs, n)) + "/" +
              fmt("%.4g", mae(Method::fps, n)) + "/" + fmt("%.4g", mae(Method::ggfps, n)) + "; ";
  return {ok, detail};
}

const LabeledSet& boltzmann_data()
{
  static const LabeledSet data = [] {
    const auto st = make_surface({});
    return synth_boltzmann_set(*st, kBoltzmannTemperature, kBoltzmannSize, 707, kBoltzmannStep);
  }();
  return data;
}

Outcome fps_distribution_shift()
{
  const auto& data = boltzmann_data();
  int wins = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    double g_fps = 0.0, g_urs = 0.0;
    for (auto i : fps(data.descriptors, 100, std::nullopt, s))
      g_fps += data.gradient_norms[static_cast<Eigen::Index>(i)];
    for (auto i : urs(data.size(), 100, s))
      g_urs += data.gradient_norms[static_cast<Eigen::Index>(i)];
    wins += g_fps > g_urs ? 1 : 0;
  }
  return {wins >= 18, "FPS mean gradient norm above URS in " + std::to_string(wins) + " of 20 seeds"};
}

Outcome ggfps_variance()
{
  ExperimentPlan plan;
  plan.labeled_sizes = {1000};
  plan.train_sizes = {100};
  plan.bootstraps = kBootstraps;
  plan.methods = {Method::urs, Method::ggfps};
  plan.master_seed = 8;
  const auto r = learning_curve(boltzmann_data(), plan, 0);
  const double v_g = point_for(r, Method::ggfps, 100).mae_var;
  const double v_u = point_for(r, Method::urs, 100).mae_var;
  return {v_g <= v_u, "mae_var GGFPS " + fmt("%.4g", v_g) + " vs URS " + fmt("%.4g", v_u)};
}

Outcome bins_and_kde()
{
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  std::vector<std::pair<double, double>> errors(437);
  for (auto& e : errors)
    e = {u(rng), u(rng)};
  auto sorted = errors;
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  const auto bins = bin_errors_by_force_norm(errors, 30);
  double worst = bins.size() == (437 + 29) / 30 ? 0.0 : 1.0;
  for (std::size_t b = 0; b < bins.size(); ++b) {
    const std::size_t lo = b * 30, hi = std::min(lo + 30, sorted.size());
    double mean = 0.0;
    for (std::size_t i = lo; i < hi; ++i)
      mean += sorted[i].second;
    mean /= static_cast<double>(hi - lo);
    double var = 0.0;
    for (std::size_t i = lo; i < hi; ++i)
      var += (sorted[i].second - mean) * (sorted[i].second - mean);
    var /= static_cast<double>(hi - lo);
    worst = std::max({worst, std::abs(bins[b].abs_err_mean - mean), std::abs(bins[b].abs_err_var - var)});
  }

  std::normal_distribution<double> g;
  std::vector<double> samples(5000);
  for (auto& v : samples)
    v = g(rng);
  std::vector<double> grid(4001);
  for (std::size_t i = 0; i < grid.size(); ++i)
    grid[i] = -10.0 + 20.0 * static_cast<double>(i) / 4000.0;
  const auto d = kde_1d(samples, grid);
  double integral = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    integral += 0.5 * (d[i] + d[i - 1]) * (grid[i] - grid[i - 1]);
  const double peak = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  const double peak_rel = std::abs(d[2000] - peak) / peak;

  return {worst <= kBinTol && std::abs(integral - 1.0) <= kKdeIntegralTol && peak_rel <= kKdePeakRelTol,
          "bin deviation " + fmt("%.2e", worst) + ", KDE integral " + fmt("%.6f", integral) +
            ", peak deviation " + fmt("%.3f", peak_rel)};
}

std::string slurp(const fs::path& p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_lab(const std::string& args)
{
  const std::string cmd = std::string(GGFPS_LAB_EXE) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome end_to_end_determinism()
{
  const auto root = fs::temp_directory_path() / ("ggfps_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  nlohmann::json doc = {
    {"schema_version", 1},
    {"seed", 10},
    {"generate", {{"surface", {{"kind", "styblinski_tang"}, {"dim", 2}}}, {"n", 300}, {"grid_resolution", 20}}},
    {"sample", {{"method", "GGFPS"}, {"n", 40}, {"beta", 1.0}}},
    {"curve",
     {{"plan",
       {{"labeled_sizes", {150}},
        {"train_sizes", {25, 50}},
        {"bootstraps", 2},
        {"sigma_grid", {0.5, 1.0, 2.0}},
        {"lambda_grid", {1e-8, 1e-4}},
        {"beta_grid", {0.0, 1.0, 2.0}}}}}}};
  std::ofstream(root / "run.json") << doc.dump(2);

  std::vector<std::string> failures;
  for (const char* run : {"a", "b"}) {
    const auto out = (root / run).string();
    const auto cfg = (root / "run.json").string();
    for (const char* cmd : {"generate", "sample", "curve"})
      if (run_lab(std::string(cmd) + " --config " + cfg + " --out " + out) != 0)
        failures.push_back(std::string(cmd) + " failed in run " + run);
  }
  std::size_t compared = 0;
  if (failures.empty()) {
    for (const auto& entry : fs::directory_iterator(root / "a")) {
      const auto name = entry.path().filename();
      const auto other = root / "b" / name;
      if (name == "manifest.json") {
        // Manifests are equal once the wall-clock field is removed.
        auto ma = nlohmann::json::parse(slurp(entry.path()));
        auto mb = nlohmann::json::parse(slurp(other));
        ma.erase("wall_clock_seconds");
        mb.erase("wall_clock_seconds");
        if (ma != mb)
          failures.push_back("manifest.json differs");
      } else if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) {
        failures.push_back(name.string() + " differs");
      }
      ++compared;
    }
  }
  fs::remove_all(root);
  std::string detail = std::to_string(compared) + " files compared";
  for (const auto& f : failures)
    detail += "; " + f;
  return {failures.empty() && compared >= 7, detail};
}

Outcome adversarial_surface()
{
  SurfaceSpec spec;
  spec.kind = SurfaceKind::adversarial_toy;
  const auto data = uniform_domain_sample(spec, 2000, 1111);
  ExperimentPlan plan;
  plan.labeled_sizes = {1000};
  plan.train_sizes = {100};
  plan.bootstraps = kBootstraps;
  plan.methods = {Method::fps, Method::ggfps};
  plan.master_seed = 11;
  const auto r = learning_curve(data, plan, 0);
  const double m_g = point_for(r, Method::ggfps, 100).mae_mean;
  const double m_f = point_for(r, Method::fps, 100).mae_mean;
  return {m_g < m_f, "mae_mean GGFPS " + fmt("%.4g", m_g) + " vs FPS " + fmt("%.4g", m_f)};
}

} // namespace

int main(int argc, char** argv)
{
  const std::vector<Criterion> criteria = {
    {1, "sampler oracle equivalence", 10, sampler_oracle},
    {2, "beta=0 identity", 5, beta_zero_identity},
    {3, "gradient-scale and isometry invariance", 10, invariance},
    {4, "Styblinski-Tang anchor values", 1, st_anchor},
    {5, "KRR correctness", 5, krr_correctness},
    {6, "ST learning-curve ordering", 600, st_learning_curve},
    {7, "FPS distribution-shift pathology", 120, fps_distribution_shift},
    {8, "GGFPS variance reduction", 600, ggfps_variance},
    {9, "binning and KDE oracles", 5, bins_and_kde},
    {10, "end-to-end determinism", 60, end_to_end_determinism},
    {11, "adversarial-surface check", 300, adversarial_surface},
  };

  std::set<int> only;
  for (int i = 1; i < argc; ++i)
    only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.contains(c.id))
      continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.time_limit_s;
    const bool pass = o.pass && in_time;
    failed += pass ? 0 : 1;
    std::printf("%s criterion %2d: %s (%.2f s, limit %.0f s%s) %s\n", pass ? "PASS" : "FAIL", c.id, c.name, secs,
                c.time_limit_s, in_time ? "" : ", too slow", o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
