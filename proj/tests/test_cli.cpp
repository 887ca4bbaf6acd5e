#include "ggfps/cli.hpp"
#include "ggfps/errors.hpp"
#include "ggfps/io.hpp"
#include "ggfps/sampling.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ggfps;

namespace {

struct RunResult
{
  int exit_code = -1;
  std::string stderr_text;
};

class CliTest : public ::testing::Test
{
protected:
  void SetUp() override
  {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           ("ggfps_cli_" + std::to_string(::getpid()) + "_" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const std::string& name, const json& doc)
  {
    const auto p = dir_ / name;
    std::ofstream(p) << doc.dump(2);
    return p;
  }

  RunResult run(const std::string& args, const std::string& env = "")
  {
    const auto err = dir_ / "stderr.txt";
    const std::string cmd = env + " " + std::string(GGFPS_LAB_EXE) + " " + args + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.stderr_text = read_text_file(err.string());
    return r;
  }

  static std::string slurp(const fs::path& p) { return read_text_file(p.string()); }

  static std::size_t csv_rows(const fs::path& p)
  {
    std::istringstream in(slurp(p));
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line))
      ++n;
    return n == 0 ? 0 : n - 1;
  }

  static json st_config(std::uint64_t seed, std::size_t n)
  {
    return {{"schema_version", 1},
            {"seed", seed},
            {"generate", {{"surface", {{"kind", "styblinski_tang"}, {"dim", 2}}}, {"n", n}}}};
  }

  fs::path dir_;
};

} // namespace

TEST_F(CliTest, GenerateIsReproducible)
{
  const auto cfg = write_config("gen.json", st_config(7, 100));
  ASSERT_EQ(run("generate --config " + cfg.string() + " --out " + (dir_ / "a").string()).exit_code, 0);
  ASSERT_EQ(run("generate --config " + cfg.string() + " --out " + (dir_ / "b").string()).exit_code, 0);
  EXPECT_EQ(csv_rows(dir_ / "a" / "dataset.csv"), 100u);
  EXPECT_EQ(slurp(dir_ / "a" / "dataset.csv"), slurp(dir_ / "b" / "dataset.csv"));
  EXPECT_EQ(slurp(dir_ / "a" / "dataset.json"), slurp(dir_ / "b" / "dataset.json"));
  const auto manifest = json::parse(slurp(dir_ / "a" / "manifest.json"));
  EXPECT_EQ(manifest["seed"], 7);
  EXPECT_EQ(manifest["rows"], 100);
  EXPECT_TRUE(manifest.contains("tool_version"));
}

TEST_F(CliTest, InvalidDimensionIsAConfigError)
{
  auto doc = st_config(1, 10);
  doc["generate"]["surface"]["dim"] = 0;
  const auto cfg = write_config("gen.json", doc);
  const auto r = run("generate --config " + cfg.string() + " --out " + (dir_ / "o").string());
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.stderr_text.find("surface.dim"), std::string::npos) << r.stderr_text;
}

TEST_F(CliTest, MissingConfigAndBadArguments)
{
  EXPECT_EQ(run("generate --config " + (dir_ / "nope.json").string() + " --out " + dir_.string()).exit_code, 1);
  EXPECT_EQ(run("frobnicate").exit_code, 1);
  const auto cfg = write_config("bad.json", json{{"seed", 1}});
  EXPECT_EQ(run("generate --config " + cfg.string() + " --out " + dir_.string()).exit_code, 1);
}

TEST_F(CliTest, UnwritableOutputIsAnIoError)
{
  const auto cfg = write_config("gen.json", st_config(1, 10));
  const auto blocker = dir_ / "file";
  std::ofstream(blocker) << "x";
  const auto r = run("generate --config " + cfg.string() + " --out " + (blocker / "sub").string());
  EXPECT_EQ(r.exit_code, 2) << r.stderr_text;
}

TEST_F(CliTest, AdversarialGradientsVanishFarFromTheBump)
{
  json doc = {{"schema_version", 1},
              {"seed", 3},
              {"generate",
               {{"surface", {{"kind", "adversarial_toy"}, {"dim", 2}, {"bump", {{"center", {2.0, 2.0}}, {"radius", 0.7}}}}},
                {"n", 400}}}};
  const auto cfg = write_config("gen.json", doc);
  ASSERT_EQ(run("generate --config " + cfg.string() + " --out " + (dir_ / "o").string()).exit_code, 0);
  const auto set = load_labeled_set((dir_ / "o" / "dataset.json").string());
  std::size_t far = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const double dx = set.descriptors(r, 0) - 2.0, dy = set.descriptors(r, 1) - 2.0;
    if (std::sqrt(dx * dx + dy * dy) > 7.0 * 0.7) {
      ++far;
      EXPECT_LT(set.gradient_norms[r], 1e-6);
    }
  }
  EXPECT_GT(far, 0u);
}

TEST_F(CliTest, SampleBetaZeroMatchesFpsAndExhaustiveIsAPermutation)
{
  auto doc = st_config(11, 60);
  doc["sample"] = {{"method", "GGFPS"}, {"n", 20}, {"beta", 0.0}, {"init_index", 5}};
  const auto cfg = write_config("run.json", doc);
  ASSERT_EQ(run("generate --config " + cfg.string() + " --out " + (dir_ / "o").string()).exit_code, 0);
  doc["sample"]["dataset"] = "o/dataset.json";
  const auto cfg2 = write_config("run2.json", doc);
  const auto r = run("sample --config " + cfg2.string() + " --out " + (dir_ / "s").string());
  ASSERT_EQ(r.exit_code, 0) << r.stderr_text;
  const auto sel = selection_from_json(json::parse(slurp(dir_ / "s" / "selection.json")));
  const auto set = load_labeled_set((dir_ / "o" / "dataset.json").string());
  EXPECT_EQ(sel.indices, fps(set.descriptors, 20, 5));

  doc["sample"] = {{"method", "URS"}, {"n", 60}, {"dataset", "o/dataset.json"}};
  const auto cfg3 = write_config("run3.json", doc);
  ASSERT_EQ(run("sample --config " + cfg3.string() + " --out " + (dir_ / "s3").string()).exit_code, 0);
  auto all = selection_from_json(json::parse(slurp(dir_ / "s3" / "selection.json"))).indices;
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i)
    EXPECT_EQ(all[i], i);

  doc["sample"]["n"] = 61;
  const auto cfg4 = write_config("run4.json", doc);
  EXPECT_EQ(run("sample --config " + cfg4.string() + " --out " + (dir_ / "s4").string()).exit_code, 1);
}

TEST_F(CliTest, CurveOutputsAreReproducible)
{
  auto doc = st_config(5, 120);
  doc["curve"] = {{"dataset", "dataset.json"},
                  {"plan",
                   {{"labeled_sizes", {60}},
                    {"train_sizes", {20}},
                    {"bootstraps", 1},
                    {"sigma_grid", {1.0, 3.0}},
                    {"lambda_grid", {1e-6}},
                    {"beta_grid", {0.0, 1.0}},
                    {"folds", 3}}}};
  const auto cfg = write_config("run.json", doc);
  ASSERT_EQ(run("generate --config " + cfg.string() + " --out " + dir_.string()).exit_code, 0);
  for (const char* sub : {"c1", "c2"}) {
    const auto r = run("curve --config " + cfg.string() + " --out " + (dir_ / sub).string() + " --threads 1");
    ASSERT_EQ(r.exit_code, 0) << r.stderr_text;
  }
  const auto r3 = run("curve --config " + cfg.string() + " --out " + (dir_ / "c3").string(), "GGFPS_LAB_THREADS=2");
  ASSERT_EQ(r3.exit_code, 0) << r3.stderr_text;
  EXPECT_EQ(csv_rows(dir_ / "c1" / "curves.csv"), 3u);
  for (const char* f : {"curves.csv", "bins.csv", "kde.csv", "heatmap.csv"}) {
    EXPECT_EQ(slurp(dir_ / "c1" / f), slurp(dir_ / "c2" / f)) << f;
    EXPECT_EQ(slurp(dir_ / "c1" / f), slurp(dir_ / "c3" / f)) << f;
  }
  auto m1 = json::parse(slurp(dir_ / "c1" / "manifest.json"));
  auto m2 = json::parse(slurp(dir_ / "c2" / "manifest.json"));
  m1.erase("wall_clock_seconds");
  m2.erase("wall_clock_seconds");
  EXPECT_EQ(m1, m2);
}

TEST(ResolveThreads, FlagThenEnvironment)
{
  ::setenv("GGFPS_LAB_THREADS", "3", 1);
  EXPECT_EQ(cli::resolve_threads(5u), 5u);
  EXPECT_EQ(cli::resolve_threads(std::nullopt), 3u);
  ::setenv("GGFPS_LAB_THREADS", "x", 1);
  EXPECT_THROW(cli::resolve_threads(std::nullopt), ConfigError);
  ::unsetenv("GGFPS_LAB_THREADS");
  EXPECT_EQ(cli::resolve_threads(std::nullopt), 0u);
}
