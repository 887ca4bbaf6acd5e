#include "ggfps/cli.hpp"

#include "ggfps/dataset.hpp"
#include "ggfps/errors.hpp"
#include "ggfps/experiments.hpp"
#include "ggfps/functions.hpp"
#include "ggfps/io.hpp"
#include "ggfps/sampling.hpp"
#include "ggfps/synthetic.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <sstream>

namespace ggfps::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <class T>
T field(const json& obj, const std::string& path, const char* key, std::optional<T> fallback = std::nullopt)
{
  const std::string where = path + "." + key;
  if (!obj.contains(key)) {
    if (fallback)
      return *fallback;
    throw ConfigError(where + " is required");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + " has the wrong type");
  }
}

void ensure_out_dir(const fs::path& out)
{
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out))
    throw IoError("cannot create output directory '" + out.string() + "'");
  const auto probe = out / ".write_probe";
  write_text_file(probe.string(), "");
  fs::remove(probe, ec);
}

fs::path resolve_input(const RunConfig& config, const json& section, const std::string& path,
                       const fs::path& out_dir)
{
  fs::path p;
  if (section.contains("dataset")) {
    p = field<std::string>(section, path, "dataset");
    if (p.is_relative())
      p = config.base_dir / p;
  } else {
    p = out_dir / "dataset.json";
    if (!fs::exists(p))
      p = out_dir / "dataset.csv";
  }
  if (!fs::exists(p))
    throw ConfigError(path + ".dataset: file '" + p.string() + "' does not exist");
  return p;
}

SurfaceSpec surface_from_json(const json& obj, const std::string& path)
{
  if (!obj.is_object())
    throw ConfigError(path + " must be an object");
  SurfaceSpec spec;
  const auto kind = field<std::string>(obj, path, "kind", std::string("styblinski_tang"));
  if (kind == "styblinski_tang")
    spec.kind = SurfaceKind::styblinski_tang;
  else if (kind == "adversarial_toy")
    spec.kind = SurfaceKind::adversarial_toy;
  else
    throw ConfigError(path + ".kind: unknown surface '" + kind + "'");

  const auto dim = field<long long>(obj, path, "dim", 2LL);
  if (dim < 1)
    throw ConfigError(path + ".dim must be at least 1");
  spec.dim = static_cast<std::size_t>(dim);

  if (obj.contains("domain")) {
    const auto d = field<std::vector<double>>(obj, path, "domain");
    if (d.size() != 2 || !(d[0] < d[1]))
      throw ConfigError(path + ".domain must be [lower, upper] with lower < upper");
    spec.domain = {d[0], d[1]};
  }
  if (obj.contains("bump")) {
    const auto& b = obj.at("bump");
    const std::string bp = path + ".bump";
    if (b.contains("center")) {
      const auto c = field<std::vector<double>>(b, bp, "center");
      if (c.size() != 2)
        throw ConfigError(bp + ".center must have two coordinates");
      spec.bump.center = Eigen::Map<const Vector>(c.data(), 2);
    }
    spec.bump.radius = field<double>(b, bp, "radius", spec.bump.radius);
    spec.bump.amplitude = field<double>(b, bp, "amplitude", spec.bump.amplitude);
    spec.bump.frequency = field<double>(b, bp, "frequency", spec.bump.frequency);
  }
  try {
    spec.validate();
  } catch (const ConfigError& e) {
    // validate() names fields as surface.*; keep the caller's prefix.
    std::string what = e.what();
    if (what.rfind("surface.", 0) == 0)
      what = path + what.substr(std::string("surface").size());
    throw ConfigError(what);
  }
  return spec;
}

json manifest_base(const RunConfig& config, const char* command)
{
  json m;
  m["schema_version"] = kSchemaVersion;
  m["command"] = command;
  m["tool_version"] = kToolVersion;
  m["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                       "." + std::to_string(EIGEN_MINOR_VERSION);
  m["seed"] = config.seed;
  m["config"] = config.doc;
  return m;
}

double seconds_since(std::chrono::steady_clock::time_point start)
{
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

} // namespace

RunConfig RunConfig::from_json(json doc, fs::path base_dir)
{
  if (!doc.is_object())
    throw ConfigError("config must be a JSON object");
  RunConfig cfg;
  const auto version = field<int>(doc, "config", "schema_version");
  if (version != kSchemaVersion)
    throw ConfigError("config.schema_version: unsupported version " + std::to_string(version));
  cfg.seed = field<std::uint64_t>(doc, "config", "seed");
  cfg.doc = std::move(doc);
  cfg.base_dir = std::move(base_dir);
  return cfg;
}

RunConfig RunConfig::load(const fs::path& path)
{
  if (!fs::exists(path))
    throw ConfigError("config file '" + path.string() + "' does not exist");
  json doc;
  try {
    doc = json::parse(read_text_file(path.string()));
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return from_json(std::move(doc), path.parent_path());
}

const json& RunConfig::section(const char* name) const
{
  if (!doc.contains(name) || !doc.at(name).is_object())
    throw ConfigError(std::string(name) + " section is required for this command");
  return doc.at(name);
}

void cmd_generate(const RunConfig& config, const fs::path& out_dir)
{
  const auto start = std::chrono::steady_clock::now();
  const auto& g = config.section("generate");
  json manifest = manifest_base(config, "generate");
  LabeledSet set;
  std::unique_ptr<Surface> surface;

  if (g.contains("xyz")) {
    fs::path xyz = field<std::string>(g, "generate", "xyz");
    if (xyz.is_relative())
      xyz = config.base_dir / xyz;
    if (!fs::exists(xyz))
      throw ConfigError("generate.xyz: file '" + xyz.string() + "' does not exist");
    RadialDescriptorParams params;
    if (g.contains("descriptor")) {
      const auto& d = g.at("descriptor");
      params.cutoff = field<double>(d, "generate.descriptor", "cutoff", params.cutoff);
      params.n_basis = field<std::size_t>(d, "generate.descriptor", "n_basis", params.n_basis);
      params.width = field<double>(d, "generate.descriptor", "width", params.width);
    }
    if (!(params.cutoff > 0.0) || params.n_basis < 1 || !(params.width > 0.0))
      throw ConfigError("generate.descriptor: cutoff, n_basis and width must be positive");
    const auto frames = read_extended_xyz_file(xyz.string());
    set = labeled_set_from_configurations(frames, params);
    manifest["metadata"] = {{"source", "xyz"},
                            {"frames", frames.size()},
                            {"descriptor",
                             {{"cutoff", params.cutoff}, {"n_basis", params.n_basis}, {"width", params.width}}}};
  } else {
    if (!g.contains("surface"))
      throw ConfigError("generate.surface is required (or generate.xyz)");
    const auto spec = surface_from_json(g.at("surface"), "surface");
    surface = make_surface(spec);
    const auto n = field<long long>(g, "generate", "n");
    if (n < 1)
      throw ConfigError("generate.n must be at least 1");
    const auto sampler = field<std::string>(g, "generate", "sampler", std::string("uniform"));
    if (sampler == "uniform") {
      set = uniform_domain_sample(spec, static_cast<std::size_t>(n), config.seed);
      manifest["metadata"] = {{"source", "uniform"}};
    } else if (sampler == "boltzmann") {
      const auto temperature = field<double>(g, "generate", "temperature");
      const auto step = field<double>(g, "generate", "step", 0.5);
      if (!(temperature > 0.0))
        throw ConfigError("generate.temperature must be positive");
      if (!(step > 0.0))
        throw ConfigError("generate.step must be positive");
      BoltzmannOptions opts;
      opts.burn_in = field<std::size_t>(g, "generate", "burn_in", opts.burn_in);
      opts.thin = field<std::size_t>(g, "generate", "thin", opts.thin);
      if (opts.thin < 1)
        throw ConfigError("generate.thin must be at least 1");
      set = synth_boltzmann_set(*surface, temperature, static_cast<std::size_t>(n), config.seed, step, opts);
      manifest["metadata"] = {{"source", "boltzmann"},
                              {"temperature", temperature},
                              {"step", step},
                              {"burn_in", opts.burn_in},
                              {"thin", opts.thin}};
    } else {
      throw ConfigError("generate.sampler must be 'uniform' or 'boltzmann'");
    }
  }

  const auto grid_resolution = field<std::size_t>(g, "generate", "grid_resolution", std::size_t{0});
  if (grid_resolution > 0 && (!surface || surface->dim() != 2))
    throw ConfigError("generate.grid_resolution needs a 2D surface");

  ensure_out_dir(out_dir);
  save_labeled_set((out_dir / "dataset.csv").string(), set);
  save_labeled_set((out_dir / "dataset.json").string(), set);
  json outputs = {"dataset.csv", "dataset.json"};
  if (grid_resolution > 0) {
    std::ostringstream grid;
    write_surface_grid_csv(grid, *surface, grid_resolution);
    write_text_file((out_dir / "surface_grid.csv").string(), grid.str());
    outputs.push_back("surface_grid.csv");
  }
  manifest["outputs"] = outputs;
  manifest["rows"] = set.size();
  manifest["wall_clock_seconds"] = seconds_since(start);
  write_text_file((out_dir / "manifest.json").string(), dump_json(manifest));
}

void cmd_sample(const RunConfig& config, const fs::path& out_dir)
{
  const auto& s = config.section("sample");
  const auto input = resolve_input(config, s, "sample", out_dir);
  const LabeledSet set = load_labeled_set(input.string());

  SamplerConfig sc;
  try {
    sc.method = parse_method(field<std::string>(s, "sample", "method"));
    sc.beta_mode = parse_beta_mode(field<std::string>(s, "sample", "beta_mode", std::string("swept")));
    sc.init_mode = parse_init_mode(field<std::string>(s, "sample", "init_mode", std::string("gradient_weighted")));
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("sample: ") + e.what());
  }
  const auto n = field<long long>(s, "sample", "n");
  if (n < 1)
    throw ConfigError("sample.n must be at least 1");
  sc.n = static_cast<std::size_t>(n);
  sc.beta = field<double>(s, "sample", "beta", 0.0);
  if (!(sc.beta >= 0.0))
    throw ConfigError("sample.beta must be nonnegative");
  sc.grad_floor_rel = field<double>(s, "sample", "grad_floor_rel", 1e-12);
  sc.schedule_length = field<std::size_t>(s, "sample", "schedule_length", std::size_t{0});
  sc.seed = field<std::uint64_t>(s, "sample", "seed", config.seed);
  if (s.contains("init_index") && !s.at("init_index").is_null())
    sc.init_index = field<std::size_t>(s, "sample", "init_index");
  if (sc.n > set.size())
    throw CapacityError("sample.n: " + std::to_string(sc.n) + " exceeds the dataset size " +
                        std::to_string(set.size()));

  const auto result = select(set, sc);
  ensure_out_dir(out_dir);
  write_text_file((out_dir / "selection.json").string(), dump_json(to_json(result)));
}

void cmd_curve(const RunConfig& config, const fs::path& out_dir, unsigned threads)
{
  const auto start = std::chrono::steady_clock::now();
  const auto& c = config.section("curve");
  const auto input = resolve_input(config, c, "curve", out_dir);
  const LabeledSet data = load_labeled_set(input.string());

  ExperimentPlan plan = plan_from_json(c.contains("plan") ? c.at("plan") : json::object(), "curve.plan");
  plan.master_seed = config.seed;
  plan.validate();
  const auto bin_capacity = field<std::size_t>(c, "curve", "bin_capacity", std::size_t{30});
  const auto kde_points = field<std::size_t>(c, "curve", "kde_points", std::size_t{200});
  const auto heatmap_cells = field<std::size_t>(c, "curve", "heatmap_cells", std::size_t{20});
  if (bin_capacity < 1 || kde_points < 2 || heatmap_cells < 1)
    throw ConfigError("curve: bin_capacity, kde_points and heatmap_cells must be positive");

  const auto result = learning_curve(data, plan, threads);

  ensure_out_dir(out_dir);
  json outputs = json::array();
  auto emit = [&](const char* name, const std::string& text) {
    write_text_file((out_dir / name).string(), text);
    outputs.push_back(name);
  };
  std::ostringstream curves, bins, kde;
  write_curves_csv(curves, result);
  emit("curves.csv", curves.str());
  write_bins_csv(bins, result, bin_capacity);
  emit("bins.csv", bins.str());
  write_kde_csv(kde, data, result, kde_points);
  emit("kde.csv", kde.str());
  if (data.dim() == 2) {
    std::ostringstream heat;
    write_heatmap_csv(heat, data, result, heatmap_cells);
    emit("heatmap.csv", heat.str());
  }

  json manifest = manifest_base(config, "curve");
  manifest["plan"] = to_json(plan);
  manifest["dataset"] = {{"rows", data.size()}, {"dim", data.dim()}};
  manifest["metadata"] = {{"labels_centered", false},
                          {"variance", "population (divides by the bootstrap count)"},
                          {"cv_pool", "labeled set; per-fold sub-selection"}};
  manifest["outputs"] = outputs;
  manifest["wall_clock_seconds"] = seconds_since(start);
  write_text_file((out_dir / "manifest.json").string(), dump_json(manifest));
}

unsigned resolve_threads(std::optional<unsigned> flag)
{
  if (flag)
    return *flag;
  if (const char* env = std::getenv("GGFPS_LAB_THREADS"); env && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v >= 0)
      return static_cast<unsigned>(v);
    throw ConfigError("GGFPS_LAB_THREADS must be a nonnegative integer");
  }
  return 0;
}

int run(int argc, char** argv)
{
  CLI::App app{"Training-set selection and kernel ridge regression benchmarks"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir;
  std::optional<unsigned> threads;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Run configuration (JSON)")->required();
    sub->add_option("--out", out_dir, "Output directory")->required();
    sub->add_option("--threads", threads, "Worker cap, 0 = auto");
  };
  auto* gen = app.add_subcommand("generate", "Generate or ingest a labeled dataset");
  auto* smp = app.add_subcommand("sample", "Select a training subset");
  auto* crv = app.add_subcommand("curve", "Run bootstrapped learning curves");
  add_common(gen);
  add_common(smp);
  add_common(crv);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::config);
  }

  try {
    const auto config = RunConfig::load(config_path);
    if (gen->parsed())
      cmd_generate(config, out_dir);
    else if (smp->parsed())
      cmd_sample(config, out_dir);
    else
      cmd_curve(config, out_dir, resolve_threads(threads));
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::io);
  }
  return 0;
}

} // namespace ggfps::cli
