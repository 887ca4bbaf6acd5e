#include "ggfps/dataset.hpp"

#include "ggfps/errors.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

namespace ggfps {

namespace {

constexpr std::array<std::string_view, 19> kElements = {
  "",   "H",  "He", "Li", "Be", "B",  "C",  "N",  "O", "F",
  "Ne", "Na", "Mg", "Al", "Si", "P",  "S",  "Cl", "Ar",
};

bool all_finite(const Matrix& m)
{
  return m.allFinite();
}

std::vector<std::string_view> split_ws(std::string_view line)
{
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i])))
      ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j])))
      ++j;
    if (j > i)
      out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_double(std::string_view s, double& out)
{
  if (!s.empty() && s.front() == '+')
    s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

bool parse_count(std::string_view s, std::size_t& out)
{
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool is_blank(std::string_view line)
{
  return std::all_of(line.begin(), line.end(),
                     [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

// Looks for an `energy=<value>` token (key case-insensitive) in an extended-XYZ comment.
bool find_energy(std::string_view comment, std::string_view& value)
{
  for (auto token : split_ws(comment)) {
    auto eq = token.find('=');
    if (eq == std::string_view::npos)
      continue;
    auto key = token.substr(0, eq);
    if (key.size() != 6)
      continue;
    bool match = true;
    for (std::size_t i = 0; i < 6; ++i)
      match = match && std::tolower(static_cast<unsigned char>(key[i])) == "energy"[i];
    if (match) {
      value = token.substr(eq + 1);
      if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
        value = value.substr(1, value.size() - 2);
      return true;
    }
  }
  return false;
}

double cosine_cutoff(double r, double cutoff)
{
  if (r >= cutoff)
    return 0.0;
  return 0.5 * (std::cos(std::numbers::pi * r / cutoff) + 1.0);
}

} // namespace

void Configuration::validate() const
{
  const auto m = static_cast<Eigen::Index>(species.size());
  if (positions.rows() != m || positions.cols() != 3)
    throw ConfigError("configuration: positions must be M x 3 with M = species count");
  if (forces.rows() != m || forces.cols() != 3)
    throw ConfigError("configuration: forces must have the same shape as positions");
  if (!std::isfinite(energy) || !all_finite(forces))
    throw NumericalError("configuration: energy and forces must be finite");
}

std::size_t LabeledSet::atom_block_width() const
{
  if (atom_species.empty())
    return 0;
  return dim() / atom_species.size();
}

void LabeledSet::validate() const
{
  const auto n = labels.size();
  if (descriptors.rows() != n || gradient_norms.size() != n ||
      static_cast<Eigen::Index>(ids.size()) != n)
    throw ConfigError("labeled set: descriptors, labels, gradient norms and ids must have equal length");
  if (!descriptors.allFinite() || !labels.allFinite() || !gradient_norms.allFinite())
    throw NumericalError("labeled set: all values must be finite");
  if ((gradient_norms.array() < 0.0).any())
    throw ConfigError("labeled set: gradient norms must be nonnegative");
  if (!atom_species.empty() && dim() % atom_species.size() != 0)
    throw ConfigError("labeled set: descriptor width is not a multiple of the atom count");
}

LabeledSet LabeledSet::subset(std::span<const std::size_t> indices) const
{
  LabeledSet out;
  const auto k = static_cast<Eigen::Index>(indices.size());
  out.descriptors.resize(k, descriptors.cols());
  out.labels.resize(k);
  out.gradient_norms.resize(k);
  out.ids.reserve(indices.size());
  for (Eigen::Index r = 0; r < k; ++r) {
    const auto i = static_cast<Eigen::Index>(indices[static_cast<std::size_t>(r)]);
    if (i >= descriptors.rows())
      throw ConfigError("labeled set: subset index out of range");
    out.descriptors.row(r) = descriptors.row(i);
    out.labels[r] = labels[i];
    out.gradient_norms[r] = gradient_norms[i];
    out.ids.push_back(ids[static_cast<std::size_t>(i)]);
  }
  out.atom_species = atom_species;
  return out;
}

int element_number(std::string_view symbol)
{
  for (std::size_t z = 1; z < kElements.size(); ++z)
    if (kElements[z] == symbol)
      return static_cast<int>(z);
  return 0;
}

std::string_view element_symbol(int z)
{
  if (z < 1 || z >= static_cast<int>(kElements.size()))
    throw ConfigError("no element symbol for Z = " + std::to_string(z));
  return kElements[static_cast<std::size_t>(z)];
}

std::vector<Configuration> parse_extended_xyz(std::istream& in)
{
  std::vector<Configuration> frames;
  std::string line;
  std::size_t line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line))
      continue;

    const std::size_t frame_no = frames.size() + 1;
    auto head = split_ws(line);
    std::size_t m = 0;
    if (head.size() != 1 || !parse_count(head[0], m) || m == 0)
      throw ParseError(frame_no, line_no, "malformed atom count '" + line + "'");

    if (!std::getline(in, line))
      throw ParseError(frame_no, line_no + 1, "missing comment line");
    ++line_no;
    std::string_view energy_text;
    if (!find_energy(line, energy_text))
      throw ParseError(frame_no, line_no, "comment line has no energy=<float> key");

    Configuration cfg;
    if (!parse_double(energy_text, cfg.energy))
      throw ParseError(frame_no, line_no, "non-numeric energy '" + std::string(energy_text) + "'");

    const auto rows = static_cast<Eigen::Index>(m);
    cfg.positions.resize(rows, 3);
    cfg.forces.resize(rows, 3);
    cfg.species.resize(m);
    for (Eigen::Index a = 0; a < rows; ++a) {
      if (!std::getline(in, line))
        throw ParseError(frame_no, line_no + 1, "expected " + std::to_string(m) + " atom lines");
      ++line_no;
      auto fields = split_ws(line);
      if (fields.size() != 7)
        throw ParseError(frame_no, line_no, "expected '<symbol> x y z fx fy fz'");
      const int z = element_number(fields[0]);
      if (z == 0)
        throw ParseError(frame_no, line_no, "unknown element symbol '" + std::string(fields[0]) + "'");
      cfg.species[static_cast<std::size_t>(a)] = z;
      for (int c = 0; c < 6; ++c) {
        double v = 0.0;
        if (!parse_double(fields[static_cast<std::size_t>(c + 1)], v))
          throw ParseError(frame_no, line_no,
                           "non-numeric field '" + std::string(fields[static_cast<std::size_t>(c + 1)]) + "'");
        if (c < 3)
          cfg.positions(a, c) = v;
        else
          cfg.forces(a, c - 3) = v;
      }
    }
    frames.push_back(std::move(cfg));
  }
  return frames;
}

std::vector<Configuration> parse_extended_xyz(std::string_view text)
{
  std::istringstream in{std::string(text)};
  return parse_extended_xyz(in);
}

std::vector<Configuration> read_extended_xyz_file(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open '" + path + "'");
  return parse_extended_xyz(in);
}

void write_extended_xyz(std::ostream& out, std::span<const Configuration> frames)
{
  for (const auto& cfg : frames) {
    cfg.validate();
    out << cfg.atom_count() << '\n';
    out << "Properties=species:S:1:pos:R:3:forces:R:3 energy=" << format_double(cfg.energy) << '\n';
    for (std::size_t a = 0; a < cfg.atom_count(); ++a) {
      const auto r = static_cast<Eigen::Index>(a);
      out << element_symbol(cfg.species[a]);
      for (int c = 0; c < 3; ++c)
        out << ' ' << format_double(cfg.positions(r, c));
      for (int c = 0; c < 3; ++c)
        out << ' ' << format_double(cfg.forces(r, c));
      out << '\n';
    }
  }
}

double gradient_norm(const Configuration& config)
{
  config.validate();
  return config.forces.norm();
}

Matrix descriptor_identity(const Matrix& points)
{
  return points;
}

AtomDescriptors descriptor_local_radial(const Configuration& config,
                                        const RadialDescriptorParams& params)
{
  if (!(params.cutoff > 0.0) || params.n_basis == 0 || !(params.width > 0.0))
    throw ConfigError("radial descriptor: cutoff, n_basis and width must be positive");
  if (config.positions.rows() != static_cast<Eigen::Index>(config.species.size()) ||
      config.positions.cols() != 3)
    throw ConfigError("radial descriptor: positions must be M x 3");
  if (!config.positions.allFinite())
    throw NumericalError("radial descriptor: non-finite positions");

  std::vector<int> channels = params.channels;
  if (channels.empty()) {
    std::set<int> distinct(config.species.begin(), config.species.end());
    channels.assign(distinct.begin(), distinct.end());
  }

  const std::size_t m = config.atom_count();
  const std::size_t nb = params.n_basis;
  std::vector<double> centres(nb);
  for (std::size_t k = 0; k < nb; ++k)
    centres[k] = params.cutoff * static_cast<double>(k + 1) / static_cast<double>(nb);
  const double inv_two_w2 = 1.0 / (2.0 * params.width * params.width);

  AtomDescriptors out;
  out.species = config.species;
  out.values = Matrix::Zero(static_cast<Eigen::Index>(m),
                            static_cast<Eigen::Index>(channels.size() * nb));

  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = 0; b < m; ++b) {
      if (a == b)
        continue;
      auto ch = std::find(channels.begin(), channels.end(), config.species[b]);
      if (ch == channels.end())
        continue;
      const double r = (config.positions.row(static_cast<Eigen::Index>(a)) -
                        config.positions.row(static_cast<Eigen::Index>(b)))
                         .norm();
      const double fc = cosine_cutoff(r, params.cutoff);
      if (fc == 0.0)
        continue;
      const auto offset = static_cast<std::size_t>(ch - channels.begin()) * nb;
      for (std::size_t k = 0; k < nb; ++k) {
        const double u = r - centres[k];
        out.values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(offset + k)) +=
          std::exp(-u * u * inv_two_w2) * fc;
      }
    }
  }
  return out;
}

LabeledSet labeled_set_from_configurations(std::span<const Configuration> configs,
                                           RadialDescriptorParams params)
{
  LabeledSet set;
  if (configs.empty())
    throw ConfigError("labeled set: no configurations");

  const auto& species = configs.front().species;
  if (params.channels.empty()) {
    std::set<int> distinct(species.begin(), species.end());
    params.channels.assign(distinct.begin(), distinct.end());
  }

  const auto n = static_cast<Eigen::Index>(configs.size());
  const auto width = static_cast<Eigen::Index>(species.size() * params.channels.size() * params.n_basis);
  set.descriptors.resize(n, width);
  set.labels.resize(n);
  set.gradient_norms.resize(n);
  set.atom_species = species;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& cfg = configs[static_cast<std::size_t>(i)];
    if (cfg.species != species)
      throw ConfigError("labeled set: configuration " + std::to_string(i) +
                        " has a different atom ordering than configuration 0");
    auto desc = descriptor_local_radial(cfg, params);
    set.descriptors.row(i) = desc.values.reshaped<Eigen::RowMajor>().transpose();
    set.labels[i] = cfg.energy;
    set.gradient_norms[i] = gradient_norm(cfg);
    set.ids.push_back(std::to_string(i));
  }
  return set;
}

} // namespace ggfps
