#pragma once

#include "ggfps/common.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ggfps {

/// One molecular configuration: M atoms with positions, nuclear charges,
/// a total energy and per-atom forces.
struct Configuration
{
  Matrix positions;          // M x 3
  std::vector<int> species;  // M nuclear charges
  double energy = 0.0;
  Matrix forces;             // M x 3

  std::size_t atom_count() const { return species.size(); }

  /// Throws ConfigError on shape mismatch, NumericalError on non-finite values.
  void validate() const;
};

/// The pool samplers select from. Row i of `descriptors` belongs to label i,
/// gradient norm i and id i.
///
/// `atom_species` is empty for plain vector descriptors. For molecular data it
/// holds the species of each atom, and every descriptor row is the
/// concatenation of `atom_species.size()` equally wide per-atom blocks.
struct LabeledSet
{
  Matrix descriptors;
  Vector labels;
  Vector gradient_norms;
  std::vector<std::string> ids;
  std::vector<int> atom_species;

  std::size_t size() const { return static_cast<std::size_t>(labels.size()); }
  std::size_t dim() const { return static_cast<std::size_t>(descriptors.cols()); }

  /// Per-atom block width, or 0 when the set has no atom layout.
  std::size_t atom_block_width() const;

  void validate() const;

  /// Rows in the given order. Indices must be in range.
  LabeledSet subset(std::span<const std::size_t> indices) const;
};

// ---------------------------------------------------------------------------
// Extended XYZ

/// Nuclear charge for an element symbol (H through Ar), or 0 if unknown.
int element_number(std::string_view symbol);
/// Symbol for a nuclear charge in [1, 18]; throws ConfigError otherwise.
std::string_view element_symbol(int z);

/// Reads frames of `M` / comment with `energy=<float>` / M lines of
/// `<symbol> x y z fx fy fz`. Frame and line numbers in errors are 1-based.
std::vector<Configuration> parse_extended_xyz(std::istream& in);
std::vector<Configuration> parse_extended_xyz(std::string_view text);
std::vector<Configuration> read_extended_xyz_file(const std::string& path);

void write_extended_xyz(std::ostream& out, std::span<const Configuration> frames);

// ---------------------------------------------------------------------------
// Descriptors and labels

/// Euclidean norm of the flattened M x 3 force matrix.
double gradient_norm(const Configuration& config);

/// Cartesian coordinates used directly as descriptors.
Matrix descriptor_identity(const Matrix& points);

struct RadialDescriptorParams
{
  double cutoff = 4.0;
  std::size_t n_basis = 8;
  double width = 0.5;
  /// Neighbour species channels, in output order. Empty means the sorted
  /// distinct species of the configuration.
  std::vector<int> channels;
};

/// Per-atom environment vectors, each tagged with the species of its centre atom.
struct AtomDescriptors
{
  Matrix values;             // M x (channels * n_basis)
  std::vector<int> species;  // M
};

/// Gaussian radial basis sums over neighbours within a cosine cutoff, one
/// block of `n_basis` values per neighbour species channel. Basis centres are
/// cutoff * k / n_basis for k = 1..n_basis.
AtomDescriptors descriptor_local_radial(const Configuration& config,
                                        const RadialDescriptorParams& params);

/// Builds a LabeledSet from configurations that share one atom ordering:
/// flattened radial descriptors, energies as labels, force norms as gradient norms.
LabeledSet labeled_set_from_configurations(std::span<const Configuration> configs,
                                           RadialDescriptorParams params);

} // namespace ggfps
