#pragma once

#include "ggfps/dataset.hpp"
#include "ggfps/functions.hpp"

namespace ggfps {

struct BoltzmannOptions
{
  std::size_t burn_in = 1000;
  std::size_t thin = 10;
};

/// Metropolis random walk targeting exp(-f(x) / temperature) restricted to the
/// surface domain box, with isotropic Gaussian proposals of standard deviation
/// `step`. The walk starts at a uniform point of the box; moves leaving the box
/// are rejected. One sample is recorded every `thin` steps after `burn_in`.
LabeledSet synth_boltzmann_set(const Surface& surface,
                               double temperature,
                               std::size_t n,
                               std::uint64_t seed,
                               double step,
                               const BoltzmannOptions& options = {});

} // namespace ggfps
