#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace sbo {

/// One step of the SplitMix64 generator; a good 64-bit mixing function.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed for an independent stream derived from a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

/// Halton point `index` in [0,1)^dim with a Cranley-Patterson rotation by `shift`
/// (one offset per axis; pass an empty vector for the plain sequence).
std::vector<double> halton_point(std::uint64_t index, std::size_t dim, const std::vector<double>& shift = {});

/// Uniform offsets in [0,1)^dim drawn from `seed`.
std::vector<double> random_shift(std::size_t dim, std::uint64_t seed);

}  // namespace sbo
