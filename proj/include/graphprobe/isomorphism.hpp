#pragma once

#include <cstdint>
#include <vector>

#include "graphprobe/graph.hpp"

namespace graphprobe {

/// Weisfeiler-Lehman colour refinement starting from node degrees. Colours are
/// 64-bit hashes, so colours of different graphs are directly comparable.
std::vector<std::vector<std::uint64_t>> wl_colors(const Graph& g, int iterations);

/// Relabeling-invariant 1-WL hash. Isomorphic graphs always hash equal; equal
/// hashes do not imply isomorphism.
std::uint64_t wl_hash(const Graph& g, int iterations = 3);

enum class IsoResult { not_isomorphic, isomorphic, indeterminate };

/// Exact isomorphism test by backtracking with WL-colour pruning. Returns
/// indeterminate when more than `node_budget` search nodes are expanded.
IsoResult check_isomorphism(const Graph& a, const Graph& b, long long node_budget = 2'000'000);

/// Convenience wrapper; indeterminate counts as isomorphic.
inline bool is_isomorphic(const Graph& a, const Graph& b) {
  return check_isomorphism(a, b) != IsoResult::not_isomorphic;
}

}  // namespace graphprobe
