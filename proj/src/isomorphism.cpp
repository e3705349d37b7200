#include "graphprobe/isomorphism.hpp"

#include <algorithm>
#include <numeric>

#include "graphprobe/rng.hpp"

namespace graphprobe {
namespace {

std::uint64_t combine(std::uint64_t h, std::uint64_t v) { return mix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2))); }

std::uint64_t hash_sorted(std::uint64_t seed, std::vector<std::uint64_t>& values) {
  std::sort(values.begin(), values.end());
  std::uint64_t h = mix64(seed ^ values.size());
  for (auto v : values) h = combine(h, v);
  return h;
}

}  // namespace

std::vector<std::vector<std::uint64_t>> wl_colors(const Graph& g, int iterations) {
  const int n = g.num_nodes();
  std::vector<std::vector<std::uint64_t>> rounds;
  std::vector<std::uint64_t> colors(n);
  for (int v = 0; v < n; ++v) colors[v] = mix64(static_cast<std::uint64_t>(g.degree(v)) + 1);
  rounds.push_back(colors);
  std::vector<std::uint64_t> nb;
  for (int it = 0; it < iterations; ++it) {
    std::vector<std::uint64_t> next(n);
    for (int v = 0; v < n; ++v) {
      nb.clear();
      for (int w : g.neighbors(v)) nb.push_back(colors[w]);
      next[v] = hash_sorted(colors[v], nb);
    }
    colors = std::move(next);
    rounds.push_back(colors);
  }
  return rounds;
}

std::uint64_t wl_hash(const Graph& g, int iterations) {
  if (iterations < 1) throw ParameterError("wl_hash: iterations must be >= 1");
  auto rounds = wl_colors(g, iterations);
  std::uint64_t h = mix64(static_cast<std::uint64_t>(g.num_nodes()) * 1315423911ULL ^ g.num_edges());
  for (auto& r : rounds) h = combine(h, hash_sorted(0x5bd1e995, r));
  return h;
}

namespace {

class Matcher {
 public:
  Matcher(const Graph& a, const Graph& b, std::vector<std::uint64_t> ca,
          std::vector<std::uint64_t> cb, long long budget)
      : a_(a), b_(b), ca_(std::move(ca)), cb_(std::move(cb)), budget_(budget) {
    const int n = a.num_nodes();
    map_.assign(n, -1);
    used_.assign(n, false);
    order_ = match_order();
  }

  IsoResult run() {
    if (search(0)) return IsoResult::isomorphic;
    return exhausted_ ? IsoResult::indeterminate : IsoResult::not_isomorphic;
  }

 private:
  // Greedy order: next node has the most already-ordered neighbours, rarest
  // colour first among ties.
  std::vector<int> match_order() const {
    const int n = a_.num_nodes();
    std::vector<int> freq_key(n);
    for (int v = 0; v < n; ++v) {
      freq_key[v] = static_cast<int>(std::count(ca_.begin(), ca_.end(), ca_[v]));
    }
    std::vector<int> order;
    std::vector<bool> placed(n, false);
    std::vector<int> links(n, 0);
    for (int step = 0; step < n; ++step) {
      int best = -1;
      for (int v = 0; v < n; ++v) {
        if (placed[v]) continue;
        if (best < 0 || links[v] > links[best] ||
            (links[v] == links[best] && freq_key[v] < freq_key[best])) {
          best = v;
        }
      }
      placed[best] = true;
      order.push_back(best);
      for (int w : a_.neighbors(best)) ++links[w];
    }
    return order;
  }

  bool consistent(int u, int w) const {
    if (ca_[u] != cb_[w] || a_.degree(u) != b_.degree(w)) return false;
    for (int x : a_.neighbors(u)) {
      if (map_[x] >= 0 && !b_.has_edge(w, map_[x])) return false;
    }
    // Mapped non-neighbours of u must map to non-neighbours of w; with equal
    // degrees counting mapped neighbours suffices.
    int mapped_a = 0;
    for (int x : a_.neighbors(u)) mapped_a += map_[x] >= 0;
    int mapped_b = 0;
    for (int y : b_.neighbors(w)) mapped_b += used_[y];
    return mapped_a == mapped_b;
  }

  bool search(std::size_t depth) {
    if (depth == order_.size()) return true;
    if (++expanded_ > budget_) {
      exhausted_ = true;
      return false;
    }
    const int u = order_[depth];
    const int n = b_.num_nodes();
    for (int w = 0; w < n; ++w) {
      if (used_[w] || !consistent(u, w)) continue;
      map_[u] = w;
      used_[w] = true;
      if (search(depth + 1)) return true;
      map_[u] = -1;
      used_[w] = false;
      if (exhausted_) return false;
    }
    return false;
  }

  const Graph& a_;
  const Graph& b_;
  std::vector<std::uint64_t> ca_, cb_;
  long long budget_;
  long long expanded_ = 0;
  bool exhausted_ = false;
  std::vector<int> map_;
  std::vector<bool> used_;
  std::vector<int> order_;
};

}  // namespace

IsoResult check_isomorphism(const Graph& a, const Graph& b, long long node_budget) {
  const int n = a.num_nodes();
  if (n != b.num_nodes() || a.num_edges() != b.num_edges()) return IsoResult::not_isomorphic;
  // Refine until the partition stabilises (at most n rounds).
  const int rounds = std::max(1, n);
  auto ra = wl_colors(a, rounds);
  auto rb = wl_colors(b, rounds);
  for (std::size_t r = 0; r < ra.size(); ++r) {
    auto sa = ra[r];
    auto sb = rb[r];
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    if (sa != sb) return IsoResult::not_isomorphic;
  }
  Matcher m(a, b, ra.back(), rb.back(), node_budget);
  return m.run();
}

}  // namespace graphprobe
