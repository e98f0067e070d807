#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "sharp/errors.hpp"
#include "sharp/network.hpp"
#include "sharp/optimizer.hpp"
#include "sharp/rng.hpp"

namespace sharp {

enum class UnitState { Idle, Training, FineTuning, Frozen };

// Per-unit integer ranks. Rank 0 = unallocated; promotion bumps every
// positive rank at episode end, capped at the episode count. Input units
// implicitly carry the cap and never participate in selection.
struct RankTable {
  std::vector<std::vector<int>> ranks;   // per unit layer
  std::vector<ModuleTag> modules;        // layer position tags
  int rank_cap = 0;
  int m = 1;

  static RankTable zeros(const Network& net, int rank_cap, int m) {
    RankTable rt;
    rt.rank_cap = rank_cap;
    rt.m = m;
    for (const auto& b : net.blocks) {
      rt.ranks.emplace_back(static_cast<std::size_t>(b.units()), 0);
      rt.modules.push_back(b.module);
    }
    return rt;
  }

  int input_rank() const { return rank_cap; }
  int layer_count() const { return static_cast<int>(ranks.size()); }

  UnitState state(int layer, int unit) const {
    const int r = ranks[static_cast<std::size_t>(layer)][static_cast<std::size_t>(unit)];
    if (r == 0) return UnitState::Idle;
    if (r == 1) return UnitState::Training;
    if (modules[static_cast<std::size_t>(layer)] == ModuleTag::F && r <= m + 1)
      return UnitState::FineTuning;
    return UnitState::Frozen;
  }

  // Source-unit rank for a connection into `layer` (layer 0 sees the input).
  int source_rank(int layer, int src_unit) const {
    if (layer == 0) return rank_cap;
    return ranks[static_cast<std::size_t>(layer - 1)][static_cast<std::size_t>(src_unit)];
  }

  double rank0_fraction(int layer) const {
    const auto& r = ranks[static_cast<std::size_t>(layer)];
    std::size_t z = 0;
    for (int v : r) z += v == 0;
    return static_cast<double>(z) / static_cast<double>(r.size());
  }

  double rank0_fraction() const {
    std::size_t z = 0, n = 0;
    for (const auto& lr : ranks) {
      n += lr.size();
      for (int v : lr) z += v == 0;
    }
    return static_cast<double>(z) / static_cast<double>(n);
  }
};

// Cosine-annealed activation-mass fraction. The argument is clamped to one
// half period so the emitted value is non-increasing and sits at tau_min once
// the schedule bottoms out.
struct TauSchedule {
  double tau_min = 0.9;
  int shape_k = 30;
};

inline double tau_for_phase(const TauSchedule& s, int p) {
  if (p < 0) throw ConfigError("phase index must be non-negative");
  const double frac = std::min(1.0, static_cast<double>(p + 1) / s.shape_k);
  const double raw = 0.5 * (1.0 + std::cos(frac * M_PI));
  return std::max(s.tau_min, raw);
}

// Random per-layer pruning to density d. The first conv layer keeps all of
// its connections (its units have too few inputs to survive pruning).
inline void init_topology(Network& net, double density, Rng& rng) {
  if (density <= 0.0 || density > 1.0) throw ConfigError("density must be in (0, 1]");
  for (std::size_t bi = 0; bi < net.blocks.size(); ++bi) {
    Block& b = net.blocks[bi];
    auto& mask = b.conn_mask();
    if (!b.prunable) {
      std::fill(mask.begin(), mask.end(), 1);
      continue;
    }
    const auto total = static_cast<std::uint32_t>(mask.size());
    const auto keep = static_cast<std::uint32_t>(std::llround(density * total));
    if (keep == 0)
      throw ConfigError("density " + std::to_string(density) + " leaves layer " +
                        std::to_string(bi) + " without connections");
    std::fill(mask.begin(), mask.end(), 0);
    for (std::uint32_t idx : sample_without_replacement(rng, total, keep)) mask[idx] = 1;
    b.apply_mask();
  }
}

inline std::int64_t count_connections(const Block& b) {
  const auto& mask = b.conn_mask();
  return std::count(mask.begin(), mask.end(), std::uint8_t{1});
}

inline double layer_density(const Block& b) {
  return static_cast<double>(count_connections(b)) / static_cast<double>(b.mask_count());
}

// Per-unit activation mass over a probe set (Eq. 1 quantities). A conv unit's
// activation is the sum over its post-ReLU output map.
struct ActivationStats {
  std::vector<std::vector<double>> unit_sums;
  std::vector<double> layer_total;
};

inline ActivationStats compute_activation_stats(const Network& net,
                                                const std::vector<Tensor>& probe_batches) {
  if (probe_batches.empty()) throw ConfigError("activation stats need a non-empty probe set");
  ActivationStats st;
  st.unit_sums.resize(net.blocks.size());
  for (std::size_t bi = 0; bi < net.blocks.size(); ++bi)
    st.unit_sums[bi].assign(static_cast<std::size_t>(net.blocks[bi].units()), 0.0);
  for (const Tensor& batch : probe_batches) {
    Network::EvalTrace trace;
    net.forward_eval(batch, &trace);
    for (std::size_t bi = 0; bi < net.blocks.size(); ++bi) {
      const Tensor& act = trace.post_act[bi];
      const int units = net.blocks[bi].units();
      const int n = act.dim(0);
      const std::size_t plane =
          static_cast<std::size_t>(act.numel()) / (static_cast<std::size_t>(n) * units);
      const float* p = act.data();
      for (int s = 0; s < n; ++s) {
        for (int u = 0; u < units; ++u) {
          double acc = 0.0;
          for (std::size_t e = 0; e < plane; ++e) acc += p[e];
          st.unit_sums[bi][static_cast<std::size_t>(u)] += acc;
          p += plane;
        }
      }
    }
  }
  st.layer_total.resize(st.unit_sums.size());
  for (std::size_t bi = 0; bi < st.unit_sums.size(); ++bi)
    st.layer_total[bi] =
        std::accumulate(st.unit_sums[bi].begin(), st.unit_sums[bi].end(), 0.0);
  return st;
}

struct SelectionResult {
  std::vector<std::vector<int>> selected;  // per layer, unit ids promoted to rank 1
  std::vector<int> demoted;                // per layer, count demoted 1 -> 0
};

// Greedy solution of the smallest-set selection: rank<2 candidates sorted by
// activation, taken until they cover tau * A_l minus the high-rank mass.
// Unselected candidates are demoted to rank 0.
inline SelectionResult select_rank1(const ActivationStats& stats, RankTable& ranks, double tau) {
  if (tau < 0.0 || tau > 1.0) throw ConfigError("tau must be in [0, 1]");
  SelectionResult res;
  res.selected.resize(ranks.ranks.size());
  res.demoted.assign(ranks.ranks.size(), 0);
  for (std::size_t l = 0; l < ranks.ranks.size(); ++l) {
    auto& layer_ranks = ranks.ranks[l];
    const auto& sums = stats.unit_sums[l];
    double high_mass = 0.0;
    std::vector<int> candidates;
    for (std::size_t u = 0; u < layer_ranks.size(); ++u) {
      if (layer_ranks[u] >= 2)
        high_mass += sums[u];
      else
        candidates.push_back(static_cast<int>(u));
    }
    const double target = tau * stats.layer_total[l] - high_mass;
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](int a, int b) { return sums[static_cast<std::size_t>(a)] > sums[static_cast<std::size_t>(b)]; });
    std::vector<int> chosen;
    if (target > 0.0) {
      double acc = 0.0;
      for (int u : candidates) {
        if (acc >= target) break;
        chosen.push_back(u);
        acc += sums[static_cast<std::size_t>(u)];
      }
    }
    std::sort(chosen.begin(), chosen.end());
    std::size_t ci = 0;
    for (int u : candidates) {
      const bool pick = ci < chosen.size() && std::binary_search(chosen.begin(), chosen.end(), u);
      (void)ci;
      int& r = layer_ranks[static_cast<std::size_t>(u)];
      if (pick) {
        r = 1;
      } else {
        if (r == 1) ++res.demoted[l];
        r = 0;
      }
    }
    res.selected[l] = std::move(chosen);
  }
  return res;
}

// Independent brute-force oracle for the selection problem (test support):
// smallest subset of `values` whose sum reaches `target`.
inline int min_subset_size_bruteforce(const std::vector<double>& values, double target) {
  if (target <= 0.0) return 0;
  const int n = static_cast<int>(values.size());
  int best = n + 1;
  for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
    double s = 0.0;
    int k = 0;
    for (int i = 0; i < n; ++i)
      if (bits & (1u << i)) {
        s += values[static_cast<std::size_t>(i)];
        ++k;
      }
    if (s >= target && k < best) best = k;
  }
  return best <= n ? best : -1;  // -1: unreachable
}

// Removes every connection whose source is rank 0 and destination rank 1.
inline std::vector<int> drop_connections(Network& net, const RankTable& ranks) {
  std::vector<int> dropped(net.blocks.size(), 0);
  for (std::size_t bi = 0; bi < net.blocks.size(); ++bi) {
    Block& b = net.blocks[bi];
    auto& mask = b.conn_mask();
    const auto& dst_ranks = ranks.ranks[bi];
    const int cols = b.mask_cols();
    const std::size_t span = b.mask_span();
    float* w = b.kind == LayerKind::Conv ? b.conv.weight.data() : b.lin.weight.data();
    for (int o = 0; o < b.units(); ++o) {
      if (dst_ranks[static_cast<std::size_t>(o)] != 1) continue;
      for (int c = 0; c < cols; ++c) {
        const std::size_t me = static_cast<std::size_t>(o) * cols + c;
        if (!mask[me]) continue;
        const int src_unit = c / b.source_block;
        if (ranks.source_rank(static_cast<int>(bi), src_unit) != 0) continue;
        mask[me] = 0;
        std::fill_n(w + me * span, span, 0.0f);
        ++dropped[bi];
      }
    }
  }
  return dropped;
}

struct GrowResult {
  std::vector<int> grown;
  std::vector<int> shortfall;  // quota the layer could not honor
};

// Adds `quota` fresh zero-weight connections per layer, all terminating at
// rank-0 units (the Growing Constraint's safe direction), sources unrestricted.
inline GrowResult grow_connections(Network& net, const RankTable& ranks,
                                   const std::vector<int>& quota, Rng& rng,
                                   Optimizer* opt = nullptr) {
  GrowResult res;
  res.grown.assign(net.blocks.size(), 0);
  res.shortfall.assign(net.blocks.size(), 0);
  for (std::size_t bi = 0; bi < net.blocks.size(); ++bi) {
    Block& b = net.blocks[bi];
    if (quota[bi] <= 0) continue;
    auto& mask = b.conn_mask();
    const auto& dst_ranks = ranks.ranks[bi];
    const int cols = b.mask_cols();
    std::vector<std::uint32_t> free_slots;
    for (int o = 0; o < b.units(); ++o) {
      if (dst_ranks[static_cast<std::size_t>(o)] != 0) continue;
      const std::size_t row = static_cast<std::size_t>(o) * cols;
      for (int c = 0; c < cols; ++c)
        if (!mask[row + c]) free_slots.push_back(static_cast<std::uint32_t>(row + c));
    }
    const int take = std::min<int>(quota[bi], static_cast<int>(free_slots.size()));
    res.shortfall[bi] = quota[bi] - take;
    if (take == 0) continue;
    const std::size_t span = b.mask_span();
    float* w = b.kind == LayerKind::Conv ? b.conv.weight.data() : b.lin.weight.data();
    for (std::uint32_t pick : sample_without_replacement(
             rng, static_cast<std::uint32_t>(free_slots.size()), static_cast<std::uint32_t>(take))) {
      const std::size_t me = free_slots[pick];
      mask[me] = 1;
      std::fill_n(w + me * span, span, 0.0f);
      if (opt) opt->reset_weight_state(static_cast<int>(bi), me * span, span);
      ++res.grown[bi];
    }
  }
  return res;
}

// End of episode: every positive rank moves up one step, capped.
inline void promote_ranks(RankTable& ranks) {
  for (auto& layer : ranks.ranks)
    for (int& r : layer)
      if (r > 0) r = std::min(r + 1, ranks.rank_cap);
}

// Freezing Rule: incoming connections (and bias) of rank > m+1 units in F,
// rank > 1 units in G. Monotone by construction.
inline int apply_freezing(Network& net, const RankTable& ranks) {
  int newly_frozen = 0;
  for (std::size_t bi = 0; bi < net.blocks.size(); ++bi) {
    Block& b = net.blocks[bi];
    const int threshold = (b.module == ModuleTag::F ? ranks.m : 0) + 1;
    auto& freeze = b.freeze_mask();
    auto& bias_frozen = b.kind == LayerKind::Conv ? b.conv.bias_frozen : b.lin.bias_frozen;
    const int cols = b.mask_cols();
    for (int o = 0; o < b.units(); ++o) {
      if (ranks.ranks[bi][static_cast<std::size_t>(o)] <= threshold) continue;
      if (!bias_frozen[static_cast<std::size_t>(o)]) ++newly_frozen;
      bias_frozen[static_cast<std::size_t>(o)] = 1;
      std::fill_n(freeze.begin() + static_cast<std::ptrdiff_t>(o) * cols, cols, std::uint8_t{1});
    }
  }
  return newly_frozen;
}

// Redraws incoming weights and bias of idle units from the init distribution;
// masks stay as they are. Skipped by the driver in blurry mode.
inline int reinit_rank0(Network& net, const RankTable& ranks, Rng& rng) {
  int reinitialized = 0;
  for (std::size_t bi = 0; bi < net.blocks.size(); ++bi) {
    Block& b = net.blocks[bi];
    for (int o = 0; o < b.units(); ++o) {
      if (ranks.ranks[bi][static_cast<std::size_t>(o)] != 0) continue;
      if (b.kind == LayerKind::Conv)
        b.conv.reinit_unit(o, rng);
      else
        b.lin.reinit_unit(o, rng);
      ++reinitialized;
    }
  }
  return reinitialized;
}

struct PathCheck {
  bool ok = true;
  std::string violation;
};

// Path Property: no directed path from a lower-rank unit to a higher-rank
// unit. Computed by propagating the minimum ancestor rank reachable into each
// unit over the unit-level connectivity graph.
inline PathCheck check_path_property(const Network& net, const RankTable& ranks) {
  std::vector<std::vector<int>> min_anc(net.blocks.size());
  std::vector<std::vector<int>> pred(net.blocks.size());  // arg-min source unit
  for (std::size_t bi = 0; bi < net.blocks.size(); ++bi) {
    const Block& b = net.blocks[bi];
    const int units = b.units();
    const int cols = b.mask_cols();
    const auto& mask = b.conn_mask();
    min_anc[bi].assign(static_cast<std::size_t>(units), ranks.rank_cap);
    pred[bi].assign(static_cast<std::size_t>(units), -1);
    for (int o = 0; o < units; ++o) {
      int best = ranks.rank_cap;
      int best_src = -1;
      int src = -1;
      for (int c = 0; c < cols; ++c) {
        const int su = c / b.source_block;
        if (su == src) continue;  // only test each source unit once per row
        if (!mask[static_cast<std::size_t>(o) * cols + c]) {
          // group may still connect through a later column of the same unit
          bool any = false;
          const int c_end = (su + 1) * b.source_block;
          for (int cc = c; cc < c_end; ++cc)
            if (mask[static_cast<std::size_t>(o) * cols + cc]) {
              any = true;
              break;
            }
          src = su;
          if (!any) continue;
        } else {
          src = su;
        }
        const int src_rank = ranks.source_rank(static_cast<int>(bi), su);
        const int via = bi == 0 ? src_rank : std::min(src_rank, min_anc[bi - 1][static_cast<std::size_t>(su)]);
        if (via < best) {
          best = via;
          best_src = su;
        }
      }
      min_anc[bi][static_cast<std::size_t>(o)] = best;
      pred[bi][static_cast<std::size_t>(o)] = best_src;
      if (best < ranks.ranks[bi][static_cast<std::size_t>(o)]) {
        // reconstruct one offending path for the report
        std::string path = "L" + std::to_string(bi) + ":u" + std::to_string(o) + "(r" +
                           std::to_string(ranks.ranks[bi][static_cast<std::size_t>(o)]) + ")";
        int layer = static_cast<int>(bi);
        int unit = o;
        while (layer >= 0) {
          const int su = pred[static_cast<std::size_t>(layer)][static_cast<std::size_t>(unit)];
          if (su < 0) break;
          const int r = ranks.source_rank(layer, su);
          path = "L" + std::to_string(layer - 1) + ":u" + std::to_string(su) + "(r" +
                 std::to_string(r) + ") -> " + path;
          if (layer == 0 || r == min_anc[static_cast<std::size_t>(layer)][static_cast<std::size_t>(unit)])
            break;
          --layer;
          unit = su;
        }
        return {false, path};
      }
    }
  }
  return {true, ""};
}

}  // namespace sharp
