#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "sharp/errors.hpp"
#include "sharp/network.hpp"

namespace sharp {

enum class OptKind { SgdMomentum, Adadelta };

struct OptimizerConfig {
  OptKind kind = OptKind::Adadelta;
  float lr = 1.0f;
  float momentum = 0.9f;  // sgd
  float rho = 0.9f;       // adadelta
  float eps = 1e-6f;      // adadelta
};

inline OptKind opt_kind_from_string(const std::string& s) {
  if (s == "adadelta") return OptKind::Adadelta;
  if (s == "sgd_momentum" || s == "sgd") return OptKind::SgdMomentum;
  throw ConfigError("unknown optimizer '" + s + "'");
}

inline std::string to_string(OptKind k) {
  return k == OptKind::Adadelta ? "adadelta" : "sgd_momentum";
}

// Updates skip masked-out and frozen entries entirely: their weights and their
// accumulator state stay bit-identical across any number of steps.
class Optimizer {
 public:
  struct BlockState {
    std::vector<float> w1, w2;  // momentum | square_avg, acc_delta
    std::vector<float> b1, b2;
  };

  Optimizer() = default;
  Optimizer(OptimizerConfig cfg, Network& net) : cfg_(cfg), net_(&net) {
    state_.resize(net.blocks.size());
    for (std::size_t i = 0; i < net.blocks.size(); ++i) {
      const Block& b = net.blocks[i];
      state_[i].w1.assign(b.weight_count(), 0.0f);
      state_[i].b1.assign(static_cast<std::size_t>(b.units()), 0.0f);
      if (cfg_.kind == OptKind::Adadelta) {
        state_[i].w2.assign(b.weight_count(), 0.0f);
        state_[i].b2.assign(static_cast<std::size_t>(b.units()), 0.0f);
      }
    }
  }

  const OptimizerConfig& config() const { return cfg_; }
  std::vector<BlockState>& state() { return state_; }

  void step() {
    for (std::size_t bi = 0; bi < net_->blocks.size(); ++bi) {
      Block& b = net_->blocks[bi];
      BlockState& st = state_[bi];
      const std::size_t span = b.mask_span();
      float* w;
      const float* gw;
      float* bias;
      const float* gb;
      if (b.kind == LayerKind::Conv) {
        w = b.conv.weight.data();
        gw = b.conv.d_weight.data();
        bias = b.conv.bias.data();
        gb = b.conv.d_bias.data();
      } else {
        w = b.lin.weight.data();
        gw = b.lin.d_weight.data();
        bias = b.lin.bias.data();
        gb = b.lin.d_bias.data();
      }
      const auto& mask = b.conn_mask();
      const auto& frozen = b.freeze_mask();
      for (std::size_t me = 0; me < mask.size(); ++me) {
        if (!mask[me] || frozen[me]) continue;
        const std::size_t lo = me * span, hi = lo + span;
        for (std::size_t e = lo; e < hi; ++e) update_(w[e], gw[e], st.w1[e], cfg_.kind == OptKind::Adadelta ? &st.w2[e] : nullptr);
      }
      const auto& bfrozen =
          b.kind == LayerKind::Conv ? b.conv.bias_frozen : b.lin.bias_frozen;
      for (std::size_t o = 0; o < bfrozen.size(); ++o) {
        if (bfrozen[o]) continue;
        update_(bias[o], gb[o], st.b1[o], cfg_.kind == OptKind::Adadelta ? &st.b2[o] : nullptr);
      }
    }
  }

  // Fresh state for regrown connections (weight-element range).
  void reset_weight_state(int block, std::size_t begin, std::size_t count) {
    BlockState& st = state_[static_cast<std::size_t>(block)];
    for (std::size_t e = begin; e < begin + count; ++e) {
      st.w1[e] = 0.0f;
      if (!st.w2.empty()) st.w2[e] = 0.0f;
    }
  }

 private:
  void update_(float& w, float g, float& s1, float* s2) {
    if (cfg_.kind == OptKind::SgdMomentum) {
      s1 = cfg_.momentum * s1 + g;
      w -= cfg_.lr * s1;
    } else {
      s1 = cfg_.rho * s1 + (1.0f - cfg_.rho) * g * g;
      const float delta = std::sqrt(*s2 + cfg_.eps) / std::sqrt(s1 + cfg_.eps) * g;
      *s2 = cfg_.rho * *s2 + (1.0f - cfg_.rho) * delta * delta;
      w -= cfg_.lr * delta;
    }
  }

  OptimizerConfig cfg_;
  Network* net_ = nullptr;
  std::vector<BlockState> state_;
};

}  // namespace sharp
