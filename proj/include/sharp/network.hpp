#pragma once

#include <string>
#include <vector>

#include "sharp/errors.hpp"
#include "sharp/layers.hpp"
#include "sharp/tape.hpp"
#include "sharp/tensor.hpp"

namespace sharp {

enum class ModuleTag { G, F };
enum class LayerKind { Conv, Linear };

struct PoolSpec {
  int k = 0;
  int stride = 0;
  bool enabled() const { return k > 0; }
};

// One unit layer plus its trailing elementwise ops. "Units" are conv filters
// or linear neurons; connection granularity is a 2-D kernel for conv pairs and
// a single weight for linear entries.
struct Block {
  LayerKind kind = LayerKind::Linear;
  MaskedConv2d conv;
  MaskedLinear lin;
  bool relu = false;
  bool sigmoid = false;
  PoolSpec pool;
  ModuleTag module = ModuleTag::G;
  bool prunable = true;

  // Filled by Network::finalize().
  int source_units = 0;  // units in the previous layer (or input channels)
  int source_block = 1;  // weight columns per source unit (spatial flatten)

  int units() const { return kind == LayerKind::Conv ? conv.out_channels() : lin.out_features(); }

  std::size_t weight_count() const {
    return kind == LayerKind::Conv ? conv.weight.size() : lin.weight.size();
  }
  // Mask/freeze entries: conv masks live at (out,in) pair granularity.
  std::size_t mask_count() const {
    return kind == LayerKind::Conv ? conv.conn_mask.size() : lin.conn_mask.size();
  }
  std::size_t mask_span() const {  // weight elements gated by one mask entry
    return kind == LayerKind::Conv ? conv.slice_elems() : 1;
  }
  std::vector<std::uint8_t>& conn_mask() { return kind == LayerKind::Conv ? conv.conn_mask : lin.conn_mask; }
  const std::vector<std::uint8_t>& conn_mask() const {
    return kind == LayerKind::Conv ? conv.conn_mask : lin.conn_mask;
  }
  std::vector<std::uint8_t>& freeze_mask() {
    return kind == LayerKind::Conv ? conv.freeze_mask : lin.freeze_mask;
  }
  const std::vector<std::uint8_t>& freeze_mask() const {
    return kind == LayerKind::Conv ? conv.freeze_mask : lin.freeze_mask;
  }
  int mask_cols() const {  // mask entries per destination unit
    return kind == LayerKind::Conv ? conv.in_channels() : lin.in_features();
  }
  void apply_mask() { kind == LayerKind::Conv ? conv.apply_mask() : lin.apply_mask(); }
  void zero_grad() { kind == LayerKind::Conv ? conv.zero_grad() : lin.zero_grad(); }
  void init_weights(Rng& rng) {
    kind == LayerKind::Conv ? conv.init_weights(rng) : lin.init_weights(rng);
  }
};

inline Block conv_block(int in_ch, int out_ch, int kernel, int stride, int padding, bool relu,
                        PoolSpec pool = {}) {
  Block b;
  b.kind = LayerKind::Conv;
  b.conv = MaskedConv2d(in_ch, out_ch, kernel, stride, padding);
  b.relu = relu;
  b.pool = pool;
  return b;
}

inline Block linear_block(int in_features, int out_features, bool relu, bool sigmoid = false) {
  Block b;
  b.kind = LayerKind::Linear;
  b.lin = MaskedLinear(in_features, out_features);
  b.relu = relu;
  b.sigmoid = sigmoid;
  return b;
}

class Network {
 public:
  std::vector<Block> blocks;
  std::vector<int> input_shape;  // C,H,W (or D for pure-linear nets)
  int g_layers = 0;              // blocks [0, g_layers) form G, the rest F

  int final_width() const { return blocks.back().units(); }
  bool has_conv() const {
    for (const auto& b : blocks)
      if (b.kind == LayerKind::Conv) return true;
    return false;
  }

  // Propagates shapes, wires source-unit bookkeeping, assigns module tags.
  void finalize() {
    if (blocks.empty()) throw ConfigError("network has no layers");
    if (g_layers < 0 || g_layers >= static_cast<int>(blocks.size()))
      throw ConfigError("G/F split index out of range");
    std::vector<int> shape = input_shape;  // C,H,W or D
    int prev_units = shape[0];
    int prev_spatial = 1;
    for (std::size_t i = 1; i < shape.size(); ++i) prev_spatial *= shape[i];
    const bool conv_arch = has_conv();
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
      Block& b = blocks[bi];
      b.module = static_cast<int>(bi) < g_layers ? ModuleTag::G : ModuleTag::F;
      b.source_units = prev_units;
      if (b.kind == LayerKind::Conv) {
        if (shape.size() != 3 || shape[0] != b.conv.in_channels())
          throw ConfigError("conv layer " + std::to_string(bi) + " expects " +
                            std::to_string(b.conv.in_channels()) + " channels");
        b.source_block = 1;
        int h = b.conv.out_h(shape[1]), w = b.conv.out_w(shape[2]);
        if (b.pool.enabled()) {
          if (b.pool.k > h || b.pool.k > w)
            throw ConfigError("pool window larger than input at layer " + std::to_string(bi));
          h = (h - b.pool.k) / b.pool.stride + 1;
          w = (w - b.pool.k) / b.pool.stride + 1;
        }
        shape = {b.conv.out_channels(), h, w};
        prev_units = b.conv.out_channels();
        prev_spatial = h * w;
      } else {
        int flat = prev_units * prev_spatial;
        if (flat != b.lin.in_features())
          throw ConfigError("linear layer " + std::to_string(bi) + " expects " +
                            std::to_string(b.lin.in_features()) + " inputs, upstream provides " +
                            std::to_string(flat));
        b.source_block = prev_spatial;
        shape = {b.lin.out_features()};
        prev_units = b.lin.out_features();
        prev_spatial = 1;
      }
      if (bi == 0 && b.kind == LayerKind::Conv && conv_arch) b.prunable = false;
    }
  }

  void init_weights(Rng& rng) {
    for (auto& b : blocks) b.init_weights(rng);
  }

  void zero_grad() {
    for (auto& b : blocks) b.zero_grad();
  }

  struct EvalTrace {
    std::vector<Tensor> post_act;  // per block, after the activation fn, before pooling
    std::vector<Tensor> out;       // per block, after pooling
  };

  // Plain forward without gradient bookkeeping. [begin, end) selects blocks,
  // so G-only and F-only passes reuse the same path.
  Tensor forward_eval(const Tensor& x, int begin, int end, EvalTrace* trace = nullptr) const {
    Tensor cur = x;
    for (int bi = begin; bi < end; ++bi) {
      const Block& b = blocks[static_cast<std::size_t>(bi)];
      cur = b.kind == LayerKind::Conv ? b.conv.forward(cur) : b.lin.forward(cur);
      if (b.relu) cur = relu_forward(cur);
      if (b.sigmoid) cur = sigmoid_forward(cur);
      if (trace) trace->post_act.push_back(cur);
      if (b.pool.enabled()) cur = maxpool2d_forward(cur, b.pool.k, b.pool.stride, nullptr);
      if (trace) trace->out.push_back(cur);
    }
    return cur;
  }

  Tensor forward_eval(const Tensor& x, EvalTrace* trace = nullptr) const {
    return forward_eval(x, 0, static_cast<int>(blocks.size()), trace);
  }

  // Tape forward over [begin, end); returns the id of the final activation.
  int forward_tape(Tape& t, int x_id, int begin, int end) {
    int cur = x_id;
    for (int bi = begin; bi < end; ++bi) {
      Block& b = blocks[static_cast<std::size_t>(bi)];
      cur = b.kind == LayerKind::Conv ? tape_conv2d(t, b.conv, cur) : tape_linear(t, b.lin, cur);
      if (b.relu) cur = tape_relu(t, cur);
      if (b.sigmoid) cur = tape_sigmoid(t, cur);
      if (b.pool.enabled()) cur = tape_maxpool2d(t, cur, b.pool.k, b.pool.stride);
    }
    return cur;
  }
};

// Listing-style architectures. Pool floors odd dims; 3x3 convs use padding 1,
// which is what makes the post-G activation 16x7x7 for 28x28 inputs.
inline Network make_mnist_network(bool sharp_head, int num_classes) {
  Network net;
  net.input_shape = {1, 28, 28};
  net.g_layers = 2;
  net.blocks.push_back(conv_block(1, 16, 3, 1, 1, true, {2, 2}));
  net.blocks.push_back(conv_block(16, 16, 3, 1, 1, true, {2, 2}));
  net.blocks.push_back(linear_block(16 * 7 * 7, 500, true));
  if (sharp_head)
    net.blocks.push_back(linear_block(500, 500, true));
  else
    net.blocks.push_back(linear_block(500, num_classes, false, true));
  net.finalize();
  return net;
}

inline Network make_cifar_network(bool sharp_head, int num_classes) {
  Network net;
  net.input_shape = {3, 32, 32};
  net.g_layers = 4;
  net.blocks.push_back(conv_block(3, 64, 3, 1, 1, true));
  net.blocks.push_back(conv_block(64, 64, 3, 1, 1, true, {2, 2}));
  net.blocks.push_back(conv_block(64, 64, 3, 1, 1, true));
  net.blocks.push_back(conv_block(64, 64, 3, 1, 1, true, {2, 2}));
  net.blocks.push_back(conv_block(64, 128, 3, 1, 1, true));
  net.blocks.push_back(conv_block(128, 128, 3, 1, 1, true));
  net.blocks.push_back(conv_block(128, 128, 3, 1, 1, true, {2, 2}));
  net.blocks.push_back(linear_block(128 * 4 * 4, 1024, true));
  if (sharp_head)
    net.blocks.push_back(linear_block(1024, 1024, true));
  else
    net.blocks.push_back(linear_block(1024, num_classes, false, true));
  net.finalize();
  return net;
}

}  // namespace sharp
