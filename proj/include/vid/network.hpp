// Two-layer ReLU encoder with affine classification heads over a single flat
// parameter vector: seeded init, forward pass, hand-written backward passes,
// and a little-endian binary checkpoint format.
#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "vid/common.hpp"
#include "vid/rng.hpp"
#include "vid/vecmath.hpp"

namespace vid {

struct NetworkDims {
  int input = 0;
  int hidden = 0;
  int embed = 0;
  int virtual_classes = 0;  // 0 disables the head
  int top_classes = 0;      // 0 disables the head

  bool operator==(const NetworkDims&) const = default;
};

// Parameter layout, in declaration order:
//   W1[hidden x input], b1[hidden], W2[embed x hidden], b2[embed],
//   Wv[virtual_classes x embed], bv[virtual_classes],
//   Wt[top_classes x embed], bt[top_classes]
struct Network {
  NetworkDims dims;
  std::vector<double> params;
  std::uint64_t seed = 0;
  int epoch = 0;

  std::size_t off_w1() const { return 0; }
  std::size_t off_b1() const { return off_w1() + static_cast<std::size_t>(dims.hidden) * dims.input; }
  std::size_t off_w2() const { return off_b1() + dims.hidden; }
  std::size_t off_b2() const { return off_w2() + static_cast<std::size_t>(dims.embed) * dims.hidden; }
  std::size_t off_wv() const { return off_b2() + dims.embed; }
  std::size_t off_bv() const { return off_wv() + static_cast<std::size_t>(dims.virtual_classes) * dims.embed; }
  std::size_t off_wt() const { return off_bv() + dims.virtual_classes; }
  std::size_t off_bt() const { return off_wt() + static_cast<std::size_t>(dims.top_classes) * dims.embed; }
  std::size_t param_count() const { return off_bt() + dims.top_classes; }
};

inline void validate_dims(const NetworkDims& d) {
  if (d.input < 1 || d.hidden < 1 || d.embed < 1 || d.virtual_classes < 0 ||
      d.top_classes < 0) {
    fail(ErrorCode::kInvalidArgs, "network dimensions out of range");
  }
}

// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
inline Network init_network(const NetworkDims& dims, std::uint64_t seed) {
  validate_dims(dims);
  Network net;
  net.dims = dims;
  net.seed = seed;
  net.params.assign(net.param_count(), 0.0);
  Rng rng(mix_key(seed, 0x4E37));
  const auto fill = [&](std::size_t offset, int rows, int cols) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    for (std::size_t i = 0; i < static_cast<std::size_t>(rows) * cols; ++i) {
      net.params[offset + i] = rng.next_uniform(-bound, bound);
    }
  };
  fill(net.off_w1(), dims.hidden, dims.input);
  fill(net.off_w2(), dims.embed, dims.hidden);
  if (dims.virtual_classes > 0) fill(net.off_wv(), dims.virtual_classes, dims.embed);
  if (dims.top_classes > 0) fill(net.off_wt(), dims.top_classes, dims.embed);
  return net;
}

// ---------------------------------------------------------------------------
// Forward

struct Forward {
  std::vector<double> x;       // input copy
  std::vector<double> h_pre;   // W1 x + b1
  std::vector<double> h;       // relu(h_pre)
  std::vector<double> embed;   // W2 h + b2
  std::vector<double> logits_virtual;
  std::vector<double> logits_top;
};

namespace detail {

inline void affine(const double* w, const double* b, std::span<const double> x,
                   int rows, int cols, std::vector<double>& out) {
  out.resize(rows);
  for (int r = 0; r < rows; ++r) {
    double acc = b[r];
    const double* wr = w + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) acc += wr[c] * x[c];
    out[r] = acc;
  }
}

}  // namespace detail

inline void forward(const Network& net, std::span<const double> input, Forward& ws) {
  const NetworkDims& d = net.dims;
  if (static_cast<int>(input.size()) != d.input) {
    fail(ErrorCode::kDimensionMismatch,
         "input dim " + std::to_string(input.size()) + " != " + std::to_string(d.input));
  }
  const double* p = net.params.data();
  ws.x.assign(input.begin(), input.end());
  detail::affine(p + net.off_w1(), p + net.off_b1(), input, d.hidden, d.input, ws.h_pre);
  ws.h.resize(d.hidden);
  for (int i = 0; i < d.hidden; ++i) ws.h[i] = ws.h_pre[i] > 0.0 ? ws.h_pre[i] : 0.0;
  detail::affine(p + net.off_w2(), p + net.off_b2(), ws.h, d.embed, d.hidden, ws.embed);
  if (d.virtual_classes > 0) {
    detail::affine(p + net.off_wv(), p + net.off_bv(), ws.embed, d.virtual_classes,
                   d.embed, ws.logits_virtual);
  } else {
    ws.logits_virtual.clear();
  }
  if (d.top_classes > 0) {
    detail::affine(p + net.off_wt(), p + net.off_bt(), ws.embed, d.top_classes, d.embed,
                   ws.logits_top);
  } else {
    ws.logits_top.clear();
  }
}

// ---------------------------------------------------------------------------
// Backward. All passes ACCUMULATE into `grad` (same layout as params).

// d_embed -> encoder parameters.
inline void backprop_encoder(const Network& net, const Forward& ws,
                             std::span<const double> d_embed, std::vector<double>& grad) {
  const NetworkDims& d = net.dims;
  const double* p = net.params.data();
  double* g = grad.data();
  // W2, b2 and dL/dh
  std::vector<double> dh(d.hidden, 0.0);
  for (int r = 0; r < d.embed; ++r) {
    const double de = d_embed[r];
    if (de == 0.0) continue;
    double* gw2 = g + net.off_w2() + static_cast<std::size_t>(r) * d.hidden;
    const double* w2 = p + net.off_w2() + static_cast<std::size_t>(r) * d.hidden;
    for (int c = 0; c < d.hidden; ++c) {
      gw2[c] += de * ws.h[c];
      dh[c] += de * w2[c];
    }
    g[net.off_b2() + r] += de;
  }
  // ReLU, then W1, b1
  for (int r = 0; r < d.hidden; ++r) {
    if (ws.h_pre[r] <= 0.0) continue;
    const double dpre = dh[r];
    if (dpre == 0.0) continue;
    double* gw1 = g + net.off_w1() + static_cast<std::size_t>(r) * d.input;
    for (int c = 0; c < d.input; ++c) gw1[c] += dpre * ws.x[c];
    g[net.off_b1() + r] += dpre;
  }
}

enum class Head { kVirtual, kTop };

// d_logits of one head -> head parameters and on through the encoder.
inline void backprop_head(const Network& net, const Forward& ws, Head head,
                          std::span<const double> d_logits, std::vector<double>& grad) {
  const NetworkDims& d = net.dims;
  const int classes = head == Head::kVirtual ? d.virtual_classes : d.top_classes;
  if (static_cast<int>(d_logits.size()) != classes || classes == 0) {
    fail(ErrorCode::kDimensionMismatch, "head gradient dimension mismatch");
  }
  const std::size_t off_w = head == Head::kVirtual ? net.off_wv() : net.off_wt();
  const std::size_t off_b = head == Head::kVirtual ? net.off_bv() : net.off_bt();
  const double* p = net.params.data();
  double* g = grad.data();
  std::vector<double> d_embed(d.embed, 0.0);
  for (int r = 0; r < classes; ++r) {
    const double dl = d_logits[r];
    if (dl == 0.0) continue;
    double* gw = g + off_w + static_cast<std::size_t>(r) * d.embed;
    const double* w = p + off_w + static_cast<std::size_t>(r) * d.embed;
    for (int c = 0; c < d.embed; ++c) {
      gw[c] += dl * ws.embed[c];
      d_embed[c] += dl * w[c];
    }
    g[off_b + r] += dl;
  }
  backprop_encoder(net, ws, d_embed, grad);
}

// ---------------------------------------------------------------------------
// Checkpoint: magic "VIDN", u32 version, five i32 dims, u64 seed, i32 epoch,
// then params as little-endian IEEE-754 doubles in declaration order.

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    fail(ErrorCode::kIoError, "checkpoint truncated");
  }
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) {
    fail(ErrorCode::kIoError, "checkpoint truncated");
  }
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

}  // namespace detail

inline void save_checkpoint(std::ostream& os, const Network& net) {
  os.write("VIDN", 4);
  detail::put_u32(os, 1);
  detail::put_u32(os, static_cast<std::uint32_t>(net.dims.input));
  detail::put_u32(os, static_cast<std::uint32_t>(net.dims.hidden));
  detail::put_u32(os, static_cast<std::uint32_t>(net.dims.embed));
  detail::put_u32(os, static_cast<std::uint32_t>(net.dims.virtual_classes));
  detail::put_u32(os, static_cast<std::uint32_t>(net.dims.top_classes));
  detail::put_u64(os, net.seed);
  detail::put_u32(os, static_cast<std::uint32_t>(net.epoch));
  for (double v : net.params) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    detail::put_u64(os, bits);
  }
}

inline Network load_checkpoint(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "VIDN", 4) != 0) {
    fail(ErrorCode::kIoError, "not a checkpoint file");
  }
  const std::uint32_t version = detail::get_u32(in);
  if (version != 1) {
    fail(ErrorCode::kIoError, "unsupported checkpoint version " + std::to_string(version));
  }
  Network net;
  net.dims.input = static_cast<int>(detail::get_u32(in));
  net.dims.hidden = static_cast<int>(detail::get_u32(in));
  net.dims.embed = static_cast<int>(detail::get_u32(in));
  net.dims.virtual_classes = static_cast<int>(detail::get_u32(in));
  net.dims.top_classes = static_cast<int>(detail::get_u32(in));
  validate_dims(net.dims);
  net.seed = detail::get_u64(in);
  net.epoch = static_cast<int>(detail::get_u32(in));
  net.params.resize(net.param_count());
  for (double& v : net.params) {
    const std::uint64_t bits = detail::get_u64(in);
    std::memcpy(&v, &bits, 8);
  }
  return net;
}

}  // namespace vid
