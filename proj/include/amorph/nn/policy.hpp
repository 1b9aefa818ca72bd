#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "amorph/error.hpp"
#include "amorph/observe/observation.hpp"
#include "amorph/rng.hpp"

namespace amorph {

// Image trunk: CoordConv 5x5 (2 filters) -> ReLU -> pool 2 -> conv 3x3
// (2 filters) -> ReLU -> pool 2 -> FC 32. The tool vector (and any extras)
// joins at FC 64 -> FC 64, which feeds the Gaussian mean head and the value
// head. Convolutions use stride 1 and "same" zero padding.
inline constexpr int kConv1Filters = 2;
inline constexpr int kConv1Kernel = 5;
inline constexpr int kConv2Filters = 2;
inline constexpr int kConv2Kernel = 3;
inline constexpr int kFc1 = 32;
inline constexpr int kFc2 = 64;
inline constexpr int kFc3 = 64;
inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

struct NetShape {
  int n = 32;
  int channels = 2;
  int tool_dim = 8;
  int extra_dim = 0;
  int action_dim = 3;

  int in_channels() const { return channels + 2; }
  int n2() const { return n / 2; }
  int n4() const { return n / 4; }
  int flat() const { return kConv2Filters * n4() * n4(); }
  int fc2_in() const { return kFc1 + tool_dim + extra_dim; }

  void validate() const {
    require(n >= 4 && n % 4 == 0, ErrorKind::shape, "network grid size must be a positive multiple of 4");
    require(channels >= 1 && tool_dim >= 0 && extra_dim >= 0 && action_dim >= 1, ErrorKind::shape,
            "invalid network dimensions");
  }

  friend bool operator==(const NetShape&, const NetShape&) = default;
};

// Row map varies with the first index, column map with the second; both are
// linear in the index and span [-1, 1]. N = 1 maps to -1.
inline std::array<std::vector<double>, 2> coord_channels(int n) {
  require(n >= 1, ErrorKind::shape, "coord channels need n >= 1");
  std::array<std::vector<double>, 2> out{std::vector<double>(static_cast<std::size_t>(n) * n),
                                         std::vector<double>(static_cast<std::size_t>(n) * n)};
  auto norm = [n](int k) { return n == 1 ? -1.0 : -1.0 + 2.0 * k / (n - 1); };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      out[0][static_cast<std::size_t>(i) * n + j] = norm(i);
      out[1][static_cast<std::size_t>(i) * n + j] = norm(j);
    }
  return out;
}

struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
  std::size_t fan_in = 0;  // 0 for biases and the log-std vector
};

// All parameters live in one flat array; named blocks index into it.
class PolicyParams {
 public:
  PolicyParams() = default;

  explicit PolicyParams(const NetShape& shape) : shape_(shape) {
    shape_.validate();
    const int ic = shape.in_channels();
    add("conv1.w", kConv1Filters * ic * kConv1Kernel * kConv1Kernel, ic * kConv1Kernel * kConv1Kernel);
    add("conv1.b", kConv1Filters, 0);
    add("conv2.w", kConv2Filters * kConv1Filters * kConv2Kernel * kConv2Kernel,
        kConv1Filters * kConv2Kernel * kConv2Kernel);
    add("conv2.b", kConv2Filters, 0);
    add("fc1.w", kFc1 * shape.flat(), shape.flat());
    add("fc1.b", kFc1, 0);
    add("fc2.w", kFc2 * shape.fc2_in(), shape.fc2_in());
    add("fc2.b", kFc2, 0);
    add("fc3.w", kFc3 * kFc2, kFc2);
    add("fc3.b", kFc3, 0);
    add("mean.w", shape.action_dim * kFc3, kFc3);
    add("mean.b", shape.action_dim, 0);
    add("value.w", kFc3, kFc3);
    add("value.b", 1, 0);
    add("log_std", shape.action_dim, 0);
    data_.assign(total_, 0.0);
  }

  // Uniform fan-in initialization; output heads scaled by 0.01, log-std -0.5.
  static PolicyParams initialized(const NetShape& shape, Rng& rng) {
    PolicyParams p(shape);
    for (const auto& b : p.blocks_) {
      if (b.fan_in == 0) continue;
      double bound = 1.0 / std::sqrt(static_cast<double>(b.fan_in));
      if (b.name == "mean.w" || b.name == "value.w") bound *= 0.01;
      for (std::size_t k = 0; k < b.size; ++k) p.data_[b.offset + k] = uniform(rng, -bound, bound);
    }
    for (auto& v : p.block("log_std")) v = -0.5;
    return p;
  }

  const NetShape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }

  const ParamBlock& info(const std::string& name) const {
    for (const auto& b : blocks_)
      if (b.name == name) return b;
    fail(ErrorKind::shape, "no parameter block '" + name + "'");
  }
  std::span<double> block(const std::string& name) {
    const auto& b = info(name);
    return {data_.data() + b.offset, b.size};
  }
  std::span<const double> block(const std::string& name) const {
    const auto& b = info(name);
    return {data_.data() + b.offset, b.size};
  }

  void clamp_log_std() {
    for (auto& v : block("log_std")) v = std::clamp(v, kLogStdMin, kLogStdMax);
  }

  friend bool operator==(const PolicyParams& a, const PolicyParams& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  void add(const std::string& name, int size, int fan_in) {
    blocks_.push_back({name, total_, static_cast<std::size_t>(size), static_cast<std::size_t>(fan_in)});
    total_ += static_cast<std::size_t>(size);
  }

  NetShape shape_;
  std::vector<ParamBlock> blocks_;
  std::vector<double> data_;
  std::size_t total_ = 0;
};

struct PolicyOutput {
  std::vector<double> mean;
  std::vector<double> log_std;
  double value = 0.0;
};

struct ForwardCache {
  std::vector<double> input;  // in_channels x n x n
  std::vector<double> z1;     // conv1 pre-activation
  std::vector<double> p1;     // pooled ReLU(z1)
  std::vector<int> arg1;      // argmax index into z1 per pooled cell
  std::vector<double> z2;
  std::vector<double> p2;
  std::vector<int> arg2;
  std::vector<double> z_fc1, cat, z_fc2, h2, z_fc3, h3;
};

namespace nn_detail {

// out[o] (+)= sum_c w[o][c] (*) in[c], stride 1, zero padding k/2.
inline void conv_forward(std::span<const double> in, int in_ch, int n, std::span<const double> w,
                         std::span<const double> b, int out_ch, int k, std::span<double> out) {
  const int pad = k / 2;
  const std::size_t plane = static_cast<std::size_t>(n) * n;
  for (int o = 0; o < out_ch; ++o) {
    double* dst = out.data() + o * plane;
    std::fill(dst, dst + plane, b[o]);
    for (int c = 0; c < in_ch; ++c) {
      const double* src = in.data() + c * plane;
      for (int ky = 0; ky < k; ++ky) {
        const int y0 = std::max(0, pad - ky), y1 = std::min(n, n + pad - ky);
        for (int kx = 0; kx < k; ++kx) {
          const double wv = w[((o * in_ch + c) * k + ky) * k + kx];
          const int x0 = std::max(0, pad - kx), x1 = std::min(n, n + pad - kx);
          for (int y = y0; y < y1; ++y) {
            double* row = dst + y * n;
            const double* srow = src + (y + ky - pad) * n + (kx - pad);
            for (int x = x0; x < x1; ++x) row[x] += wv * srow[x];
          }
        }
      }
    }
  }
}

// Accumulates dW, dB and (optionally) d_in from d_out.
inline void conv_backward(std::span<const double> in, int in_ch, int n, std::span<const double> w,
                          int out_ch, int k, std::span<const double> d_out, std::span<double> dw,
                          std::span<double> db, std::span<double> d_in) {
  const int pad = k / 2;
  const std::size_t plane = static_cast<std::size_t>(n) * n;
  for (int o = 0; o < out_ch; ++o) {
    const double* g = d_out.data() + o * plane;
    double bsum = 0.0;
    for (std::size_t t = 0; t < plane; ++t) bsum += g[t];
    db[o] += bsum;
    for (int c = 0; c < in_ch; ++c) {
      const double* src = in.data() + c * plane;
      double* dsrc = d_in.empty() ? nullptr : d_in.data() + c * plane;
      for (int ky = 0; ky < k; ++ky) {
        const int y0 = std::max(0, pad - ky), y1 = std::min(n, n + pad - ky);
        for (int kx = 0; kx < k; ++kx) {
          const std::size_t wi = ((o * in_ch + c) * k + ky) * k + kx;
          const int x0 = std::max(0, pad - kx), x1 = std::min(n, n + pad - kx);
          double acc = 0.0;
          for (int y = y0; y < y1; ++y) {
            const double* grow = g + y * n;
            const double* srow = src + (y + ky - pad) * n + (kx - pad);
            for (int x = x0; x < x1; ++x) acc += grow[x] * srow[x];
          }
          dw[wi] += acc;
          if (dsrc != nullptr) {
            const double wv = w[wi];
            for (int y = y0; y < y1; ++y) {
              const double* grow = g + y * n;
              double* drow = dsrc + (y + ky - pad) * n + (kx - pad);
              for (int x = x0; x < x1; ++x) drow[x] += wv * grow[x];
            }
          }
        }
      }
    }
  }
}

// 2x2 max pool of ReLU(z): the argmax is taken over z (first in row-major
// order on ties) and the pooled value is max(z_max, 0).
inline void relu_pool(std::span<const double> z, int ch, int n, std::span<double> out, std::span<int> arg) {
  const int m = n / 2;
  for (int c = 0; c < ch; ++c)
    for (int y = 0; y < m; ++y)
      for (int x = 0; x < m; ++x) {
        int best = (c * n + 2 * y) * n + 2 * x;
        const int cand[3] = {best + 1, best + n, best + n + 1};
        for (int idx : cand)
          if (z[idx] > z[best]) best = idx;
        const std::size_t o = (static_cast<std::size_t>(c) * m + y) * m + x;
        out[o] = std::max(z[best], 0.0);
        arg[o] = best;
      }
}

inline void dense(std::span<const double> in, std::span<const double> w, std::span<const double> b,
                  std::span<double> out) {
  const std::size_t ni = in.size();
  for (std::size_t o = 0; o < out.size(); ++o) {
    double s = b[o];
    const double* row = w.data() + o * ni;
    for (std::size_t i = 0; i < ni; ++i) s += row[i] * in[i];
    out[o] = s;
  }
}

inline void dense_backward(std::span<const double> in, std::span<const double> w, std::span<const double> d_out,
                           std::span<double> dw, std::span<double> db, std::span<double> d_in) {
  const std::size_t ni = in.size();
  for (std::size_t o = 0; o < d_out.size(); ++o) {
    const double g = d_out[o];
    db[o] += g;
    if (g == 0.0) continue;
    double* drow = dw.data() + o * ni;
    const double* row = w.data() + o * ni;
    for (std::size_t i = 0; i < ni; ++i) drow[i] += g * in[i];
    if (!d_in.empty())
      for (std::size_t i = 0; i < ni; ++i) d_in[i] += g * row[i];
  }
}

inline double relu(double z) { return z > 0.0 ? z : 0.0; }
// Subgradient 0 at exactly 0.
inline double relu_grad(double z) { return z > 0.0 ? 1.0 : 0.0; }

}  // namespace nn_detail

inline void check_observation_shape(const NetShape& s, const Observation& obs) {
  const std::size_t plane = static_cast<std::size_t>(s.n) * s.n;
  if (obs.n != s.n || obs.channels != s.channels || obs.images.size() != plane * s.channels)
    fail(ErrorKind::shape, "tensor 'images' has shape " + std::to_string(obs.channels) + "x" +
                               std::to_string(obs.n) + "x" + std::to_string(obs.n) + ", expected " +
                               std::to_string(s.channels) + "x" + std::to_string(s.n) + "x" +
                               std::to_string(s.n));
  if (static_cast<int>(obs.tool_vec.size()) != s.tool_dim)
    fail(ErrorKind::shape, "tensor 'tool_vec' has length " + std::to_string(obs.tool_vec.size()) +
                               ", expected " + std::to_string(s.tool_dim));
  if (static_cast<int>(obs.extra_vec.size()) != s.extra_dim)
    fail(ErrorKind::shape, "tensor 'extra_vec' has length " + std::to_string(obs.extra_vec.size()) +
                               ", expected " + std::to_string(s.extra_dim));
}

inline PolicyOutput forward(const PolicyParams& params, const Observation& obs, ForwardCache& c) {
  using namespace nn_detail;
  const NetShape& s = params.shape();
  check_observation_shape(s, obs);
  const int n = s.n, n2 = s.n2(), n4 = s.n4();
  const std::size_t plane = static_cast<std::size_t>(n) * n;

  c.input.resize(plane * s.in_channels());
  std::copy(obs.images.begin(), obs.images.end(), c.input.begin());
  static thread_local int coord_n = -1;
  static thread_local std::array<std::vector<double>, 2> coords;
  if (coord_n != n) {
    coords = coord_channels(n);
    coord_n = n;
  }
  std::copy(coords[0].begin(), coords[0].end(), c.input.begin() + plane * s.channels);
  std::copy(coords[1].begin(), coords[1].end(), c.input.begin() + plane * (s.channels + 1));

  c.z1.resize(plane * kConv1Filters);
  conv_forward(c.input, s.in_channels(), n, params.block("conv1.w"), params.block("conv1.b"), kConv1Filters,
               kConv1Kernel, c.z1);
  c.p1.resize(static_cast<std::size_t>(kConv1Filters) * n2 * n2);
  c.arg1.resize(c.p1.size());
  relu_pool(c.z1, kConv1Filters, n, c.p1, c.arg1);

  c.z2.resize(static_cast<std::size_t>(kConv2Filters) * n2 * n2);
  conv_forward(c.p1, kConv1Filters, n2, params.block("conv2.w"), params.block("conv2.b"), kConv2Filters,
               kConv2Kernel, c.z2);
  c.p2.resize(static_cast<std::size_t>(kConv2Filters) * n4 * n4);
  c.arg2.resize(c.p2.size());
  relu_pool(c.z2, kConv2Filters, n2, c.p2, c.arg2);

  c.z_fc1.resize(kFc1);
  dense(c.p2, params.block("fc1.w"), params.block("fc1.b"), c.z_fc1);
  c.cat.resize(s.fc2_in());
  for (int k = 0; k < kFc1; ++k) c.cat[k] = relu(c.z_fc1[k]);
  std::copy(obs.tool_vec.begin(), obs.tool_vec.end(), c.cat.begin() + kFc1);
  std::copy(obs.extra_vec.begin(), obs.extra_vec.end(), c.cat.begin() + kFc1 + s.tool_dim);

  c.z_fc2.resize(kFc2);
  dense(c.cat, params.block("fc2.w"), params.block("fc2.b"), c.z_fc2);
  c.h2.resize(kFc2);
  for (int k = 0; k < kFc2; ++k) c.h2[k] = relu(c.z_fc2[k]);
  c.z_fc3.resize(kFc3);
  dense(c.h2, params.block("fc3.w"), params.block("fc3.b"), c.z_fc3);
  c.h3.resize(kFc3);
  for (int k = 0; k < kFc3; ++k) c.h3[k] = relu(c.z_fc3[k]);

  PolicyOutput out;
  out.mean.resize(s.action_dim);
  dense(c.h3, params.block("mean.w"), params.block("mean.b"), out.mean);
  double v[1];
  dense(c.h3, params.block("value.w"), params.block("value.b"), v);
  out.value = v[0];
  const auto ls = params.block("log_std");
  out.log_std.assign(ls.begin(), ls.end());
  return out;
}

inline PolicyOutput forward(const PolicyParams& params, const Observation& obs) {
  ForwardCache c;
  return forward(params, obs, c);
}

inline std::vector<PolicyOutput> forward_batch(const PolicyParams& params, std::span<const Observation> batch) {
  std::vector<PolicyOutput> out;
  out.reserve(batch.size());
  ForwardCache c;
  for (const auto& o : batch) out.push_back(forward(params, o, c));
  return out;
}

// Reverse pass for one recorded sample. Accumulates into `grad` (same layout
// as params.data()) the gradient of a scalar loss whose partials with
// respect to the outputs are d_mean, d_log_std and d_value.
inline void backward(const PolicyParams& params, const ForwardCache& c, std::span<const double> d_mean,
                     std::span<const double> d_log_std, double d_value, std::vector<double>& grad) {
  using namespace nn_detail;
  const NetShape& s = params.shape();
  require(grad.size() == params.size(), ErrorKind::shape, "gradient buffer size mismatch");
  require(static_cast<int>(d_mean.size()) == s.action_dim && static_cast<int>(d_log_std.size()) == s.action_dim,
          ErrorKind::shape, "output gradient size mismatch");
  auto g = [&](const std::string& name) {
    const auto& b = params.info(name);
    return std::span<double>(grad.data() + b.offset, b.size);
  };
  {
    auto gl = g("log_std");
    for (int k = 0; k < s.action_dim; ++k) gl[k] += d_log_std[k];
  }

  std::vector<double> d_h3(kFc3, 0.0);
  dense_backward(c.h3, params.block("mean.w"), d_mean, g("mean.w"), g("mean.b"), d_h3);
  const double dv[1] = {d_value};
  dense_backward(c.h3, params.block("value.w"), dv, g("value.w"), g("value.b"), d_h3);
  for (int k = 0; k < kFc3; ++k) d_h3[k] *= relu_grad(c.z_fc3[k]);

  std::vector<double> d_h2(kFc2, 0.0);
  dense_backward(c.h2, params.block("fc3.w"), d_h3, g("fc3.w"), g("fc3.b"), d_h2);
  for (int k = 0; k < kFc2; ++k) d_h2[k] *= relu_grad(c.z_fc2[k]);

  std::vector<double> d_cat(s.fc2_in(), 0.0);
  dense_backward(c.cat, params.block("fc2.w"), d_h2, g("fc2.w"), g("fc2.b"), d_cat);
  std::vector<double> d_fc1(kFc1);
  for (int k = 0; k < kFc1; ++k) d_fc1[k] = d_cat[k] * relu_grad(c.z_fc1[k]);

  std::vector<double> d_p2(c.p2.size(), 0.0);
  dense_backward(c.p2, params.block("fc1.w"), d_fc1, g("fc1.w"), g("fc1.b"), d_p2);

  std::vector<double> d_z2(c.z2.size(), 0.0);
  for (std::size_t o = 0; o < d_p2.size(); ++o)
    if (c.z2[c.arg2[o]] > 0.0) d_z2[c.arg2[o]] += d_p2[o];

  std::vector<double> d_p1(c.p1.size(), 0.0);
  conv_backward(c.p1, kConv1Filters, s.n2(), params.block("conv2.w"), kConv2Filters, kConv2Kernel, d_z2,
                g("conv2.w"), g("conv2.b"), d_p1);

  std::vector<double> d_z1(c.z1.size(), 0.0);
  for (std::size_t o = 0; o < d_p1.size(); ++o)
    if (c.z1[c.arg1[o]] > 0.0) d_z1[c.arg1[o]] += d_p1[o];

  conv_backward(c.input, s.in_channels(), s.n, params.block("conv1.w"), kConv1Filters, kConv1Kernel, d_z1,
                g("conv1.w"), g("conv1.b"), {});
}

}  // namespace amorph
