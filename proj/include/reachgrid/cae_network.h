/* Copyright 2026 The Reachgrid Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Fully-convolutional autoencoder on C x S x S inputs, templated on the
// scalar type. Feature maps are C x (S*S) matrices with column y*S + x,
// which is exactly the memory layout of an (i, j, channel) row-major
// summary tensor.
//
// The encoder also propagates a tangent direction (forward mode), giving
// the Jacobian-vector product J v used by the contractive penalty. All
// parameters live in one flat vector in declaration order: encoder convs
// (W, b), encoder linear, decoder linear, decoder convs.

#ifndef REACHGRID_CAE_NETWORK_H_
#define REACHGRID_CAE_NETWORK_H_

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "reachgrid/errors.h"

namespace reachgrid {

enum class Activation { kLeakyRelu, kIdentity };

struct CaeConfig {
  int in_channels = 6;
  int side = 25;
  std::vector<int> conv_channels = {16, 32, 64};
  int kernel = 3;
  int stride = 2;
  int d_r = 16;
  double lambda_c = 0.1;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  int batch_size = 32;
  int epochs = 100;
  std::uint64_t seed = 42;
  Activation activation = Activation::kLeakyRelu;
  double leak = 0.1;
  bool output_sigmoid = true;

  int input_size() const { return in_channels * side * side; }
  void validate() const;
};

// Deterministic generator with platform-independent derived distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next() { return engine_(); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double gaussian() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * uniform());
  }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }

 private:
  std::mt19937_64 engine_;
};

template <typename Scalar>
class CaeNetwork {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using MatrixMap = Eigen::Map<Matrix>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;

  struct Loss {
    Scalar recon = 0;
    Scalar contractive = 0;  // mean estimate of ||J||_F^2, unweighted
    Scalar total = 0;        // recon + lambda_c * contractive
  };

  explicit CaeNetwork(const CaeConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    build_layout();
    params_ = Vector::Zero(param_count_);
  }

  const CaeConfig& config() const { return cfg_; }
  Vector& params() { return params_; }
  const Vector& params() const { return params_; }
  Eigen::Index param_count() const { return param_count_; }
  int d_r() const { return cfg_.d_r; }

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
  void init_params(std::uint64_t seed) {
    Rng rng(seed);
    params_.setZero();
    auto fill = [&](Eigen::Index off, Eigen::Index n, int fan_in) {
      const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (Eigen::Index i = 0; i < n; ++i) {
        params_[off + i] = static_cast<Scalar>(rng.uniform(-a, a));
      }
    };
    for (const Conv& c : enc_) fill(c.w_off, c.out_c * c.fan_in(), c.fan_in());
    fill(enc_lin_.w_off, enc_lin_.out * enc_lin_.in, enc_lin_.in);
    fill(dec_lin_.w_off, dec_lin_.out * dec_lin_.in, dec_lin_.in);
    for (const Conv& c : dec_) fill(c.w_off, c.out_c * c.fan_in(), c.fan_in());
  }

  Vector encode(const Matrix& x) const {
    EncoderTrace t;
    forward_encoder(x, nullptr, t);
    return t.embedding;
  }

  Matrix decode(const Vector& e) const {
    DecoderTrace t;
    forward_decoder(e, t);
    return t.output;
  }

  Matrix reconstruct(const Matrix& x) const { return decode(encode(x)); }

  // Directional derivative of the encoder at x along v.
  Vector jvp(const Matrix& x, const Matrix& v) const {
    EncoderTrace t;
    forward_encoder(x, &v, t);
    return t.tangent_embedding;
  }

  // Mean batch objective with fixed probe directions (one per example,
  // ignored when lambda_c == 0). When `grad` is non-null it receives the
  // exact gradient with respect to params().
  Loss evaluate(std::span<const Matrix> xs, std::span<const Matrix> probes,
                Vector* grad) const {
    const bool contractive = cfg_.lambda_c > 0.0;
    if (contractive && probes.size() != xs.size()) {
      throw ParameterError("one probe direction per example is required");
    }
    if (grad) grad->setZero(param_count_);
    Loss loss;
    const Scalar batch = static_cast<Scalar>(xs.size());
    const Scalar dim = static_cast<Scalar>(cfg_.input_size());
    const Scalar lambda = static_cast<Scalar>(cfg_.lambda_c);
    for (std::size_t n = 0; n < xs.size(); ++n) {
      EncoderTrace et;
      forward_encoder(xs[n], contractive ? &probes[n] : nullptr, et);
      DecoderTrace dt;
      forward_decoder(et.embedding, dt);
      const Matrix residual = dt.output - xs[n];
      loss.recon += residual.squaredNorm() / (batch * dim);
      Scalar penalty = 0;
      if (contractive) {
        penalty = dim * et.tangent_embedding.squaredNorm();
        loss.contractive += penalty / batch;
      }
      if (!grad) continue;
      const Matrix g_out = residual * (Scalar(2) / (batch * dim));
      const Vector g_embedding = backward_decoder(dt, g_out, *grad);
      backward_encoder(et, g_embedding, *grad);
      if (contractive) {
        const Vector g_tangent =
            et.tangent_embedding * (Scalar(2) * dim * lambda / batch);
        backward_tangent(et, g_tangent, *grad);
      }
    }
    loss.total = loss.recon + lambda * loss.contractive;
    return loss;
  }

 private:
  struct Conv {
    int in_c, out_c, in_s, out_s, k, stride, pad;
    Eigen::Index w_off, b_off;
    int fan_in() const { return in_c * k * k; }
  };
  struct Linear {
    int in, out;
    Eigen::Index w_off, b_off;
  };

  struct EncoderTrace {
    std::vector<Matrix> cols, z, a;        // per conv layer; a[0] is the input
    std::vector<Matrix> tcols, tz, ta;     // tangent path
    Vector pooled, tangent_pooled;
    Vector embedding, tangent_embedding;
    bool has_tangent = false;
  };
  struct DecoderTrace {
    Vector embedding, lin_z;
    Matrix lin_a;                          // C_L x S_L^2
    std::vector<Matrix> up, cols, z, a;    // per decoder conv, in apply order
    Matrix output;
  };

  void build_layout() {
    Eigen::Index off = 0;
    auto take = [&](Eigen::Index n) {
      const Eigen::Index at = off;
      off += n;
      return at;
    };
    const int pad = cfg_.kernel / 2;
    std::vector<int> sizes{cfg_.side};
    std::vector<int> chans{cfg_.in_channels};
    for (int c : cfg_.conv_channels) {
      const int s = (sizes.back() + 2 * pad - cfg_.kernel) / cfg_.stride + 1;
      if (s < 1) throw ParameterError("input too small for the conv stack");
      Conv conv{chans.back(), c, sizes.back(), s, cfg_.kernel, cfg_.stride, pad, 0, 0};
      conv.w_off = take(Eigen::Index{conv.out_c} * conv.fan_in());
      conv.b_off = take(conv.out_c);
      enc_.push_back(conv);
      sizes.push_back(s);
      chans.push_back(c);
    }
    enc_lin_ = {chans.back(), cfg_.d_r, 0, 0};
    enc_lin_.w_off = take(Eigen::Index{enc_lin_.out} * enc_lin_.in);
    enc_lin_.b_off = take(enc_lin_.out);
    bottleneck_c_ = chans.back();
    bottleneck_s_ = sizes.back();
    dec_lin_ = {cfg_.d_r, bottleneck_c_ * bottleneck_s_ * bottleneck_s_, 0, 0};
    dec_lin_.w_off = take(Eigen::Index{dec_lin_.out} * dec_lin_.in);
    dec_lin_.b_off = take(dec_lin_.out);
    for (std::size_t l = enc_.size(); l-- > 0;) {
      // Upsample to the encoder's input size of layer l, then a stride-1
      // conv back to its channel count.
      Conv conv{chans[l + 1], chans[l], sizes[l], sizes[l], cfg_.kernel, 1, pad, 0, 0};
      conv.w_off = take(Eigen::Index{conv.out_c} * conv.fan_in());
      conv.b_off = take(conv.out_c);
      dec_.push_back(conv);
    }
    param_count_ = off;
  }

  ConstMatrixMap weights(const Conv& c) const {
    return ConstMatrixMap(params_.data() + c.w_off, c.out_c, c.fan_in());
  }
  auto bias(const Conv& c) const { return params_.segment(c.b_off, c.out_c); }
  ConstMatrixMap weights(const Linear& l) const {
    return ConstMatrixMap(params_.data() + l.w_off, l.out, l.in);
  }
  auto bias(const Linear& l) const { return params_.segment(l.b_off, l.out); }

  // Rows: (channel, ky, kx); columns: output pixels.
  static Matrix im2col(const Matrix& in, const Conv& c, int in_s, int out_s) {
    Matrix cols = Matrix::Zero(c.fan_in(), Eigen::Index{out_s} * out_s);
    for (int oy = 0; oy < out_s; ++oy) {
      for (int ox = 0; ox < out_s; ++ox) {
        const Eigen::Index col = Eigen::Index{oy} * out_s + ox;
        for (int ky = 0; ky < c.k; ++ky) {
          const int iy = oy * c.stride + ky - c.pad;
          if (iy < 0 || iy >= in_s) continue;
          for (int kx = 0; kx < c.k; ++kx) {
            const int ix = ox * c.stride + kx - c.pad;
            if (ix < 0 || ix >= in_s) continue;
            const Eigen::Index pix = Eigen::Index{iy} * in_s + ix;
            for (int ch = 0; ch < c.in_c; ++ch) {
              cols((ch * c.k + ky) * c.k + kx, col) = in(ch, pix);
            }
          }
        }
      }
    }
    return cols;
  }

  static Matrix col2im(const Matrix& cols, const Conv& c, int in_s, int out_s) {
    Matrix in = Matrix::Zero(c.in_c, Eigen::Index{in_s} * in_s);
    for (int oy = 0; oy < out_s; ++oy) {
      for (int ox = 0; ox < out_s; ++ox) {
        const Eigen::Index col = Eigen::Index{oy} * out_s + ox;
        for (int ky = 0; ky < c.k; ++ky) {
          const int iy = oy * c.stride + ky - c.pad;
          if (iy < 0 || iy >= in_s) continue;
          for (int kx = 0; kx < c.k; ++kx) {
            const int ix = ox * c.stride + kx - c.pad;
            if (ix < 0 || ix >= in_s) continue;
            const Eigen::Index pix = Eigen::Index{iy} * in_s + ix;
            for (int ch = 0; ch < c.in_c; ++ch) {
              in(ch, pix) += cols((ch * c.k + ky) * c.k + kx, col);
            }
          }
        }
      }
    }
    return in;
  }

  static int nearest(int o, int in_s, int out_s) {
    return static_cast<int>(static_cast<long long>(o) * in_s / out_s);
  }

  static Matrix upsample(const Matrix& in, int in_s, int out_s) {
    Matrix out(in.rows(), Eigen::Index{out_s} * out_s);
    for (int y = 0; y < out_s; ++y) {
      const int sy = nearest(y, in_s, out_s);
      for (int x = 0; x < out_s; ++x) {
        out.col(Eigen::Index{y} * out_s + x) =
            in.col(Eigen::Index{sy} * in_s + nearest(x, in_s, out_s));
      }
    }
    return out;
  }

  static Matrix upsample_backward(const Matrix& g, int in_s, int out_s) {
    Matrix gin = Matrix::Zero(g.rows(), Eigen::Index{in_s} * in_s);
    for (int y = 0; y < out_s; ++y) {
      const int sy = nearest(y, in_s, out_s);
      for (int x = 0; x < out_s; ++x) {
        gin.col(Eigen::Index{sy} * in_s + nearest(x, in_s, out_s)) +=
            g.col(Eigen::Index{y} * out_s + x);
      }
    }
    return gin;
  }

  template <typename Derived>
  Matrix activate(const Eigen::MatrixBase<Derived>& z) const {
    if (cfg_.activation == Activation::kIdentity) return z;
    const Scalar leak = static_cast<Scalar>(cfg_.leak);
    return z.unaryExpr([leak](Scalar v) { return v > 0 ? v : leak * v; });
  }

  // Multiplies g by the activation slope at z.
  template <typename Derived>
  Matrix slope_times(const Eigen::MatrixBase<Derived>& z, const Matrix& g) const {
    if (cfg_.activation == Activation::kIdentity) return g;
    const Scalar leak = static_cast<Scalar>(cfg_.leak);
    return z.binaryExpr(g, [leak](Scalar zv, Scalar gv) {
      return zv > 0 ? gv : leak * gv;
    });
  }

  void forward_encoder(const Matrix& x, const Matrix* probe,
                       EncoderTrace& t) const {
    if (x.rows() != cfg_.in_channels ||
        x.cols() != Eigen::Index{cfg_.side} * cfg_.side) {
      throw ParameterError("encoder input has the wrong shape");
    }
    t.has_tangent = probe != nullptr;
    t.a.assign(1, x);
    if (probe) t.ta.assign(1, *probe);
    for (const Conv& c : enc_) {
      t.cols.push_back(im2col(t.a.back(), c, c.in_s, c.out_s));
      Matrix z = weights(c) * t.cols.back();
      z.colwise() += bias(c);
      t.a.push_back(activate(z));
      if (probe) {
        t.tcols.push_back(im2col(t.ta.back(), c, c.in_s, c.out_s));
        Matrix tz = weights(c) * t.tcols.back();
        t.ta.push_back(slope_times(z, tz));
        t.tz.push_back(std::move(tz));
      }
      t.z.push_back(std::move(z));
    }
    t.pooled = t.a.back().rowwise().mean();
    t.embedding = weights(enc_lin_) * t.pooled + bias(enc_lin_);
    if (probe) {
      t.tangent_pooled = t.ta.back().rowwise().mean();
      t.tangent_embedding = weights(enc_lin_) * t.tangent_pooled;
    }
  }

  void forward_decoder(const Vector& e, DecoderTrace& t) const {
    t.embedding = e;
    t.lin_z = weights(dec_lin_) * e + bias(dec_lin_);
    // lin_z is laid out channel-major: bottleneck_c x S_L^2, column-major.
    const Matrix z = ConstMatrixMap(t.lin_z.data(), bottleneck_c_,
                                    Eigen::Index{bottleneck_s_} * bottleneck_s_);
    t.lin_a = activate(z);
    const Matrix* current = &t.lin_a;
    int current_s = bottleneck_s_;
    for (std::size_t l = 0; l < dec_.size(); ++l) {
      const Conv& c = dec_[l];
      t.up.push_back(upsample(*current, current_s, c.in_s));
      t.cols.push_back(im2col(t.up.back(), c, c.in_s, c.out_s));
      Matrix zl = weights(c) * t.cols.back();
      zl.colwise() += bias(c);
      if (l + 1 < dec_.size()) {
        t.a.push_back(activate(zl));
      } else if (cfg_.output_sigmoid) {
        t.a.push_back(zl.unaryExpr(
            [](Scalar v) { return Scalar(1) / (Scalar(1) + std::exp(-v)); }));
      } else {
        t.a.push_back(zl);
      }
      t.z.push_back(std::move(zl));
      current = &t.a.back();
      current_s = c.out_s;
    }
    t.output = t.a.back();
  }

  void conv_backward(const Conv& c, const Matrix& cols, const Matrix& gz,
                     Vector& grad, bool with_bias) const {
    MatrixMap(grad.data() + c.w_off, c.out_c, c.fan_in()).noalias() +=
        gz * cols.transpose();
    if (with_bias) grad.segment(c.b_off, c.out_c) += gz.rowwise().sum();
  }

  // Returns the gradient with respect to the embedding.
  Vector backward_decoder(const DecoderTrace& t, const Matrix& g_out,
                          Vector& grad) const {
    Matrix g = g_out;
    for (std::size_t l = dec_.size(); l-- > 0;) {
      const Conv& c = dec_[l];
      Matrix gz;
      if (l + 1 == dec_.size()) {
        gz = cfg_.output_sigmoid
                 ? Matrix(g.cwiseProduct(
                       t.a[l].unaryExpr([](Scalar y) { return y * (Scalar(1) - y); })))
                 : g;
      } else {
        gz = slope_times(t.z[l], g);
      }
      conv_backward(c, t.cols[l], gz, grad, true);
      const Matrix g_up =
          col2im(weights(c).transpose() * gz, c, c.in_s, c.out_s);
      const int prev_s = l == 0 ? bottleneck_s_ : dec_[l - 1].out_s;
      g = upsample_backward(g_up, prev_s, c.in_s);
    }
    const Matrix lin_z = ConstMatrixMap(t.lin_z.data(), bottleneck_c_,
                                        Eigen::Index{bottleneck_s_} * bottleneck_s_);
    const Matrix g_lin = slope_times(lin_z, g);
    const Eigen::Map<const Vector> g_lin_vec(g_lin.data(), g_lin.size());
    MatrixMap(grad.data() + dec_lin_.w_off, dec_lin_.out, dec_lin_.in).noalias() +=
        g_lin_vec * t.embedding.transpose();
    grad.segment(dec_lin_.b_off, dec_lin_.out) += g_lin_vec;
    return weights(dec_lin_).transpose() * g_lin_vec;
  }

  void backward_encoder(const EncoderTrace& t, const Vector& g_embedding,
                        Vector& grad) const {
    MatrixMap(grad.data() + enc_lin_.w_off, enc_lin_.out, enc_lin_.in).noalias() +=
        g_embedding * t.pooled.transpose();
    grad.segment(enc_lin_.b_off, enc_lin_.out) += g_embedding;
    const Vector g_pooled = weights(enc_lin_).transpose() * g_embedding;
    Matrix g = g_pooled.replicate(1, t.a.back().cols()) /
               static_cast<Scalar>(t.a.back().cols());
    for (std::size_t l = enc_.size(); l-- > 0;) {
      const Conv& c = enc_[l];
      const Matrix gz = slope_times(t.z[l], g);
      conv_backward(c, t.cols[l], gz, grad, true);
      if (l > 0) g = col2im(weights(c).transpose() * gz, c, c.in_s, c.out_s);
    }
  }

  // Gradient of a loss on the tangent embedding. The activation slopes are
  // piecewise constant, so only the tangent path carries gradient.
  void backward_tangent(const EncoderTrace& t, const Vector& g_tangent,
                        Vector& grad) const {
    MatrixMap(grad.data() + enc_lin_.w_off, enc_lin_.out, enc_lin_.in).noalias() +=
        g_tangent * t.tangent_pooled.transpose();
    const Vector g_pooled = weights(enc_lin_).transpose() * g_tangent;
    Matrix g = g_pooled.replicate(1, t.ta.back().cols()) /
               static_cast<Scalar>(t.ta.back().cols());
    for (std::size_t l = enc_.size(); l-- > 0;) {
      const Conv& c = enc_[l];
      const Matrix gz = slope_times(t.z[l], g);
      conv_backward(c, t.tcols[l], gz, grad, false);
      if (l > 0) g = col2im(weights(c).transpose() * gz, c, c.in_s, c.out_s);
    }
  }

  CaeConfig cfg_;
  std::vector<Conv> enc_;
  std::vector<Conv> dec_;
  Linear enc_lin_{};
  Linear dec_lin_{};
  int bottleneck_c_ = 0;
  int bottleneck_s_ = 0;
  Eigen::Index param_count_ = 0;
  Vector params_;
};

// Random unit direction in input space.
template <typename Scalar>
typename CaeNetwork<Scalar>::Matrix random_unit_direction(const CaeConfig& cfg,
                                                          Rng& rng) {
  using Matrix = typename CaeNetwork<Scalar>::Matrix;
  Matrix v(cfg.in_channels, Eigen::Index{cfg.side} * cfg.side);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v.data()[i] = static_cast<Scalar>(rng.gaussian());
  }
  v /= v.norm();
  return v;
}

}  // namespace reachgrid

#endif  // REACHGRID_CAE_NETWORK_H_
