#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dpiqn/gemm.hpp"
#include "dpiqn/tensor.hpp"

namespace dpiqn {

enum class LayerKind { Conv2D, FullyConnected, LSTM, ReLU, Softmax };

struct ConvSpec {
  int in_c = 0, out_c = 0, kh = 0, kw = 0, stride = 1;
  int out_h(int h) const { return (h - kh) / stride + 1; }
  int out_w(int w) const { return (w - kw) / stride + 1; }
  int patch() const { return in_c * kh * kw; }
};

// Shape totality: output shape from spec and input shape alone.
inline std::vector<int64_t> conv_output_shape(const ConvSpec& s, const std::vector<int64_t>& in) {
  DPIQN_CHECK(in.size() == 4 && in[1] == s.in_c && in[2] >= s.kh && in[3] >= s.kw,
              "conv input shape ", shape_str(in), " incompatible with spec (in_c=", s.in_c,
              ", k=", s.kh, "x", s.kw, ")");
  return {in[0], s.out_c, s.out_h(static_cast<int>(in[2])), s.out_w(static_cast<int>(in[3]))};
}

template <typename T>
struct ConvCache {
  std::vector<int64_t> in_shape;
  Tensor<T> cols;  // (N*OH*OW, in_c*kh*kw)
};

template <typename T>
void im2col(const ConvSpec& s, const Tensor<T>& in, Tensor<T>& cols) {
  const int n = static_cast<int>(in.dim(0)), c = static_cast<int>(in.dim(1));
  const int h = static_cast<int>(in.dim(2)), w = static_cast<int>(in.dim(3));
  const int oh = s.out_h(h), ow = s.out_w(w), patch = s.patch();
  const T* src = in.ptr();
  T* dst = cols.ptr();
  for (int b = 0; b < n; ++b) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        T* row = dst + (static_cast<int64_t>(b) * oh * ow + oy * ow + ox) * patch;
        for (int ic = 0; ic < c; ++ic) {
          const T* plane = src + (static_cast<int64_t>(b) * c + ic) * h * w;
          for (int ky = 0; ky < s.kh; ++ky) {
            const T* line = plane + (oy * s.stride + ky) * w + ox * s.stride;
            for (int kx = 0; kx < s.kw; ++kx) *row++ = line[kx];
          }
        }
      }
    }
  }
}

// input (N, C, H, W), weight (out_c, C*kh*kw), bias (out_c) -> (N, out_c, OH, OW)
template <typename T>
Tensor<T> conv_forward(const ConvSpec& s, const Tensor<T>& in, const Tensor<T>& w,
                       const Tensor<T>& b, ConvCache<T>* cache) {
  auto out_shape = conv_output_shape(s, in.shape);
  DPIQN_CHECK(w.shape == std::vector<int64_t>({s.out_c, s.patch()}), "conv weight shape ",
              shape_str(w.shape), " expected ", shape_str({s.out_c, s.patch()}));
  const int n = static_cast<int>(in.dim(0));
  const int oh = static_cast<int>(out_shape[2]), ow = static_cast<int>(out_shape[3]);
  const int pixels = n * oh * ow, patch = s.patch();

  Tensor<T> cols({pixels, patch});
  im2col(s, in, cols);

  Tensor<T> mat({pixels, s.out_c});
  gemm<T>(false, true, pixels, s.out_c, patch, T(1), cols.ptr(), patch, w.ptr(), patch, T(0),
          mat.ptr(), s.out_c);

  Tensor<T> out(out_shape);
  const int plane = oh * ow;
  for (int bi = 0; bi < n; ++bi) {
    for (int p = 0; p < plane; ++p) {
      const T* row = mat.ptr() + (static_cast<int64_t>(bi) * plane + p) * s.out_c;
      T* dst = out.ptr() + static_cast<int64_t>(bi) * s.out_c * plane + p;
      for (int oc = 0; oc < s.out_c; ++oc) dst[static_cast<int64_t>(oc) * plane] = row[oc] + b[oc];
    }
  }
  if (cache) {
    cache->in_shape = in.shape;
    cache->cols = std::move(cols);
  }
  return out;
}

// Returns grad_input unless skip_grad_input (first layer).
template <typename T>
Tensor<T> conv_backward(const ConvSpec& s, const ConvCache<T>& cache, const Tensor<T>& w,
                        const Tensor<T>& grad_out, Tensor<T>& grad_w, Tensor<T>& grad_b,
                        bool skip_grad_input = false) {
  DPIQN_CHECK(!cache.in_shape.empty(), "conv backward requires a cache from forward");
  const int n = static_cast<int>(cache.in_shape[0]), c = static_cast<int>(cache.in_shape[1]);
  const int h = static_cast<int>(cache.in_shape[2]), wd = static_cast<int>(cache.in_shape[3]);
  const int oh = s.out_h(h), ow = s.out_w(wd), plane = oh * ow;
  const int pixels = n * plane, patch = s.patch();
  DPIQN_CHECK(grad_out.shape == std::vector<int64_t>({n, s.out_c, oh, ow}), "conv grad shape ",
              shape_str(grad_out.shape), " expected ", shape_str({n, s.out_c, oh, ow}));

  // (pixels, out_c) view of grad_out
  Tensor<T> gmat({pixels, s.out_c});
  for (int bi = 0; bi < n; ++bi) {
    for (int oc = 0; oc < s.out_c; ++oc) {
      const T* src = grad_out.ptr() + (static_cast<int64_t>(bi) * s.out_c + oc) * plane;
      T* dst = gmat.ptr() + static_cast<int64_t>(bi) * plane * s.out_c + oc;
      for (int p = 0; p < plane; ++p) dst[static_cast<int64_t>(p) * s.out_c] = src[p];
    }
  }

  gemm<T>(true, false, s.out_c, patch, pixels, T(1), gmat.ptr(), s.out_c, cache.cols.ptr(), patch,
          T(1), grad_w.ptr(), patch);
  for (int p = 0; p < pixels; ++p) {
    const T* row = gmat.ptr() + static_cast<int64_t>(p) * s.out_c;
    for (int oc = 0; oc < s.out_c; ++oc) grad_b[oc] += row[oc];
  }

  if (skip_grad_input) return Tensor<T>();

  Tensor<T> dcols({pixels, patch});
  gemm<T>(false, false, pixels, patch, s.out_c, T(1), gmat.ptr(), s.out_c, w.ptr(), patch, T(0),
          dcols.ptr(), patch);

  Tensor<T> din(cache.in_shape, T(0));
  T* dst = din.ptr();
  const T* src = dcols.ptr();
  for (int b = 0; b < n; ++b) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const T* row = src + (static_cast<int64_t>(b) * plane + oy * ow + ox) * patch;
        for (int ic = 0; ic < c; ++ic) {
          T* pl = dst + (static_cast<int64_t>(b) * c + ic) * h * wd;
          for (int ky = 0; ky < s.kh; ++ky) {
            T* line = pl + (oy * s.stride + ky) * wd + ox * s.stride;
            for (int kx = 0; kx < s.kw; ++kx) line[kx] += *row++;
          }
        }
      }
    }
  }
  return din;
}

template <typename T>
struct FcCache {
  Tensor<T> input;  // (N, D)
};

// input (N, D), weight (D, M), bias (M) -> (N, M)
template <typename T>
Tensor<T> fc_forward(const Tensor<T>& in, const Tensor<T>& w, const Tensor<T>& b,
                     FcCache<T>* cache) {
  DPIQN_CHECK(in.shape.size() == 2 && w.shape.size() == 2 && in.dim(1) == w.dim(0),
              "fc input shape ", shape_str(in.shape), " incompatible with weight ",
              shape_str(w.shape));
  const int n = static_cast<int>(in.dim(0)), d = static_cast<int>(in.dim(1)),
            m = static_cast<int>(w.dim(1));
  Tensor<T> out({n, m});
  gemm<T>(false, false, n, m, d, T(1), in.ptr(), d, w.ptr(), m, T(0), out.ptr(), m);
  for (int i = 0; i < n; ++i) {
    T* row = out.ptr() + static_cast<int64_t>(i) * m;
    for (int j = 0; j < m; ++j) row[j] += b[j];
  }
  if (cache) cache->input = in;
  return out;
}

template <typename T>
Tensor<T> fc_backward(const FcCache<T>& cache, const Tensor<T>& w, const Tensor<T>& grad_out,
                      Tensor<T>& grad_w, Tensor<T>& grad_b, bool skip_grad_input = false) {
  const int n = static_cast<int>(cache.input.dim(0)), d = static_cast<int>(cache.input.dim(1)),
            m = static_cast<int>(w.dim(1));
  DPIQN_CHECK(grad_out.shape == std::vector<int64_t>({n, m}), "fc grad shape ",
              shape_str(grad_out.shape), " expected ", shape_str({n, m}));
  gemm<T>(true, false, d, m, n, T(1), cache.input.ptr(), d, grad_out.ptr(), m, T(1), grad_w.ptr(),
          m);
  for (int i = 0; i < n; ++i) {
    const T* row = grad_out.ptr() + static_cast<int64_t>(i) * m;
    for (int j = 0; j < m; ++j) grad_b[j] += row[j];
  }
  if (skip_grad_input) return Tensor<T>();
  Tensor<T> din({n, d});
  gemm<T>(false, true, n, d, m, T(1), grad_out.ptr(), m, w.ptr(), m, T(0), din.ptr(), d);
  return din;
}

template <typename T>
struct ReluCache {
  Tensor<T> input;
};

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& in, ReluCache<T>* cache) {
  Tensor<T> out(in.shape);
  for (int64_t i = 0; i < in.numel(); ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
  if (cache) cache->input = in;
  return out;
}

template <typename T>
Tensor<T> relu_backward(const ReluCache<T>& cache, const Tensor<T>& grad_out) {
  DPIQN_CHECK(cache.input.same_shape(grad_out), "relu grad shape ", shape_str(grad_out.shape),
              " expected ", shape_str(cache.input.shape));
  Tensor<T> din(grad_out.shape);
  for (int64_t i = 0; i < grad_out.numel(); ++i)
    din[i] = cache.input[i] > T(0) ? grad_out[i] : T(0);
  return din;
}

// Row-wise softmax over the last axis of a (N, K) tensor.
template <typename T>
Tensor<T> softmax_forward(const Tensor<T>& in) {
  DPIQN_CHECK(in.shape.size() == 2, "softmax expects (N,K), got ", shape_str(in.shape));
  const int n = static_cast<int>(in.dim(0)), k = static_cast<int>(in.dim(1));
  Tensor<T> out(in.shape);
  for (int i = 0; i < n; ++i) {
    const T* x = in.ptr() + static_cast<int64_t>(i) * k;
    T* y = out.ptr() + static_cast<int64_t>(i) * k;
    T mx = x[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, x[j]);
    T sum = 0;
    for (int j = 0; j < k; ++j) {
      y[j] = std::exp(x[j] - mx);
      sum += y[j];
    }
    for (int j = 0; j < k; ++j) y[j] /= sum;
  }
  return out;
}

// General softmax Jacobian product; probs from softmax_forward.
template <typename T>
Tensor<T> softmax_backward(const Tensor<T>& probs, const Tensor<T>& grad_out) {
  DPIQN_CHECK(probs.same_shape(grad_out), "softmax grad shape ", shape_str(grad_out.shape),
              " expected ", shape_str(probs.shape));
  const int n = static_cast<int>(probs.dim(0)), k = static_cast<int>(probs.dim(1));
  Tensor<T> din(probs.shape);
  for (int i = 0; i < n; ++i) {
    const T* p = probs.ptr() + static_cast<int64_t>(i) * k;
    const T* g = grad_out.ptr() + static_cast<int64_t>(i) * k;
    T dot = 0;
    for (int j = 0; j < k; ++j) dot += p[j] * g[j];
    T* d = din.ptr() + static_cast<int64_t>(i) * k;
    for (int j = 0; j < k; ++j) d[j] = p[j] * (g[j] - dot);
  }
  return din;
}

struct LstmSpec {
  int input_dim = 0, hidden = 0;
  // gate order inside the 4H axis: input, forget, cell, output
};

template <typename T>
struct LstmState {
  Tensor<T> h, c;  // (N, H) each
  static LstmState zero(int n, int hidden) {
    LstmState s;
    s.h = Tensor<T>({n, hidden}, T(0));
    s.c = Tensor<T>({n, hidden}, T(0));
    return s;
  }
};

template <typename T>
struct LstmStepCache {
  Tensor<T> x, h_prev, c_prev;
  Tensor<T> i, f, g, o, tanh_c;  // post-activation
};

template <typename T>
inline T sigmoid(T v) {
  return T(1) / (T(1) + std::exp(-v));
}

// x (N, D), weights wx (D, 4H), wh (H, 4H), b (4H). Returns new state.
template <typename T>
LstmState<T> lstm_step(const LstmSpec& s, const Tensor<T>& x, const LstmState<T>& prev,
                       const Tensor<T>& wx, const Tensor<T>& wh, const Tensor<T>& b,
                       LstmStepCache<T>* cache) {
  const int n = static_cast<int>(x.dim(0)), d = static_cast<int>(x.dim(1)), hid = s.hidden;
  DPIQN_CHECK(d == s.input_dim, "lstm input shape ", shape_str(x.shape), " expected (*,",
              s.input_dim, ")");
  Tensor<T> z({n, 4 * hid});
  gemm<T>(false, false, n, 4 * hid, d, T(1), x.ptr(), d, wx.ptr(), 4 * hid, T(0), z.ptr(), 4 * hid);
  gemm<T>(false, false, n, 4 * hid, hid, T(1), prev.h.ptr(), hid, wh.ptr(), 4 * hid, T(1), z.ptr(),
          4 * hid);

  LstmState<T> next;
  next.h = Tensor<T>({n, hid});
  next.c = Tensor<T>({n, hid});
  Tensor<T> gi({n, hid}), gf({n, hid}), gg({n, hid}), go({n, hid}), tc({n, hid});
  for (int r = 0; r < n; ++r) {
    const T* zr = z.ptr() + static_cast<int64_t>(r) * 4 * hid;
    const T* cp = prev.c.ptr() + static_cast<int64_t>(r) * hid;
    int64_t off = static_cast<int64_t>(r) * hid;
    for (int j = 0; j < hid; ++j) {
      T iv = sigmoid(zr[j] + b[j]);
      T fv = sigmoid(zr[hid + j] + b[hid + j]);
      T gv = std::tanh(zr[2 * hid + j] + b[2 * hid + j]);
      T ov = sigmoid(zr[3 * hid + j] + b[3 * hid + j]);
      T cv = fv * cp[j] + iv * gv;
      T tv = std::tanh(cv);
      gi[off + j] = iv;
      gf[off + j] = fv;
      gg[off + j] = gv;
      go[off + j] = ov;
      tc[off + j] = tv;
      next.c[off + j] = cv;
      next.h[off + j] = ov * tv;
    }
  }
  if (cache) {
    cache->x = x;
    cache->h_prev = prev.h;
    cache->c_prev = prev.c;
    cache->i = std::move(gi);
    cache->f = std::move(gf);
    cache->g = std::move(gg);
    cache->o = std::move(go);
    cache->tanh_c = std::move(tc);
  }
  return next;
}

// One step of backprop through time. grad_h/grad_c are gradients flowing into
// (h_t, c_t); outputs gradients for (x_t, h_{t-1}, c_{t-1}) and accumulates
// parameter gradients.
template <typename T>
void lstm_step_backward(const LstmSpec& s, const LstmStepCache<T>& cache, const Tensor<T>& wx,
                        const Tensor<T>& wh, const Tensor<T>& grad_h, const Tensor<T>& grad_c,
                        Tensor<T>& grad_wx, Tensor<T>& grad_wh, Tensor<T>& grad_b,
                        Tensor<T>& grad_x, Tensor<T>& grad_h_prev, Tensor<T>& grad_c_prev) {
  const int n = static_cast<int>(cache.x.dim(0)), d = s.input_dim, hid = s.hidden;
  Tensor<T> dz({n, 4 * hid});
  grad_c_prev = Tensor<T>({n, hid});
  for (int r = 0; r < n; ++r) {
    int64_t off = static_cast<int64_t>(r) * hid;
    T* dzr = dz.ptr() + static_cast<int64_t>(r) * 4 * hid;
    for (int j = 0; j < hid; ++j) {
      T i = cache.i[off + j], f = cache.f[off + j], g = cache.g[off + j], o = cache.o[off + j];
      T tc = cache.tanh_c[off + j];
      T dh = grad_h[off + j];
      T dc = grad_c[off + j] + dh * o * (T(1) - tc * tc);
      T di = dc * g, df = dc * cache.c_prev[off + j], dg = dc * i, dov = dh * tc;
      dzr[j] = di * i * (T(1) - i);
      dzr[hid + j] = df * f * (T(1) - f);
      dzr[2 * hid + j] = dg * (T(1) - g * g);
      dzr[3 * hid + j] = dov * o * (T(1) - o);
      grad_c_prev[off + j] = dc * f;
    }
  }
  for (int r = 0; r < n; ++r) {
    const T* dzr = dz.ptr() + static_cast<int64_t>(r) * 4 * hid;
    for (int j = 0; j < 4 * hid; ++j) grad_b[j] += dzr[j];
  }
  gemm<T>(true, false, d, 4 * hid, n, T(1), cache.x.ptr(), d, dz.ptr(), 4 * hid, T(1),
          grad_wx.ptr(), 4 * hid);
  gemm<T>(true, false, hid, 4 * hid, n, T(1), cache.h_prev.ptr(), hid, dz.ptr(), 4 * hid, T(1),
          grad_wh.ptr(), 4 * hid);
  grad_x = Tensor<T>({n, d});
  gemm<T>(false, true, n, d, 4 * hid, T(1), dz.ptr(), 4 * hid, wx.ptr(), 4 * hid, T(0),
          grad_x.ptr(), d);
  grad_h_prev = Tensor<T>({n, hid});
  gemm<T>(false, true, n, hid, 4 * hid, T(1), dz.ptr(), 4 * hid, wh.ptr(), 4 * hid, T(0),
          grad_h_prev.ptr(), hid);
}

}  // namespace dpiqn
