#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cutgan/core/autograd.hpp"

namespace cutgan {
namespace ops {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatRM<T>>;
template <typename T>
using CMapRM = Eigen::Map<const MatRM<T>>;

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  check(a.value().shape() == b.value().shape(), "add: shape mismatch " +
        shape_str(a.value().shape()) + " vs " + shape_str(b.value().shape()));
  Tensor<T> out = a.value().clone();
  out.add_(b.value());
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& n) {
    for (int k = 0; k < 2; ++k)
      if (n.parents[k]->requires_grad) n.parents[k]->accum_grad(n.grad);
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  check(a.value().shape() == b.value().shape(), "sub: shape mismatch");
  Tensor<T> out(a.value().shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] - b.value()[i];
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->accum_grad(n.grad);
    if (n.parents[1]->requires_grad) {
      Tensor<T> g = n.grad.clone();
      g.scale_(static_cast<T>(-1));
      n.parents[1]->accum_grad(g);
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  check(a.value().shape() == b.value().shape(), "mul: shape mismatch");
  Tensor<T> out(a.value().shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& n) {
    const Tensor<T>& av = n.parents[0]->value;
    const Tensor<T>& bv = n.parents[1]->value;
    if (n.parents[0]->requires_grad) {
      Tensor<T> g(av.shape());
      for (int64_t i = 0; i < g.numel(); ++i) g[i] = n.grad[i] * bv[i];
      n.parents[0]->accum_grad(g);
    }
    if (n.parents[1]->requires_grad) {
      Tensor<T> g(bv.shape());
      for (int64_t i = 0; i < g.numel(); ++i) g[i] = n.grad[i] * av[i];
      n.parents[1]->accum_grad(g);
    }
  });
}

template <typename T>
Var<T> add_scalar(const Var<T>& x, T c) {
  Tensor<T> out = x.value().clone();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] += c;
  return make_op<T>(std::move(out), {x}, [](Node<T>& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->accum_grad(n.grad);
  });
}

template <typename T>
Var<T> mul_scalar(const Var<T>& x, T c) {
  Tensor<T> out = x.value().clone();
  out.scale_(c);
  return make_op<T>(std::move(out), {x}, [c](Node<T>& n) {
    if (n.parents[0]->requires_grad) {
      Tensor<T> g = n.grad.clone();
      g.scale_(c);
      n.parents[0]->accum_grad(g);
    }
  });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> out(x.value().shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = x.value()[i] > 0 ? x.value()[i] : 0;
  return make_op<T>(std::move(out), {x}, [](Node<T>& n) {
    if (!n.parents[0]->requires_grad) return;
    const Tensor<T>& xv = n.parents[0]->value;
    Tensor<T> g(xv.shape());
    for (int64_t i = 0; i < g.numel(); ++i) g[i] = xv[i] > 0 ? n.grad[i] : 0;
    n.parents[0]->accum_grad(g);
  });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope) {
  Tensor<T> out(x.value().shape());
  for (int64_t i = 0; i < out.numel(); ++i) {
    T v = x.value()[i];
    out[i] = v > 0 ? v : slope * v;
  }
  return make_op<T>(std::move(out), {x}, [slope](Node<T>& n) {
    if (!n.parents[0]->requires_grad) return;
    const Tensor<T>& xv = n.parents[0]->value;
    Tensor<T> g(xv.shape());
    for (int64_t i = 0; i < g.numel(); ++i) g[i] = xv[i] > 0 ? n.grad[i] : slope * n.grad[i];
    n.parents[0]->accum_grad(g);
  });
}

template <typename T>
Var<T> tanh_op(const Var<T>& x) {
  Tensor<T> out(x.value().shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(x.value()[i]);
  Tensor<T> saved = out;
  return make_op<T>(std::move(out), {x}, [saved](Node<T>& n) {
    if (!n.parents[0]->requires_grad) return;
    Tensor<T> g(saved.shape());
    for (int64_t i = 0; i < g.numel(); ++i) g[i] = n.grad[i] * (1 - saved[i] * saved[i]);
    n.parents[0]->accum_grad(g);
  });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  Tensor<T> out(x.value().shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = 1 / (1 + std::exp(-x.value()[i]));
  Tensor<T> saved = out;
  return make_op<T>(std::move(out), {x}, [saved](Node<T>& n) {
    if (!n.parents[0]->requires_grad) return;
    Tensor<T> g(saved.shape());
    for (int64_t i = 0; i < g.numel(); ++i) g[i] = n.grad[i] * saved[i] * (1 - saved[i]);
    n.parents[0]->accum_grad(g);
  });
}

// ---------------------------------------------------------------------------
// Reductions / shape
// ---------------------------------------------------------------------------

template <typename T>
Var<T> sum_all(const Var<T>& x) {
  T s = 0;
  for (int64_t i = 0; i < x.value().numel(); ++i) s += x.value()[i];
  return make_op<T>(Tensor<T>::scalar(s), {x}, [](Node<T>& n) {
    if (!n.parents[0]->requires_grad) return;
    Tensor<T> g(n.parents[0]->value.shape(), n.grad[0]);
    n.parents[0]->accum_grad(g);
  });
}

template <typename T>
Var<T> mean_all(const Var<T>& x) {
  int64_t cnt = x.value().numel();
  check(cnt > 0, "mean_all: empty tensor");
  T s = 0;
  for (int64_t i = 0; i < cnt; ++i) s += x.value()[i];
  s /= static_cast<T>(cnt);
  return make_op<T>(Tensor<T>::scalar(s), {x}, [cnt](Node<T>& n) {
    if (!n.parents[0]->requires_grad) return;
    Tensor<T> g(n.parents[0]->value.shape(), n.grad[0] / static_cast<T>(cnt));
    n.parents[0]->accum_grad(g);
  });
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape s) {
  Tensor<T> out = x.value().reshaped(s);  // aliases storage
  return make_op<T>(std::move(out), {x}, [](Node<T>& n) {
    if (!n.parents[0]->requires_grad) return;
    n.parents[0]->accum_grad(n.grad.reshaped(n.parents[0]->value.shape()));
  });
}

// ---------------------------------------------------------------------------
// Dense linear algebra
// ---------------------------------------------------------------------------

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  check(a.value().ndim() == 2 && b.value().ndim() == 2, "matmul: expects 2-D");
  int64_t m = a.value().dim(0), k = a.value().dim(1), k2 = b.value().dim(0), n = b.value().dim(1);
  check(k == k2, "matmul: inner dim mismatch");
  Tensor<T> out(Shape{m, n});
  CMapRM<T> A(a.value().data(), m, k);
  CMapRM<T> B(b.value().data(), k, n);
  MapRM<T> O(out.data(), m, n);
  O.noalias() = A * B;
  return make_op<T>(std::move(out), {a, b}, [m, k, n](Node<T>& n_) {
    CMapRM<T> A(n_.parents[0]->value.data(), m, k);
    CMapRM<T> B(n_.parents[1]->value.data(), k, n);
    CMapRM<T> G(n_.grad.data(), m, n);
    if (n_.parents[0]->requires_grad) {
      Tensor<T> da(Shape{m, k});
      MapRM<T>(da.data(), m, k).noalias() = G * B.transpose();
      n_.parents[0]->accum_grad(da);
    }
    if (n_.parents[1]->requires_grad) {
      Tensor<T> db(Shape{k, n});
      MapRM<T>(db.data(), k, n).noalias() = A.transpose() * G;
      n_.parents[1]->accum_grad(db);
    }
  });
}

template <typename T>
Var<T> transpose2(const Var<T>& x) {
  check(x.value().ndim() == 2, "transpose2: expects 2-D");
  int64_t m = x.value().dim(0), n = x.value().dim(1);
  Tensor<T> out(Shape{n, m});
  CMapRM<T> X(x.value().data(), m, n);
  MapRM<T>(out.data(), n, m) = X.transpose();
  return make_op<T>(std::move(out), {x}, [m, n](Node<T>& nd) {
    if (!nd.parents[0]->requires_grad) return;
    Tensor<T> g(Shape{m, n});
    CMapRM<T> G(nd.grad.data(), n, m);
    MapRM<T>(g.data(), m, n) = G.transpose();
    nd.parents[0]->accum_grad(g);
  });
}

// x[m,cin] * w[cout,cin]^T + b[cout] -> [m,cout]
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  int64_t m = x.value().dim(0), cin = x.value().dim(1);
  int64_t cout = w.value().dim(0);
  check(w.value().dim(1) == cin, "linear: weight/input dim mismatch");
  Tensor<T> out(Shape{m, cout});
  CMapRM<T> X(x.value().data(), m, cin);
  CMapRM<T> W(w.value().data(), cout, cin);
  MapRM<T> O(out.data(), m, cout);
  O.noalias() = X * W.transpose();
  if (b.defined()) {
    const T* bd = b.value().data();
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < cout; ++j) out[i * cout + j] += bd[j];
  }
  std::vector<Var<T>> parents = {x, w};
  if (b.defined()) parents.push_back(b);
  return make_op<T>(std::move(out), std::move(parents), [m, cin, cout](Node<T>& n) {
    CMapRM<T> X(n.parents[0]->value.data(), m, cin);
    CMapRM<T> W(n.parents[1]->value.data(), cout, cin);
    CMapRM<T> G(n.grad.data(), m, cout);
    if (n.parents[0]->requires_grad) {
      Tensor<T> dx(Shape{m, cin});
      MapRM<T>(dx.data(), m, cin).noalias() = G * W;
      n.parents[0]->accum_grad(dx);
    }
    if (n.parents[1]->requires_grad) {
      Tensor<T> dw(Shape{cout, cin});
      MapRM<T>(dw.data(), cout, cin).noalias() = G.transpose() * X;
      n.parents[1]->accum_grad(dw);
    }
    if (n.parents.size() > 2 && n.parents[2]->requires_grad) {
      Tensor<T> db(Shape{cout}, 0);
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < cout; ++j) db[j] += n.grad[i * cout + j];
      n.parents[2]->accum_grad(db);
    }
  });
}

// ---------------------------------------------------------------------------
// Convolution machinery
// ---------------------------------------------------------------------------

// col layout: [(c*kh+i)*kw+j, oh*OW+ow], zero outside the padded image.
template <typename T>
void im2col(const T* x, int64_t C, int64_t H, int64_t W, int kh, int kw, int sh, int sw,
            int pt, int pl, int64_t OH, int64_t OW, T* col) {
  for (int64_t c = 0; c < C; ++c) {
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j) {
        T* crow = col + (((c * kh + i) * kw) + j) * OH * OW;
        for (int64_t oh = 0; oh < OH; ++oh) {
          int64_t ih = oh * sh - pt + i;
          if (ih < 0 || ih >= H) {
            std::fill(crow + oh * OW, crow + (oh + 1) * OW, static_cast<T>(0));
            continue;
          }
          const T* xrow = x + (c * H + ih) * W;
          T* dst = crow + oh * OW;
          for (int64_t ow = 0; ow < OW; ++ow) {
            int64_t iw = ow * sw - pl + j;
            dst[ow] = (iw >= 0 && iw < W) ? xrow[iw] : static_cast<T>(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add columns back into the image.
template <typename T>
void col2im(const T* col, int64_t C, int64_t H, int64_t W, int kh, int kw, int sh, int sw,
            int pt, int pl, int64_t OH, int64_t OW, T* x) {
  for (int64_t c = 0; c < C; ++c) {
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j) {
        const T* crow = col + (((c * kh + i) * kw) + j) * OH * OW;
        for (int64_t oh = 0; oh < OH; ++oh) {
          int64_t ih = oh * sh - pt + i;
          if (ih < 0 || ih >= H) continue;
          T* xrow = x + (c * H + ih) * W;
          const T* src = crow + oh * OW;
          for (int64_t ow = 0; ow < OW; ++ow) {
            int64_t iw = ow * sw - pl + j;
            if (iw >= 0 && iw < W) xrow[iw] += src[ow];
          }
        }
      }
    }
  }
}

// x[B,C,H,W], w[OC,C,kh,kw], optional b[OC]; zero padding (pt,pb,pl,pr).
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b,
              int sh, int sw, int pt, int pb, int pl, int pr) {
  check(x.value().ndim() == 4, "conv2d: input must be B,C,H,W");
  int64_t B = x.value().dim(0), C = x.value().dim(1), H = x.value().dim(2), W = x.value().dim(3);
  int64_t OC = w.value().dim(0), kh = w.value().dim(2), kw = w.value().dim(3);
  check(w.value().dim(1) == C, "conv2d: channel mismatch: input C=" + std::to_string(C) +
        " weight expects " + std::to_string(w.value().dim(1)));
  int64_t OH = (H + pt + pb - kh) / sh + 1;
  int64_t OW = (W + pl + pr - kw) / sw + 1;
  check(OH >= 1 && OW >= 1, "conv2d: output would be empty");
  int64_t Ckk = C * kh * kw;

  Tensor<T> out(Shape{B, OC, OH, OW});
  Tensor<T> col(Shape{Ckk, OH * OW});
  CMapRM<T> Wm(w.value().data(), OC, Ckk);
  for (int64_t bi = 0; bi < B; ++bi) {
    im2col(x.value().data() + bi * C * H * W, C, H, W, (int)kh, (int)kw, sh, sw, pt, pl, OH, OW,
           col.data());
    MapRM<T> Om(out.data() + bi * OC * OH * OW, OC, OH * OW);
    CMapRM<T> Cm(col.data(), Ckk, OH * OW);
    Om.noalias() = Wm * Cm;
    if (b.defined()) {
      const T* bd = b.value().data();
      for (int64_t oc = 0; oc < OC; ++oc) {
        T* orow = out.data() + (bi * OC + oc) * OH * OW;
        for (int64_t p = 0; p < OH * OW; ++p) orow[p] += bd[oc];
      }
    }
  }

  std::vector<Var<T>> parents = {x, w};
  if (b.defined()) parents.push_back(b);
  auto bwd = [B, C, H, W, OC, kh, kw, Ckk, sh, sw, pt, pl, OH, OW](Node<T>& n) {
    const Tensor<T>& xv = n.parents[0]->value;
    const Tensor<T>& wv = n.parents[1]->value;
    CMapRM<T> Wm(wv.data(), OC, Ckk);
    Tensor<T> col(Shape{Ckk, OH * OW});
    Tensor<T> dx, dw;
    bool need_dx = n.parents[0]->requires_grad;
    bool need_dw = n.parents[1]->requires_grad;
    if (need_dx) dx = Tensor<T>(Shape{B, C, H, W}, 0);
    if (need_dw) dw = Tensor<T>(Shape{OC, C, kh, kw}, 0);
    for (int64_t bi = 0; bi < B; ++bi) {
      CMapRM<T> Gm(n.grad.data() + bi * OC * OH * OW, OC, OH * OW);
      if (need_dw) {
        im2col(xv.data() + bi * C * H * W, C, H, W, (int)kh, (int)kw, sh, sw, pt, pl, OH, OW,
               col.data());
        CMapRM<T> Cm(col.data(), Ckk, OH * OW);
        MapRM<T> DWm(dw.data(), OC, Ckk);
        DWm.noalias() += Gm * Cm.transpose();
      }
      if (need_dx) {
        MapRM<T> DCm(col.data(), Ckk, OH * OW);
        DCm.noalias() = Wm.transpose() * Gm;
        col2im(col.data(), C, H, W, (int)kh, (int)kw, sh, sw, pt, pl, OH, OW,
               dx.data() + bi * C * H * W);
      }
    }
    if (need_dx) n.parents[0]->accum_grad(dx);
    if (need_dw) n.parents[1]->accum_grad(dw);
    if (n.parents.size() > 2 && n.parents[2]->requires_grad) {
      Tensor<T> db(Shape{OC}, 0);
      for (int64_t bi = 0; bi < B; ++bi)
        for (int64_t oc = 0; oc < OC; ++oc) {
          const T* g = n.grad.data() + (bi * OC + oc) * OH * OW;
          T s = 0;
          for (int64_t p = 0; p < OH * OW; ++p) s += g[p];
          db[oc] += s;
        }
      n.parents[2]->accum_grad(db);
    }
  };
  return make_op<T>(std::move(out), std::move(parents), std::move(bwd));
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad) {
  return conv2d(x, w, b, stride, stride, pad, pad, pad, pad);
}

// x[B,IC,H,W], w[IC,OC,kh,kw]; torch-style semantics:
// OH = (H-1)*stride + kh - 2*pad + output_padding
template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& w, const Var<T>& b,
                        int stride, int pad, int output_padding) {
  check(output_padding < stride, "conv_transpose2d: output_padding must be < stride");
  int64_t B = x.value().dim(0), IC = x.value().dim(1), H = x.value().dim(2), W = x.value().dim(3);
  check(w.value().dim(0) == IC, "conv_transpose2d: channel mismatch");
  int64_t OC = w.value().dim(1), kh = w.value().dim(2), kw = w.value().dim(3);
  int64_t OH = (H - 1) * stride + kh - 2 * pad + output_padding;
  int64_t OW = (W - 1) * stride + kw - 2 * pad + output_padding;
  int64_t OCkk = OC * kh * kw;

  Tensor<T> out(Shape{B, OC, OH, OW}, 0);
  Tensor<T> colT(Shape{OCkk, H * W});
  CMapRM<T> Wf(w.value().data(), IC, OCkk);
  for (int64_t bi = 0; bi < B; ++bi) {
    CMapRM<T> Xm(x.value().data() + bi * IC * H * W, IC, H * W);
    MapRM<T> Cm(colT.data(), OCkk, H * W);
    Cm.noalias() = Wf.transpose() * Xm;
    col2im(colT.data(), OC, OH, OW, (int)kh, (int)kw, stride, stride, pad, pad, H, W,
           out.data() + bi * OC * OH * OW);
    if (b.defined()) {
      const T* bd = b.value().data();
      for (int64_t oc = 0; oc < OC; ++oc) {
        T* orow = out.data() + (bi * OC + oc) * OH * OW;
        for (int64_t p = 0; p < OH * OW; ++p) orow[p] += bd[oc];
      }
    }
  }

  std::vector<Var<T>> parents = {x, w};
  if (b.defined()) parents.push_back(b);
  auto bwd = [B, IC, OC, H, W, OH, OW, kh, kw, OCkk, stride, pad](Node<T>& n) {
    const Tensor<T>& xv = n.parents[0]->value;
    const Tensor<T>& wv = n.parents[1]->value;
    CMapRM<T> Wf(wv.data(), IC, OCkk);
    Tensor<T> colg(Shape{OCkk, H * W});
    Tensor<T> dx, dw;
    bool need_dx = n.parents[0]->requires_grad;
    bool need_dw = n.parents[1]->requires_grad;
    if (need_dx) dx = Tensor<T>(Shape{B, IC, H, W}, 0);
    if (need_dw) dw = Tensor<T>(Shape{IC, OC, kh, kw}, 0);
    for (int64_t bi = 0; bi < B; ++bi) {
      im2col(n.grad.data() + bi * OC * OH * OW, OC, OH, OW, (int)kh, (int)kw, stride, stride,
             pad, pad, H, W, colg.data());
      CMapRM<T> Cg(colg.data(), OCkk, H * W);
      if (need_dx) {
        MapRM<T> Dx(dx.data() + bi * IC * H * W, IC, H * W);
        Dx.noalias() = Wf * Cg;
      }
      if (need_dw) {
        CMapRM<T> Xm(xv.data() + bi * IC * H * W, IC, H * W);
        MapRM<T> Dw(dw.data(), IC, OCkk);
        Dw.noalias() += Xm * Cg.transpose();
      }
    }
    if (need_dx) n.parents[0]->accum_grad(dx);
    if (need_dw) n.parents[1]->accum_grad(dw);
    if (n.parents.size() > 2 && n.parents[2]->requires_grad) {
      Tensor<T> db(Shape{OC}, 0);
      for (int64_t bi = 0; bi < B; ++bi)
        for (int64_t oc = 0; oc < OC; ++oc) {
          const T* g = n.grad.data() + (bi * OC + oc) * OH * OW;
          T s = 0;
          for (int64_t p = 0; p < OH * OW; ++p) s += g[p];
          db[oc] += s;
        }
      n.parents[2]->accum_grad(db);
    }
  };
  return make_op<T>(std::move(out), std::move(parents), std::move(bwd));
}

inline int64_t mirror_index(int64_t k, int64_t n) {
  if (k < 0) k = -k;
  if (k >= n) k = 2 * n - 2 - k;
  return k;
}

template <typename T>
Var<T> reflect_pad2d(const Var<T>& x, int pt, int pb, int pl, int pr) {
  int64_t B = x.value().dim(0), C = x.value().dim(1), H = x.value().dim(2), W = x.value().dim(3);
  check(pt < H && pb < H && pl < W && pr < W, "reflect_pad2d: pad must be < dim");
  int64_t OH = H + pt + pb, OW = W + pl + pr;
  Tensor<T> out(Shape{B, C, OH, OW});
  for (int64_t bc = 0; bc < B * C; ++bc) {
    const T* src = x.value().data() + bc * H * W;
    T* dst = out.data() + bc * OH * OW;
    for (int64_t i = 0; i < OH; ++i) {
      int64_t ih = mirror_index(i - pt, H);
      for (int64_t j = 0; j < OW; ++j) {
        dst[i * OW + j] = src[ih * W + mirror_index(j - pl, W)];
      }
    }
  }
  return make_op<T>(std::move(out), {x}, [B, C, H, W, OH, OW, pt, pl](Node<T>& n) {
    if (!n.parents[0]->requires_grad) return;
    Tensor<T> g(Shape{B, C, H, W}, 0);
    for (int64_t bc = 0; bc < B * C; ++bc) {
      const T* gs = n.grad.data() + bc * OH * OW;
      T* gd = g.data() + bc * H * W;
      for (int64_t i = 0; i < OH; ++i) {
        int64_t ih = mirror_index(i - pt, H);
        for (int64_t j = 0; j < OW; ++j) {
          gd[ih * W + mirror_index(j - pl, W)] += gs[i * OW + j];
        }
      }
    }
    n.parents[0]->accum_grad(g);
  });
}

// Per-(sample, channel) normalization over spatial dims, affine scale/shift.
template <typename T>
Var<T> instance_norm2d(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps) {
  int64_t B = x.value().dim(0), C = x.value().dim(1), H = x.value().dim(2), W = x.value().dim(3);
  int64_t N = H * W;
  check(gamma.value().numel() == C && beta.value().numel() == C, "instance_norm2d: affine size");
  Tensor<T> out(Shape{B, C, H, W});
  Tensor<T> xhat(Shape{B, C, H, W});
  Tensor<T> invstd(Shape{B, C});
  for (int64_t bi = 0; bi < B; ++bi) {
    for (int64_t c = 0; c < C; ++c) {
      const T* src = x.value().data() + (bi * C + c) * N;
      T mean = 0;
      for (int64_t p = 0; p < N; ++p) mean += src[p];
      mean /= static_cast<T>(N);
      T var = 0;
      for (int64_t p = 0; p < N; ++p) {
        T d = src[p] - mean;
        var += d * d;
      }
      var /= static_cast<T>(N);
      T inv = 1 / std::sqrt(var + eps);
      invstd[bi * C + c] = inv;
      T g = gamma.value()[c], b = beta.value()[c];
      T* xh = xhat.data() + (bi * C + c) * N;
      T* o = out.data() + (bi * C + c) * N;
      for (int64_t p = 0; p < N; ++p) {
        xh[p] = (src[p] - mean) * inv;
        o[p] = g * xh[p] + b;
      }
    }
  }
  auto bwd = [B, C, N, xhat, invstd](Node<T>& n) {
    const Tensor<T>& gam = n.parents[1]->value;
    bool need_dx = n.parents[0]->requires_grad;
    bool need_dg = n.parents[1]->requires_grad;
    bool need_db = n.parents[2]->requires_grad;
    Tensor<T> dx, dg, db;
    if (need_dx) dx = Tensor<T>(n.parents[0]->value.shape(), 0);
    if (need_dg) dg = Tensor<T>(Shape{C}, 0);
    if (need_db) db = Tensor<T>(Shape{C}, 0);
    for (int64_t bi = 0; bi < B; ++bi) {
      for (int64_t c = 0; c < C; ++c) {
        const T* gy = n.grad.data() + (bi * C + c) * N;
        const T* xh = xhat.data() + (bi * C + c) * N;
        if (need_dg || need_db) {
          T sg = 0, sb = 0;
          for (int64_t p = 0; p < N; ++p) {
            sg += gy[p] * xh[p];
            sb += gy[p];
          }
          if (need_dg) dg[c] += sg;
          if (need_db) db[c] += sb;
        }
        if (need_dx) {
          T g = gam[c];
          T mean_dxhat = 0, mean_dxhat_xhat = 0;
          for (int64_t p = 0; p < N; ++p) {
            T dxh = gy[p] * g;
            mean_dxhat += dxh;
            mean_dxhat_xhat += dxh * xh[p];
          }
          mean_dxhat /= static_cast<T>(N);
          mean_dxhat_xhat /= static_cast<T>(N);
          T inv = invstd[bi * C + c];
          T* d = dx.data() + (bi * C + c) * N;
          for (int64_t p = 0; p < N; ++p) {
            T dxh = gy[p] * g;
            d[p] = inv * (dxh - mean_dxhat - xh[p] * mean_dxhat_xhat);
          }
        }
      }
    }
    if (need_dx) n.parents[0]->accum_grad(dx);
    if (need_dg) n.parents[1]->accum_grad(dg);
    if (need_db) n.parents[2]->accum_grad(db);
  };
  return make_op<T>(std::move(out), {x, gamma, beta}, std::move(bwd));
}

// ---------------------------------------------------------------------------
// Ops for contrastive heads
// ---------------------------------------------------------------------------

// Extract batch item b of x[B,C,H,W] as an [H*W, C] matrix (location-major).
template <typename T>
Var<T> item_locations(const Var<T>& x, int64_t b) {
  int64_t B = x.value().dim(0), C = x.value().dim(1), H = x.value().dim(2), W = x.value().dim(3);
  check(b >= 0 && b < B, "item_locations: batch index out of range");
  int64_t S = H * W;
  Tensor<T> out(Shape{S, C});
  const T* src = x.value().data() + b * C * S;
  for (int64_t c = 0; c < C; ++c)
    for (int64_t s = 0; s < S; ++s) out[s * C + c] = src[c * S + s];
  return make_op<T>(std::move(out), {x}, [b, C, S](Node<T>& n) {
    if (!n.parents[0]->requires_grad) return;
    Tensor<T> g(n.parents[0]->value.shape(), 0);
    T* gd = g.data() + b * C * S;
    for (int64_t c = 0; c < C; ++c)
      for (int64_t s = 0; s < S; ++s) gd[c * S + s] += n.grad[s * C + c];
    n.parents[0]->accum_grad(g);
  });
}

template <typename T>
Var<T> gather_rows(const Var<T>& x, std::vector<int64_t> idx) {
  int64_t S = x.value().dim(0), C = x.value().dim(1);
  int64_t k = static_cast<int64_t>(idx.size());
  for (auto i : idx) check(i >= 0 && i < S, "gather_rows: index out of range");
  Tensor<T> out(Shape{k, C});
  for (int64_t i = 0; i < k; ++i)
    std::copy_n(x.value().data() + idx[static_cast<size_t>(i)] * C, C, out.data() + i * C);
  return make_op<T>(std::move(out), {x}, [idx, C](Node<T>& n) {
    if (!n.parents[0]->requires_grad) return;
    Tensor<T> g(n.parents[0]->value.shape(), 0);
    for (size_t i = 0; i < idx.size(); ++i) {
      const T* gs = n.grad.data() + static_cast<int64_t>(i) * C;
      T* gd = g.data() + idx[i] * C;
      for (int64_t c = 0; c < C; ++c) gd[c] += gs[c];
    }
    n.parents[0]->accum_grad(g);
  });
}

template <typename T>
Var<T> concat0(const Var<T>& a, const Var<T>& b) {
  check(a.value().ndim() == 2 && b.value().ndim() == 2 && a.value().dim(1) == b.value().dim(1),
        "concat0: expects 2-D with equal cols");
  int64_t m = a.value().dim(0), n = b.value().dim(0), c = a.value().dim(1);
  Tensor<T> out(Shape{m + n, c});
  std::copy_n(a.value().data(), m * c, out.data());
  std::copy_n(b.value().data(), n * c, out.data() + m * c);
  return make_op<T>(std::move(out), {a, b}, [m, n, c](Node<T>& nd) {
    if (nd.parents[0]->requires_grad) {
      Tensor<T> g(Shape{m, c});
      std::copy_n(nd.grad.data(), m * c, g.data());
      nd.parents[0]->accum_grad(g);
    }
    if (nd.parents[1]->requires_grad) {
      Tensor<T> g(Shape{n, c});
      std::copy_n(nd.grad.data() + m * c, n * c, g.data());
      nd.parents[1]->accum_grad(g);
    }
  });
}

// Rows normalized to unit L2 norm; epsilon added to the norm before dividing
// so an all-zero row maps to zero instead of NaN.
template <typename T>
Var<T> l2_normalize_rows(const Var<T>& x, T eps = static_cast<T>(1e-12)) {
  int64_t m = x.value().dim(0), c = x.value().dim(1);
  Tensor<T> out(Shape{m, c});
  Tensor<T> norms(Shape{m});
  for (int64_t i = 0; i < m; ++i) {
    const T* row = x.value().data() + i * c;
    T ss = 0;
    for (int64_t j = 0; j < c; ++j) ss += row[j] * row[j];
    T nrm = std::sqrt(ss);
    norms[i] = nrm;
    T inv = 1 / (nrm + eps);
    for (int64_t j = 0; j < c; ++j) out[i * c + j] = row[j] * inv;
  }
  return make_op<T>(std::move(out), {x}, [m, c, eps, norms](Node<T>& n) {
    if (!n.parents[0]->requires_grad) return;
    const Tensor<T>& xv = n.parents[0]->value;
    Tensor<T> g(Shape{m, c});
    for (int64_t i = 0; i < m; ++i) {
      const T* row = xv.data() + i * c;
      const T* gr = n.grad.data() + i * c;
      T nrm = norms[i];
      T inv = 1 / (nrm + eps);
      T dot = 0;
      for (int64_t j = 0; j < c; ++j) dot += gr[j] * row[j];
      T coef = nrm > 0 ? dot / (nrm * (nrm + eps) * (nrm + eps)) : 0;
      for (int64_t j = 0; j < c; ++j) g[i * c + j] = gr[j] * inv - row[j] * coef;
    }
    n.parents[0]->accum_grad(g);
  });
}

// Mean softmax cross-entropy over rows of a logits matrix, integer targets.
template <typename T>
Var<T> cross_entropy_rows(const Var<T>& logits, std::vector<int64_t> targets) {
  int64_t k = logits.value().dim(0), n = logits.value().dim(1);
  check(static_cast<int64_t>(targets.size()) == k, "cross_entropy_rows: target count");
  for (auto t : targets) check(t >= 0 && t < n, "cross_entropy_rows: target out of range");
  T total = 0;
  for (int64_t i = 0; i < k; ++i) {
    const T* row = logits.value().data() + i * n;
    T mx = row[0];
    for (int64_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    T se = 0;
    for (int64_t j = 0; j < n; ++j) se += std::exp(row[j] - mx);
    T lse = mx + std::log(se);
    total += lse - row[targets[static_cast<size_t>(i)]];
  }
  total /= static_cast<T>(k);
  return make_op<T>(Tensor<T>::scalar(total), {logits}, [k, n, targets](Node<T>& nd) {
    if (!nd.parents[0]->requires_grad) return;
    const Tensor<T>& lv = nd.parents[0]->value;
    T gscale = nd.grad[0] / static_cast<T>(k);
    Tensor<T> g(Shape{k, n});
    for (int64_t i = 0; i < k; ++i) {
      const T* row = lv.data() + i * n;
      T mx = row[0];
      for (int64_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
      T se = 0;
      for (int64_t j = 0; j < n; ++j) se += std::exp(row[j] - mx);
      T* gr = g.data() + i * n;
      for (int64_t j = 0; j < n; ++j) gr[j] = std::exp(row[j] - mx) / se * gscale;
      gr[targets[static_cast<size_t>(i)]] -= gscale;
    }
    nd.parents[0]->accum_grad(g);
  });
}

}  // namespace ops
}  // namespace cutgan
