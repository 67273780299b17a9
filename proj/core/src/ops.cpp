#include "sdgcount/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "sdgcount/errors.hpp"

namespace sdgcount::ag {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

Node& in(Node& self, std::size_t i) { return *self.inputs[i]; }
bool wants(Node& self, std::size_t i) { return self.inputs[i] && self.inputs[i]->requires_grad; }

void require4(const Tensor& t, const char* what) { require_rank(t, 4, what); }

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  out += b.value();
  return make_op(std::move(out), {a, b}, [](Node& self) {
    for (std::size_t i = 0; i < 2; ++i)
      if (wants(self, i)) in(self, i).grad_buffer() += self.grad;
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] -= b.value()[i];
  return make_op(std::move(out), {a, b}, [](Node& self) {
    if (wants(self, 0)) in(self, 0).grad_buffer() += self.grad;
    if (wants(self, 1)) {
      auto& g = in(self, 1).grad_buffer();
      for (std::int64_t i = 0; i < g.numel(); ++i) g[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= b.value()[i];
  return make_op(std::move(out), {a, b}, [](Node& self) {
    const Tensor& av = in(self, 0).value;
    const Tensor& bv = in(self, 1).value;
    if (wants(self, 0)) {
      auto& g = in(self, 0).grad_buffer();
      for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * bv[i];
    }
    if (wants(self, 1)) {
      auto& g = in(self, 1).grad_buffer();
      for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * av[i];
    }
  });
}

Var mul_const(const Var& a, const Tensor& mask) {
  require_same_shape(a.value(), mask, "mul_const");
  Tensor out = a.value();
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= mask[i];
  return make_op(std::move(out), {a}, [mask](Node& self) {
    auto& g = in(self, 0).grad_buffer();
    for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * mask[i];
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  out *= s;
  return make_op(std::move(out), {a}, [s](Node& self) {
    auto& g = in(self, 0).grad_buffer();
    for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += s * self.grad[i];
  });
}

Var relu(const Var& x) {
  Tensor out = x.value();
  for (auto& v : out.values()) v = v < 0.0 ? 0.0 : v;  // NaN passes through
  return make_op(std::move(out), {x}, [](Node& self) {
    auto& g = in(self, 0).grad_buffer();
    for (std::int64_t i = 0; i < g.numel(); ++i)
      if (self.value[i] > 0.0) g[i] += self.grad[i];
  });
}

Var sigmoid(const Var& x) {
  Tensor out = x.value();
  for (auto& v : out.values()) {
    v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  return make_op(std::move(out), {x}, [](Node& self) {
    auto& g = in(self, 0).grad_buffer();
    for (std::int64_t i = 0; i < g.numel(); ++i) {
      const double y = self.value[i];
      g[i] += self.grad[i] * y * (1.0 - y);
    }
  });
}

Var sum(const Var& x) {
  Tensor out({1}, x.value().sum());
  return make_op(std::move(out), {x}, [](Node& self) {
    auto& g = in(self, 0).grad_buffer();
    const double s = self.grad[0];
    for (auto& v : g.values()) v += s;
  });
}

Var mean(const Var& x) {
  const double n = static_cast<double>(x.value().numel());
  if (n == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(x), 1.0 / n);
}

Var concat_channels(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require4(av, "concat_channels");
  require4(bv, "concat_channels");
  if (av.dim(0) != bv.dim(0) || av.dim(2) != bv.dim(2) || av.dim(3) != bv.dim(3)) {
    throw ShapeError("concat_channels: incompatible " + shape_str(av.shape()) + " and " +
                     shape_str(bv.shape()));
  }
  const std::int64_t n = av.dim(0), ca = av.dim(1), cb = bv.dim(1), hw = av.dim(2) * av.dim(3);
  Tensor out({n, ca + cb, av.dim(2), av.dim(3)});
  for (std::int64_t i = 0; i < n; ++i) {
    std::copy_n(av.data() + i * ca * hw, ca * hw, out.data() + i * (ca + cb) * hw);
    std::copy_n(bv.data() + i * cb * hw, cb * hw, out.data() + (i * (ca + cb) + ca) * hw);
  }
  return make_op(std::move(out), {a, b}, [n, ca, cb, hw](Node& self) {
    if (wants(self, 0)) {
      auto& g = in(self, 0).grad_buffer();
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < ca * hw; ++j) g[i * ca * hw + j] += self.grad[i * (ca + cb) * hw + j];
    }
    if (wants(self, 1)) {
      auto& g = in(self, 1).grad_buffer();
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < cb * hw; ++j)
          g[i * cb * hw + j] += self.grad[(i * (ca + cb) + ca) * hw + j];
    }
  });
}

Var concat_batch(const Var& a, const Var& b) {
  Tensor out = concat_rows(a.value(), b.value());
  const std::int64_t split = a.value().numel();
  return make_op(std::move(out), {a, b}, [split](Node& self) {
    if (wants(self, 0)) {
      auto& g = in(self, 0).grad_buffer();
      for (std::int64_t i = 0; i < split; ++i) g[i] += self.grad[i];
    }
    if (wants(self, 1)) {
      auto& g = in(self, 1).grad_buffer();
      for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[split + i];
    }
  });
}

Var slice_batch(const Var& x, std::int64_t start, std::int64_t count) {
  Tensor out = slice_rows(x.value(), start, count);
  const std::int64_t offset = x.value().dim(0) == 0 ? 0 : start * (x.value().numel() / x.value().dim(0));
  return make_op(std::move(out), {x}, [offset](Node& self) {
    auto& g = in(self, 0).grad_buffer();
    for (std::int64_t i = 0; i < self.grad.numel(); ++i) g[offset + i] += self.grad[i];
  });
}

Var to_rows(const Var& x) {
  const Tensor& v = x.value();
  require4(v, "to_rows");
  const std::int64_t n = v.dim(0), c = v.dim(1), h = v.dim(2), w = v.dim(3);
  Tensor out({n * h * w, c});
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t k = 0; k < c; ++k)
      for (std::int64_t p = 0; p < h * w; ++p) out[(i * h * w + p) * c + k] = v[(i * c + k) * h * w + p];
  return make_op(std::move(out), {x}, [n, c, h, w](Node& self) {
    auto& g = in(self, 0).grad_buffer();
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t k = 0; k < c; ++k)
        for (std::int64_t p = 0; p < h * w; ++p) g[(i * c + k) * h * w + p] += self.grad[(i * h * w + p) * c + k];
  });
}

Var from_rows(const Var& rows, std::int64_t n, std::int64_t h, std::int64_t w) {
  const Tensor& v = rows.value();
  require_rank(v, 2, "from_rows");
  if (v.dim(0) != n * h * w) throw ShapeError("from_rows: row count does not match n*h*w");
  const std::int64_t c = v.dim(1);
  Tensor out({n, c, h, w});
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t k = 0; k < c; ++k)
      for (std::int64_t p = 0; p < h * w; ++p) out[(i * c + k) * h * w + p] = v[(i * h * w + p) * c + k];
  return make_op(std::move(out), {rows}, [n, c, h, w](Node& self) {
    auto& g = in(self, 0).grad_buffer();
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t k = 0; k < c; ++k)
        for (std::int64_t p = 0; p < h * w; ++p) g[(i * h * w + p) * c + k] += self.grad[(i * c + k) * h * w + p];
  });
}

Var matmul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank(av, 2, "matmul");
  require_rank(bv, 2, "matmul");
  if (av.dim(1) != bv.dim(0)) {
    throw ShapeError("matmul: inner dimensions differ " + shape_str(av.shape()) + " x " + shape_str(bv.shape()));
  }
  const std::int64_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out({m, n});
  MatMap(out.data(), m, n).noalias() = ConstMatMap(av.data(), m, k) * ConstMatMap(bv.data(), k, n);
  return make_op(std::move(out), {a, b}, [m, k, n](Node& self) {
    ConstMatMap dy(self.grad.data(), m, n);
    if (wants(self, 0)) {
      auto& g = in(self, 0).grad_buffer();
      MatMap(g.data(), m, k).noalias() += dy * ConstMatMap(in(self, 1).value.data(), k, n).transpose();
    }
    if (wants(self, 1)) {
      auto& g = in(self, 1).grad_buffer();
      MatMap(g.data(), k, n).noalias() += ConstMatMap(in(self, 0).value.data(), m, k).transpose() * dy;
    }
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank(av, 2, "matmul_nt");
  require_rank(bv, 2, "matmul_nt");
  if (av.dim(1) != bv.dim(1)) {
    throw ShapeError("matmul_nt: inner dimensions differ " + shape_str(av.shape()) + " x " +
                     shape_str(bv.shape()) + "^T");
  }
  const std::int64_t m = av.dim(0), k = av.dim(1), n = bv.dim(0);
  Tensor out({m, n});
  MatMap(out.data(), m, n).noalias() = ConstMatMap(av.data(), m, k) * ConstMatMap(bv.data(), n, k).transpose();
  return make_op(std::move(out), {a, b}, [m, k, n](Node& self) {
    ConstMatMap dy(self.grad.data(), m, n);
    if (wants(self, 0)) {
      auto& g = in(self, 0).grad_buffer();
      MatMap(g.data(), m, k).noalias() += dy * ConstMatMap(in(self, 1).value.data(), n, k);
    }
    if (wants(self, 1)) {
      auto& g = in(self, 1).grad_buffer();
      MatMap(g.data(), n, k).noalias() += dy.transpose() * ConstMatMap(in(self, 0).value.data(), m, k);
    }
  });
}

Var softmax_rows(const Var& x) {
  const Tensor& v = x.value();
  require_rank(v, 2, "softmax_rows");
  const std::int64_t rows = v.dim(0), cols = v.dim(1);
  Tensor out(v.shape());
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* src = v.data() + r * cols;
    double* dst = out.data() + r * cols;
    const double mx = *std::max_element(src, src + cols);
    double z = 0.0;
    for (std::int64_t c = 0; c < cols; ++c) z += (dst[c] = std::exp(src[c] - mx));
    for (std::int64_t c = 0; c < cols; ++c) dst[c] /= z;
  }
  return make_op(std::move(out), {x}, [rows, cols](Node& self) {
    auto& g = in(self, 0).grad_buffer();
    for (std::int64_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * cols;
      const double* dy = self.grad.data() + r * cols;
      double dot = 0.0;
      for (std::int64_t c = 0; c < cols; ++c) dot += dy[c] * y[c];
      for (std::int64_t c = 0; c < cols; ++c) g[r * cols + c] += y[c] * (dy[c] - dot);
    }
  });
}

namespace {

// col: (cin·k·k) × (h·w)
void im2col(const double* x, std::int64_t cin, std::int64_t h, std::int64_t w, int k, int pad, double* col) {
  const std::int64_t hw = h * w;
  for (std::int64_t c = 0; c < cin; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        double* row = col + ((c * k + ki) * k + kj) * hw;
        const std::int64_t dx = kj - pad;
        const std::int64_t lo = std::max<std::int64_t>(0, -dx);
        const std::int64_t hi = std::min<std::int64_t>(w, w - dx);
        for (std::int64_t oh = 0; oh < h; ++oh) {
          const std::int64_t ih = oh + ki - pad;
          double* dst = row + oh * w;
          if (ih < 0 || ih >= h || lo >= hi) {
            std::fill(dst, dst + w, 0.0);
            continue;
          }
          const double* src = x + (c * h + ih) * w;
          std::fill(dst, dst + lo, 0.0);
          for (std::int64_t ow = lo; ow < hi; ++ow) dst[ow] = src[ow + dx];
          std::fill(dst + hi, dst + w, 0.0);
        }
      }
    }
  }
}

void col2im(const double* col, std::int64_t cin, std::int64_t h, std::int64_t w, int k, int pad, double* x) {
  const std::int64_t hw = h * w;
  for (std::int64_t c = 0; c < cin; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const double* row = col + ((c * k + ki) * k + kj) * hw;
        const std::int64_t dx = kj - pad;
        const std::int64_t lo = std::max<std::int64_t>(0, -dx);
        const std::int64_t hi = std::min<std::int64_t>(w, w - dx);
        for (std::int64_t oh = 0; oh < h; ++oh) {
          const std::int64_t ih = oh + ki - pad;
          if (ih < 0 || ih >= h) continue;
          double* dst = x + (c * h + ih) * w;
          const double* src = row + oh * w;
          for (std::int64_t ow = lo; ow < hi; ++ow) dst[ow + dx] += src[ow];
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, int padding) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  require4(xv, "conv2d input");
  require4(wv, "conv2d weight");
  const std::int64_t n = xv.dim(0), cin = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  const std::int64_t cout = wv.dim(0);
  const int k = static_cast<int>(wv.dim(2));
  if (wv.dim(1) != cin || wv.dim(3) != k) {
    throw ShapeError("conv2d: weight " + shape_str(wv.shape()) + " incompatible with input " + shape_str(xv.shape()));
  }
  if (2 * padding != k - 1) throw ShapeError("conv2d: only same-size convolutions are supported");
  if (bias.defined() && (bias.value().rank() != 1 || bias.value().dim(0) != cout)) {
    throw ShapeError("conv2d: bias shape " + shape_str(bias.value().shape()));
  }
  const std::int64_t hw = h * w, kk = cin * k * k;
  Tensor out({n, cout, h, w});
  std::vector<double> col(k == 1 ? 0 : static_cast<std::size_t>(kk * hw));
  ConstMatMap wmat(wv.data(), cout, kk);
  for (std::int64_t i = 0; i < n; ++i) {
    const double* xi = xv.data() + i * cin * hw;
    const double* colp = xi;
    if (k != 1) {
      im2col(xi, cin, h, w, k, padding, col.data());
      colp = col.data();
    }
    MatMap yi(out.data() + i * cout * hw, cout, hw);
    yi.noalias() = wmat * ConstMatMap(colp, kk, hw);
    if (bias.defined()) {
      for (std::int64_t c = 0; c < cout; ++c) yi.row(c).array() += bias.value()[c];
    }
  }
  return make_op(std::move(out), {x, weight, bias}, [n, cin, h, w, cout, k, padding, hw, kk](Node& self) {
    const Tensor& xv = in(self, 0).value;
    const Tensor& wv = in(self, 1).value;
    std::vector<double> col(k == 1 ? 0 : static_cast<std::size_t>(kk * hw));
    std::vector<double> dcol(static_cast<std::size_t>(kk * hw));
    for (std::int64_t i = 0; i < n; ++i) {
      ConstMatMap dy(self.grad.data() + i * cout * hw, cout, hw);
      const double* xi = xv.data() + i * cin * hw;
      if (wants(self, 1)) {
        const double* colp = xi;
        if (k != 1) {
          im2col(xi, cin, h, w, k, padding, col.data());
          colp = col.data();
        }
        auto& gw = in(self, 1).grad_buffer();
        MatMap(gw.data(), cout, kk).noalias() += dy * ConstMatMap(colp, kk, hw).transpose();
      }
      if (wants(self, 2)) {
        auto& gb = in(self, 2).grad_buffer();
        for (std::int64_t c = 0; c < cout; ++c) gb[c] += dy.row(c).sum();
      }
      if (wants(self, 0)) {
        auto& gx = in(self, 0).grad_buffer();
        if (k == 1) {
          MatMap(gx.data() + i * cin * hw, cin, hw).noalias() += ConstMatMap(wv.data(), cout, kk).transpose() * dy;
        } else {
          MatMap(dcol.data(), kk, hw).noalias() = ConstMatMap(wv.data(), cout, kk).transpose() * dy;
          col2im(dcol.data(), cin, h, w, k, padding, gx.data() + i * cin * hw);
        }
      }
    }
  });
}

Var max_pool2(const Var& x) {
  const Tensor& v = x.value();
  require4(v, "max_pool2");
  const std::int64_t n = v.dim(0), c = v.dim(1), h = v.dim(2), w = v.dim(3);
  if (h % 2 || w % 2) throw ShapeError("max_pool2: odd spatial size " + shape_str(v.shape()));
  const std::int64_t oh = h / 2, ow = w / 2;
  Tensor out({n, c, oh, ow});
  auto argmax = std::make_shared<std::vector<std::int64_t>>(static_cast<std::size_t>(out.numel()));
  for (std::int64_t p = 0; p < n * c; ++p) {
    const double* src = v.data() + p * h * w;
    for (std::int64_t i = 0; i < oh; ++i) {
      for (std::int64_t j = 0; j < ow; ++j) {
        std::int64_t best = (2 * i) * w + 2 * j;
        for (std::int64_t di = 0; di < 2; ++di)
          for (std::int64_t dj = 0; dj < 2; ++dj) {
            const std::int64_t idx = (2 * i + di) * w + 2 * j + dj;
            if (src[idx] > src[best]) best = idx;
          }
        const std::int64_t o = (p * oh + i) * ow + j;
        out[o] = src[best];
        (*argmax)[static_cast<std::size_t>(o)] = p * h * w + best;
      }
    }
  }
  return make_op(std::move(out), {x}, [argmax](Node& self) {
    auto& g = in(self, 0).grad_buffer();
    for (std::int64_t o = 0; o < self.grad.numel(); ++o) g[(*argmax)[static_cast<std::size_t>(o)]] += self.grad[o];
  });
}

Var upsample_nearest(const Var& x, int factor) {
  const Tensor& v = x.value();
  require4(v, "upsample_nearest");
  if (factor < 1) throw ShapeError("upsample_nearest: factor must be >= 1");
  if (factor == 1) return x;
  const std::int64_t n = v.dim(0), c = v.dim(1), h = v.dim(2), w = v.dim(3);
  const std::int64_t oh = h * factor, ow = w * factor;
  Tensor out({n, c, oh, ow});
  for (std::int64_t p = 0; p < n * c; ++p)
    for (std::int64_t i = 0; i < oh; ++i)
      for (std::int64_t j = 0; j < ow; ++j) out[(p * oh + i) * ow + j] = v[(p * h + i / factor) * w + j / factor];
  return make_op(std::move(out), {x}, [n, c, h, w, factor](Node& self) {
    auto& g = in(self, 0).grad_buffer();
    const std::int64_t oh = h * factor, ow = w * factor;
    for (std::int64_t p = 0; p < n * c; ++p)
      for (std::int64_t i = 0; i < oh; ++i)
        for (std::int64_t j = 0; j < ow; ++j) g[(p * h + i / factor) * w + j / factor] += self.grad[(p * oh + i) * ow + j];
  });
}

namespace {

struct LerpTap {
  std::int64_t lo, hi;
  double w_hi;
};

std::vector<LerpTap> bilinear_taps(std::int64_t in_size, int factor) {
  std::vector<LerpTap> taps(static_cast<std::size_t>(in_size * factor));
  for (std::int64_t o = 0; o < in_size * factor; ++o) {
    double src = (static_cast<double>(o) + 0.5) / factor - 0.5;
    if (src < 0.0) src = 0.0;
    auto lo = static_cast<std::int64_t>(std::floor(src));
    if (lo > in_size - 1) lo = in_size - 1;
    const std::int64_t hi = std::min(lo + 1, in_size - 1);
    taps[static_cast<std::size_t>(o)] = {lo, hi, src - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace

Var upsample_bilinear(const Var& x, int factor) {
  const Tensor& v = x.value();
  require4(v, "upsample_bilinear");
  if (factor < 1) throw ShapeError("upsample_bilinear: factor must be >= 1");
  if (factor == 1) return x;
  const std::int64_t n = v.dim(0), c = v.dim(1), h = v.dim(2), w = v.dim(3);
  const std::int64_t oh = h * factor, ow = w * factor;
  auto ty = bilinear_taps(h, factor);
  auto tx = bilinear_taps(w, factor);
  Tensor out({n, c, oh, ow});
  for (std::int64_t p = 0; p < n * c; ++p) {
    const double* src = v.data() + p * h * w;
    double* dst = out.data() + p * oh * ow;
    for (std::int64_t i = 0; i < oh; ++i) {
      const auto& a = ty[static_cast<std::size_t>(i)];
      for (std::int64_t j = 0; j < ow; ++j) {
        const auto& b = tx[static_cast<std::size_t>(j)];
        const double top = (1 - b.w_hi) * src[a.lo * w + b.lo] + b.w_hi * src[a.lo * w + b.hi];
        const double bot = (1 - b.w_hi) * src[a.hi * w + b.lo] + b.w_hi * src[a.hi * w + b.hi];
        dst[i * ow + j] = (1 - a.w_hi) * top + a.w_hi * bot;
      }
    }
  }
  return make_op(std::move(out), {x}, [n, c, h, w, oh, ow, ty = std::move(ty), tx = std::move(tx)](Node& self) {
    auto& g = in(self, 0).grad_buffer();
    for (std::int64_t p = 0; p < n * c; ++p) {
      double* gs = g.data() + p * h * w;
      const double* dy = self.grad.data() + p * oh * ow;
      for (std::int64_t i = 0; i < oh; ++i) {
        const auto& a = ty[static_cast<std::size_t>(i)];
        for (std::int64_t j = 0; j < ow; ++j) {
          const auto& b = tx[static_cast<std::size_t>(j)];
          const double d = dy[i * ow + j];
          gs[a.lo * w + b.lo] += d * (1 - a.w_hi) * (1 - b.w_hi);
          gs[a.lo * w + b.hi] += d * (1 - a.w_hi) * b.w_hi;
          gs[a.hi * w + b.lo] += d * a.w_hi * (1 - b.w_hi);
          gs[a.hi * w + b.hi] += d * a.w_hi * b.w_hi;
        }
      }
    }
  });
}

namespace {

void check_bn_params(const Tensor& x, const Var& gamma, const Var& beta) {
  require4(x, "batch_norm");
  const std::int64_t c = x.dim(1);
  if (gamma.value().numel() != c || beta.value().numel() != c) {
    throw ShapeError("batch_norm: affine parameters do not match channel count");
  }
}

}  // namespace

Var batch_norm_train(const Var& x, const Var& gamma, const Var& beta, BatchNormStats& stats, double momentum,
                     double eps) {
  const Tensor& v = x.value();
  check_bn_params(v, gamma, beta);
  const std::int64_t n = v.dim(0), c = v.dim(1), hw = v.dim(2) * v.dim(3);
  const double m = static_cast<double>(n * hw);
  if (stats.running_mean.numel() != c) stats.running_mean = Tensor({c}, 0.0);
  if (stats.running_var.numel() != c) stats.running_var = Tensor({c}, 1.0);

  Tensor xhat(v.shape());
  Tensor inv_std({c});
  Tensor out(v.shape());
  for (std::int64_t k = 0; k < c; ++k) {
    double mu = 0.0;
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t p = 0; p < hw; ++p) mu += v[(i * c + k) * hw + p];
    mu /= m;
    double var = 0.0;
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t p = 0; p < hw; ++p) {
        const double d = v[(i * c + k) * hw + p] - mu;
        var += d * d;
      }
    var /= m;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[k] = is;
    const double g = gamma.value()[k], b = beta.value()[k];
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t p = 0; p < hw; ++p) {
        const std::int64_t idx = (i * c + k) * hw + p;
        xhat[idx] = (v[idx] - mu) * is;
        out[idx] = g * xhat[idx] + b;
      }
    stats.running_mean[k] = (1.0 - momentum) * stats.running_mean[k] + momentum * mu;
    const double unbiased = m > 1 ? var * m / (m - 1.0) : var;
    stats.running_var[k] = (1.0 - momentum) * stats.running_var[k] + momentum * unbiased;
  }
  return make_op(std::move(out), {x, gamma, beta}, [xhat = std::move(xhat), inv_std, n, c, hw, m](Node& self) {
    const Tensor& gv = in(self, 1).value;
    for (std::int64_t k = 0; k < c; ++k) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t p = 0; p < hw; ++p) {
          const std::int64_t idx = (i * c + k) * hw + p;
          sum_dy += self.grad[idx];
          sum_dy_xhat += self.grad[idx] * xhat[idx];
        }
      if (wants(self, 1)) in(self, 1).grad_buffer()[k] += sum_dy_xhat;
      if (wants(self, 2)) in(self, 2).grad_buffer()[k] += sum_dy;
      if (wants(self, 0)) {
        auto& gx = in(self, 0).grad_buffer();
        const double scale_k = gv[k] * inv_std[k] / m;
        for (std::int64_t i = 0; i < n; ++i)
          for (std::int64_t p = 0; p < hw; ++p) {
            const std::int64_t idx = (i * c + k) * hw + p;
            gx[idx] += scale_k * (m * self.grad[idx] - sum_dy - xhat[idx] * sum_dy_xhat);
          }
      }
    }
  });
}

Var batch_norm_eval(const Var& x, const Var& gamma, const Var& beta, const BatchNormStats& stats, double eps) {
  const Tensor& v = x.value();
  check_bn_params(v, gamma, beta);
  const std::int64_t n = v.dim(0), c = v.dim(1), hw = v.dim(2) * v.dim(3);
  if (stats.running_mean.numel() != c || stats.running_var.numel() != c) {
    throw ShapeError("batch_norm_eval: running statistics not initialized");
  }
  Tensor inv_std({c});
  Tensor out(v.shape());
  for (std::int64_t k = 0; k < c; ++k) {
    inv_std[k] = 1.0 / std::sqrt(stats.running_var[k] + eps);
    const double mu = stats.running_mean[k];
    const double g = gamma.value()[k], b = beta.value()[k];
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t p = 0; p < hw; ++p) {
        const std::int64_t idx = (i * c + k) * hw + p;
        out[idx] = g * (v[idx] - mu) * inv_std[k] + b;
      }
  }
  const Tensor mean_copy = stats.running_mean;
  return make_op(std::move(out), {x, gamma, beta}, [inv_std, mean_copy, n, c, hw](Node& self) {
    const Tensor& xv = in(self, 0).value;
    const Tensor& gv = in(self, 1).value;
    for (std::int64_t k = 0; k < c; ++k) {
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t p = 0; p < hw; ++p) {
          const std::int64_t idx = (i * c + k) * hw + p;
          const double dy = self.grad[idx];
          if (wants(self, 0)) in(self, 0).grad_buffer()[idx] += dy * gv[k] * inv_std[k];
          if (wants(self, 1)) in(self, 1).grad_buffer()[k] += dy * (xv[idx] - mean_copy[k]) * inv_std[k];
          if (wants(self, 2)) in(self, 2).grad_buffer()[k] += dy;
        }
    }
  });
}

}  // namespace sdgcount::ag
