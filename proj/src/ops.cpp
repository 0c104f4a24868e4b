// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "msdnet/ops.hpp"

#include "msdnet/errors.hpp"

#include <algorithm>
#include <cmath>

namespace msdnet {

namespace {

template <class Fn>
void record(std::string_view op, std::vector<Tensor> inputs, Tensor &out, Fn &&fn)
{
  out.set_requires_grad(true);
  Tape::active()->record(op, inputs, out, std::forward<Fn>(fn));
}

int normalize_axis(int axis, int rank)
{
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw ArgumentError("axis " + std::to_string(axis) + " out of range");
  return axis;
}

/// Splits a shape around `axis` into (outer, extent, inner).
struct AxisSplit
{
  Index outer = 1;
  Index extent = 1;
  Index inner = 1;
};

AxisSplit split_at(Shape const &shape, int axis)
{
  AxisSplit s;
  for (int i = 0; i < axis; ++i) s.outer *= shape[static_cast<std::size_t>(i)];
  s.extent = shape[static_cast<std::size_t>(axis)];
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

// ---------------------------------------------------------------------------
// Broadcasting

struct Broadcast
{
  Shape              out;
  std::vector<Index> stride_a;
  std::vector<Index> stride_b;
};

std::vector<Index> strides_for(Shape const &shape, Shape const &out)
{
  std::size_t const  r = out.size();
  std::vector<Index> strides(r, 0);
  Index              s = 1;
  for (std::size_t k = 0; k < shape.size(); ++k) {
    std::size_t const src = shape.size() - 1 - k;
    std::size_t const dst = r - 1 - k;
    strides[dst] = shape[src] == 1 ? 0 : s;
    s *= shape[src];
  }
  return strides;
}

Broadcast broadcast_shapes(Shape const &a, Shape const &b)
{
  std::size_t const r = std::max(a.size(), b.size());
  Broadcast         bc;
  bc.out.assign(r, 1);
  for (std::size_t k = 0; k < r; ++k) {
    Index const ea = k < a.size() ? a[a.size() - 1 - k] : 1;
    Index const eb = k < b.size() ? b[b.size() - 1 - k] : 1;
    if (ea != eb && ea != 1 && eb != 1) {
      throw DimensionError("cannot broadcast " + to_string(a) + " with " + to_string(b));
    }
    bc.out[r - 1 - k] = std::max(ea, eb);
  }
  bc.stride_a = strides_for(a, bc.out);
  bc.stride_b = strides_for(b, bc.out);
  return bc;
}

/// Calls fn(out_index, a_index, b_index) for every element of the output.
template <class Fn>
void for_each_broadcast(Broadcast const &bc, Fn &&fn)
{
  std::size_t const  r = bc.out.size();
  Index const        n = numel(bc.out);
  std::vector<Index> counter(r, 0);
  Index              ia = 0, ib = 0;
  for (Index o = 0; o < n; ++o) {
    fn(o, ia, ib);
    for (std::size_t k = r; k-- > 0;) {
      ++counter[k];
      ia += bc.stride_a[k];
      ib += bc.stride_b[k];
      if (counter[k] < bc.out[k]) break;
      ia -= bc.stride_a[k] * counter[k];
      ib -= bc.stride_b[k] * counter[k];
      counter[k] = 0;
    }
  }
}

enum class BinaryOp { Add, Sub, Mul };

Tensor binary(Tensor const &a, Tensor const &b, BinaryOp op)
{
  static constexpr std::string_view names[] = {"add", "sub", "mul"};
  std::string_view const            name = names[static_cast<int>(op)];

  if (a.shape() == b.shape()) {
    Vector v;
    switch (op) {
    case BinaryOp::Add: v = a.values() + b.values(); break;
    case BinaryOp::Sub: v = a.values() - b.values(); break;
    case BinaryOp::Mul: v = a.values().cwiseProduct(b.values()); break;
    }
    Tensor out(a.shape(), std::move(v));
    if (detail::tracking({&a, &b})) {
      record(name, {a, b}, out, [a, b, op](Vector const &g, GradientSink &sink) {
        switch (op) {
        case BinaryOp::Add:
          sink.add(a, g);
          sink.add(b, g);
          break;
        case BinaryOp::Sub:
          sink.add(a, g);
          if (Vector *gb = sink.slot(b)) *gb -= g;
          break;
        case BinaryOp::Mul:
          if (Vector *ga = sink.slot(a)) *ga += g.cwiseProduct(b.values());
          if (Vector *gb = sink.slot(b)) *gb += g.cwiseProduct(a.values());
          break;
        }
      });
    }
    return out;
  }

  Broadcast const bc = broadcast_shapes(a.shape(), b.shape());
  Vector          v(numel(bc.out));
  Vector const   &av = a.values();
  Vector const   &bv = b.values();
  for_each_broadcast(bc, [&](Index o, Index ia, Index ib) {
    switch (op) {
    case BinaryOp::Add: v[o] = av[ia] + bv[ib]; break;
    case BinaryOp::Sub: v[o] = av[ia] - bv[ib]; break;
    case BinaryOp::Mul: v[o] = av[ia] * bv[ib]; break;
    }
  });
  Tensor out(bc.out, std::move(v));
  if (detail::tracking({&a, &b})) {
    record(name, {a, b}, out, [a, b, op, bc](Vector const &g, GradientSink &sink) {
      Vector *ga = sink.slot(a);
      Vector *gb = sink.slot(b);
      for_each_broadcast(bc, [&](Index o, Index ia, Index ib) {
        switch (op) {
        case BinaryOp::Add:
          if (ga) (*ga)[ia] += g[o];
          if (gb) (*gb)[ib] += g[o];
          break;
        case BinaryOp::Sub:
          if (ga) (*ga)[ia] += g[o];
          if (gb) (*gb)[ib] -= g[o];
          break;
        case BinaryOp::Mul:
          if (ga) (*ga)[ia] += g[o] * b.values()[ib];
          if (gb) (*gb)[ib] += g[o] * a.values()[ia];
          break;
        }
      });
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convolution helpers

struct ConvGeometry
{
  Index channels, height, width;
  Index kernel_h, kernel_w;
  Index out_h, out_w;
  int   stride, padding, dilation;

  Index patch() const { return channels * kernel_h * kernel_w; }
  Index pixels() const { return out_h * out_w; }
};

void im2col(Scalar const *image, ConvGeometry const &g, RowMatrix &col)
{
  col.resize(g.patch(), g.pixels());
  for (Index c = 0; c < g.channels; ++c) {
    Scalar const *plane = image + c * g.height * g.width;
    for (Index ki = 0; ki < g.kernel_h; ++ki) {
      for (Index kj = 0; kj < g.kernel_w; ++kj) {
        Scalar *row = col.row((c * g.kernel_h + ki) * g.kernel_w + kj).data();
        for (Index oy = 0; oy < g.out_h; ++oy) {
          Index const iy = oy * g.stride - g.padding + ki * g.dilation;
          Scalar     *dst = row + oy * g.out_w;
          if (iy < 0 || iy >= g.height) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          Scalar const *src = plane + iy * g.width;
          for (Index ox = 0; ox < g.out_w; ++ox) {
            Index const ix = ox * g.stride - g.padding + kj * g.dilation;
            dst[ox] = (ix >= 0 && ix < g.width) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(RowMatrix const &col, ConvGeometry const &g, Scalar *image)
{
  for (Index c = 0; c < g.channels; ++c) {
    Scalar *plane = image + c * g.height * g.width;
    for (Index ki = 0; ki < g.kernel_h; ++ki) {
      for (Index kj = 0; kj < g.kernel_w; ++kj) {
        Scalar const *row = col.row((c * g.kernel_h + ki) * g.kernel_w + kj).data();
        for (Index oy = 0; oy < g.out_h; ++oy) {
          Index const iy = oy * g.stride - g.padding + ki * g.dilation;
          if (iy < 0 || iy >= g.height) continue;
          Scalar const *src = row + oy * g.out_w;
          Scalar       *dst = plane + iy * g.width;
          for (Index ox = 0; ox < g.out_w; ++ox) {
            Index const ix = ox * g.stride - g.padding + kj * g.dilation;
            if (ix >= 0 && ix < g.width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

/// Per-axis interpolation table for half-pixel bilinear resizing.
struct LerpTable
{
  std::vector<Index>  lo, hi;
  std::vector<Scalar> w_lo, w_hi;
};

LerpTable lerp_table(Index in, int scale)
{
  Index const out = in * scale;
  LerpTable   t;
  t.lo.resize(static_cast<std::size_t>(out));
  t.hi.resize(static_cast<std::size_t>(out));
  t.w_lo.resize(static_cast<std::size_t>(out));
  t.w_hi.resize(static_cast<std::size_t>(out));
  for (Index o = 0; o < out; ++o) {
    Scalar src = (static_cast<Scalar>(o) + 0.5) / scale - 0.5;
    if (src < 0) src = 0;
    Index const i0 = std::min(static_cast<Index>(std::floor(src)), in - 1);
    Index const i1 = std::min(i0 + 1, in - 1);
    Scalar const frac = src - static_cast<Scalar>(i0);
    auto const   k = static_cast<std::size_t>(o);
    t.lo[k] = i0;
    t.hi[k] = i1;
    t.w_lo[k] = 1.0 - frac;
    t.w_hi[k] = frac;
  }
  return t;
}

} // namespace

// ---------------------------------------------------------------------------

Tensor conv2d(Tensor const &input, Tensor const &weight, Tensor const &bias, int stride, int padding, int dilation)
{
  if (stride < 1) throw ArgumentError("conv2d: stride must be positive");
  if (dilation < 1) throw ArgumentError("conv2d: dilation must be positive");
  if (padding < 0) throw ArgumentError("conv2d: padding must be non-negative");
  if (input.rank() != 3 && input.rank() != 4) throw DimensionError("conv2d: input must be [C,H,W] or [N,C,H,W]");
  if (weight.rank() != 4) throw DimensionError("conv2d: weight must be [K,C,kh,kw]");

  bool const   batched = input.rank() == 4;
  Index const  batch = batched ? input.dim(0) : 1;
  ConvGeometry g{};
  g.channels = input.dim(-3);
  g.height = input.dim(-2);
  g.width = input.dim(-1);
  g.kernel_h = weight.dim(2);
  g.kernel_w = weight.dim(3);
  g.stride = stride;
  g.padding = padding;
  g.dilation = dilation;
  Index const filters = weight.dim(0);

  if (weight.dim(1) != g.channels) {
    throw DimensionError("conv2d: input has " + std::to_string(g.channels) + " channels, weight expects " +
                         std::to_string(weight.dim(1)));
  }
  if (g.kernel_h < 1 || g.kernel_w < 1) throw ArgumentError("conv2d: empty kernel");
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != filters)) {
    throw DimensionError("conv2d: bias must be [" + std::to_string(filters) + "]");
  }
  Index const span_h = g.height + 2 * padding - dilation * (g.kernel_h - 1) - 1;
  Index const span_w = g.width + 2 * padding - dilation * (g.kernel_w - 1) - 1;
  if (span_h < 0 || span_w < 0) throw DimensionError("conv2d: dilated kernel larger than padded input");
  g.out_h = span_h / stride + 1;
  g.out_w = span_w / stride + 1;

  bool const track = detail::tracking({&input, &weight, &bias});
  auto const w_mat = weight.matrix(filters, g.patch());

  Index const in_plane = g.channels * g.height * g.width;
  Index const out_plane = filters * g.pixels();
  Vector      out_values(batch * out_plane);

  std::vector<RowMatrix> cols(static_cast<std::size_t>(batch));
  for (Index n = 0; n < batch; ++n) {
    RowMatrix &col = cols[static_cast<std::size_t>(n)];
    im2col(input.values().data() + n * in_plane, g, col);
    Eigen::Map<RowMatrix> out(out_values.data() + n * out_plane, filters, g.pixels());
    out.noalias() = w_mat * col;
    if (bias.defined()) out.colwise() += bias.values();
    if (!track) col = RowMatrix();
  }

  Shape out_shape = batched ? Shape{batch, filters, g.out_h, g.out_w} : Shape{filters, g.out_h, g.out_w};
  Tensor out(std::move(out_shape), std::move(out_values));
  if (track) {
    record("conv2d", {input, weight, bias}, out,
           [input, weight, bias, g, batch, filters, in_plane, out_plane,
            cols = std::move(cols)](Vector const &grad, GradientSink &sink) {
             Vector *gi = sink.slot(input);
             Vector *gw = sink.slot(weight);
             Vector *gb = bias.defined() ? sink.slot(bias) : nullptr;
             auto    w_mat = weight.matrix(filters, g.patch());
             for (Index n = 0; n < batch; ++n) {
               Eigen::Map<RowMatrix const> go(grad.data() + n * out_plane, filters, g.pixels());
               if (gw) {
                 Eigen::Map<RowMatrix> gw_mat(gw->data(), filters, g.patch());
                 gw_mat.noalias() += go * cols[static_cast<std::size_t>(n)].transpose();
               }
               if (gb) *gb += go.rowwise().sum();
               if (gi) {
                 RowMatrix dcol = w_mat.transpose() * go;
                 col2im(dcol, g, gi->data() + n * in_plane);
               }
             }
           });
  }
  return out;
}

Tensor matmul(Tensor const &a, Tensor const &b)
{
  if (a.rank() != 2 || b.rank() != 2) throw DimensionError("matmul: operands must be matrices");
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: inner extents differ " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  Index const m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Vector      v(m * n);
  Eigen::Map<RowMatrix>(v.data(), m, n).noalias() = a.matrix(m, k) * b.matrix(k, n);
  Tensor out({m, n}, std::move(v));
  if (detail::tracking({&a, &b})) {
    record("matmul", {a, b}, out, [a, b, m, k, n](Vector const &g, GradientSink &sink) {
      Eigen::Map<RowMatrix const> gm(g.data(), m, n);
      if (Vector *ga = sink.slot(a)) Eigen::Map<RowMatrix>(ga->data(), m, k).noalias() += gm * b.matrix(k, n).transpose();
      if (Vector *gb = sink.slot(b)) Eigen::Map<RowMatrix>(gb->data(), k, n).noalias() += a.matrix(m, k).transpose() * gm;
    });
  }
  return out;
}

Tensor transpose(Tensor const &x)
{
  if (x.rank() != 2) throw DimensionError("transpose: operand must be a matrix");
  Index const m = x.dim(0), n = x.dim(1);
  Vector      v(m * n);
  Eigen::Map<RowMatrix>(v.data(), n, m) = x.matrix(m, n).transpose();
  Tensor out({n, m}, std::move(v));
  if (detail::tracking({&x})) {
    record("transpose", {x}, out, [x, m, n](Vector const &g, GradientSink &sink) {
      if (Vector *gx = sink.slot(x)) {
        Eigen::Map<RowMatrix>(gx->data(), m, n) += Eigen::Map<RowMatrix const>(g.data(), n, m).transpose();
      }
    });
  }
  return out;
}

Tensor softmax(Tensor const &x, int axis)
{
  axis = normalize_axis(axis, x.rank());
  AxisSplit const s = split_at(x.shape(), axis);
  Vector          y(x.numel());
  Vector const   &xv = x.values();
  for (Index o = 0; o < s.outer; ++o) {
    for (Index i = 0; i < s.inner; ++i) {
      Index const base = o * s.extent * s.inner + i;
      Scalar      mx = -std::numeric_limits<Scalar>::infinity();
      for (Index e = 0; e < s.extent; ++e) mx = std::max(mx, xv[base + e * s.inner]);
      Scalar total = 0;
      for (Index e = 0; e < s.extent; ++e) {
        Scalar const v = std::exp(xv[base + e * s.inner] - mx);
        y[base + e * s.inner] = v;
        total += v;
      }
      for (Index e = 0; e < s.extent; ++e) y[base + e * s.inner] /= total;
    }
  }
  Tensor out(x.shape(), std::move(y));
  if (detail::tracking({&x})) {
    record("softmax", {x}, out, [x, out, s](Vector const &g, GradientSink &sink) {
      Vector *gx = sink.slot(x);
      if (!gx) return;
      Vector const &yv = out.values();
      for (Index o = 0; o < s.outer; ++o) {
        for (Index i = 0; i < s.inner; ++i) {
          Index const base = o * s.extent * s.inner + i;
          Scalar      dot = 0;
          for (Index e = 0; e < s.extent; ++e) dot += g[base + e * s.inner] * yv[base + e * s.inner];
          for (Index e = 0; e < s.extent; ++e) {
            Index const k = base + e * s.inner;
            (*gx)[k] += yv[k] * (g[k] - dot);
          }
        }
      }
    });
  }
  return out;
}

Tensor add(Tensor const &a, Tensor const &b) { return binary(a, b, BinaryOp::Add); }
Tensor sub(Tensor const &a, Tensor const &b) { return binary(a, b, BinaryOp::Sub); }
Tensor mul(Tensor const &a, Tensor const &b) { return binary(a, b, BinaryOp::Mul); }

Tensor scale(Tensor const &x, Scalar factor)
{
  Tensor out(x.shape(), x.values() * factor);
  if (detail::tracking({&x})) {
    record("scale", {x}, out, [x, factor](Vector const &g, GradientSink &sink) {
      if (Vector *gx = sink.slot(x)) *gx += g * factor;
    });
  }
  return out;
}

Tensor add_scalar(Tensor const &x, Scalar value)
{
  Tensor out(x.shape(), (x.values().array() + value).matrix());
  if (detail::tracking({&x})) {
    record("add_scalar", {x}, out, [x](Vector const &g, GradientSink &sink) { sink.add(x, g); });
  }
  return out;
}

Tensor reciprocal(Tensor const &x)
{
  Tensor out(x.shape(), x.values().cwiseInverse());
  if (detail::tracking({&x})) {
    record("reciprocal", {x}, out, [x, out](Vector const &g, GradientSink &sink) {
      if (Vector *gx = sink.slot(x)) *gx -= (g.array() * out.values().array().square()).matrix();
    });
  }
  return out;
}

Tensor relu(Tensor const &x)
{
  Tensor out(x.shape(), x.values().cwiseMax(0.0));
  if (detail::tracking({&x})) {
    record("relu", {x}, out, [x](Vector const &g, GradientSink &sink) {
      if (Vector *gx = sink.slot(x)) *gx += (x.values().array() > 0.0).select(g, 0.0);
    });
  }
  return out;
}

Tensor sigmoid(Tensor const &x)
{
  Vector y = x.values().unaryExpr([](Scalar v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    Scalar const e = std::exp(v);
    return e / (1.0 + e);
  });
  Tensor out(x.shape(), std::move(y));
  if (detail::tracking({&x})) {
    record("sigmoid", {x}, out, [x, out](Vector const &g, GradientSink &sink) {
      if (Vector *gx = sink.slot(x)) {
        auto const y = out.values().array();
        *gx += (g.array() * y * (1.0 - y)).matrix();
      }
    });
  }
  return out;
}

Tensor sum(Tensor const &x, int axis)
{
  axis = normalize_axis(axis, x.rank());
  AxisSplit const s = split_at(x.shape(), axis);
  Vector          v = Vector::Zero(s.outer * s.inner);
  Vector const   &xv = x.values();
  for (Index o = 0; o < s.outer; ++o) {
    for (Index e = 0; e < s.extent; ++e) {
      v.segment(o * s.inner, s.inner) += xv.segment((o * s.extent + e) * s.inner, s.inner);
    }
  }
  Shape shape = x.shape();
  shape.erase(shape.begin() + axis);
  Tensor out(std::move(shape), std::move(v));
  if (detail::tracking({&x})) {
    record("sum", {x}, out, [x, s](Vector const &g, GradientSink &sink) {
      Vector *gx = sink.slot(x);
      if (!gx) return;
      for (Index o = 0; o < s.outer; ++o) {
        for (Index e = 0; e < s.extent; ++e) {
          gx->segment((o * s.extent + e) * s.inner, s.inner) += g.segment(o * s.inner, s.inner);
        }
      }
    });
  }
  return out;
}

Tensor mean(Tensor const &x, int axis)
{
  Index const extent = x.dim(axis);
  if (extent == 0) throw ArgumentError("mean over an empty axis");
  return scale(sum(x, axis), 1.0 / static_cast<Scalar>(extent));
}

Tensor sum_all(Tensor const &x)
{
  Tensor out = Tensor::scalar(x.values().sum());
  if (detail::tracking({&x})) {
    record("sum_all", {x}, out, [x](Vector const &g, GradientSink &sink) {
      if (Vector *gx = sink.slot(x)) gx->array() += g[0];
    });
  }
  return out;
}

Tensor mean_all(Tensor const &x)
{
  if (x.numel() == 0) throw ArgumentError("mean of an empty tensor");
  return scale(sum_all(x), 1.0 / static_cast<Scalar>(x.numel()));
}

Tensor concat(std::vector<Tensor> const &parts, int axis)
{
  if (parts.empty()) throw ArgumentError("concat of an empty list");
  int const rank = parts.front().rank();
  axis = normalize_axis(axis, rank);
  Shape shape = parts.front().shape();
  shape[static_cast<std::size_t>(axis)] = 0;
  for (auto const &p : parts) {
    if (p.rank() != rank) throw DimensionError("concat: rank mismatch");
    for (int k = 0; k < rank; ++k) {
      if (k != axis && p.dim(k) != parts.front().dim(k)) {
        throw DimensionError("concat: " + to_string(p.shape()) + " incompatible with " +
                             to_string(parts.front().shape()) + " along axis " + std::to_string(axis));
      }
    }
    shape[static_cast<std::size_t>(axis)] += p.dim(axis);
  }
  AxisSplit const s = split_at(shape, axis);
  Vector          v(numel(shape));
  Index           offset = 0;
  std::vector<Index> offsets;
  for (auto const &p : parts) {
    Index const chunk = p.dim(axis) * s.inner;
    for (Index o = 0; o < s.outer; ++o) {
      v.segment(o * s.extent * s.inner + offset, chunk) = p.values().segment(o * chunk, chunk);
    }
    offsets.push_back(offset);
    offset += chunk;
  }
  Tensor out(std::move(shape), std::move(v));
  if (detail::tracking(parts)) {
    record("concat", parts, out, [parts, offsets, s, axis](Vector const &g, GradientSink &sink) {
      for (std::size_t i = 0; i < parts.size(); ++i) {
        Vector *gp = sink.slot(parts[i]);
        if (!gp) continue;
        Index const chunk = parts[i].dim(axis) * s.inner;
        for (Index o = 0; o < s.outer; ++o) {
          gp->segment(o * chunk, chunk) += g.segment(o * s.extent * s.inner + offsets[i], chunk);
        }
      }
    });
  }
  return out;
}

Tensor narrow(Tensor const &x, int axis, Index start, Index length)
{
  axis = normalize_axis(axis, x.rank());
  if (start < 0 || length < 0 || start + length > x.dim(axis)) throw ArgumentError("narrow: range out of bounds");
  AxisSplit const s = split_at(x.shape(), axis);
  Shape           shape = x.shape();
  shape[static_cast<std::size_t>(axis)] = length;
  Index const chunk = length * s.inner;
  Vector      v(s.outer * chunk);
  for (Index o = 0; o < s.outer; ++o) {
    v.segment(o * chunk, chunk) = x.values().segment((o * s.extent + start) * s.inner, chunk);
  }
  Tensor out(std::move(shape), std::move(v));
  if (detail::tracking({&x})) {
    record("narrow", {x}, out, [x, s, start, chunk](Vector const &g, GradientSink &sink) {
      Vector *gx = sink.slot(x);
      if (!gx) return;
      for (Index o = 0; o < s.outer; ++o) {
        gx->segment((o * s.extent + start) * s.inner, chunk) += g.segment(o * chunk, chunk);
      }
    });
  }
  return out;
}

Tensor reshape(Tensor const &x, Shape shape)
{
  if (numel(shape) != x.numel()) {
    throw DimensionError("reshape " + to_string(x.shape()) + " -> " + to_string(shape) + " changes element count");
  }
  Tensor out(std::move(shape), x.values());
  if (detail::tracking({&x})) {
    record("reshape", {x}, out, [x](Vector const &g, GradientSink &sink) { sink.add(x, g); });
  }
  return out;
}

Tensor expand(Tensor const &x, Shape shape)
{
  Broadcast const bc = broadcast_shapes(x.shape(), shape);
  if (bc.out != shape) throw DimensionError("expand: " + to_string(x.shape()) + " does not expand to " + to_string(shape));
  Vector        v(numel(shape));
  Vector const &xv = x.values();
  for_each_broadcast(bc, [&](Index o, Index ia, Index) { v[o] = xv[ia]; });
  Tensor out(std::move(shape), std::move(v));
  if (detail::tracking({&x})) {
    record("expand", {x}, out, [x, bc](Vector const &g, GradientSink &sink) {
      Vector *gx = sink.slot(x);
      if (!gx) return;
      for_each_broadcast(bc, [&](Index o, Index ia, Index) { (*gx)[ia] += g[o]; });
    });
  }
  return out;
}

Tensor l2_normalize(Tensor const &x, int axis, Scalar eps)
{
  axis = normalize_axis(axis, x.rank());
  AxisSplit const s = split_at(x.shape(), axis);
  Vector          y(x.numel());
  Vector          norms(s.outer * s.inner);
  Vector const   &xv = x.values();
  for (Index o = 0; o < s.outer; ++o) {
    for (Index i = 0; i < s.inner; ++i) {
      Index const base = o * s.extent * s.inner + i;
      Scalar      sq = 0;
      for (Index e = 0; e < s.extent; ++e) sq += xv[base + e * s.inner] * xv[base + e * s.inner];
      Scalar const n = std::sqrt(sq + eps);
      norms[o * s.inner + i] = n;
      for (Index e = 0; e < s.extent; ++e) y[base + e * s.inner] = xv[base + e * s.inner] / n;
    }
  }
  Tensor out(x.shape(), std::move(y));
  if (detail::tracking({&x})) {
    record("l2_normalize", {x}, out, [x, s, norms](Vector const &g, GradientSink &sink) {
      Vector *gx = sink.slot(x);
      if (!gx) return;
      Vector const &xv = x.values();
      for (Index o = 0; o < s.outer; ++o) {
        for (Index i = 0; i < s.inner; ++i) {
          Index const  base = o * s.extent * s.inner + i;
          Scalar const n = norms[o * s.inner + i];
          Scalar       dot = 0;
          for (Index e = 0; e < s.extent; ++e) dot += g[base + e * s.inner] * xv[base + e * s.inner];
          for (Index e = 0; e < s.extent; ++e) {
            Index const k = base + e * s.inner;
            (*gx)[k] += g[k] / n - xv[k] * dot / (n * n * n);
          }
        }
      }
    });
  }
  return out;
}

Tensor standardize(Tensor const &x, Scalar eps)
{
  if (!(eps > 0)) throw ArgumentError("standardize: eps must be positive");
  Index const  n = x.numel();
  Tensor const centered = reshape(sub(x, mean_all(x)), {n});
  // sqrt(n) * c / sqrt(|c|^2 + n eps) == c / sqrt(var + eps)
  return reshape(scale(l2_normalize(centered, 0, static_cast<Scalar>(n) * eps), std::sqrt(static_cast<Scalar>(n))),
                 x.shape());
}

Tensor bilinear_upsample(Tensor const &x, int scale)
{
  if (scale < 1) throw ArgumentError("bilinear_upsample: scale must be >= 1");
  if (x.rank() < 2) throw DimensionError("bilinear_upsample: need at least two axes");
  if (scale == 1) return reshape(x, x.shape());

  Index const h = x.dim(-2), w = x.dim(-1);
  Index const oh = h * scale, ow = w * scale;
  Index const planes = x.numel() / (h * w);
  LerpTable   ty = lerp_table(h, scale);
  LerpTable   tx = lerp_table(w, scale);

  Vector        v(planes * oh * ow);
  Vector const &xv = x.values();
  for (Index p = 0; p < planes; ++p) {
    Scalar const *src = xv.data() + p * h * w;
    Scalar       *dst = v.data() + p * oh * ow;
    for (Index oy = 0; oy < oh; ++oy) {
      auto const    ky = static_cast<std::size_t>(oy);
      Scalar const *r0 = src + ty.lo[ky] * w;
      Scalar const *r1 = src + ty.hi[ky] * w;
      for (Index ox = 0; ox < ow; ++ox) {
        auto const kx = static_cast<std::size_t>(ox);
        Scalar const top = tx.w_lo[kx] * r0[tx.lo[kx]] + tx.w_hi[kx] * r0[tx.hi[kx]];
        Scalar const bot = tx.w_lo[kx] * r1[tx.lo[kx]] + tx.w_hi[kx] * r1[tx.hi[kx]];
        dst[oy * ow + ox] = ty.w_lo[ky] * top + ty.w_hi[ky] * bot;
      }
    }
  }
  Shape shape = x.shape();
  shape[shape.size() - 2] = oh;
  shape[shape.size() - 1] = ow;
  Tensor out(std::move(shape), std::move(v));
  if (detail::tracking({&x})) {
    record("bilinear_upsample", {x}, out,
           [x, ty = std::move(ty), tx = std::move(tx), planes, h, w, oh, ow](Vector const &g, GradientSink &sink) {
             Vector *gx = sink.slot(x);
             if (!gx) return;
             for (Index p = 0; p < planes; ++p) {
               Scalar const *src = g.data() + p * oh * ow;
               Scalar       *dst = gx->data() + p * h * w;
               for (Index oy = 0; oy < oh; ++oy) {
                 auto const ky = static_cast<std::size_t>(oy);
                 Scalar    *r0 = dst + ty.lo[ky] * w;
                 Scalar    *r1 = dst + ty.hi[ky] * w;
                 for (Index ox = 0; ox < ow; ++ox) {
                   auto const   kx = static_cast<std::size_t>(ox);
                   Scalar const go = src[oy * ow + ox];
                   r0[tx.lo[kx]] += ty.w_lo[ky] * tx.w_lo[kx] * go;
                   r0[tx.hi[kx]] += ty.w_lo[ky] * tx.w_hi[kx] * go;
                   r1[tx.lo[kx]] += ty.w_hi[ky] * tx.w_lo[kx] * go;
                   r1[tx.hi[kx]] += ty.w_hi[ky] * tx.w_hi[kx] * go;
                 }
               }
             }
           });
  }
  return out;
}

Tensor cosine_similarity_map(Tensor const &features, Tensor const &vec, Scalar eps)
{
  if (features.rank() != 3) throw DimensionError("cosine_similarity_map: features must be [C,H,W]");
  if (vec.rank() != 1 || vec.dim(0) != features.dim(0)) {
    throw DimensionError("cosine_similarity_map: vector width " + to_string(vec.shape()) + " vs features " +
                         to_string(features.shape()));
  }
  Index const c = features.dim(0), hw = features.dim(1) * features.dim(2);
  auto const  f = features.matrix(c, hw);
  auto const  p = vec.values();

  Vector const dots = f.transpose() * p;
  Vector const fnorm = f.colwise().norm().transpose();
  Scalar const pnorm = p.norm();
  Vector const denom = (fnorm.array() * pnorm + eps).matrix();
  Vector       y = dots.cwiseQuotient(denom);

  Tensor out({1, features.dim(1), features.dim(2)}, std::move(y));
  if (detail::tracking({&features, &vec})) {
    record("cosine_similarity_map", {features, vec}, out,
           [features, vec, c, hw, dots, fnorm, pnorm, denom](Vector const &g, GradientSink &sink) {
             auto const f = features.matrix(c, hw);
             auto const p = vec.values();
             // d/df_j = p/den - dot * |p| * f_j / (|f_j| den^2); symmetric for p.
             Vector const a = g.cwiseQuotient(denom);
             Vector       b(hw);
             for (Index j = 0; j < hw; ++j) b[j] = g[j] * dots[j] / (denom[j] * denom[j]);
             if (Vector *gf = sink.slot(features)) {
               Eigen::Map<RowMatrix> gm(gf->data(), c, hw);
               gm.noalias() += p * a.transpose();
               for (Index j = 0; j < hw; ++j) {
                 if (fnorm[j] > 0) gm.col(j) -= (b[j] * pnorm / fnorm[j]) * f.col(j);
               }
             }
             if (Vector *gp = sink.slot(vec)) {
               *gp += f * a;
               if (pnorm > 0) {
                 Scalar coef = 0;
                 for (Index j = 0; j < hw; ++j) coef += b[j] * fnorm[j];
                 *gp -= (coef / pnorm) * p;
               }
             }
           });
  }
  return out;
}

} // namespace msdnet
