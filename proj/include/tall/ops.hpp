#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "tall/tape.hpp"

namespace tall {

using IndexMap = std::vector<std::uint32_t>;
using IndexMapPtr = std::shared_ptr<const IndexMap>;

namespace kernel {

/// C[m,n] (+)= op(A) * op(B), row-major. Transposed operands are staged
/// through a scratch copy so the inner loop stays contiguous.
template <Scalar T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          const T* b, T* c, bool accumulate) {
    std::vector<T> bt;
    if (trans_b) {
        bt.resize(k * n);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
        b = bt.data();
    }
    if (!accumulate) std::fill(c, c + m * n, T{0});
    for (std::size_t i = 0; i < m; ++i) {
        T* __restrict crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const T av = trans_a ? a[p * m + i] : a[i * k + p];
            const T* __restrict brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace kernel

namespace detail {

template <Scalar T>
void check_same(const char* op, const Var<T>& a, const Var<T>& b) {
    if (a.tape != b.tape) throw UsageError(std::string(op) + ": operands on different tapes");
    if (a.shape() != b.shape()) throw ShapeError(op, a.shape(), b.shape());
}

inline std::size_t last_dim(const Shape& s) { return s.back(); }

}  // namespace detail

/// Matrix product over the last two axes; rank-3 operands are batched.
template <Scalar T>
Var<T> matmul(Var<T> a, Var<T> b, bool trans_a = false, bool trans_b = false) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.size() != sb.size() || (sa.size() != 2 && sa.size() != 3)) throw ShapeError("matmul", sa, sb);
    const bool batched = sa.size() == 3;
    const std::size_t batch = batched ? sa[0] : 1;
    if (batched && sb[0] != batch) throw ShapeError("matmul", sa, sb);
    const std::size_t r0 = sa[sa.size() - 2], r1 = sa.back();
    const std::size_t q0 = sb[sb.size() - 2], q1 = sb.back();
    const std::size_t m = trans_a ? r1 : r0, k = trans_a ? r0 : r1;
    const std::size_t kb = trans_b ? q1 : q0, n = trans_b ? q0 : q1;
    if (k != kb) throw ShapeError("matmul", sa, sb);

    Shape so = batched ? Shape{batch, m, n} : Shape{m, n};
    Tensor<T> out(so);
    const T* pa = a.value().raw();
    const T* pb = b.value().raw();
    for (std::size_t bi = 0; bi < batch; ++bi)
        kernel::gemm(trans_a, trans_b, m, n, k, pa + bi * m * k, pb + bi * k * n, out.raw() + bi * m * n, false);

    return a.tape->push(OpKind::matmul, std::move(out), {a, b}, [=](Tape<T>& t, const auto& node) {
        const T* g = node.grad.data();
        const std::size_t ia = node.inputs[0], ib = node.inputs[1];
        const T* va = t.value(ia).raw();
        const T* vb = t.value(ib).raw();
        if (t.requires_grad(ia)) {
            T* ga = t.grad_buffer(ia);
            for (std::size_t bi = 0; bi < batch; ++bi) {
                // dA = dC op(B)^T, laid out as A is stored.
                if (!trans_a)
                    kernel::gemm(false, !trans_b, m, k, n, g + bi * m * n, vb + bi * k * n, ga + bi * m * k, true);
                else
                    kernel::gemm(trans_b, true, k, m, n, vb + bi * k * n, g + bi * m * n, ga + bi * m * k, true);
            }
        }
        if (t.requires_grad(ib)) {
            T* gb = t.grad_buffer(ib);
            for (std::size_t bi = 0; bi < batch; ++bi) {
                if (!trans_b)
                    kernel::gemm(!trans_a, false, k, n, m, va + bi * m * k, g + bi * m * n, gb + bi * k * n, true);
                else
                    kernel::gemm(true, trans_a, n, k, m, g + bi * m * n, va + bi * m * k, gb + bi * k * n, true);
            }
        }
    });
}

template <Scalar T>
Var<T> add(Var<T> a, Var<T> b) {
    detail::check_same("add", a, b);
    Tensor<T> out = a.value();
    const auto& vb = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += vb[i];
    return a.tape->push(OpKind::add, std::move(out), {a, b}, [](Tape<T>& t, const auto& node) {
        for (auto in : node.inputs) {
            if (!t.requires_grad(in)) continue;
            T* g = t.grad_buffer(in);
            for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] += node.grad[i];
        }
    });
}

template <Scalar T>
Var<T> sub(Var<T> a, Var<T> b) {
    detail::check_same("sub", a, b);
    Tensor<T> out = a.value();
    const auto& vb = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= vb[i];
    return a.tape->push(OpKind::sub, std::move(out), {a, b}, [](Tape<T>& t, const auto& node) {
        const T sign[2] = {T{1}, T{-1}};
        for (std::size_t k = 0; k < 2; ++k) {
            if (!t.requires_grad(node.inputs[k])) continue;
            T* g = t.grad_buffer(node.inputs[k]);
            for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] += sign[k] * node.grad[i];
        }
    });
}

template <Scalar T>
Var<T> mul(Var<T> a, Var<T> b) {
    detail::check_same("mul", a, b);
    Tensor<T> out = a.value();
    const auto& vb = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
    return a.tape->push(OpKind::mul, std::move(out), {a, b}, [](Tape<T>& t, const auto& node) {
        const auto& va = t.value(node.inputs[0]);
        const auto& vb = t.value(node.inputs[1]);
        if (t.requires_grad(node.inputs[0])) {
            T* g = t.grad_buffer(node.inputs[0]);
            for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] += node.grad[i] * vb[i];
        }
        if (t.requires_grad(node.inputs[1])) {
            T* g = t.grad_buffer(node.inputs[1]);
            for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] += node.grad[i] * va[i];
        }
    });
}

template <Scalar T>
Var<T> scale(Var<T> a, T factor) {
    Tensor<T> out = a.value();
    for (auto& v : out.data()) v *= factor;
    return a.tape->push(OpKind::scale, std::move(out), {a}, [factor](Tape<T>& t, const auto& node) {
        T* g = t.grad_buffer(node.inputs[0]);
        for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] += factor * node.grad[i];
    });
}

/// x[..., d] + row[d], broadcast over leading axes.
template <Scalar T>
Var<T> add_row(Var<T> x, Var<T> row) {
    const std::size_t d = detail::last_dim(x.shape());
    if (row.value().size() != d) throw ShapeError("add_row", x.shape(), row.shape());
    Tensor<T> out = x.value();
    const T* r = row.value().raw();
    for (std::size_t i = 0; i < out.size(); i += d)
        for (std::size_t j = 0; j < d; ++j) out[i + j] += r[j];
    return x.tape->push(OpKind::add_row, std::move(out), {x, row}, [d](Tape<T>& t, const auto& node) {
        if (t.requires_grad(node.inputs[0])) {
            T* g = t.grad_buffer(node.inputs[0]);
            for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] += node.grad[i];
        }
        if (t.requires_grad(node.inputs[1])) {
            T* g = t.grad_buffer(node.inputs[1]);
            for (std::size_t i = 0; i < node.grad.size(); i += d)
                for (std::size_t j = 0; j < d; ++j) g[j] += node.grad[i + j];
        }
    });
}

/// x[..., d] * row[d], broadcast over leading axes.
template <Scalar T>
Var<T> mul_row(Var<T> x, Var<T> row) {
    const std::size_t d = detail::last_dim(x.shape());
    if (row.value().size() != d) throw ShapeError("mul_row", x.shape(), row.shape());
    Tensor<T> out = x.value();
    const T* r = row.value().raw();
    for (std::size_t i = 0; i < out.size(); i += d)
        for (std::size_t j = 0; j < d; ++j) out[i + j] *= r[j];
    return x.tape->push(OpKind::mul_row, std::move(out), {x, row}, [d](Tape<T>& t, const auto& node) {
        const auto& vx = t.value(node.inputs[0]);
        const auto& vr = t.value(node.inputs[1]);
        if (t.requires_grad(node.inputs[0])) {
            T* g = t.grad_buffer(node.inputs[0]);
            for (std::size_t i = 0; i < node.grad.size(); i += d)
                for (std::size_t j = 0; j < d; ++j) g[i + j] += node.grad[i + j] * vr[j];
        }
        if (t.requires_grad(node.inputs[1])) {
            T* g = t.grad_buffer(node.inputs[1]);
            for (std::size_t i = 0; i < node.grad.size(); i += d)
                for (std::size_t j = 0; j < d; ++j) g[j] += node.grad[i + j] * vx[i + j];
        }
    });
}

/// Softmax over the last axis.
template <Scalar T>
Var<T> softmax(Var<T> x) {
    const std::size_t d = detail::last_dim(x.shape());
    Tensor<T> out = x.value();
    for (std::size_t i = 0; i < out.size(); i += d) {
        T* row = out.raw() + i;
        const T mx = *std::max_element(row, row + d);
        T s = 0;
        for (std::size_t j = 0; j < d; ++j) {
            row[j] = std::exp(row[j] - mx);
            s += row[j];
        }
        const T inv = T{1} / s;
        for (std::size_t j = 0; j < d; ++j) row[j] *= inv;
    }
    return x.tape->push(OpKind::softmax, std::move(out), {x}, [d](Tape<T>& t, const auto& node) {
        const auto& y = node.value;
        T* g = t.grad_buffer(node.inputs[0]);
        for (std::size_t i = 0; i < y.size(); i += d) {
            T dot = 0;
            for (std::size_t j = 0; j < d; ++j) dot += node.grad[i + j] * y[i + j];
            for (std::size_t j = 0; j < d; ++j) g[i + j] += y[i + j] * (node.grad[i + j] - dot);
        }
    });
}

/// Normalises each row of the last axis to zero mean, unit (biased) variance.
template <Scalar T>
Var<T> layernorm(Var<T> x, T eps = T(1e-5)) {
    const std::size_t d = detail::last_dim(x.shape());
    Tensor<T> out = x.value();
    auto inv_std = std::make_shared<std::vector<T>>(out.size() / d);
    for (std::size_t r = 0; r * d < out.size(); ++r) {
        T* row = out.raw() + r * d;
        T mean = 0;
        for (std::size_t j = 0; j < d; ++j) mean += row[j];
        mean /= static_cast<T>(d);
        T var = 0;
        for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
        var /= static_cast<T>(d);
        const T is = T{1} / std::sqrt(var + eps);
        (*inv_std)[r] = is;
        for (std::size_t j = 0; j < d; ++j) row[j] = (row[j] - mean) * is;
    }
    return x.tape->push(OpKind::layernorm, std::move(out), {x}, [d, inv_std](Tape<T>& t, const auto& node) {
        const auto& y = node.value;
        T* g = t.grad_buffer(node.inputs[0]);
        const T invd = T{1} / static_cast<T>(d);
        for (std::size_t r = 0; r * d < y.size(); ++r) {
            const T* gy = node.grad.data() + r * d;
            const T* yr = y.raw() + r * d;
            T mg = 0, mgy = 0;
            for (std::size_t j = 0; j < d; ++j) {
                mg += gy[j];
                mgy += gy[j] * yr[j];
            }
            mg *= invd;
            mgy *= invd;
            const T is = (*inv_std)[r];
            for (std::size_t j = 0; j < d; ++j) g[r * d + j] += is * (gy[j] - mg - yr[j] * mgy);
        }
    });
}

/// Exact (erf) GELU.
template <Scalar T>
Var<T> gelu(Var<T> x) {
    Tensor<T> out = x.value();
    for (auto& v : out.data()) v = T(0.5) * v * (T{1} + std::erf(v * T((1.0 / std::numbers::sqrt2))));
    return x.tape->push(OpKind::gelu, std::move(out), {x}, [](Tape<T>& t, const auto& node) {
        const auto& vx = t.value(node.inputs[0]);
        T* g = t.grad_buffer(node.inputs[0]);
        const T c = T(std::numbers::inv_sqrtpi * (1.0 / std::numbers::sqrt2));
        for (std::size_t i = 0; i < vx.size(); ++i) {
            const T v = vx[i];
            const T cdf = T(0.5) * (T{1} + std::erf(v * T((1.0 / std::numbers::sqrt2))));
            const T pdf = c * std::exp(T(-0.5) * v * v);
            g[i] += node.grad[i] * (cdf + v * pdf);
        }
    });
}

template <Scalar T>
Var<T> relu(Var<T> x) {
    Tensor<T> out = x.value();
    for (auto& v : out.data()) v = v > T{0} ? v : T{0};
    return x.tape->push(OpKind::relu, std::move(out), {x}, [](Tape<T>& t, const auto& node) {
        const auto& vx = t.value(node.inputs[0]);
        T* g = t.grad_buffer(node.inputs[0]);
        for (std::size_t i = 0; i < vx.size(); ++i)
            if (vx[i] > T{0}) g[i] += node.grad[i];
    });
}

template <Scalar T>
Var<T> reshape(Var<T> x, Shape shape) {
    Tensor<T> out = x.value().reshaped(std::move(shape));
    return x.tape->push(OpKind::reshape, std::move(out), {x}, [](Tape<T>& t, const auto& node) {
        T* g = t.grad_buffer(node.inputs[0]);
        for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] += node.grad[i];
    });
}

namespace detail {

template <Scalar T>
Var<T> gather_impl(OpKind op, Var<T> x, IndexMapPtr map, Shape out_shape) {
    if (numel(out_shape) != map->size()) throw ShapeError(to_string(op), out_shape, Shape{map->size()});
    const auto& vx = x.value();
    Tensor<T> out(std::move(out_shape));
    for (std::size_t i = 0; i < map->size(); ++i) {
        const auto src = (*map)[i];
        if (src >= vx.size()) throw ShapeError(to_string(op), x.shape(), Shape{src});
        out[i] = vx[src];
    }
    return x.tape->push(op, std::move(out), {x}, [map](Tape<T>& t, const auto& node) {
        T* g = t.grad_buffer(node.inputs[0]);
        for (std::size_t i = 0; i < map->size(); ++i) g[(*map)[i]] += node.grad[i];
    });
}

/// out row i = x row map[i]; x viewed as [rows, width].
template <Scalar T>
Var<T> gather_rows_impl(OpKind op, Var<T> x, IndexMapPtr map, std::size_t width, Shape out_shape) {
    const auto& vx = x.value();
    if (vx.size() % width != 0 || numel(out_shape) != map->size() * width)
        throw ShapeError(to_string(op), x.shape(), out_shape);
    const std::size_t rows = vx.size() / width;
    Tensor<T> out(std::move(out_shape));
    for (std::size_t i = 0; i < map->size(); ++i) {
        const auto src = (*map)[i];
        if (src >= rows) throw ShapeError(to_string(op), x.shape(), Shape{src});
        std::copy_n(vx.raw() + src * width, width, out.raw() + i * width);
    }
    return x.tape->push(op, std::move(out), {x}, [map, width](Tape<T>& t, const auto& node) {
        T* g = t.grad_buffer(node.inputs[0]);
        for (std::size_t i = 0; i < map->size(); ++i) {
            T* dst = g + (*map)[i] * width;
            const T* src = node.grad.data() + i * width;
            for (std::size_t j = 0; j < width; ++j) dst[j] += src[j];
        }
    });
}

}  // namespace detail

/// out.flat[i] = x.flat[map[i]]; repeated sources accumulate in backward.
template <Scalar T>
Var<T> gather(Var<T> x, IndexMapPtr map, Shape out_shape) {
    return detail::gather_impl(OpKind::gather, x, std::move(map), std::move(out_shape));
}

/// Row gather over a [rows, width] view of x.
template <Scalar T>
Var<T> gather_rows(Var<T> x, IndexMapPtr map, std::size_t width, Shape out_shape) {
    return detail::gather_rows_impl(OpKind::gather_rows, x, std::move(map), width, std::move(out_shape));
}

/// Source flat index for each output element of an axis permutation.
inline IndexMap permute_map(const Shape& shape, const std::vector<std::size_t>& axes, Shape* out_shape = nullptr) {
    const std::size_t r = shape.size();
    if (axes.size() != r) throw ShapeError("permute", shape, Shape(axes.begin(), axes.end()));
    std::vector<bool> seen(r, false);
    for (auto a : axes) {
        if (a >= r || seen[a]) throw ShapeError("permute", shape, Shape(axes.begin(), axes.end()));
        seen[a] = true;
    }
    Shape os(r);
    for (std::size_t i = 0; i < r; ++i) os[i] = shape[axes[i]];
    std::vector<std::size_t> stride(r, 1);
    for (std::size_t i = r - 1; i-- > 0;) stride[i] = stride[i + 1] * shape[i + 1];
    IndexMap map(numel(shape));
    std::vector<std::size_t> idx(r, 0);
    for (std::size_t o = 0; o < map.size(); ++o) {
        std::size_t src = 0;
        for (std::size_t i = 0; i < r; ++i) src += idx[i] * stride[axes[i]];
        map[o] = static_cast<std::uint32_t>(src);
        for (std::size_t i = r; i-- > 0;) {
            if (++idx[i] < os[i]) break;
            idx[i] = 0;
        }
    }
    if (out_shape) *out_shape = os;
    return map;
}

template <Scalar T>
Var<T> permute(Var<T> x, const std::vector<std::size_t>& axes) {
    Shape os;
    auto map = std::make_shared<const IndexMap>(permute_map(x.shape(), axes, &os));
    return detail::gather_impl(OpKind::permute, x, std::move(map), std::move(os));
}

// Token grids are stored as [rows*cols, channels] in row-major token order.

/// Row map taking a [H*W, C] grid to windows: output is [nWh*nWw*wh*ww, C],
/// window-major, each window row-major.
inline IndexMap window_partition_map(std::size_t h, std::size_t w, std::size_t wh, std::size_t ww) {
    if (wh == 0 || ww == 0 || h % wh || w % ww) throw ShapeError("window_partition", Shape{h, w}, Shape{wh, ww});
    IndexMap map;
    map.reserve(h * w);
    for (std::size_t by = 0; by < h / wh; ++by)
        for (std::size_t bx = 0; bx < w / ww; ++bx)
            for (std::size_t y = 0; y < wh; ++y)
                for (std::size_t x = 0; x < ww; ++x)
                    map.push_back(static_cast<std::uint32_t>((by * wh + y) * w + bx * ww + x));
    return map;
}

inline IndexMap invert_map(const IndexMap& map) {
    IndexMap inv(map.size());
    for (std::size_t i = 0; i < map.size(); ++i) inv[map[i]] = static_cast<std::uint32_t>(i);
    return inv;
}

/// out[r][c] = x[(r+sh) mod H][(c+sw) mod W], i.e. a roll by (-sh, -sw).
inline IndexMap cyclic_shift_map(std::size_t h, std::size_t w, std::ptrdiff_t sh, std::ptrdiff_t sw) {
    IndexMap map(h * w);
    const auto H = static_cast<std::ptrdiff_t>(h), W = static_cast<std::ptrdiff_t>(w);
    for (std::ptrdiff_t r = 0; r < H; ++r)
        for (std::ptrdiff_t c = 0; c < W; ++c) {
            const auto sr = ((r + sh) % H + H) % H;
            const auto sc = ((c + sw) % W + W) % W;
            map[static_cast<std::size_t>(r * W + c)] = static_cast<std::uint32_t>(sr * W + sc);
        }
    return map;
}

template <Scalar T>
Var<T> window_partition(Var<T> x, std::size_t h, std::size_t w, std::size_t wh, std::size_t ww) {
    const std::size_t c = x.value().size() / (h * w);
    auto map = std::make_shared<const IndexMap>(window_partition_map(h, w, wh, ww));
    return detail::gather_rows_impl(OpKind::window_partition, x, std::move(map), c, Shape{h * w, c});
}

template <Scalar T>
Var<T> window_unpartition(Var<T> x, std::size_t h, std::size_t w, std::size_t wh, std::size_t ww) {
    const std::size_t c = x.value().size() / (h * w);
    auto map = std::make_shared<const IndexMap>(invert_map(window_partition_map(h, w, wh, ww)));
    return detail::gather_rows_impl(OpKind::window_unpartition, x, std::move(map), c, Shape{h * w, c});
}

template <Scalar T>
Var<T> cyclic_shift(Var<T> x, std::size_t h, std::size_t w, std::ptrdiff_t sh, std::ptrdiff_t sw) {
    const std::size_t c = x.value().size() / (h * w);
    auto map = std::make_shared<const IndexMap>(cyclic_shift_map(h, w, sh, sw));
    return detail::gather_rows_impl(OpKind::cyclic_shift, x, std::move(map), c, x.shape());
}

/// Mean of the rows of x[N, d] sharing a segment id; id -1 rows are ignored.
template <Scalar T>
Var<T> segment_mean(Var<T> x, std::vector<int> segments, std::size_t num_segments) {
    const Shape& s = x.shape();
    if (s.size() != 2 || segments.size() != s[0]) throw ShapeError("segment_mean", s, Shape{segments.size()});
    const std::size_t d = s[1];
    std::vector<std::size_t> count(num_segments, 0);
    for (int seg : segments) {
        if (seg < -1 || seg >= static_cast<int>(num_segments))
            throw ShapeError("segment_mean", s, Shape{num_segments});
        if (seg >= 0) ++count[static_cast<std::size_t>(seg)];
    }
    for (auto c : count)
        if (c == 0) throw ShapeError("segment_mean (empty segment)", s, Shape{num_segments});
    Tensor<T> out(Shape{num_segments, d});
    const auto& vx = x.value();
    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (segments[i] < 0) continue;
        T* dst = out.raw() + static_cast<std::size_t>(segments[i]) * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] += vx[i * d + j];
    }
    for (std::size_t k = 0; k < num_segments; ++k)
        for (std::size_t j = 0; j < d; ++j) out[k * d + j] /= static_cast<T>(count[k]);
    return x.tape->push(OpKind::segment_mean, std::move(out), {x},
                        [segs = std::move(segments), count, d](Tape<T>& t, const auto& node) {
                            T* g = t.grad_buffer(node.inputs[0]);
                            for (std::size_t i = 0; i < segs.size(); ++i) {
                                if (segs[i] < 0) continue;
                                const auto k = static_cast<std::size_t>(segs[i]);
                                const T inv = T{1} / static_cast<T>(count[k]);
                                for (std::size_t j = 0; j < d; ++j) g[i * d + j] += node.grad[k * d + j] * inv;
                            }
                        });
}

template <Scalar T>
Var<T> sum(Var<T> x) {
    const auto& vx = x.value();
    T s = 0;
    for (T v : vx.data()) s += v;
    return x.tape->push(OpKind::sum, Tensor<T>::scalar(s), {x}, [](Tape<T>& t, const auto& node) {
        T* g = t.grad_buffer(node.inputs[0]);
        const std::size_t n = t.value(node.inputs[0]).size();
        for (std::size_t i = 0; i < n; ++i) g[i] += node.grad[0];
    });
}

template <Scalar T>
Var<T> mean(Var<T> x) {
    const auto& vx = x.value();
    T s = 0;
    for (T v : vx.data()) s += v;
    const T n = static_cast<T>(vx.size());
    return x.tape->push(OpKind::mean, Tensor<T>::scalar(s / n), {x}, [n](Tape<T>& t, const auto& node) {
        T* g = t.grad_buffer(node.inputs[0]);
        const T gi = node.grad[0] / n;
        for (std::size_t i = 0; i < t.value(node.inputs[0]).size(); ++i) g[i] += gi;
    });
}

/// log(clamp(x, lo, hi)); the gradient is zero where the clamp is active.
template <Scalar T>
Var<T> log_clamped(Var<T> x, T lo, T hi) {
    Tensor<T> out = x.value();
    for (auto& v : out.data()) v = std::log(std::clamp(v, lo, hi));
    return x.tape->push(OpKind::log_clamped, std::move(out), {x}, [lo, hi](Tape<T>& t, const auto& node) {
        const auto& vx = t.value(node.inputs[0]);
        T* g = t.grad_buffer(node.inputs[0]);
        for (std::size_t i = 0; i < vx.size(); ++i)
            if (vx[i] > lo && vx[i] < hi) g[i] += node.grad[i] / vx[i];
    });
}

// Composites.

/// x[N, in] W[in, out] + b[out].
template <Scalar T>
Var<T> linear(Var<T> x, Var<T> weight, Var<T> bias) {
    return add_row(matmul(x, weight), bias);
}

template <Scalar T>
Var<T> linear(Var<T> x, Var<T> weight) {
    return matmul(x, weight);
}

template <Scalar T>
Var<T> layernorm(Var<T> x, Var<T> gamma, Var<T> beta, T eps = T(1e-5)) {
    return add_row(mul_row(layernorm(x, eps), gamma), beta);
}

}  // namespace tall
