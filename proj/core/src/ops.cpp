#include "laqsum/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "laqsum/errors.hpp"

namespace laqsum::ad {

namespace {

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                   shape_str(b));
}

template <typename T>
void require_matrix(const char* op, const Tensor<T>& t) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
}

// C[m,n] += A[m,k] * B[k,n]
template <typename T>
void gemm_nn(int m, int n, int k, const T* __restrict a, const T* __restrict b, T* __restrict c) {
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<std::size_t>(i) * n;
    const T* arow = a + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T(0)) continue;
      const T* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m,n] += A[k,m]^T * B[k,n]
template <typename T>
void gemm_tn(int m, int n, int k, const T* __restrict a, const T* __restrict b, T* __restrict c) {
  for (int p = 0; p < k; ++p) {
    const T* arow = a + static_cast<std::size_t>(p) * m;
    const T* brow = b + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const T av = arow[i];
      if (av == T(0)) continue;
      T* crow = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
std::vector<T> transposed(int rows, int cols, const T* src) {
  std::vector<T> out(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out[static_cast<std::size_t>(c) * rows + r] = src[static_cast<std::size_t>(r) * cols + c];
  return out;
}

// C[m,n] += A[m,k] * B[n,k]^T
template <typename T>
void gemm_nt(int m, int n, int k, const T* a, const T* b, T* c) {
  const std::vector<T> bt = transposed(n, k, b);
  gemm_nn(m, n, k, a, bt.data(), c);
}

}  // namespace

Mask Mask::none(int rows, int cols) {
  return Mask{rows, cols, std::vector<std::uint8_t>(static_cast<std::size_t>(rows) * cols, 0)};
}

Mask Mask::causal(int n) {
  Mask m = none(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = r + 1; c < n; ++c) m.blocked[static_cast<std::size_t>(r) * n + c] = 1;
  return m;
}

Mask Mask::key_padding(int rows, const std::vector<std::uint8_t>& key_padding) {
  const int cols = static_cast<int>(key_padding.size());
  Mask m = none(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m.blocked[static_cast<std::size_t>(r) * cols + c] = key_padding[c];
  return m;
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  if (a.cols() != b.rows()) shape_fail("matmul", a.shape(), b.shape());
  const int m = a.rows(), k = a.cols(), n = b.cols();
  auto out = detail::make_node<T>("matmul", {m, n}, {&a, &b});
  gemm_nn(m, n, k, a.data().data(), b.data().data(), out->value.data());
  if (out->requires_grad) {
    out->backward_fn = [m, n, k](Node<T>& self) {
      Node<T>& pa = *self.parents[0];
      Node<T>& pb = *self.parents[1];
      if (pa.requires_grad) {
        pa.ensure_grad();
        gemm_nt(m, k, n, self.grad.data(), pb.value.data(), pa.grad.data());
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        gemm_tn(k, n, m, pa.value.data(), self.grad.data(), pb.grad.data());
      }
    };
  }
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  require_matrix("matmul_nt", a);
  require_matrix("matmul_nt", b);
  if (a.cols() != b.cols()) shape_fail("matmul_nt", a.shape(), b.shape());
  const int m = a.rows(), k = a.cols(), n = b.rows();
  auto out = detail::make_node<T>("matmul_nt", {m, n}, {&a, &b});
  gemm_nt(m, n, k, a.data().data(), b.data().data(), out->value.data());
  if (out->requires_grad) {
    out->backward_fn = [m, n, k](Node<T>& self) {
      Node<T>& pa = *self.parents[0];
      Node<T>& pb = *self.parents[1];
      // dA[m,k] = dC[m,n] B[n,k]; dB[n,k] = dC^T[n,m] A[m,k]
      if (pa.requires_grad) {
        pa.ensure_grad();
        gemm_nn(m, k, n, self.grad.data(), pb.value.data(), pa.grad.data());
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        gemm_tn(n, k, m, self.grad.data(), pa.value.data(), pb.grad.data());
      }
    };
  }
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) shape_fail("add", a.shape(), b.shape());
  auto out = detail::make_node<T>("add", a.shape(), {&a, &b});
  const auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < av.size(); ++i) out->value[i] = av[i] + bv[i];
  if (out->requires_grad) {
    out->backward_fn = [](Node<T>& self) {
      for (auto& p : self.parents) {
        if (!p->requires_grad) continue;
        p->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
      }
    };
  }
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) shape_fail("sub", a.shape(), b.shape());
  auto out = detail::make_node<T>("sub", a.shape(), {&a, &b});
  const auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < av.size(); ++i) out->value[i] = av[i] - bv[i];
  if (out->requires_grad) {
    out->backward_fn = [](Node<T>& self) {
      Node<T>& pa = *self.parents[0];
      Node<T>& pb = *self.parents[1];
      if (pa.requires_grad) {
        pa.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] -= self.grad[i];
      }
    };
  }
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) shape_fail("mul", a.shape(), b.shape());
  auto out = detail::make_node<T>("mul", a.shape(), {&a, &b});
  const auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < av.size(); ++i) out->value[i] = av[i] * bv[i];
  if (out->requires_grad) {
    out->backward_fn = [](Node<T>& self) {
      Node<T>& pa = *self.parents[0];
      Node<T>& pb = *self.parents[1];
      if (pa.requires_grad) {
        pa.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * pb.value[i];
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += self.grad[i] * pa.value[i];
      }
    };
  }
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> add_row(const Tensor<T>& a, const Tensor<T>& bias) {
  require_matrix("add_row", a);
  if (bias.rank() != 1 || bias.dim(0) != a.cols()) shape_fail("add_row", a.shape(), bias.shape());
  const int m = a.rows(), n = a.cols();
  auto out = detail::make_node<T>("add_row", a.shape(), {&a, &bias});
  const auto av = a.data(), bv = bias.data();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out->value[static_cast<std::size_t>(i) * n + j] = av[static_cast<std::size_t>(i) * n + j] + bv[j];
  if (out->requires_grad) {
    out->backward_fn = [m, n](Node<T>& self) {
      Node<T>& pa = *self.parents[0];
      Node<T>& pb = *self.parents[1];
      if (pa.requires_grad) {
        pa.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) pb.grad[j] += self.grad[static_cast<std::size_t>(i) * n + j];
      }
    };
  }
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> scale_rows(const Tensor<T>& a, const Tensor<T>& factors) {
  require_matrix("scale_rows", a);
  if (factors.numel() != static_cast<std::size_t>(a.rows())) shape_fail("scale_rows", a.shape(), factors.shape());
  const int m = a.rows(), n = a.cols();
  auto out = detail::make_node<T>("scale_rows", a.shape(), {&a, &factors});
  const auto av = a.data(), fv = factors.data();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out->value[static_cast<std::size_t>(i) * n + j] = fv[i] * av[static_cast<std::size_t>(i) * n + j];
  if (out->requires_grad) {
    out->backward_fn = [m, n](Node<T>& self) {
      Node<T>& pa = *self.parents[0];
      Node<T>& pf = *self.parents[1];
      if (pa.requires_grad) {
        pa.ensure_grad();
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) pa.grad[static_cast<std::size_t>(i) * n + j] += pf.value[i] * self.grad[static_cast<std::size_t>(i) * n + j];
      }
      if (pf.requires_grad) {
        pf.ensure_grad();
        for (int i = 0; i < m; ++i) {
          T acc = 0;
          for (int j = 0; j < n; ++j) acc += pa.value[static_cast<std::size_t>(i) * n + j] * self.grad[static_cast<std::size_t>(i) * n + j];
          pf.grad[i] += acc;
        }
      }
    };
  }
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  auto out = detail::make_node<T>("scale", a.shape(), {&a});
  const auto av = a.data();
  for (std::size_t i = 0; i < av.size(); ++i) out->value[i] = av[i] * factor;
  if (out->requires_grad) {
    out->backward_fn = [factor](Node<T>& self) {
      Node<T>& pa = *self.parents[0];
      pa.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * factor;
    };
  }
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T offset) {
  auto out = detail::make_node<T>("add_scalar", a.shape(), {&a});
  const auto av = a.data();
  for (std::size_t i = 0; i < av.size(); ++i) out->value[i] = av[i] + offset;
  if (out->requires_grad) {
    out->backward_fn = [](Node<T>& self) {
      Node<T>& pa = *self.parents[0];
      pa.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    };
  }
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  auto out = detail::make_node<T>("relu", a.shape(), {&a});
  const auto av = a.data();
  for (std::size_t i = 0; i < av.size(); ++i) out->value[i] = av[i] > T(0) ? av[i] : T(0);
  if (out->requires_grad) {
    out->backward_fn = [](Node<T>& self) {
      Node<T>& pa = *self.parents[0];
      pa.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        if (pa.value[i] > T(0)) pa.grad[i] += self.grad[i];
    };
  }
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> log(const Tensor<T>& a) {
  auto out = detail::make_node<T>("log", a.shape(), {&a});
  const auto av = a.data();
  for (std::size_t i = 0; i < av.size(); ++i) out->value[i] = std::log(av[i]);
  if (out->requires_grad) {
    out->backward_fn = [](Node<T>& self) {
      Node<T>& pa = *self.parents[0];
      pa.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] / pa.value[i];
    };
  }
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> clamp(const Tensor<T>& a, T lo, T hi) {
  auto out = detail::make_node<T>("clamp", a.shape(), {&a});
  const auto av = a.data();
  for (std::size_t i = 0; i < av.size(); ++i) out->value[i] = std::clamp(av[i], lo, hi);
  if (out->requires_grad) {
    out->backward_fn = [lo, hi](Node<T>& self) {
      Node<T>& pa = *self.parents[0];
      pa.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        if (pa.value[i] > lo && pa.value[i] < hi) pa.grad[i] += self.grad[i];
    };
  }
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& a, T temperature, const Mask* mask) {
  if (!(temperature > T(0))) throw ConfigError("softmax_rows: temperature must be > 0");
  const int m = a.rows(), n = a.cols();
  if (mask && (mask->rows != m || mask->cols != n)) {
    throw ShapeError("softmax_rows: mask [" + std::to_string(mask->rows) + "," +
                     std::to_string(mask->cols) + "] does not match scores " + shape_str(a.shape()));
  }
  auto out = detail::make_node<T>("softmax_rows", a.shape(), {&a});
  const auto av = a.data();
  for (int i = 0; i < m; ++i) {
    const T* row = av.data() + static_cast<std::size_t>(i) * n;
    T* orow = out->value.data() + static_cast<std::size_t>(i) * n;
    T mx = -std::numeric_limits<T>::infinity();
    for (int j = 0; j < n; ++j)
      if (!(mask && mask->is_blocked(i, j))) mx = std::max(mx, row[j] / temperature);
    if (mx == -std::numeric_limits<T>::infinity()) continue;  // fully blocked row
    T total = 0;
    for (int j = 0; j < n; ++j) {
      if (mask && mask->is_blocked(i, j)) continue;
      orow[j] = std::exp(row[j] / temperature - mx);
      total += orow[j];
    }
    for (int j = 0; j < n; ++j) orow[j] /= total;
  }
  if (out->requires_grad) {
    out->backward_fn = [m, n, temperature](Node<T>& self) {
      Node<T>& pa = *self.parents[0];
      pa.ensure_grad();
      for (int i = 0; i < m; ++i) {
        const T* y = self.value.data() + static_cast<std::size_t>(i) * n;
        const T* g = self.grad.data() + static_cast<std::size_t>(i) * n;
        T dot = 0;
        for (int j = 0; j < n; ++j) dot += y[j] * g[j];
        T* ga = pa.grad.data() + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) ga[j] += y[j] * (g[j] - dot) / temperature;
      }
    };
  }
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& a, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  require_matrix("layer_norm", a);
  const int m = a.rows(), n = a.cols();
  if (gain.numel() != static_cast<std::size_t>(n)) shape_fail("layer_norm(gain)", a.shape(), gain.shape());
  if (bias.numel() != static_cast<std::size_t>(n)) shape_fail("layer_norm(bias)", a.shape(), bias.shape());
  auto out = detail::make_node<T>("layer_norm", a.shape(), {&a, &gain, &bias});
  std::vector<T> normalized(static_cast<std::size_t>(m) * n);
  std::vector<T> inv_std(m);
  const auto av = a.data(), gv = gain.data(), bv = bias.data();
  for (int i = 0; i < m; ++i) {
    const T* row = av.data() + static_cast<std::size_t>(i) * n;
    T mu = 0;
    for (int j = 0; j < n; ++j) mu += row[j];
    mu /= n;
    T var = 0;
    for (int j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= n;
    inv_std[i] = T(1) / std::sqrt(var + eps);
    for (int j = 0; j < n; ++j) {
      const std::size_t idx = static_cast<std::size_t>(i) * n + j;
      normalized[idx] = (row[j] - mu) * inv_std[i];
      out->value[idx] = normalized[idx] * gv[j] + bv[j];
    }
  }
  if (out->requires_grad) {
    out->backward_fn = [m, n, normalized = std::move(normalized), inv_std = std::move(inv_std)](Node<T>& self) {
      Node<T>& pa = *self.parents[0];
      Node<T>& pg = *self.parents[1];
      Node<T>& pb = *self.parents[2];
      if (pg.requires_grad) pg.ensure_grad();
      if (pb.requires_grad) pb.ensure_grad();
      if (pa.requires_grad) pa.ensure_grad();
      std::vector<T> dxhat(n);
      for (int i = 0; i < m; ++i) {
        const std::size_t base = static_cast<std::size_t>(i) * n;
        T sum_d = 0, sum_dx = 0;
        for (int j = 0; j < n; ++j) {
          const T g = self.grad[base + j];
          if (pg.requires_grad) pg.grad[j] += g * normalized[base + j];
          if (pb.requires_grad) pb.grad[j] += g;
          dxhat[j] = g * pg.value[j];
          sum_d += dxhat[j];
          sum_dx += dxhat[j] * normalized[base + j];
        }
        if (!pa.requires_grad) continue;
        for (int j = 0; j < n; ++j) {
          pa.grad[base + j] += inv_std[i] / n * (n * dxhat[j] - sum_d - normalized[base + j] * sum_dx);
        }
      }
    };
  }
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> embedding(const Tensor<T>& table, const std::vector<int>& ids) {
  require_matrix("embedding", table);
  const int v = table.rows(), d = table.cols();
  const int m = static_cast<int>(ids.size());
  for (int id : ids) {
    if (id < 0 || id >= v) {
      throw ShapeError("embedding: id " + std::to_string(id) + " outside table " + shape_str(table.shape()));
    }
  }
  auto out = detail::make_node<T>("embedding", {m, d}, {&table});
  const auto tv = table.data();
  for (int i = 0; i < m; ++i)
    std::copy_n(tv.data() + static_cast<std::size_t>(ids[i]) * d, d, out->value.data() + static_cast<std::size_t>(i) * d);
  if (out->requires_grad) {
    out->backward_fn = [ids, d](Node<T>& self) {
      Node<T>& pt = *self.parents[0];
      pt.ensure_grad();
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (int j = 0; j < d; ++j) pt.grad[static_cast<std::size_t>(ids[i]) * d + j] += self.grad[i * d + j];
    };
  }
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const int m = parts[0].rows();
  int total = 0;
  std::vector<int> widths;
  for (const auto& p : parts) {
    require_matrix("concat_cols", p);
    if (p.rows() != m) shape_fail("concat_cols", parts[0].shape(), p.shape());
    widths.push_back(p.cols());
    total += p.cols();
  }
  auto out = detail::make_node<T>("concat_cols", {m, total}, parts);
  int offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto pv = parts[k].data();
    for (int i = 0; i < m; ++i)
      std::copy_n(pv.data() + static_cast<std::size_t>(i) * widths[k], widths[k],
                  out->value.data() + static_cast<std::size_t>(i) * total + offset);
    offset += widths[k];
  }
  if (out->requires_grad) {
    out->backward_fn = [m, total, widths](Node<T>& self) {
      int off = 0;
      for (std::size_t k = 0; k < widths.size(); ++k) {
        Node<T>& p = *self.parents[k];
        if (p.requires_grad) {
          p.ensure_grad();
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < widths[k]; ++j)
              p.grad[static_cast<std::size_t>(i) * widths[k] + j] += self.grad[static_cast<std::size_t>(i) * total + off + j];
        }
        off += widths[k];
      }
    };
  }
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& a, int start, int len) {
  require_matrix("slice_cols", a);
  const int m = a.rows(), n = a.cols();
  if (start < 0 || len < 0 || start + len > n) {
    throw ShapeError("slice_cols: range [" + std::to_string(start) + "," + std::to_string(start + len) +
                     ") outside " + shape_str(a.shape()));
  }
  auto out = detail::make_node<T>("slice_cols", {m, len}, {&a});
  const auto av = a.data();
  for (int i = 0; i < m; ++i)
    std::copy_n(av.data() + static_cast<std::size_t>(i) * n + start, len, out->value.data() + static_cast<std::size_t>(i) * len);
  if (out->requires_grad) {
    out->backward_fn = [m, n, start, len](Node<T>& self) {
      Node<T>& pa = *self.parents[0];
      pa.ensure_grad();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < len; ++j)
          pa.grad[static_cast<std::size_t>(i) * n + start + j] += self.grad[static_cast<std::size_t>(i) * len + j];
    };
  }
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& a, int start, int len) {
  require_matrix("slice_rows", a);
  const int m = a.rows(), n = a.cols();
  if (start < 0 || len < 0 || start + len > m) {
    throw ShapeError("slice_rows: range [" + std::to_string(start) + "," + std::to_string(start + len) +
                     ") outside " + shape_str(a.shape()));
  }
  auto out = detail::make_node<T>("slice_rows", {len, n}, {&a});
  const auto av = a.data();
  std::copy_n(av.data() + static_cast<std::size_t>(start) * n, static_cast<std::size_t>(len) * n, out->value.data());
  if (out->requires_grad) {
    out->backward_fn = [n, start](Node<T>& self) {
      Node<T>& pa = *self.parents[0];
      pa.ensure_grad();
      const std::size_t base = static_cast<std::size_t>(start) * n;
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[base + i] += self.grad[i];
    };
  }
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, const Shape& shape) {
  if (shape_numel(shape) != a.numel()) shape_fail("reshape", a.shape(), shape);
  auto out = detail::make_node<T>("reshape", shape, {&a});
  std::copy(a.data().begin(), a.data().end(), out->value.begin());
  if (out->requires_grad) {
    out->backward_fn = [](Node<T>& self) {
      Node<T>& pa = *self.parents[0];
      pa.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    };
  }
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  auto out = detail::make_node<T>("sum", {}, {&a});
  T total = 0;
  for (T v : a.data()) total += v;
  out->value[0] = total;
  if (out->requires_grad) {
    out->backward_fn = [](Node<T>& self) {
      Node<T>& pa = *self.parents[0];
      pa.ensure_grad();
      for (auto& g : pa.grad) g += self.grad[0];
    };
  }
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  if (a.numel() == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(a), T(1) / static_cast<T>(a.numel()));
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<int>& targets, int ignore_index) {
  require_matrix("cross_entropy", logits);
  const int m = logits.rows(), v = logits.cols();
  if (static_cast<int>(targets.size()) != m) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                     shape_str(logits.shape()));
  }
  auto out = detail::make_node<T>("cross_entropy", {}, {&logits});
  std::vector<T> probs(static_cast<std::size_t>(m) * v, T(0));
  int counted = 0;
  T total = 0;
  const auto lv = logits.data();
  for (int i = 0; i < m; ++i) {
    if (targets[i] == ignore_index) continue;
    if (targets[i] < 0 || targets[i] >= v) throw ShapeError("cross_entropy: target id out of range");
    const T* row = lv.data() + static_cast<std::size_t>(i) * v;
    T mx = *std::max_element(row, row + v);
    T z = 0;
    for (int j = 0; j < v; ++j) z += std::exp(row[j] - mx);
    const T log_z = mx + std::log(z);
    for (int j = 0; j < v; ++j) probs[static_cast<std::size_t>(i) * v + j] = std::exp(row[j] - log_z);
    total += log_z - row[targets[i]];
    ++counted;
  }
  out->value[0] = counted ? total / counted : T(0);
  if (out->requires_grad && counted) {
    out->backward_fn = [m, v, targets, ignore_index, counted, probs = std::move(probs)](Node<T>& self) {
      Node<T>& pl = *self.parents[0];
      pl.ensure_grad();
      const T g = self.grad[0] / counted;
      for (int i = 0; i < m; ++i) {
        if (targets[i] == ignore_index) continue;
        const std::size_t base = static_cast<std::size_t>(i) * v;
        for (int j = 0; j < v; ++j) pl.grad[base + j] += g * probs[base + j];
        pl.grad[base + targets[i]] -= g;
      }
    };
  }
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& a, T rate, std::mt19937_64& rng) {
  if (rate < T(0) || rate >= T(1)) throw ConfigError("dropout: rate must lie in [0, 1)");
  if (rate == T(0)) return a;
  std::vector<T> keep(a.numel());
  std::bernoulli_distribution coin(1.0 - static_cast<double>(rate));
  for (auto& k : keep) k = coin(rng) ? T(1) / (T(1) - rate) : T(0);
  return mul(a, Tensor<T>::from(a.shape(), std::move(keep)));
}

#define LAQSUM_INSTANTIATE_OPS(T)                                                       \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> matmul_nt(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> add_row(const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> scale_rows(const Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> scale(const Tensor<T>&, T);                                        \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                   \
  template Tensor<T> relu(const Tensor<T>&);                                            \
  template Tensor<T> log(const Tensor<T>&);                                             \
  template Tensor<T> clamp(const Tensor<T>&, T, T);                                     \
  template Tensor<T> softmax_rows(const Tensor<T>&, T, const Mask*);                    \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T); \
  template Tensor<T> embedding(const Tensor<T>&, const std::vector<int>&);              \
  template Tensor<T> concat_cols(const std::vector<Tensor<T>>&);                        \
  template Tensor<T> slice_cols(const Tensor<T>&, int, int);                            \
  template Tensor<T> slice_rows(const Tensor<T>&, int, int);                            \
  template Tensor<T> reshape(const Tensor<T>&, const Shape&);                           \
  template Tensor<T> sum(const Tensor<T>&);                                             \
  template Tensor<T> mean(const Tensor<T>&);                                            \
  template Tensor<T> cross_entropy(const Tensor<T>&, const std::vector<int>&, int);     \
  template Tensor<T> dropout(const Tensor<T>&, T, std::mt19937_64&);

LAQSUM_INSTANTIATE_OPS(float)
LAQSUM_INSTANTIATE_OPS(double)

}  // namespace laqsum::ad
