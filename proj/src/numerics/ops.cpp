#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "shaperefine/error.hpp"
#include "shaperefine/numerics/autodiff.hpp"

namespace shaperefine::numerics {
namespace {

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using CMatMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

Eigen::Index idx(std::size_t n) { return static_cast<Eigen::Index>(n); }

Tape& common_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw Error("operands recorded on different tapes");
  return a.tape();
}

// Rank-2 view of a shape: rank-1 [C] is treated as a row vector.
struct Dims2 {
  std::size_t rows;
  std::size_t cols;
};

Dims2 as_2d(const Shape& s) {
  if (s.size() == 2) return {s[0], s[1]};
  if (s.size() == 1) return {1, s[0]};
  if (s.empty()) return {1, 1};
  throw Error("expected rank <= 2, got " + shape_string(s));
}

bool broadcastable(const Shape& from, const Shape& to) {
  if (from == to) return true;
  if (shape_size(from) == 1) return true;
  if (to.size() > 2 || from.size() > 2) return false;
  const Dims2 f = as_2d(from), t = as_2d(to);
  return (f.rows == 1 && f.cols == t.cols) || (f.cols == 1 && f.rows == t.rows);
}

enum class BinOp { kAdd, kSub, kMul };

Var binary_same_shape(const Var& a, const Var& b, BinOp op) {
  Tape& tape = common_tape(a, b);
  const Tensor& va = a.value();
  const Tensor& vb = b.value();
  const std::size_t n = va.size();
  std::vector<double> out(n);
  const double* pa = va.raw();
  const double* pb = vb.raw();
  switch (op) {
    case BinOp::kAdd:
      for (std::size_t i = 0; i < n; ++i) out[i] = pa[i] + pb[i];
      break;
    case BinOp::kSub:
      for (std::size_t i = 0; i < n; ++i) out[i] = pa[i] - pb[i];
      break;
    case BinOp::kMul:
      for (std::size_t i = 0; i < n; ++i) out[i] = pa[i] * pb[i];
      break;
  }
  return tape.record(Tensor(va.shape(), std::move(out)), {a, b},
                     [va, vb, op](const GradBuffer& g, std::span<GradBuffer* const> in) {
                       const std::size_t n = g.size();
                       if (GradBuffer* ga = in[0]) {
                         if (op == BinOp::kMul) {
                           const double* pb = vb.raw();
                           for (std::size_t i = 0; i < n; ++i) (*ga)[i] += g[i] * pb[i];
                         } else {
                           for (std::size_t i = 0; i < n; ++i) (*ga)[i] += g[i];
                         }
                       }
                       if (GradBuffer* gb = in[1]) {
                         if (op == BinOp::kMul) {
                           const double* pa = va.raw();
                           for (std::size_t i = 0; i < n; ++i) (*gb)[i] += g[i] * pa[i];
                         } else if (op == BinOp::kSub) {
                           for (std::size_t i = 0; i < n; ++i) (*gb)[i] -= g[i];
                         } else {
                           for (std::size_t i = 0; i < n; ++i) (*gb)[i] += g[i];
                         }
                       }
                     });
}

Var binary(const Var& a, const Var& b, BinOp op) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa == sb) return binary_same_shape(a, b, op);
  if (broadcastable(sb, sa)) return binary_same_shape(a, broadcast_to(b, sa), op);
  if (broadcastable(sa, sb)) return binary_same_shape(broadcast_to(a, sb), b, op);
  throw Error("incompatible shapes " + shape_string(sa) + " and " + shape_string(sb));
}

template <typename F, typename D>
Var unary(const Var& a, F f, D dfdx) {
  const Tensor& va = a.value();
  const std::size_t n = va.size();
  std::vector<double> out(n);
  const double* pa = va.raw();
  for (std::size_t i = 0; i < n; ++i) out[i] = f(pa[i]);
  Tensor vy(va.shape(), std::move(out));
  return a.tape().record(vy, {a}, [va, vy, dfdx](const GradBuffer& g, std::span<GradBuffer* const> in) {
    if (GradBuffer* ga = in[0]) {
      const double* px = va.raw();
      const double* py = vy.raw();
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * dfdx(px[i], py[i]);
    }
  });
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var add(const Var& a, const Var& b) { return binary(a, b, BinOp::kAdd); }
Var sub(const Var& a, const Var& b) { return binary(a, b, BinOp::kSub); }
Var mul(const Var& a, const Var& b) { return binary(a, b, BinOp::kMul); }

Var scale(const Var& a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(const Var& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var matmul(const Var& a, const Var& b) {
  Tape& tape = common_tape(a, b);
  const Tensor& va = a.value();
  const Tensor& vb = b.value();
  if (va.rank() != 2 || vb.rank() != 2 || va.cols() != vb.rows()) {
    throw Error("matmul shape mismatch " + shape_string(va.shape()) + " x " + shape_string(vb.shape()));
  }
  const std::size_t m = va.rows(), k = va.cols(), n = vb.cols();
  std::vector<double> out(m * n, 0.0);
  MatMap(out.data(), idx(m), idx(n)).noalias() = CMatMap(va.raw(), idx(m), idx(k)) * CMatMap(vb.raw(), idx(k), idx(n));
  return tape.record(Tensor({m, n}, std::move(out)), {a, b},
                     [va, vb, m, k, n](const GradBuffer& g, std::span<GradBuffer* const> in) {
                       const CMatMap gm(g.data(), idx(m), idx(n));
                       if (GradBuffer* ga = in[0])
                         MatMap(ga->data(), idx(m), idx(k)).noalias() += gm * CMatMap(vb.raw(), idx(k), idx(n)).transpose();
                       if (GradBuffer* gb = in[1])
                         MatMap(gb->data(), idx(k), idx(n)).noalias() += CMatMap(va.raw(), idx(m), idx(k)).transpose() * gm;
                     });
}

Var broadcast_to(const Var& a, const Shape& shape) {
  const Shape& from = a.shape();
  if (from == shape) return a;
  if (!broadcastable(from, shape)) {
    throw Error("cannot broadcast " + shape_string(from) + " to " + shape_string(shape));
  }
  const Tensor& va = a.value();
  const std::size_t total = shape_size(shape);
  std::vector<double> out(total);
  enum class Mode { kScalar, kRow, kCol } mode;
  std::size_t rows = 1, cols = total;
  if (va.size() == 1) {
    mode = Mode::kScalar;
    std::fill(out.begin(), out.end(), va[0]);
  } else {
    const Dims2 f = as_2d(from), t = as_2d(shape);
    rows = t.rows;
    cols = t.cols;
    if (f.rows == 1) {
      mode = Mode::kRow;
      for (std::size_t r = 0; r < rows; ++r) std::copy(va.raw(), va.raw() + cols, out.begin() + r * cols);
    } else {
      mode = Mode::kCol;
      for (std::size_t r = 0; r < rows; ++r) std::fill_n(out.begin() + r * cols, cols, va[r]);
    }
  }
  return a.tape().record(Tensor(shape, std::move(out)), {a},
                         [mode, rows, cols](const GradBuffer& g, std::span<GradBuffer* const> in) {
                           GradBuffer* ga = in[0];
                           if (!ga) return;
                           switch (mode) {
                             case Mode::kScalar: {
                               double s = 0.0;
                               for (double v : g) s += v;
                               (*ga)[0] += s;
                               break;
                             }
                             case Mode::kRow:
                               for (std::size_t r = 0; r < rows; ++r)
                                 for (std::size_t c = 0; c < cols; ++c) (*ga)[c] += g[r * cols + c];
                               break;
                             case Mode::kCol:
                               for (std::size_t r = 0; r < rows; ++r) {
                                 double s = 0.0;
                                 for (std::size_t c = 0; c < cols; ++c) s += g[r * cols + c];
                                 (*ga)[r] += s;
                               }
                               break;
                           }
                         });
}

Var reshape(const Var& a, const Shape& shape) {
  const Tensor& va = a.value();
  if (shape_size(shape) != va.size()) {
    throw Error("cannot reshape " + shape_string(va.shape()) + " to " + shape_string(shape));
  }
  return a.tape().record(Tensor(shape, va.to_vector()), {a},
                         [](const GradBuffer& g, std::span<GradBuffer* const> in) {
                           if (GradBuffer* ga = in[0])
                             for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
                         });
}

Var transpose(const Var& a) {
  const Tensor& va = a.value();
  const std::size_t r = va.rows(), c = va.cols();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = va[i * c + j];
  return a.tape().record(Tensor({c, r}, std::move(out)), {a},
                         [r, c](const GradBuffer& g, std::span<GradBuffer* const> in) {
                           if (GradBuffer* ga = in[0])
                             for (std::size_t i = 0; i < r; ++i)
                               for (std::size_t j = 0; j < c; ++j) (*ga)[i * c + j] += g[j * r + i];
                         });
}

Var sum(const Var& a) {
  const Tensor& va = a.value();
  double s = 0.0;
  for (double v : va.data()) s += v;
  return a.tape().record(Tensor::scalar(s), {a}, [](const GradBuffer& g, std::span<GradBuffer* const> in) {
    if (GradBuffer* ga = in[0])
      for (double& v : *ga) v += g[0];
  });
}

Var mean(const Var& a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw Error("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var sum_rows(const Var& a) {
  const Tensor& va = a.value();
  const std::size_t r = va.rows(), c = va.cols();
  std::vector<double> out(c, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += va[i * c + j];
  return a.tape().record(Tensor({1, c}, std::move(out)), {a},
                         [r, c](const GradBuffer& g, std::span<GradBuffer* const> in) {
                           if (GradBuffer* ga = in[0])
                             for (std::size_t i = 0; i < r; ++i)
                               for (std::size_t j = 0; j < c; ++j) (*ga)[i * c + j] += g[j];
                         });
}

Var sum_cols(const Var& a) {
  const Tensor& va = a.value();
  const std::size_t r = va.rows(), c = va.cols();
  std::vector<double> out(r, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i] += va[i * c + j];
  return a.tape().record(Tensor({r, 1}, std::move(out)), {a},
                         [r, c](const GradBuffer& g, std::span<GradBuffer* const> in) {
                           if (GradBuffer* ga = in[0])
                             for (std::size_t i = 0; i < r; ++i)
                               for (std::size_t j = 0; j < c; ++j) (*ga)[i * c + j] += g[i];
                         });
}

Var mean_cols(const Var& a) { return scale(sum_cols(a), 1.0 / static_cast<double>(a.cols())); }

Var segment_max(const Var& a, std::size_t groups) {
  const Tensor& va = a.value();
  const std::size_t r = va.rows(), c = va.cols();
  if (groups == 0 || r % groups != 0 || r == 0) {
    throw Error("segment_max: " + std::to_string(r) + " rows not divisible into " + std::to_string(groups));
  }
  const std::size_t n = r / groups;
  std::vector<double> out(groups * c);
  std::vector<std::size_t> arg(groups * c);
  for (std::size_t gi = 0; gi < groups; ++gi) {
    for (std::size_t j = 0; j < c; ++j) {
      std::size_t best = gi * n;
      double bv = va[best * c + j];
      for (std::size_t i = gi * n + 1; i < (gi + 1) * n; ++i) {
        const double v = va[i * c + j];
        if (v > bv) {
          bv = v;
          best = i;
        }
      }
      out[gi * c + j] = bv;
      arg[gi * c + j] = best;
    }
  }
  return a.tape().record(Tensor({groups, c}, std::move(out)), {a},
                         [arg = std::move(arg), c](const GradBuffer& g, std::span<GradBuffer* const> in) {
                           if (GradBuffer* ga = in[0])
                             for (std::size_t k = 0; k < g.size(); ++k) (*ga)[arg[k] * c + k % c] += g[k];
                         });
}

Var segment_mean(const Var& a, std::size_t groups) {
  const Tensor& va = a.value();
  const std::size_t r = va.rows(), c = va.cols();
  if (groups == 0 || r % groups != 0 || r == 0) {
    throw Error("segment_mean: " + std::to_string(r) + " rows not divisible into " + std::to_string(groups));
  }
  const std::size_t n = r / groups;
  const double inv = 1.0 / static_cast<double>(n);
  std::vector<double> out(groups * c, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[(i / n) * c + j] += va[i * c + j];
  for (double& v : out) v *= inv;
  return a.tape().record(Tensor({groups, c}, std::move(out)), {a},
                         [n, c, r, inv](const GradBuffer& g, std::span<GradBuffer* const> in) {
                           if (GradBuffer* ga = in[0])
                             for (std::size_t i = 0; i < r; ++i)
                               for (std::size_t j = 0; j < c; ++j) (*ga)[i * c + j] += g[(i / n) * c + j] * inv;
                         });
}

Var relu(const Var& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(const Var& a) {
  return unary(a, sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
}

Var tanh(const Var& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var exp(const Var& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var softplus(const Var& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
      [](double x, double) { return sigmoid_scalar(x); });
}

Var gather_rows(const Var& a, std::vector<std::size_t> index) {
  const Tensor& va = a.value();
  const std::size_t r = va.rows(), c = va.cols();
  std::vector<double> out(index.size() * c);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= r) throw Error("gather_rows index out of range");
    std::copy_n(va.raw() + index[i] * c, c, out.begin() + i * c);
  }
  const std::size_t m = index.size();
  return a.tape().record(Tensor({m, c}, std::move(out)), {a},
                         [index = std::move(index), c](const GradBuffer& g, std::span<GradBuffer* const> in) {
                           if (GradBuffer* ga = in[0])
                             for (std::size_t i = 0; i < index.size(); ++i)
                               for (std::size_t j = 0; j < c; ++j) (*ga)[index[i] * c + j] += g[i * c + j];
                         });
}

Var scatter_add_rows(const Var& a, std::vector<std::size_t> index, std::size_t rows) {
  const Tensor& va = a.value();
  const std::size_t c = va.cols();
  if (index.size() != va.rows()) throw Error("scatter_add_rows: index length must equal row count");
  std::vector<double> out(rows * c, 0.0);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= rows) throw Error("scatter_add_rows index out of range");
    for (std::size_t j = 0; j < c; ++j) out[index[i] * c + j] += va[i * c + j];
  }
  return a.tape().record(Tensor({rows, c}, std::move(out)), {a},
                         [index = std::move(index), c](const GradBuffer& g, std::span<GradBuffer* const> in) {
                           if (GradBuffer* ga = in[0])
                             for (std::size_t i = 0; i < index.size(); ++i)
                               for (std::size_t j = 0; j < c; ++j) (*ga)[i * c + j] += g[index[i] * c + j];
                         });
}

Var repeat_rows(const Var& a, std::size_t n) {
  const std::size_t g = a.rows();
  std::vector<std::size_t> index(g * n);
  for (std::size_t i = 0; i < g * n; ++i) index[i] = i / n;
  return gather_rows(a, std::move(index));
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw Error("concat_cols of nothing");
  Tape& tape = parts[0].tape();
  const std::size_t r = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (&p.tape() != &tape) throw Error("operands recorded on different tapes");
    if (p.rows() != r) throw Error("concat_cols row mismatch");
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<double> out(r * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    for (std::size_t i = 0; i < r; ++i) std::copy_n(v.raw() + i * widths[k], widths[k], out.begin() + i * total + offset);
    offset += widths[k];
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return tape.record(Tensor({r, total}, std::move(out)), std::move(inputs),
                     [widths, r, total](const GradBuffer& g, std::span<GradBuffer* const> in) {
                       std::size_t offset = 0;
                       for (std::size_t k = 0; k < widths.size(); ++k) {
                         if (GradBuffer* gk = in[k])
                           for (std::size_t i = 0; i < r; ++i)
                             for (std::size_t j = 0; j < widths[k]; ++j) (*gk)[i * widths[k] + j] += g[i * total + offset + j];
                         offset += widths[k];
                       }
                     });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw Error("concat_rows of nothing");
  Tape& tape = parts[0].tape();
  const std::size_t c = parts[0].cols();
  std::vector<std::size_t> sizes;
  std::vector<double> out;
  for (const Var& p : parts) {
    if (&p.tape() != &tape) throw Error("operands recorded on different tapes");
    if (p.cols() != c) throw Error("concat_rows column mismatch");
    const Tensor& v = p.value();
    sizes.push_back(v.size());
    out.insert(out.end(), v.data().begin(), v.data().end());
  }
  const std::size_t r = out.size() / c;
  std::vector<Var> inputs(parts.begin(), parts.end());
  return tape.record(Tensor({r, c}, std::move(out)), std::move(inputs),
                     [sizes](const GradBuffer& g, std::span<GradBuffer* const> in) {
                       std::size_t offset = 0;
                       for (std::size_t k = 0; k < sizes.size(); ++k) {
                         if (GradBuffer* gk = in[k])
                           for (std::size_t i = 0; i < sizes[k]; ++i) (*gk)[i] += g[offset + i];
                         offset += sizes[k];
                       }
                     });
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t end) {
  const Tensor& va = a.value();
  const std::size_t r = va.rows(), c = va.cols();
  if (begin >= end || end > c) throw Error("slice_cols range out of bounds");
  const std::size_t w = end - begin;
  std::vector<double> out(r * w);
  for (std::size_t i = 0; i < r; ++i) std::copy_n(va.raw() + i * c + begin, w, out.begin() + i * w);
  return a.tape().record(Tensor({r, w}, std::move(out)), {a},
                         [r, c, w, begin](const GradBuffer& g, std::span<GradBuffer* const> in) {
                           if (GradBuffer* ga = in[0])
                             for (std::size_t i = 0; i < r; ++i)
                               for (std::size_t j = 0; j < w; ++j) (*ga)[i * c + begin + j] += g[i * w + j];
                         });
}

}  // namespace shaperefine::numerics
