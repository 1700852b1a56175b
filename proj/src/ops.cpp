#include "duality/ops.hpp"

#include <cmath>
#include <cstring>

#include "duality/kernels.hpp"

namespace duality::ops {

namespace {

bool any_grad(std::initializer_list<const TensorPtr*> ts) {
  for (auto* t : ts)
    if (*t && (*t)->requires_grad) return true;
  return false;
}

TensorPtr make_out(Tape& tape, std::vector<int> shape, bool needs_grad) {
  auto out = Tensor::zeros(std::move(shape), tape.recording() && needs_grad);
  return out;
}

void check_same_shape(const TensorPtr& a, const TensorPtr& b,
                      const char* what) {
  if (a->shape != b->shape)
    throw ShapeError(std::string(what) + ": shape " +
                     Tensor::shape_str(a->shape) + " vs " +
                     Tensor::shape_str(b->shape));
}

}  // namespace

double softplus(double t) {
  // log(1 + e^t), stable on both tails.
  if (t > 0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

TensorPtr matmul(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  if (a->shape.size() != 2 || b->shape.size() != 2 ||
      a->shape[1] != b->shape[0])
    throw ShapeError("matmul: " + Tensor::shape_str(a->shape) + " * " +
                     Tensor::shape_str(b->shape));
  const int m = a->shape[0], k = a->shape[1], n = b->shape[1];
  auto out = make_out(tape, {m, n}, any_grad({&a, &b}));
  kernels::matmul_nn(a->values.data(), b->values.data(), out->values.data(), m,
                     k, n);
  tape.record(out, {a, b}, [a, b, out, m, k, n] {
    if (a->requires_grad)
      kernels::matmul_nt(out->grad.data(), b->values.data(), a->grad.data(), m,
                         n, k, /*accumulate=*/true);
    if (b->requires_grad)
      kernels::matmul_tn(a->values.data(), out->grad.data(), b->grad.data(), k,
                         m, n, /*accumulate=*/true);
  });
  return out;
}

TensorPtr linear(Tape& tape, const TensorPtr& x, const TensorPtr& W,
                 const TensorPtr& bias) {
  if (x->shape.size() != 2 || W->shape.size() != 2 ||
      x->shape[1] != W->shape[1])
    throw ShapeError("linear: x " + Tensor::shape_str(x->shape) + " vs W " +
                     Tensor::shape_str(W->shape));
  const int batch = x->shape[0], in = x->shape[1], outn = W->shape[0];
  if (bias->size() != outn)
    throw ShapeError("linear: bias " + Tensor::shape_str(bias->shape) +
                     " vs out " + std::to_string(outn));
  auto out = make_out(tape, {batch, outn}, any_grad({&x, &W, &bias}));
  kernels::matmul_nt(x->values.data(), W->values.data(), out->values.data(),
                     batch, in, outn);
  kernels::add_bias_rows(out->values.data(), bias->values.data(), batch, outn);
  tape.record(out, {x, W, bias}, [x, W, bias, out, batch, in, outn] {
    if (x->requires_grad)
      kernels::matmul_nn(out->grad.data(), W->values.data(), x->grad.data(),
                         batch, outn, in, /*accumulate=*/true);
    if (W->requires_grad)
      kernels::matmul_tn(out->grad.data(), x->values.data(), W->grad.data(),
                         outn, batch, in, /*accumulate=*/true);
    if (bias->requires_grad)
      kernels::colsum(out->grad.data(), bias->grad.data(), batch, outn,
                      /*accumulate=*/true);
  });
  return out;
}

TensorPtr masked_linear(Tape& tape, const TensorPtr& x, const TensorPtr& W,
                        const TensorPtr& mask, const TensorPtr& bias) {
  if (W->shape != mask->shape)
    throw ShapeError("masked_linear: W " + Tensor::shape_str(W->shape) +
                     " vs mask " + Tensor::shape_str(mask->shape));
  for (double v : mask->values)
    if (v != 0.0 && v != 1.0)
      throw ValidationError("masked_linear: mask entries must be 0 or 1");
  if (x->shape.size() != 2 || x->shape[1] != W->shape[1])
    throw ShapeError("masked_linear: x " + Tensor::shape_str(x->shape) +
                     " vs W " + Tensor::shape_str(W->shape));
  const int batch = x->shape[0], in = x->shape[1], outn = W->shape[0];
  if (bias->size() != outn)
    throw ShapeError("masked_linear: bias " + Tensor::shape_str(bias->shape) +
                     " vs out " + std::to_string(outn));
  auto out = make_out(tape, {batch, outn}, any_grad({&x, &W, &bias}));
  kernels::matmul_nt_masked(x->values.data(), W->values.data(),
                            mask->values.data(), out->values.data(), batch, in,
                            outn);
  kernels::add_bias_rows(out->values.data(), bias->values.data(), batch, outn);
  tape.record(out, {x, W, mask, bias}, [x, W, mask, bias, out, batch, in,
                                        outn] {
    if (x->requires_grad) {
      // d_x = d_out * (W .* M); materialize the masked weights once.
      std::vector<double> WM(W->values.size());
      for (std::size_t i = 0; i < WM.size(); ++i)
        WM[i] = W->values[i] * mask->values[i];
      kernels::matmul_nn(out->grad.data(), WM.data(), x->grad.data(), batch,
                         outn, in, /*accumulate=*/true);
    }
    if (W->requires_grad) {
      // d_W = (d_out^T * x) .* M, so severed connections stay at zero.
      std::vector<double> G(W->values.size());
      kernels::matmul_tn(out->grad.data(), x->values.data(), G.data(), outn,
                         batch, in, /*accumulate=*/false);
      for (std::size_t i = 0; i < G.size(); ++i)
        W->grad[i] += G[i] * mask->values[i];
    }
    if (bias->requires_grad)
      kernels::colsum(out->grad.data(), bias->grad.data(), batch, outn,
                      /*accumulate=*/true);
  });
  return out;
}

TensorPtr sigmoid(Tape& tape, const TensorPtr& x) {
  auto out = make_out(tape, x->shape, x->requires_grad);
  kernels::vsigmoid(x->values.data(), out->values.data(), x->values.size());
  tape.record(out, {x}, [x, out] {
    if (!x->requires_grad) return;
    for (std::size_t i = 0; i < x->grad.size(); ++i)
      x->grad[i] += out->grad[i] * out->values[i] * (1.0 - out->values[i]);
  });
  return out;
}

TensorPtr tanh_act(Tape& tape, const TensorPtr& x) {
  auto out = make_out(tape, x->shape, x->requires_grad);
  kernels::vtanh(x->values.data(), out->values.data(), x->values.size());
  tape.record(out, {x}, [x, out] {
    if (!x->requires_grad) return;
    for (std::size_t i = 0; i < x->grad.size(); ++i)
      x->grad[i] += out->grad[i] * (1.0 - out->values[i] * out->values[i]);
  });
  return out;
}

TensorPtr softmax_rows(Tape& tape, const TensorPtr& x) {
  if (x->shape.size() != 2)
    throw ShapeError("softmax: expected 2-d input, got " +
                     Tensor::shape_str(x->shape));
  const int rows = x->shape[0], cols = x->shape[1];
  auto out = make_out(tape, x->shape, x->requires_grad);
  kernels::softmax_rows(x->values.data(), out->values.data(), rows, cols);
  tape.record(out, {x}, [x, out, rows, cols] {
    if (!x->requires_grad) return;
    for (int r = 0; r < rows; ++r) {
      const double* y = out->values.data() + static_cast<std::size_t>(r) * cols;
      const double* dy = out->grad.data() + static_cast<std::size_t>(r) * cols;
      double dot = 0.0;
      for (int j = 0; j < cols; ++j) dot += dy[j] * y[j];
      double* dx = x->grad.data() + static_cast<std::size_t>(r) * cols;
      for (int j = 0; j < cols; ++j) dx[j] += y[j] * (dy[j] - dot);
    }
  });
  return out;
}

TensorPtr log_softmax_rows(Tape& tape, const TensorPtr& x) {
  if (x->shape.size() != 2)
    throw ShapeError("log_softmax: expected 2-d input, got " +
                     Tensor::shape_str(x->shape));
  const int rows = x->shape[0], cols = x->shape[1];
  auto out = make_out(tape, x->shape, x->requires_grad);
  kernels::log_softmax_rows(x->values.data(), out->values.data(), rows, cols);
  tape.record(out, {x}, [x, out, rows, cols] {
    if (!x->requires_grad) return;
    for (int r = 0; r < rows; ++r) {
      const double* y = out->values.data() + static_cast<std::size_t>(r) * cols;
      const double* dy = out->grad.data() + static_cast<std::size_t>(r) * cols;
      double dsum = 0.0;
      for (int j = 0; j < cols; ++j) dsum += dy[j];
      double* dx = x->grad.data() + static_cast<std::size_t>(r) * cols;
      for (int j = 0; j < cols; ++j) dx[j] += dy[j] - std::exp(y[j]) * dsum;
    }
  });
  return out;
}

TensorPtr apply_activation(Tape& tape, Activation kind, const TensorPtr& x,
                           int axis) {
  switch (kind) {
    case Activation::sigmoid:
      return sigmoid(tape, x);
    case Activation::tanh:
      return tanh_act(tape, x);
    case Activation::softmax:
    case Activation::log_softmax:
      if (axis != 1 || x->shape.size() != 2)
        throw ShapeError("softmax activation requires axis 1 on a 2-d tensor");
      return kind == Activation::softmax ? softmax_rows(tape, x)
                                         : log_softmax_rows(tape, x);
  }
  throw ContractError("unknown activation");
}

TensorPtr add(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  check_same_shape(a, b, "add");
  auto out = make_out(tape, a->shape, any_grad({&a, &b}));
  for (std::size_t i = 0; i < out->values.size(); ++i)
    out->values[i] = a->values[i] + b->values[i];
  tape.record(out, {a, b}, [a, b, out] {
    if (a->requires_grad)
      for (std::size_t i = 0; i < a->grad.size(); ++i)
        a->grad[i] += out->grad[i];
    if (b->requires_grad)
      for (std::size_t i = 0; i < b->grad.size(); ++i)
        b->grad[i] += out->grad[i];
  });
  return out;
}

TensorPtr sub(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  check_same_shape(a, b, "sub");
  auto out = make_out(tape, a->shape, any_grad({&a, &b}));
  for (std::size_t i = 0; i < out->values.size(); ++i)
    out->values[i] = a->values[i] - b->values[i];
  tape.record(out, {a, b}, [a, b, out] {
    if (a->requires_grad)
      for (std::size_t i = 0; i < a->grad.size(); ++i)
        a->grad[i] += out->grad[i];
    if (b->requires_grad)
      for (std::size_t i = 0; i < b->grad.size(); ++i)
        b->grad[i] -= out->grad[i];
  });
  return out;
}

TensorPtr mul(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  check_same_shape(a, b, "mul");
  auto out = make_out(tape, a->shape, any_grad({&a, &b}));
  for (std::size_t i = 0; i < out->values.size(); ++i)
    out->values[i] = a->values[i] * b->values[i];
  tape.record(out, {a, b}, [a, b, out] {
    if (a->requires_grad)
      for (std::size_t i = 0; i < a->grad.size(); ++i)
        a->grad[i] += out->grad[i] * b->values[i];
    if (b->requires_grad)
      for (std::size_t i = 0; i < b->grad.size(); ++i)
        b->grad[i] += out->grad[i] * a->values[i];
  });
  return out;
}

TensorPtr square(Tape& tape, const TensorPtr& x) {
  auto out = make_out(tape, x->shape, x->requires_grad);
  for (std::size_t i = 0; i < out->values.size(); ++i)
    out->values[i] = x->values[i] * x->values[i];
  tape.record(out, {x}, [x, out] {
    if (!x->requires_grad) return;
    for (std::size_t i = 0; i < x->grad.size(); ++i)
      x->grad[i] += out->grad[i] * 2.0 * x->values[i];
  });
  return out;
}

TensorPtr scale(Tape& tape, const TensorPtr& x, double c) {
  auto out = make_out(tape, x->shape, x->requires_grad);
  for (std::size_t i = 0; i < out->values.size(); ++i)
    out->values[i] = c * x->values[i];
  tape.record(out, {x}, [x, out, c] {
    if (!x->requires_grad) return;
    for (std::size_t i = 0; i < x->grad.size(); ++i)
      x->grad[i] += c * out->grad[i];
  });
  return out;
}

TensorPtr embedding_lookup(Tape& tape, const TensorPtr& table,
                           const std::vector<int>& ids) {
  if (table->shape.size() != 2)
    throw ShapeError("embedding_lookup: table must be 2-d");
  const int V = table->shape[0], E = table->shape[1];
  for (int id : ids)
    if (id < 0 || id >= V)
      throw ContractError("embedding_lookup: id " + std::to_string(id) +
                          " out of range [0, " + std::to_string(V) + ")");
  const int n = static_cast<int>(ids.size());
  auto out = make_out(tape, {n, E}, table->requires_grad);
  for (int i = 0; i < n; ++i)
    std::memcpy(out->values.data() + static_cast<std::size_t>(i) * E,
                table->values.data() + static_cast<std::size_t>(ids[i]) * E,
                sizeof(double) * E);
  tape.record(out, {table}, [table, out, ids, E, n] {
    if (!table->requires_grad) return;
    for (int i = 0; i < n; ++i) {
      double* dst = table->grad.data() + static_cast<std::size_t>(ids[i]) * E;
      const double* src = out->grad.data() + static_cast<std::size_t>(i) * E;
      for (int c = 0; c < E; ++c) dst[c] += src[c];
    }
  });
  return out;
}

TensorPtr pick_per_row(Tape& tape, const TensorPtr& x,
                       const std::vector<int>& idx) {
  if (x->shape.size() != 2)
    throw ShapeError("pick_per_row: expected 2-d input");
  const int rows = x->shape[0], cols = x->shape[1];
  if (static_cast<int>(idx.size()) != rows)
    throw ShapeError("pick_per_row: " + std::to_string(idx.size()) +
                     " indices for " + std::to_string(rows) + " rows");
  for (int j : idx)
    if (j < 0 || j >= cols)
      throw ContractError("pick_per_row: column index out of range");
  auto out = make_out(tape, {rows}, x->requires_grad);
  for (int i = 0; i < rows; ++i)
    out->values[i] = x->values[static_cast<std::size_t>(i) * cols + idx[i]];
  tape.record(out, {x}, [x, out, idx, rows, cols] {
    if (!x->requires_grad) return;
    for (int i = 0; i < rows; ++i)
      x->grad[static_cast<std::size_t>(i) * cols + idx[i]] += out->grad[i];
  });
  return out;
}

TensorPtr lerp_rows(Tape& tape, const TensorPtr& a, const TensorPtr& b,
                    const std::vector<double>& row_mask) {
  check_same_shape(a, b, "lerp_rows");
  if (a->shape.size() != 2 ||
      static_cast<int>(row_mask.size()) != a->shape[0])
    throw ShapeError("lerp_rows: mask length vs rows mismatch");
  const int rows = a->shape[0], cols = a->shape[1];
  auto out = make_out(tape, a->shape, any_grad({&a, &b}));
  for (int i = 0; i < rows; ++i) {
    const double m = row_mask[i];
    const std::size_t off = static_cast<std::size_t>(i) * cols;
    for (int j = 0; j < cols; ++j)
      out->values[off + j] =
          m * a->values[off + j] + (1.0 - m) * b->values[off + j];
  }
  tape.record(out, {a, b}, [a, b, out, row_mask, rows, cols] {
    for (int i = 0; i < rows; ++i) {
      const double m = row_mask[i];
      const std::size_t off = static_cast<std::size_t>(i) * cols;
      if (a->requires_grad)
        for (int j = 0; j < cols; ++j)
          a->grad[off + j] += m * out->grad[off + j];
      if (b->requires_grad)
        for (int j = 0; j < cols; ++j)
          b->grad[off + j] += (1.0 - m) * out->grad[off + j];
    }
  });
  return out;
}

TensorPtr sum(Tape& tape, const TensorPtr& x) {
  auto out = make_out(tape, {1}, x->requires_grad);
  double acc = 0.0;
  for (double v : x->values) acc += v;
  out->values[0] = acc;
  tape.record(out, {x}, [x, out] {
    if (!x->requires_grad) return;
    const double g = out->grad[0];
    for (std::size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += g;
  });
  return out;
}

TensorPtr mean(Tape& tape, const TensorPtr& x) {
  return scale(tape, sum(tape, x), 1.0 / static_cast<double>(x->size()));
}

TensorPtr bernoulli_loglik(Tape& tape, const TensorPtr& logits,
                           const TensorPtr& targets) {
  check_same_shape(logits, targets, "bernoulli_loglik");
  if (logits->shape.size() != 2)
    throw ShapeError("bernoulli_loglik: expected 2-d logits");
  for (double t : targets->values)
    if (t != 0.0 && t != 1.0)
      throw ValidationError("bernoulli_loglik: targets must be 0 or 1");
  const int rows = logits->shape[0], cols = logits->shape[1];
  auto out = make_out(tape, {rows}, logits->requires_grad);
  // clamped[i] marks entries where the floor is active; those contribute a
  // constant, so their gradient is exactly zero.
  auto clamped = std::make_shared<std::vector<unsigned char>>(
      static_cast<std::size_t>(rows) * cols, 0);
  for (int i = 0; i < rows; ++i) {
    double acc = 0.0;
    const std::size_t off = static_cast<std::size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) {
      const double a = logits->values[off + j];
      const double t = targets->values[off + j];
      double ll = (t == 1.0) ? -softplus(-a) : -softplus(a);
      if (ll < kLogProbFloor) {
        ll = kLogProbFloor;
        (*clamped)[off + j] = 1;
      }
      acc += ll;
    }
    out->values[i] = acc;
  }
  tape.record(out, {logits, targets}, [logits, targets, out, clamped, rows,
                                       cols] {
    if (!logits->requires_grad) return;
    for (int i = 0; i < rows; ++i) {
      const double g = out->grad[i];
      const std::size_t off = static_cast<std::size_t>(i) * cols;
      for (int j = 0; j < cols; ++j) {
        if ((*clamped)[off + j]) continue;
        const double a = logits->values[off + j];
        const double s = 1.0 / (1.0 + std::exp(-a));
        logits->grad[off + j] += g * (targets->values[off + j] - s);
      }
    }
  });
  return out;
}

}  // namespace duality::ops
