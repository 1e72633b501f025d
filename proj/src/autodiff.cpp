#include "reldec/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace reldec::ad {

const Tensor& Var::value() const {
  if (!tape_) throw std::logic_error("value() on an unbound Var");
  return tape_->value(*this);
}

// ---- Tape -----------------------------------------------------------------

Var Tape::constant(Tensor value) {
  if (!value.all_finite()) throw std::domain_error("constant contains non-finite values");
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant_ref(const Tensor& value) {
  Node n;
  n.external = &value;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Tensor value) {
  if (!value.all_finite()) throw std::domain_error("variable contains non-finite values");
  Node n;
  n.owned = std::move(value);
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable_ref(const Tensor& value) {
  Node n;
  n.external = &value;
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::node_value(std::size_t id) const {
  const Node& n = nodes_.at(id);
  return n.external ? *n.external : n.owned;
}

void Tape::check_owner(Var v) const {
  if (v.tape() != this) throw std::invalid_argument("Var belongs to a different tape");
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  bool needs = false;
  for (const Var& in : inputs) {
    check_owner(in);
    needs = needs || nodes_[in.id()].needs_grad;
  }
  if (!value.all_finite()) throw std::domain_error("operation produced non-finite values");
  Node n;
  n.owned = std::move(value);
  n.needs_grad = needs;
  if (needs) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

double* Tape::grad_ptr(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return nullptr;
  if (n.grad.empty()) n.grad.assign(node_value(id).size(), 0.0);
  return n.grad.data();
}

const double* Tape::grad_data(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.grad.empty() ? nullptr : n.grad.data();
}

Tensor Tape::grad(Var v) const {
  check_owner(v);
  Tensor out = Tensor::zeros_like(value(v));
  const Node& n = nodes_[v.id()];
  if (!n.grad.empty()) std::copy(n.grad.begin(), n.grad.end(), out.data().begin());
  return out;
}

void Tape::backward(Var loss) {
  check_owner(loss);
  if (value(loss).size() != 1) {
    throw std::invalid_argument("backward() needs a scalar loss, got shape " + value(loss).shape_string());
  }
  for (Node& n : nodes_) n.grad.clear();
  if (!nodes_[loss.id()].needs_grad) return;
  grad_ptr(loss.id())[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, i);
  }
}

std::vector<Tensor> Tape::gradients(Var loss, std::span<const Var> wrt) {
  backward(loss);
  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (const Var& v : wrt) out.push_back(grad(v));
  return out;
}

// ---- primitives -----------------------------------------------------------

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                              b.shape_string());
}

void require_same_tape(Var a, Var b) {
  if (a.tape() != b.tape() || !a.valid()) throw std::invalid_argument("operands live on different tapes");
}

bool is_vector(const Tensor& t) { return t.rank() == 1; }
bool is_matrix(const Tensor& t) { return t.rank() == 2; }

// Runs `fn(tape, self, out_grad)` only when the output has gradient flowing.
template <class F>
Tape::BackwardFn with_grad(F fn) {
  return [fn = std::move(fn)](Tape& t, std::size_t self) { fn(t, self, t.grad_data(self)); };
}

}  // namespace

Var add(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (!x.same_shape(y)) shape_error("add", x, y);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  const std::size_t ia = a.id(), ib = b.id(), n = out.size();
  return a.tape()->record(std::move(out), {a, b}, with_grad([ia, ib, n](Tape& t, std::size_t, const double* g) {
    if (double* ga = t.grad_ptr(ia)) for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
    if (double* gb = t.grad_ptr(ib)) for (std::size_t i = 0; i < n; ++i) gb[i] += g[i];
  }));
}

Var sub(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (!x.same_shape(y)) shape_error("sub", x, y);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  const std::size_t ia = a.id(), ib = b.id(), n = out.size();
  return a.tape()->record(std::move(out), {a, b}, with_grad([ia, ib, n](Tape& t, std::size_t, const double* g) {
    if (double* ga = t.grad_ptr(ia)) for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
    if (double* gb = t.grad_ptr(ib)) for (std::size_t i = 0; i < n; ++i) gb[i] -= g[i];
  }));
}

Var mul(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (!x.same_shape(y)) shape_error("mul", x, y);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  const std::size_t ia = a.id(), ib = b.id(), n = out.size();
  return a.tape()->record(std::move(out), {a, b}, with_grad([ia, ib, n](Tape& t, std::size_t, const double* g) {
    const Tensor& xv = t.node_value(ia);
    const Tensor& yv = t.node_value(ib);
    if (double* ga = t.grad_ptr(ia)) for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * yv[i];
    if (double* gb = t.grad_ptr(ib)) for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * xv[i];
  }));
}

Var scale(Var a, double factor) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = factor * x[i];
  const std::size_t ia = a.id(), n = out.size();
  return a.tape()->record(std::move(out), {a}, with_grad([ia, n, factor](Tape& t, std::size_t, const double* g) {
    if (double* ga = t.grad_ptr(ia)) for (std::size_t i = 0; i < n; ++i) ga[i] += factor * g[i];
  }));
}

Var tanh(Var a) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x[i]);
  const std::size_t ia = a.id(), n = out.size();
  return a.tape()->record(std::move(out), {a}, with_grad([ia, n](Tape& t, std::size_t self, const double* g) {
    const Tensor& y = t.node_value(self);
    if (double* ga = t.grad_ptr(ia)) for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  }));
}

Var sigmoid(Var a) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    // Split by sign so exp() never overflows.
    out[i] = x[i] >= 0 ? 1.0 / (1.0 + std::exp(-x[i])) : std::exp(x[i]) / (1.0 + std::exp(x[i]));
  }
  const std::size_t ia = a.id(), n = out.size();
  return a.tape()->record(std::move(out), {a}, with_grad([ia, n](Tape& t, std::size_t self, const double* g) {
    const Tensor& y = t.node_value(self);
    if (double* ga = t.grad_ptr(ia)) for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
  }));
}

Var matvec(Var w, Var x) {
  require_same_tape(w, x);
  const Tensor& W = w.value();
  const Tensor& X = x.value();
  if (!is_matrix(W) || !is_vector(X) || W.cols() != X.size()) shape_error("matvec", W, X);
  const std::size_t m = W.rows(), n = W.cols();
  Tensor out({m});
  for (std::size_t i = 0; i < m; ++i) {
    const double* wr = W.data().data() + i * n;
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += wr[j] * X[j];
    out[i] = acc;
  }
  const std::size_t iw = w.id(), ix = x.id();
  return w.tape()->record(std::move(out), {w, x}, with_grad([iw, ix, m, n](Tape& t, std::size_t, const double* g) {
    const Tensor& Wv = t.node_value(iw);
    const Tensor& Xv = t.node_value(ix);
    if (double* gw = t.grad_ptr(iw)) {
      for (std::size_t i = 0; i < m; ++i) {
        double* row = gw + i * n;
        const double gi = g[i];
        for (std::size_t j = 0; j < n; ++j) row[j] += gi * Xv[j];
      }
    }
    if (double* gx = t.grad_ptr(ix)) {
      for (std::size_t i = 0; i < m; ++i) {
        const double* wr = Wv.data().data() + i * n;
        const double gi = g[i];
        for (std::size_t j = 0; j < n; ++j) gx[j] += wr[j] * gi;
      }
    }
  }));
}

Var affine(Var w, Var x, Var b) {
  require_same_tape(w, x);
  require_same_tape(w, b);
  const Tensor& W = w.value();
  const Tensor& X = x.value();
  const Tensor& B = b.value();
  if (!is_matrix(W) || !is_vector(X) || W.cols() != X.size()) shape_error("affine", W, X);
  if (!is_vector(B) || B.size() != W.rows()) shape_error("affine", W, B);
  const std::size_t m = W.rows(), n = W.cols();
  Tensor out({m});
  for (std::size_t i = 0; i < m; ++i) {
    const double* wr = W.data().data() + i * n;
    double acc = B[i];
    for (std::size_t j = 0; j < n; ++j) acc += wr[j] * X[j];
    out[i] = acc;
  }
  const std::size_t iw = w.id(), ix = x.id(), ib = b.id();
  return w.tape()->record(std::move(out), {w, x, b}, with_grad([iw, ix, ib, m, n](Tape& t, std::size_t, const double* g) {
    const Tensor& Wv = t.node_value(iw);
    const Tensor& Xv = t.node_value(ix);
    if (double* gw = t.grad_ptr(iw)) {
      for (std::size_t i = 0; i < m; ++i) {
        double* row = gw + i * n;
        const double gi = g[i];
        for (std::size_t j = 0; j < n; ++j) row[j] += gi * Xv[j];
      }
    }
    if (double* gx = t.grad_ptr(ix)) {
      for (std::size_t i = 0; i < m; ++i) {
        const double* wr = Wv.data().data() + i * n;
        const double gi = g[i];
        for (std::size_t j = 0; j < n; ++j) gx[j] += wr[j] * gi;
      }
    }
    if (double* gb = t.grad_ptr(ib)) for (std::size_t i = 0; i < m; ++i) gb[i] += g[i];
  }));
}

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (!is_matrix(A) || !is_matrix(B) || A.cols() != B.rows()) shape_error("matmul", A, B);
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A.at(i, p);
      for (std::size_t j = 0; j < n; ++j) out.at(i, j) += aip * B.at(p, j);
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), {a, b}, with_grad([ia, ib, m, k, n](Tape& t, std::size_t, const double* g) {
    const Tensor& Av = t.node_value(ia);
    const Tensor& Bv = t.node_value(ib);
    if (double* ga = t.grad_ptr(ia)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * Bv.at(p, j);
          ga[i * k + p] += acc;
        }
    }
    if (double* gb = t.grad_ptr(ib)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = Av.at(i, p);
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
        }
    }
  }));
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat of zero tensors");
  std::vector<std::size_t> ids, offsets;
  std::vector<double> data;
  for (const Var& p : parts) {
    require_same_tape(parts.front(), p);
    const Tensor& v = p.value();
    if (!is_vector(v)) shape_error("concat", parts.front().value(), v);
    ids.push_back(p.id());
    offsets.push_back(data.size());
    data.insert(data.end(), v.data().begin(), v.data().end());
  }
  Tensor out = Tensor::vector(std::move(data));
  return parts.front().tape()->record(
      std::move(out), parts, with_grad([ids, offsets](Tape& t, std::size_t, const double* g) {
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (double* gp = t.grad_ptr(ids[k])) {
            const std::size_t n = t.node_value(ids[k]).size();
            for (std::size_t i = 0; i < n; ++i) gp[i] += g[offsets[k] + i];
          }
        }
      }));
}

Var concat(std::initializer_list<Var> parts) { return concat(std::span<const Var>(parts.begin(), parts.size())); }

Var slice(Var v, std::size_t offset, std::size_t length) {
  const Tensor& x = v.value();
  if (!is_vector(x) || length == 0 || offset + length > x.size()) {
    throw std::invalid_argument("slice [" + std::to_string(offset) + ", +" + std::to_string(length) +
                                ") out of range for shape " + x.shape_string());
  }
  std::vector<double> data(x.data().begin() + offset, x.data().begin() + offset + length);
  const std::size_t iv = v.id();
  return v.tape()->record(Tensor::vector(std::move(data)), {v},
                          with_grad([iv, offset, length](Tape& t, std::size_t, const double* g) {
                            if (double* gv = t.grad_ptr(iv))
                              for (std::size_t i = 0; i < length; ++i) gv[offset + i] += g[i];
                          }));
}

Var row_select(Var m, std::size_t k) {
  const Tensor& M = m.value();
  if (!is_matrix(M)) throw std::invalid_argument("row_select needs a matrix, got " + M.shape_string());
  if (k >= M.rows()) {
    throw std::out_of_range("row_select: row " + std::to_string(k) + " out of range for shape " + M.shape_string());
  }
  auto r = M.row(k);
  const std::size_t im = m.id(), n = M.cols();
  return m.tape()->record(Tensor::vector(std::vector<double>(r.begin(), r.end())), {m},
                          with_grad([im, k, n](Tape& t, std::size_t, const double* g) {
                            if (double* gm = t.grad_ptr(im))
                              for (std::size_t j = 0; j < n; ++j) gm[k * n + j] += g[j];
                          }));
}

Var gather_rows(Var m, std::span<const std::size_t> indices) {
  const Tensor& M = m.value();
  if (!is_matrix(M)) throw std::invalid_argument("gather_rows needs a matrix, got " + M.shape_string());
  if (indices.empty()) throw std::invalid_argument("gather_rows with no indices");
  const std::size_t n = M.cols();
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  std::vector<double> data;
  data.reserve(idx.size() * n);
  for (std::size_t k : idx) {
    if (k >= M.rows()) throw std::out_of_range("gather_rows: row out of range for shape " + M.shape_string());
    auto r = M.row(k);
    data.insert(data.end(), r.begin(), r.end());
  }
  const std::size_t im = m.id();
  Tensor out = Tensor::matrix(idx.size(), n, std::move(data));
  return m.tape()->record(std::move(out), {m}, with_grad([im, idx, n](Tape& t, std::size_t, const double* g) {
    if (double* gm = t.grad_ptr(im))
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t j = 0; j < n; ++j) gm[idx[r] * n + j] += g[r * n + j];
  }));
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows of zero tensors");
  const std::size_t n = rows.front().value().size();
  std::vector<std::size_t> ids;
  std::vector<double> data;
  data.reserve(rows.size() * n);
  for (const Var& r : rows) {
    require_same_tape(rows.front(), r);
    const Tensor& v = r.value();
    if (!is_vector(v) || v.size() != n) shape_error("stack_rows", rows.front().value(), v);
    ids.push_back(r.id());
    data.insert(data.end(), v.data().begin(), v.data().end());
  }
  Tensor out = Tensor::matrix(rows.size(), n, std::move(data));
  return rows.front().tape()->record(std::move(out), rows, with_grad([ids, n](Tape& t, std::size_t, const double* g) {
    for (std::size_t r = 0; r < ids.size(); ++r)
      if (double* gr = t.grad_ptr(ids[r]))
        for (std::size_t j = 0; j < n; ++j) gr[j] += g[r * n + j];
  }));
}

Var add_rowwise(Var m, Var v) {
  require_same_tape(m, v);
  const Tensor& M = m.value();
  const Tensor& V = v.value();
  if (!is_matrix(M) || !is_vector(V) || M.cols() != V.size()) shape_error("add_rowwise", M, V);
  const std::size_t r = M.rows(), c = M.cols();
  Tensor out(M.shape());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) = M.at(i, j) + V[j];
  const std::size_t im = m.id(), iv = v.id();
  return m.tape()->record(std::move(out), {m, v}, with_grad([im, iv, r, c](Tape& t, std::size_t, const double* g) {
    if (double* gm = t.grad_ptr(im)) for (std::size_t i = 0; i < r * c; ++i) gm[i] += g[i];
    if (double* gv = t.grad_ptr(iv))
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gv[j] += g[i * c + j];
  }));
}

Var weighted_row_sum(Var d, Var m) {
  require_same_tape(d, m);
  const Tensor& D = d.value();
  const Tensor& M = m.value();
  if (!is_vector(D) || !is_matrix(M) || D.size() != M.rows()) shape_error("weighted_row_sum", D, M);
  const std::size_t k = M.rows(), n = M.cols();
  Tensor out({n});
  for (std::size_t r = 0; r < k; ++r) {
    const double w = D[r];
    if (w == 0.0) continue;
    const double* row = M.data().data() + r * n;
    for (std::size_t j = 0; j < n; ++j) out[j] += w * row[j];
  }
  const std::size_t id = d.id(), im = m.id();
  return d.tape()->record(std::move(out), {d, m}, with_grad([id, im, k, n](Tape& t, std::size_t, const double* g) {
    const Tensor& Dv = t.node_value(id);
    const Tensor& Mv = t.node_value(im);
    if (double* gd = t.grad_ptr(id)) {
      for (std::size_t r = 0; r < k; ++r) {
        const double* row = Mv.data().data() + r * n;
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += row[j] * g[j];
        gd[r] += acc;
      }
    }
    if (double* gm = t.grad_ptr(im)) {
      for (std::size_t r = 0; r < k; ++r) {
        const double w = Dv[r];
        for (std::size_t j = 0; j < n; ++j) gm[r * n + j] += w * g[j];
      }
    }
  }));
}

std::vector<double> softmax_values(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("softmax of empty vector");
  for (double x : v) {
    if (!std::isfinite(x)) throw std::domain_error("softmax input is not finite");
  }
  const double mx = *std::max_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  double z = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - mx);
    z += out[i];
  }
  for (double& x : out) x /= z;
  return out;
}

std::vector<double> log_softmax_values(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("log_softmax of empty vector");
  for (double x : v) {
    if (!std::isfinite(x)) throw std::domain_error("log_softmax input is not finite");
  }
  const double mx = *std::max_element(v.begin(), v.end());
  double z = 0.0;
  for (double x : v) z += std::exp(x - mx);
  const double lz = mx + std::log(z);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - lz;
  return out;
}

Var softmax(Var v) {
  const Tensor& x = v.value();
  if (!is_vector(x)) throw std::invalid_argument("softmax needs a vector, got " + x.shape_string());
  Tensor out = Tensor::vector(softmax_values(x.data()));
  const std::size_t iv = v.id(), n = out.size();
  return v.tape()->record(std::move(out), {v}, with_grad([iv, n](Tape& t, std::size_t self, const double* g) {
    const Tensor& y = t.node_value(self);
    if (double* gv = t.grad_ptr(iv)) {
      double inner = 0.0;
      for (std::size_t i = 0; i < n; ++i) inner += g[i] * y[i];
      for (std::size_t i = 0; i < n; ++i) gv[i] += y[i] * (g[i] - inner);
    }
  }));
}

Var softmax_rows(Var m) {
  const Tensor& M = m.value();
  if (!is_matrix(M)) throw std::invalid_argument("softmax_rows needs a matrix, got " + M.shape_string());
  const std::size_t r = M.rows(), c = M.cols();
  Tensor out(M.shape());
  for (std::size_t i = 0; i < r; ++i) {
    auto s = softmax_values(M.row(i));
    std::copy(s.begin(), s.end(), out.row(i).begin());
  }
  const std::size_t im = m.id();
  return m.tape()->record(std::move(out), {m}, with_grad([im, r, c](Tape& t, std::size_t self, const double* g) {
    const Tensor& y = t.node_value(self);
    if (double* gm = t.grad_ptr(im)) {
      for (std::size_t i = 0; i < r; ++i) {
        const double* yr = y.data().data() + i * c;
        const double* gr = g + i * c;
        double inner = 0.0;
        for (std::size_t j = 0; j < c; ++j) inner += gr[j] * yr[j];
        for (std::size_t j = 0; j < c; ++j) gm[i * c + j] += yr[j] * (gr[j] - inner);
      }
    }
  }));
}

Var log_softmax(Var v) {
  const Tensor& x = v.value();
  if (!is_vector(x)) throw std::invalid_argument("log_softmax needs a vector, got " + x.shape_string());
  Tensor out = Tensor::vector(log_softmax_values(x.data()));
  const std::size_t iv = v.id(), n = out.size();
  return v.tape()->record(std::move(out), {v}, with_grad([iv, n](Tape& t, std::size_t self, const double* g) {
    const Tensor& y = t.node_value(self);
    if (double* gv = t.grad_ptr(iv)) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) total += g[i];
      for (std::size_t i = 0; i < n; ++i) gv[i] += g[i] - std::exp(y[i]) * total;
    }
  }));
}

Var dot(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (!x.same_shape(y)) shape_error("dot", x, y);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
  const std::size_t ia = a.id(), ib = b.id(), n = x.size();
  return a.tape()->record(Tensor::scalar(acc), {a, b}, with_grad([ia, ib, n](Tape& t, std::size_t, const double* g) {
    const Tensor& xv = t.node_value(ia);
    const Tensor& yv = t.node_value(ib);
    if (double* ga = t.grad_ptr(ia)) for (std::size_t i = 0; i < n; ++i) ga[i] += g[0] * yv[i];
    if (double* gb = t.grad_ptr(ib)) for (std::size_t i = 0; i < n; ++i) gb[i] += g[0] * xv[i];
  }));
}

Var sum(Var a) {
  const Tensor& x = a.value();
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  const std::size_t ia = a.id(), n = x.size();
  return a.tape()->record(Tensor::scalar(acc), {a}, with_grad([ia, n](Tape& t, std::size_t, const double* g) {
    if (double* ga = t.grad_ptr(ia)) for (std::size_t i = 0; i < n; ++i) ga[i] += g[0];
  }));
}

Var pick(Var v, std::size_t k) {
  const Tensor& x = v.value();
  if (k >= x.size()) {
    throw std::out_of_range("pick: index " + std::to_string(k) + " out of range for shape " + x.shape_string());
  }
  const std::size_t iv = v.id();
  return v.tape()->record(Tensor::scalar(x[k]), {v}, with_grad([iv, k](Tape& t, std::size_t, const double* g) {
    if (double* gv = t.grad_ptr(iv)) gv[k] += g[0];
  }));
}

Var add_n(std::span<const Var> scalars) {
  if (scalars.empty()) throw std::invalid_argument("add_n of zero terms");
  std::vector<std::size_t> ids;
  double acc = 0.0;
  for (const Var& s : scalars) {
    require_same_tape(scalars.front(), s);
    if (s.value().size() != 1) throw std::invalid_argument("add_n expects scalars, got " + s.value().shape_string());
    ids.push_back(s.id());
    acc += s.value()[0];
  }
  return scalars.front().tape()->record(Tensor::scalar(acc), scalars,
                                        with_grad([ids](Tape& t, std::size_t, const double* g) {
                                          for (std::size_t id : ids)
                                            if (double* gs = t.grad_ptr(id)) gs[0] += g[0];
                                        }));
}

}  // namespace reldec::ad
