#include "crur/tensor.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "crur/error.h"

namespace crur {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

thread_local Tape* g_current_tape = nullptr;
thread_local unsigned long long g_tape_counter = 0;

int checked_numel(const std::vector<int>& shape) {
  long long n = 1;
  for (int d : shape) {
    if (d <= 0)
      throw DimensionError("tensor dimensions must be positive, got " +
                           shape_str(shape));
    n *= d;
  }
  if (n > (1LL << 31))
    throw DimensionError("tensor too large: " + shape_str(shape));
  return static_cast<int>(n);
}

}  // namespace

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor Tensor::zeros(const std::vector<int>& shape) {
  auto impl = std::make_shared<Impl>();
  impl->shape = shape;
  impl->data.assign(checked_numel(shape), 0.0);
  return Tensor(std::move(impl));
}

Tensor Tensor::full(const std::vector<int>& shape, double value) {
  Tensor t = zeros(shape);
  std::fill(t.data(), t.data() + t.numel(), value);
  return t;
}

Tensor Tensor::from_data(const std::vector<int>& shape,
                         std::vector<double> data) {
  int n = checked_numel(shape);
  if (n != static_cast<int>(data.size()))
    throw DimensionError("data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
  auto impl = std::make_shared<Impl>();
  impl->shape = shape;
  impl->data = std::move(data);
  return Tensor(std::move(impl));
}

const std::vector<int>& Tensor::shape() const { return impl_->shape; }
int Tensor::numel() const { return static_cast<int>(impl_->data.size()); }
double* Tensor::data() { return impl_->data.data(); }
const double* Tensor::data() const { return impl_->data.data(); }

double Tensor::item() const {
  if (numel() != 1)
    throw RankError("item() requires a scalar, got shape " +
                    shape_str(shape()));
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool v) {
  impl_->requires_grad = v;
  return *this;
}

Tensor Tensor::clone() const {
  auto impl = std::make_shared<Impl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  impl->requires_grad = impl_->requires_grad;
  return Tensor(std::move(impl));
}

int Tensor::node() const { return impl_ ? impl_->node : -1; }

bool Tensor::bound_to(const Tape& tape) const {
  return impl_ && impl_->tape == &tape && impl_->tape_id == tape.id() &&
         impl_->node >= 0;
}

void Tensor::bind_tape(Tape* tape, int node) const {
  impl_->tape = tape;
  impl_->tape_id = tape->id();
  impl_->node = node;
}

Tape::Tape() {
  prev_ = g_current_tape;
  id_ = ++g_tape_counter;
  g_current_tape = this;
}

Tape::~Tape() { g_current_tape = prev_; }

Tape* Tape::current() { return g_current_tape; }

int Tape::watch(const Tensor& t) {
  if (t.bound_to(*this)) return t.node();
  int id = add_node(t.numel(), BackFn());
  t.bind_tape(this, id);
  return id;
}

int Tape::add_node(int numel, BackFn back) {
  nodes_.push_back(Node{numel, std::move(back)});
  grads_.emplace_back();
  return static_cast<int>(nodes_.size()) - 1;
}

double* Tape::grad_buffer(int node, int numel) {
  auto& g = grads_[node];
  if (g.empty()) g.assign(numel, 0.0);
  return g.data();
}

bool Tape::has_grad(int node) const { return !grads_[node].empty(); }

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1 || loss.rank() > 1)
    throw RankError("backward requires a scalar loss, got shape " +
                    shape_str(loss.shape()));
  if (!loss.bound_to(*this))
    throw ParameterError("backward: loss is not on this tape");
  grad_buffer(loss.node(), 1)[0] += 1.0;
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    if (grads_[i].empty() || !nodes_[i].back) continue;
    nodes_[i].back(grads_[i].data(), *this);
  }
}

Tensor Tape::grad(const Tensor& t) const {
  if (!t.bound_to(*this))
    throw ParameterError("grad: tensor was never recorded on this tape");
  Tensor g = Tensor::zeros(t.shape());
  const auto& buf = grads_[t.node()];
  if (!buf.empty()) std::copy(buf.begin(), buf.end(), g.data());
  return g;
}

bool all_finite(const Tensor& t) {
  const double* p = t.data();
  for (int i = 0; i < t.numel(); ++i)
    if (!std::isfinite(p[i])) return false;
  return true;
}

namespace ops {

bool tracing(const Tensor& t) {
  Tape* tp = Tape::current();
  if (!tp || !t.defined()) return false;
  return t.requires_grad() || t.bound_to(*tp);
}

namespace {

// Registers `out` as the result of an op over (a[, b]); parent ids are -1
// for untraced inputs.
struct Trace {
  Tape* tape = nullptr;
  int pa = -1;
  int pb = -1;
  bool on() const { return tape != nullptr; }
};

Trace begin_trace(const Tensor& a, const Tensor& b = Tensor()) {
  Trace tr;
  bool ta = tracing(a), tb = b.defined() && tracing(b);
  if (!ta && !tb) return tr;
  tr.tape = Tape::current();
  if (ta) tr.pa = tr.tape->watch(a);
  if (tb) tr.pb = tr.tape->watch(b);
  return tr;
}

void finish_trace(const Trace& tr, const Tensor& out, Tape::BackFn back) {
  int id = tr.tape->add_node(out.numel(), std::move(back));
  out.bind_tape(tr.tape, id);
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw DimensionError("matmul: expected rank-2 operands, got " +
                         shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  if (a.dim(1) != b.dim(0))
    throw DimensionError("matmul: inner dimensions disagree, " +
                         shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out = Tensor::zeros({m, n});
  ConstMatMap A(a.data(), m, k), B(b.data(), k, n);
  MatMap C(out.data(), m, n);
  C.noalias() = A * B;

  Trace tr = begin_trace(a, b);
  if (tr.on()) {
    Tensor sa = a, sb = b;
    int pa = tr.pa, pb = tr.pb;
    finish_trace(tr, out, [sa, sb, pa, pb, m, k, n](const double* g, Tape& t) {
      ConstMatMap G(g, m, n);
      if (pa >= 0) {
        MatMap GA(t.grad_buffer(pa, m * k), m, k);
        ConstMatMap B2(sb.data(), k, n);
        GA.noalias() += G * B2.transpose();
      }
      if (pb >= 0) {
        MatMap GB(t.grad_buffer(pb, k * n), k, n);
        ConstMatMap A2(sa.data(), m, k);
        GB.noalias() += A2.transpose() * G;
      }
    });
  }
  return out;
}

Tensor vec_mat(const Tensor& x, const Tensor& w) {
  if (x.rank() != 1)
    throw RankError("vec_mat: expected a vector, got " + shape_str(x.shape()));
  if (w.rank() != 2)
    throw RankError("vec_mat: expected a matrix, got " + shape_str(w.shape()));
  return reshape(matmul(reshape(x, {1, x.numel()}), w), {w.dim(1)});
}

Tensor mat_vec(const Tensor& w, const Tensor& x) {
  if (x.rank() != 1)
    throw RankError("mat_vec: expected a vector, got " + shape_str(x.shape()));
  if (w.rank() != 2)
    throw RankError("mat_vec: expected a matrix, got " + shape_str(w.shape()));
  return reshape(matmul(w, reshape(x, {x.numel(), 1})), {w.dim(0)});
}

namespace {

template <typename Fwd, typename Bwd>
Tensor binary_ew(const char* name, const Tensor& a, const Tensor& b, Fwd fwd,
                 Bwd bwd) {
  check_same_shape(name, a, b);
  const int n = a.numel();
  Tensor out = Tensor::zeros(a.shape());
  const double *pa = a.data(), *pb = b.data();
  double* po = out.data();
  for (int i = 0; i < n; ++i) po[i] = fwd(pa[i], pb[i]);

  Trace tr = begin_trace(a, b);
  if (tr.on()) {
    Tensor sa = a, sb = b;
    int ia = tr.pa, ib = tr.pb;
    finish_trace(tr, out, [sa, sb, ia, ib, n, bwd](const double* g, Tape& t) {
      double* ga = ia >= 0 ? t.grad_buffer(ia, n) : nullptr;
      double* gb = ib >= 0 ? t.grad_buffer(ib, n) : nullptr;
      bwd(g, sa.data(), sb.data(), ga, gb, n);
    });
  }
  return out;
}

template <typename Fwd, typename Dfdy>
Tensor unary_ew(const Tensor& x, Fwd fwd, Dfdy dfdy) {
  const int n = x.numel();
  Tensor out = Tensor::zeros(x.shape());
  const double* px = x.data();
  double* po = out.data();
  for (int i = 0; i < n; ++i) po[i] = fwd(px[i]);

  Trace tr = begin_trace(x);
  if (tr.on()) {
    Tensor sy = out;
    int ix = tr.pa;
    finish_trace(tr, out, [sy, ix, n, dfdy](const double* g, Tape& t) {
      double* gx = t.grad_buffer(ix, n);
      const double* y = sy.data();
      for (int i = 0; i < n; ++i) gx[i] += g[i] * dfdy(y[i]);
    });
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_ew(
      "add", a, b, [](double x, double y) { return x + y; },
      [](const double* g, const double*, const double*, double* ga, double* gb,
         int n) {
        for (int i = 0; i < n; ++i) {
          if (ga) ga[i] += g[i];
          if (gb) gb[i] += g[i];
        }
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_ew(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](const double* g, const double*, const double*, double* ga, double* gb,
         int n) {
        for (int i = 0; i < n; ++i) {
          if (ga) ga[i] += g[i];
          if (gb) gb[i] -= g[i];
        }
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_ew(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](const double* g, const double* x, const double* y, double* ga,
         double* gb, int n) {
        for (int i = 0; i < n; ++i) {
          if (ga) ga[i] += g[i] * y[i];
          if (gb) gb[i] += g[i] * x[i];
        }
      });
}

Tensor sigmoid(const Tensor& x) {
  return unary_ew(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary_ew(
      x, [](double v) { return std::tanh(v); },
      [](double y) { return 1.0 - y * y; });
}

Tensor outer(const Tensor& u, const Tensor& v) {
  if (u.rank() != 1 || v.rank() != 1)
    throw RankError("outer: expected two vectors, got " +
                    shape_str(u.shape()) + " and " + shape_str(v.shape()));
  const int m = u.numel(), n = v.numel();
  Tensor out = Tensor::zeros({m, n});
  const double *pu = u.data(), *pv = v.data();
  double* po = out.data();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) po[i * n + j] = pu[i] * pv[j];

  Trace tr = begin_trace(u, v);
  if (tr.on()) {
    Tensor su = u, sv = v;
    int iu = tr.pa, iv = tr.pb;
    finish_trace(tr, out, [su, sv, iu, iv, m, n](const double* g, Tape& t) {
      if (iu >= 0) {
        double* gu = t.grad_buffer(iu, m);
        for (int i = 0; i < m; ++i) {
          double s = 0;
          for (int j = 0; j < n; ++j) s += g[i * n + j] * sv.data()[j];
          gu[i] += s;
        }
      }
      if (iv >= 0) {
        double* gv = t.grad_buffer(iv, n);
        for (int j = 0; j < n; ++j) {
          double s = 0;
          for (int i = 0; i < m; ++i) s += g[i * n + j] * su.data()[i];
          gv[j] += s;
        }
      }
    });
  }
  return out;
}

Tensor softmax_log(const Tensor& x) {
  if (x.rank() != 1 || x.numel() < 1)
    throw RankError("softmax_log: expected a nonempty vector, got " +
                    shape_str(x.shape()));
  const int n = x.numel();
  Tensor out = Tensor::zeros({n});
  const double* px = x.data();
  double* po = out.data();
  double mx = px[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, px[i]);
  double z = 0;
  for (int i = 0; i < n; ++i) z += std::exp(px[i] - mx);
  const double lz = std::log(z);
  for (int i = 0; i < n; ++i) po[i] = px[i] - mx - lz;

  Trace tr = begin_trace(x);
  if (tr.on()) {
    Tensor sy = out;
    int ix = tr.pa;
    finish_trace(tr, out, [sy, ix, n](const double* g, Tape& t) {
      double* gx = t.grad_buffer(ix, n);
      double gsum = 0;
      for (int i = 0; i < n; ++i) gsum += g[i];
      const double* y = sy.data();
      for (int i = 0; i < n; ++i) gx[i] += g[i] - std::exp(y[i]) * gsum;
    });
  }
  return out;
}

Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw ParameterError("dropout: rate must lie in [0,1), got " +
                         std::to_string(rate));
  if (!training) return x;
  const int n = x.numel();
  const double keep_scale = 1.0 / (1.0 - rate);
  Tensor mask = Tensor::zeros(x.shape());
  for (int i = 0; i < n; ++i)
    mask.data()[i] = rng.bernoulli(rate) ? 0.0 : keep_scale;
  // Mask is a constant; gradient flows through x only.
  Tensor out = Tensor::zeros(x.shape());
  for (int i = 0; i < n; ++i) out.data()[i] = x.data()[i] * mask.data()[i];

  Trace tr = begin_trace(x);
  if (tr.on()) {
    int ix = tr.pa;
    finish_trace(tr, out, [mask, ix, n](const double* g, Tape& t) {
      double* gx = t.grad_buffer(ix, n);
      for (int i = 0; i < n; ++i) gx[i] += g[i] * mask.data()[i];
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, const std::vector<int>& shape) {
  long long n = 1;
  for (int d : shape) n *= d;
  if (n != x.numel())
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) +
                         " as " + shape_str(shape));
  Tensor out = Tensor::from_data(
      shape, std::vector<double>(x.data(), x.data() + x.numel()));
  Trace tr = begin_trace(x);
  if (tr.on()) {
    int ix = tr.pa;
    const int n = x.numel();
    finish_trace(tr, out, [ix, n](const double* g, Tape& t) {
      double* gx = t.grad_buffer(ix, n);
      for (int i = 0; i < n; ++i) gx[i] += g[i];
    });
  }
  return out;
}

Tensor concat(const Tensor& a, const Tensor& b) {
  if (a.rank() != 1 || b.rank() != 1)
    throw RankError("concat: expected two vectors, got " +
                    shape_str(a.shape()) + " and " + shape_str(b.shape()));
  const int na = a.numel(), nb = b.numel();
  std::vector<double> d(na + nb);
  std::copy(a.data(), a.data() + na, d.begin());
  std::copy(b.data(), b.data() + nb, d.begin() + na);
  Tensor out = Tensor::from_data({na + nb}, std::move(d));

  Trace tr = begin_trace(a, b);
  if (tr.on()) {
    int ia = tr.pa, ib = tr.pb;
    finish_trace(tr, out, [ia, ib, na, nb](const double* g, Tape& t) {
      if (ia >= 0) {
        double* ga = t.grad_buffer(ia, na);
        for (int i = 0; i < na; ++i) ga[i] += g[i];
      }
      if (ib >= 0) {
        double* gb = t.grad_buffer(ib, nb);
        for (int i = 0; i < nb; ++i) gb[i] += g[na + i];
      }
    });
  }
  return out;
}

Tensor row(const Tensor& m, int i) {
  if (m.rank() != 2)
    throw RankError("row: expected a matrix, got " + shape_str(m.shape()));
  const int r = m.dim(0), c = m.dim(1);
  if (i < 0 || i >= r)
    throw IndexError("row: index " + std::to_string(i) + " out of range [0," +
                     std::to_string(r) + ")");
  Tensor out = Tensor::from_data(
      {c}, std::vector<double>(m.data() + i * c, m.data() + (i + 1) * c));

  Trace tr = begin_trace(m);
  if (tr.on()) {
    int im = tr.pa;
    finish_trace(tr, out, [im, i, r, c](const double* g, Tape& t) {
      double* gm = t.grad_buffer(im, r * c);
      for (int j = 0; j < c; ++j) gm[i * c + j] += g[j];
    });
  }
  return out;
}

Tensor pick(const Tensor& x, int flat_index) {
  if (flat_index < 0 || flat_index >= x.numel())
    throw IndexError("pick: index " + std::to_string(flat_index) +
                     " out of range for " + shape_str(x.shape()));
  Tensor out = Tensor::scalar(x.data()[flat_index]);
  Trace tr = begin_trace(x);
  if (tr.on()) {
    int ix = tr.pa;
    const int n = x.numel();
    finish_trace(tr, out, [ix, n, flat_index](const double* g, Tape& t) {
      t.grad_buffer(ix, n)[flat_index] += g[0];
    });
  }
  return out;
}

Tensor sum(const Tensor& x) {
  double s = 0;
  for (int i = 0; i < x.numel(); ++i) s += x.data()[i];
  Tensor out = Tensor::scalar(s);
  Trace tr = begin_trace(x);
  if (tr.on()) {
    int ix = tr.pa;
    const int n = x.numel();
    finish_trace(tr, out, [ix, n](const double* g, Tape& t) {
      double* gx = t.grad_buffer(ix, n);
      for (int i = 0; i < n; ++i) gx[i] += g[0];
    });
  }
  return out;
}

Tensor scale(const Tensor& x, double c) {
  Tensor out = Tensor::zeros(x.shape());
  for (int i = 0; i < x.numel(); ++i) out.data()[i] = c * x.data()[i];
  Trace tr = begin_trace(x);
  if (tr.on()) {
    int ix = tr.pa;
    const int n = x.numel();
    finish_trace(tr, out, [ix, n, c](const double* g, Tape& t) {
      double* gx = t.grad_buffer(ix, n);
      for (int i = 0; i < n; ++i) gx[i] += c * g[i];
    });
  }
  return out;
}

void backward(const Tensor& loss) {
  Tape* tp = Tape::current();
  if (!tp) throw ParameterError("backward: no tape is active");
  tp->backward(loss);
}

}  // namespace ops

}  // namespace crur
