#include "crur/hadamard.h"

#include <cmath>
#include <string>

#include "crur/error.h"

namespace crur {

Tensor HadamardRoles::role(int j) const {
  const int n = count();
  if (j < 0 || j >= n)
    throw IndexError("role index " + std::to_string(j) + " out of range [0," +
                     std::to_string(n) + ")");
  return Tensor::from_data(
      {n}, std::vector<double>(matrix.data() + j * n,
                               matrix.data() + (j + 1) * n));
}

Tensor EmbeddingTable::embedding(int token) const {
  if (token < 0 || token >= vocab())
    throw IndexError("token " + std::to_string(token) +
                     " outside vocabulary of size " + std::to_string(vocab()));
  const int e = dim();
  return Tensor::from_data(
      {e}, std::vector<double>(matrix.data() + token * e,
                               matrix.data() + (token + 1) * e));
}

EmbeddingTable EmbeddingTable::random(int vocab, int dim, Rng& rng) {
  if (vocab <= 0 || dim <= 0)
    throw ParameterError("embedding table needs positive vocab and dim");
  EmbeddingTable t;
  t.matrix = Tensor::zeros({vocab, dim});
  for (int i = 0; i < t.matrix.numel(); ++i)
    t.matrix.data()[i] = rng.gaussian();
  return t;
}

HadamardRoles hadamard_generate(int k) {
  if (k < 0 || k > 16)
    throw ParameterError("role order exponent must lie in [0,16], got " +
                         std::to_string(k));
  HadamardRoles roles;
  roles.k = k;
  roles.matrix = Tensor::from_data({1, 1}, {1.0});
  for (int step = 0; step < k; ++step) {
    const int n = roles.matrix.dim(0);
    const double* h = roles.matrix.data();
    Tensor next = Tensor::zeros({2 * n, 2 * n});
    double* d = next.data();
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double v = h[i * n + j];
        d[i * 2 * n + j] = v;
        d[i * 2 * n + n + j] = v;
        d[(n + i) * 2 * n + j] = v;
        d[(n + i) * 2 * n + n + j] = -v;
      }
    }
    // Normalize each doubled row by its own L2 norm (the c in the paper's
    // recursion); previous rows being unit makes this sqrt(2), but we
    // compute it rather than assume it.
    for (int i = 0; i < 2 * n; ++i) {
      double ss = 0;
      for (int j = 0; j < 2 * n; ++j) ss += d[i * 2 * n + j] * d[i * 2 * n + j];
      const double c = std::sqrt(ss);
      for (int j = 0; j < 2 * n; ++j) d[i * 2 * n + j] /= c;
    }
    roles.matrix = next;
  }
  return roles;
}

BoundRepresentation bind_sequence(const std::vector<int>& tokens,
                                  const EmbeddingTable& table,
                                  const HadamardRoles& roles) {
  const int n = roles.count();
  if (static_cast<int>(tokens.size()) > n)
    throw CapacityError("sequence of length " +
                        std::to_string(tokens.size()) + " exceeds " +
                        std::to_string(n) + " available roles");
  const int e = table.dim();
  BoundRepresentation s;
  s.matrix = Tensor::zeros({e, n});
  double* sm = s.matrix.data();
  for (size_t j = 0; j < tokens.size(); ++j) {
    const int tok = tokens[j];
    if (tok < 0 || tok >= table.vocab())
      throw IndexError("token " + std::to_string(tok) +
                       " outside vocabulary of size " +
                       std::to_string(table.vocab()));
    const double* f = table.matrix.data() + tok * e;
    const double* r = roles.matrix.data() + j * n;
    for (int a = 0; a < e; ++a)
      for (int b = 0; b < n; ++b) sm[a * n + b] += f[a] * r[b];
    ++s.bound_count;
  }
  return s;
}

Tensor unbind(const BoundRepresentation& s, int position,
              const HadamardRoles& roles) {
  const int n = roles.count();
  if (position < 0 || position >= n)
    throw IndexError("unbind position " + std::to_string(position) +
                     " out of range [0," + std::to_string(n) + ")");
  if (s.matrix.dim(1) != n)
    throw DimensionError("bound matrix " + shape_str(s.matrix.shape()) +
                         " does not match " + std::to_string(n) + " roles");
  const int e = s.matrix.dim(0);
  const double* sm = s.matrix.data();
  const double* r = roles.matrix.data() + position * n;
  Tensor out = Tensor::zeros({e});
  for (int a = 0; a < e; ++a) {
    double acc = 0;
    for (int b = 0; b < n; ++b) acc += sm[a * n + b] * r[b];
    out.data()[a] = acc;
  }
  return out;
}

int nn_retrieve(const Tensor& v, const EmbeddingTable& table) {
  if (v.rank() != 1 || v.numel() != table.dim())
    throw DimensionError("query shape " + shape_str(v.shape()) +
                         " does not match embedding dim " +
                         std::to_string(table.dim()));
  const int e = table.dim();
  int best = 0;
  double best_d = 0;
  for (int i = 0; i < table.vocab(); ++i) {
    const double* row = table.matrix.data() + i * e;
    double d = 0;
    for (int a = 0; a < e; ++a) {
      const double diff = v.data()[a] - row[a];
      d += diff * diff;
    }
    if (i == 0 || d < best_d) {  // strict < keeps the lowest index on ties
      best = i;
      best_d = d;
    }
  }
  return best;
}

BoundRepresentation bind_feature_segments(const Tensor& w, int q,
                                          const HadamardRoles& roles) {
  if (w.rank() != 1)
    throw RankError("feature to segment must be a vector, got " +
                    shape_str(w.shape()));
  if (q <= 0)
    throw ParameterError("segment length must be positive, got " +
                         std::to_string(q));
  const int d = w.numel();
  const int chunks = (d + q - 1) / q;
  const int n = roles.count();
  if (chunks > n)
    throw CapacityError(std::to_string(chunks) + " segments exceed " +
                        std::to_string(n) + " available roles");
  BoundRepresentation s;
  s.matrix = Tensor::zeros({q, n});
  double* sm = s.matrix.data();
  for (int i = 0; i < chunks; ++i) {
    const double* r = roles.matrix.data() + i * n;
    for (int a = 0; a < q; ++a) {
      const int src = i * q + a;
      const double f = src < d ? w.data()[src] : 0.0;  // zero-pad tail
      if (f == 0.0) continue;
      for (int b = 0; b < n; ++b) sm[a * n + b] += f * r[b];
    }
    ++s.bound_count;
  }
  return s;
}

double spectrum_demo(const std::vector<Tensor>& signals,
                     const HadamardRoles& roles) {
  const int n = roles.count();
  if (static_cast<int>(signals.size()) > n)
    throw CapacityError(std::to_string(signals.size()) +
                        " signals exceed " + std::to_string(n) +
                        " basis vectors");
  if (signals.empty()) return 0.0;
  const int len = signals[0].numel();
  for (const auto& s : signals)
    if (s.rank() != 1 || s.numel() != len)
      throw DimensionError("signals must be equal-length vectors");

  // Mix: D = sum_i signal_i (x) basis_i.
  Tensor mixed = Tensor::zeros({len, n});
  double* m = mixed.data();
  for (size_t i = 0; i < signals.size(); ++i) {
    const double* sig = signals[i].data();
    const double* b = roles.matrix.data() + i * n;
    for (int a = 0; a < len; ++a)
      for (int j = 0; j < n; ++j) m[a * n + j] += sig[a] * b[j];
  }

  // Recover each signal as D * basis_i and report the worst deviation.
  double worst = 0.0;
  for (size_t i = 0; i < signals.size(); ++i) {
    const double* b = roles.matrix.data() + i * n;
    for (int a = 0; a < len; ++a) {
      double acc = 0;
      for (int j = 0; j < n; ++j) acc += m[a * n + j] * b[j];
      worst = std::max(worst, std::fabs(acc - signals[i].data()[a]));
    }
  }
  return worst;
}

}  // namespace crur
