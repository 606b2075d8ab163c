#ifndef CRUR_HADAMARD_H_
#define CRUR_HADAMARD_H_

#include <vector>

#include "crur/rng.h"
#include "crur/tensor.h"

namespace crur {

// Normalized Hadamard role matrix: 2^k orthonormal rows, one role per
// sequence position.  Entries are all +-2^(-k/2).
struct HadamardRoles {
  int k = 0;
  Tensor matrix;  // [2^k, 2^k]

  int count() const { return matrix.dim(0); }
  // Role row j copied out as a plain vector.
  Tensor role(int j) const;
};

struct EmbeddingTable {
  Tensor matrix;  // [vocab, dim]

  int vocab() const { return matrix.dim(0); }
  int dim() const { return matrix.dim(1); }
  Tensor embedding(int token) const;

  // Gaussian entries; distinct rows with probability 1 (asserted by tests).
  static EmbeddingTable random(int vocab, int dim, Rng& rng);
};

// Superposition of filler (x) role outer products.
struct BoundRepresentation {
  Tensor matrix;  // [filler_dim, 2^k]
  int bound_count = 0;
};

// Sylvester doubling with per-row L2 normalization; k <= 16.
HadamardRoles hadamard_generate(int k);

// s = sum_j embedding(tokens[j]) (x) role_j.
BoundRepresentation bind_sequence(const std::vector<int>& tokens,
                                  const EmbeddingTable& table,
                                  const HadamardRoles& roles);

// Filler at position j: s.matrix * role_j.
Tensor unbind(const BoundRepresentation& s, int position,
              const HadamardRoles& roles);

// Nearest row of the table by L2 distance; ties -> lowest index.
int nn_retrieve(const Tensor& v, const EmbeddingTable& table);

// Splits w into ceil(d/q) chunks of length q (last chunk zero-padded) and
// binds chunk i to role i.
BoundRepresentation bind_feature_segments(const Tensor& w, int q,
                                          const HadamardRoles& roles);

// Mixes signals over the role basis (D = sum_i s_i (x) b_i), re-derives each
// signal as D*b_i, and returns the worst L-inf reconstruction error.
double spectrum_demo(const std::vector<Tensor>& signals,
                     const HadamardRoles& roles);

}  // namespace crur

#endif  // CRUR_HADAMARD_H_
