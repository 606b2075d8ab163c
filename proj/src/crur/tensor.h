#ifndef CRUR_TENSOR_H_
#define CRUR_TENSOR_H_

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "crur/rng.h"

namespace crur {

class Tape;

// Dense row-major float64 tensor.  Copies share storage (handle semantics,
// like the usual deep-learning tensor types); clone() makes a deep copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const std::vector<int>& shape);
  static Tensor full(const std::vector<int>& shape, double value);
  static Tensor from_data(const std::vector<int>& shape,
                          std::vector<double> data);
  static Tensor scalar(double value) { return from_data({1}, {value}); }

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int>& shape() const;
  int rank() const { return static_cast<int>(shape().size()); }
  int numel() const;
  int dim(int i) const { return shape()[i]; }

  double* data();
  const double* data() const;
  double at(int flat_index) const { return data()[flat_index]; }
  double item() const;  // numel must be 1

  bool requires_grad() const;
  Tensor& set_requires_grad(bool v);

  Tensor clone() const;  // deep copy, detached from any tape

  // Tape bookkeeping.  A binding carries the tape's generation id so a
  // stale binding can never alias a newer tape that reuses the address.
  int node() const;
  bool bound_to(const Tape& tape) const;
  void bind_tape(Tape* tape, int node) const;

 private:
  struct Impl {
    std::vector<int> shape;
    std::vector<double> data;
    bool requires_grad = false;
    Tape* tape = nullptr;
    unsigned long long tape_id = 0;
    int node = -1;
  };
  explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<Impl> impl_;
};

// Reverse-mode tape, rebuilt per forward pass (define-by-run).  A Tape and
// the tensors recorded on it are confined to one thread; constructing a
// Tape makes it the thread's current tape until destruction.
class Tape {
 public:
  using BackFn = std::function<void(const double* grad_out, Tape& tape)>;

  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* current();
  unsigned long long id() const { return id_; }

  // Registers t as a leaf (no-op if already bound to this tape).
  int watch(const Tensor& t);
  int add_node(int numel, BackFn back);
  // Accumulation buffer for a node, zero-initialized on first access.
  double* grad_buffer(int node, int numel);
  bool has_grad(int node) const;

  // Reverse-topological accumulation from a scalar loss.
  void backward(const Tensor& loss);

  // Gradient of a watched tensor; zeros if the loss did not reach it.
  Tensor grad(const Tensor& t) const;

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    int numel;
    BackFn back;  // empty for leaves
  };
  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
  Tape* prev_ = nullptr;
  unsigned long long id_ = 0;
};

namespace ops {

// True when the current tape should record an op consuming t.
bool tracing(const Tensor& t);

Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n] -> [m,n]
Tensor vec_mat(const Tensor& x, const Tensor& w);  // [n] x [n,m] -> [m]
Tensor mat_vec(const Tensor& w, const Tensor& x);  // [m,n] x [n] -> [m]
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // Hadamard product
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor outer(const Tensor& u, const Tensor& v);  // [m] x [n] -> [m,n]
Tensor softmax_log(const Tensor& x);             // rank-1, stabilized
// Inverted dropout: train-time scaling by 1/(1-rate), identity at inference.
Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng);
Tensor reshape(const Tensor& x, const std::vector<int>& shape);
Tensor concat(const Tensor& a, const Tensor& b);  // rank-1
Tensor row(const Tensor& m, int i);               // [r,c] -> [c]
Tensor pick(const Tensor& x, int flat_index);     // -> [1]
Tensor sum(const Tensor& x);                      // -> [1]
Tensor scale(const Tensor& x, double c);

// Convenience for the current tape.
void backward(const Tensor& loss);

}  // namespace ops

bool all_finite(const Tensor& t);
std::string shape_str(const std::vector<int>& shape);

}  // namespace crur

#endif  // CRUR_TENSOR_H_
