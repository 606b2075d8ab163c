#ifndef CRUR_FDCHECK_H_
#define CRUR_FDCHECK_H_

// Central-difference gradient oracle, independent of the reverse-mode code
// it is used to check.  The loss callback must rebuild its graph from the
// given parameter tensors on every call (they are mutated in place).
// Shared by the unit tests and the grad-check CLI command.

#include <cmath>
#include <functional>
#include <vector>

#include "crur/tensor.h"

namespace crur {

struct GradReport {
  double max_rel_err = 0.0;
  double worst_ad = 0.0;
  double worst_fd = 0.0;
  int worst_param = -1;
  int worst_entry = -1;
};

// rel err = |ad - fd| / (|fd| + 1e-8), the convention used throughout the
// test suite; eps is the half-width of the central difference.
inline GradReport grad_check(std::vector<Tensor> params,
                             const std::function<Tensor()>& loss,
                             double eps = 1e-5) {
  std::vector<Tensor> ad;
  {
    Tape tape;
    // Watch everything up front so a parameter the loss never touches
    // reports a zero gradient instead of an unrecorded-tensor error.
    for (auto& p : params) tape.watch(p);
    Tensor l = loss();
    tape.backward(l);
    for (auto& p : params) ad.push_back(tape.grad(p));
  }

  GradReport rep;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi];
    for (int i = 0; i < p.numel(); ++i) {
      const double keep = p.data()[i];
      p.data()[i] = keep + eps;
      const double lp = loss().item();
      p.data()[i] = keep - eps;
      const double lm = loss().item();
      p.data()[i] = keep;
      const double fd = (lp - lm) / (2.0 * eps);
      const double a = ad[pi].data()[i];
      const double rel = std::fabs(a - fd) / (std::fabs(fd) + 1e-8);
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_ad = a;
        rep.worst_fd = fd;
        rep.worst_param = static_cast<int>(pi);
        rep.worst_entry = i;
      }
    }
  }
  return rep;
}

}  // namespace crur

#endif  // CRUR_FDCHECK_H_
