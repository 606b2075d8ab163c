#ifndef TESTS_GRADCHECK_H_
#define TESTS_GRADCHECK_H_

// The finite-difference harness lives in the library so the grad-check CLI
// command can run the same oracle; tests keep their old spelling.

#include "crur/fdcheck.h"

namespace testing {

using crur::GradReport;
using crur::grad_check;

}  // namespace testing

#endif  // TESTS_GRADCHECK_H_
