#pragma once

#include <functional>

#include "amore/ad/param_store.hpp"

namespace amore::ad {

// Compares the gradient produced by `loss_and_grad` (which must zero the
// store's gradient buffer, evaluate the loss at the current parameter values
// and fill the buffer) against central finite differences, coordinate-wise.
// Returns max_i |g_ad - g_fd| / max(1, |g_fd|).
//
// Coordinates whose parameter value lies within 10*epsilon of 0 are skipped:
// the L1 penalty is nondifferentiable there.
double gradcheck(const std::function<double()>& loss_and_grad, ParamStore& store,
                 double epsilon = 1e-5);

}  // namespace amore::ad
