#include "amore/ad/gradcheck.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace amore::ad {

double gradcheck(const std::function<double()>& loss_and_grad, ParamStore& store,
                 double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1e-2))
    throw std::invalid_argument("gradcheck: epsilon must lie in (0, 1e-2)");

  const double base = loss_and_grad();
  if (!std::isfinite(base)) throw std::runtime_error("gradcheck: non-finite loss");
  std::vector<double> g_ad(store.grads().begin(), store.grads().end());

  auto x = store.values();
  double max_rel = 0.0;
  for (int i = 0; i < store.size(); ++i) {
    if (std::abs(x[i]) < 10.0 * epsilon) continue;  // L1 kink neighborhood
    const double saved = x[i];
    x[i] = saved + epsilon;
    const double lp = loss_and_grad();
    x[i] = saved - epsilon;
    const double lm = loss_and_grad();
    x[i] = saved;
    const double g_fd = (lp - lm) / (2.0 * epsilon);
    const double rel = std::abs(g_ad[i] - g_fd) / std::max(1.0, std::abs(g_fd));
    max_rel = std::max(max_rel, rel);
  }
  // restore gradient buffer to the analytic gradient at the original point
  loss_and_grad();
  return max_rel;
}

}  // namespace amore::ad
