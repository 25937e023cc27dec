#include "scansnap/model.hpp"

#include <algorithm>

#include "scansnap/theory.hpp"

namespace scansnap {

double decoder_only_closed_form_check(std::size_t M, std::size_t /*K*/, double eta_y, std::size_t steps,
                                      std::size_t n) {
  if (n >= M) throw std::out_of_range("decoder_only_closed_form_check: class index out of range");
  const auto m = static_cast<Eigen::Index>(M);
  const double Md = static_cast<double>(M);
  Eigen::VectorXd zeta = Eigen::VectorXd::Constant(m, -1.0 / Md);
  zeta[static_cast<Eigen::Index>(n)] += 1.0;
  zeta *= Md / (Md - 1.0);

  const std::vector<double> hs = h_star_series(M, eta_y, steps);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
  double worst = 0.0;
  for (std::size_t s = 1; s <= steps; ++s) {
    Eigen::VectorXd resid = -softmax(w);
    resid[static_cast<Eigen::Index>(n)] += 1.0;
    w += eta_y * resid;
    worst = std::max(worst, (w - (Md - 1.0) * hs[s] * zeta).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace scansnap
