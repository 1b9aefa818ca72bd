#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "amorph/error.hpp"
#include "amorph/math.hpp"
#include "amorph/rng.hpp"

namespace amorph {

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

// Diagonal Gaussian log density.
inline double gaussian_log_prob(std::span<const double> x, std::span<const double> mean,
                                std::span<const double> log_std) {
  double lp = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double z = (x[k] - mean[k]) * std::exp(-log_std[k]);
    lp += -0.5 * z * z - log_std[k] - kHalfLog2Pi;
  }
  return lp;
}

// KL(p || q) between diagonal Gaussians p = (mean_p, log_std_p) and q.
inline double gaussian_kl(std::span<const double> mean_p, std::span<const double> log_std_p,
                          std::span<const double> mean_q, std::span<const double> log_std_q) {
  double kl = 0.0;
  for (std::size_t k = 0; k < mean_p.size(); ++k) {
    const double vp = std::exp(2.0 * log_std_p[k]);
    const double vq = std::exp(2.0 * log_std_q[k]);
    const double dm = mean_p[k] - mean_q[k];
    kl += log_std_q[k] - log_std_p[k] + (vp + dm * dm) / (2.0 * vq) - 0.5;
  }
  return kl;
}

struct SampledAction {
  std::vector<double> action;
  double log_prob = 0.0;
};

inline SampledAction sample_action(std::span<const double> mean, std::span<const double> log_std, Rng& rng) {
  require(all_finite(mean) && all_finite(log_std), ErrorKind::domain, "non-finite policy output");
  const auto noise = standard_normals(rng, mean.size());
  SampledAction s;
  s.action.resize(mean.size());
  for (std::size_t k = 0; k < mean.size(); ++k) s.action[k] = mean[k] + std::exp(log_std[k]) * noise[k];
  s.log_prob = gaussian_log_prob(s.action, mean, log_std);
  return s;
}

}  // namespace amorph
