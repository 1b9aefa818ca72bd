#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "amorph/error.hpp"
#include "amorph/nn/gaussian.hpp"
#include "amorph/nn/policy.hpp"

namespace amorph {

// One training sample. The old policy's outputs are recorded at collection
// time so the KL term needs no second network.
struct Sample {
  Observation obs;
  std::vector<double> action;
  double log_prob_old = 0.0;
  std::vector<double> mean_old;
  std::vector<double> log_std_old;
  double value_old = 0.0;
  double advantage = 0.0;
  double ret = 0.0;
};

struct LossCoefs {
  double clip_eps = 0.2;
  double beta = 1.0;
  double value_coef = 0.5;
};

struct LossTerms {
  double total = 0.0;
  double surrogate = 0.0;  // -mean(min(rA, clip(r)A))
  double kl = 0.0;         // mean KL(old || new)
  double value_loss = 0.0; // 0.5 * mean((V - R)^2)
  double clip_fraction = 0.0;
};

struct LossResult {
  LossTerms terms;
  std::vector<double> grad;  // empty unless requested
};

inline double clipped_objective(double ratio, double advantage, double eps) {
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage);
}

inline double adapt_beta(double measured_kl, double target_kl, double beta) {
  require(beta > 0.0, ErrorKind::domain, "beta must be positive");
  if (measured_kl > 1.5 * target_kl)
    beta *= 2.0;
  else if (measured_kl < target_kl / 1.5)
    beta /= 2.0;
  return std::clamp(beta, 1e-4, 10.0);
}

// total = surrogate + beta * kl + value_coef * value_loss
inline LossResult ppo_loss(const PolicyParams& params, std::span<const Sample* const> batch, const LossCoefs& c,
                           bool with_grad) {
  require(!batch.empty(), ErrorKind::shape, "empty loss batch");
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const int ad = params.shape().action_dim;
  LossResult out;
  if (with_grad) out.grad.assign(params.size(), 0.0);
  ForwardCache cache;
  std::vector<double> d_mean(ad), d_ls(ad);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Sample& s = *batch[i];
    const PolicyOutput o = forward(params, s.obs, cache);
    const double lp = gaussian_log_prob(s.action, o.mean, o.log_std);
    const double ratio = std::exp(lp - s.log_prob_old);
    if (!std::isfinite(ratio))
      fail(ErrorKind::domain, "non-finite probability ratio at sample " + std::to_string(i));
    const double a = s.advantage;
    const double unclipped = ratio * a;
    const double clipped = std::clamp(ratio, 1.0 - c.clip_eps, 1.0 + c.clip_eps) * a;
    out.terms.surrogate -= std::min(unclipped, clipped) * inv_b;
    if (clipped < unclipped) out.terms.clip_fraction += inv_b;
    const double kl = gaussian_kl(s.mean_old, s.log_std_old, o.mean, o.log_std);
    out.terms.kl += kl * inv_b;
    const double dv = o.value - s.ret;
    out.terms.value_loss += 0.5 * dv * dv * inv_b;
    if (!with_grad) continue;

    // d(-min)/d(logp) = -A r on the unclipped branch, 0 when clipped.
    const double d_lp = clipped < unclipped ? 0.0 : -a * ratio * inv_b;
    for (int k = 0; k < ad; ++k) {
      const double var_n = std::exp(2.0 * o.log_std[k]);
      const double var_o = std::exp(2.0 * s.log_std_old[k]);
      const double diff = s.action[k] - o.mean[k];
      const double dm = o.mean[k] - s.mean_old[k];
      d_mean[k] = d_lp * diff / var_n + c.beta * inv_b * dm / var_n;
      d_ls[k] = d_lp * (diff * diff / var_n - 1.0) + c.beta * inv_b * (1.0 - (var_o + dm * dm) / var_n);
    }
    backward(params, cache, d_mean, d_ls, c.value_coef * dv * inv_b, out.grad);
  }
  out.terms.total = out.terms.surrogate + c.beta * out.terms.kl + c.value_coef * out.terms.value_loss;
  require(std::isfinite(out.terms.total), ErrorKind::domain, "non-finite loss");
  return out;
}

inline LossResult ppo_loss(const PolicyParams& params, std::span<const Sample> batch, const LossCoefs& c,
                           bool with_grad) {
  std::vector<const Sample*> ptrs;
  ptrs.reserve(batch.size());
  for (const auto& s : batch) ptrs.push_back(&s);
  return ppo_loss(params, std::span<const Sample* const>(ptrs), c, with_grad);
}

// Fills the old-policy fields of `s` from `old_params`.
inline void record_old_policy(const PolicyParams& old_params, Sample& s) {
  const PolicyOutput o = forward(old_params, s.obs);
  s.mean_old = o.mean;
  s.log_std_old = o.log_std;
  s.value_old = o.value;
  s.log_prob_old = gaussian_log_prob(s.action, o.mean, o.log_std);
}

}  // namespace amorph
