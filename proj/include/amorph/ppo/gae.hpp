#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "amorph/error.hpp"

namespace amorph {

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// dones[t] marks the last step of an episode: nothing is bootstrapped across
// it and the advantage recursion restarts. `bootstrap` is V of the state
// after the final step and is used only when that step is not terminal.
inline GaeResult gae(std::span<const double> rewards, std::span<const double> values,
                     std::span<const std::uint8_t> dones, double bootstrap, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  require(values.size() == n && (dones.empty() || dones.size() == n), ErrorKind::shape,
          "gae inputs must have equal lengths");
  require(gamma >= 0.0 && gamma <= 1.0 && lambda >= 0.0 && lambda <= 1.0, ErrorKind::config,
          "gamma and lambda must lie in [0, 1]");
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_adv = 0.0;
  double next_value = bootstrap;
  for (std::size_t k = n; k-- > 0;) {
    const double live = (!dones.empty() && dones[k]) ? 0.0 : 1.0;
    const double delta = rewards[k] + gamma * live * next_value - values[k];
    next_adv = delta + gamma * lambda * live * next_adv;
    out.advantages[k] = next_adv;
    out.returns[k] = next_adv + values[k];
    next_value = values[k];
  }
  return out;
}

inline GaeResult gae(std::span<const double> rewards, std::span<const double> values, double bootstrap,
                     double gamma, double lambda) {
  return gae(rewards, values, {}, bootstrap, gamma, lambda);
}

}  // namespace amorph
