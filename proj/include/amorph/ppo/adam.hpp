#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "amorph/error.hpp"

namespace amorph {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::int64_t t = 0;
  std::vector<double> m;
  std::vector<double> v;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

inline void adam_step(const AdamConfig& cfg, AdamState& st, std::vector<double>& params,
                      const std::vector<double>& grad) {
  require(params.size() == grad.size() && st.m.size() == params.size(), ErrorKind::shape,
          "adam buffers disagree in size");
  ++st.t;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    st.m[k] = cfg.beta1 * st.m[k] + (1.0 - cfg.beta1) * grad[k];
    st.v[k] = cfg.beta2 * st.v[k] + (1.0 - cfg.beta2) * grad[k] * grad[k];
    const double mh = st.m[k] / c1;
    const double vh = st.v[k] / c2;
    params[k] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
  }
}

inline nlohmann::json to_json(const AdamState& s) { return {{"t", s.t}, {"m", s.m}, {"v", s.v}}; }

inline AdamState adam_from_json(const nlohmann::json& j) {
  AdamState s;
  s.t = j.at("t").get<std::int64_t>();
  s.m = j.at("m").get<std::vector<double>>();
  s.v = j.at("v").get<std::vector<double>>();
  return s;
}

}  // namespace amorph
