#include "magnet/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace magnet {

namespace {

void require_step(int step, int total_steps) {
  if (total_steps < 1 || step < 1 || step > total_steps) {
    throw std::invalid_argument("step " + std::to_string(step) + " outside [1, " +
                                std::to_string(total_steps) + "]");
  }
}

}  // namespace

void ScheduleParams::validate() const {
  if (total_steps < 1) throw std::invalid_argument("total_steps must be >= 1");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw std::invalid_argument("top_p must lie in (0, 1]");
  if (!(tau0 >= 0.0)) throw std::invalid_argument("tau0 must be non-negative");
  if (!(lambda0 >= 0.0) || !(lambda1 >= 0.0)) {
    throw std::invalid_argument("guidance coefficients must be non-negative");
  }
}

double gamma(int step, int total_steps) {
  require_step(step, total_steps);
  return std::cos(std::numbers::pi * (step - 1) / (2.0 * total_steps));
}

double cfg_coeff(double gamma_value, double lambda0, double lambda1) {
  return gamma_value * lambda0 + (1.0 - gamma_value) * lambda1;
}

double temperature(int step, int total_steps, double tau0) {
  require_step(step, total_steps);
  const double tau = tau0 * static_cast<double>(total_steps - step + 1) / total_steps;
  return std::max(tau, kMinTemperature);
}

}  // namespace magnet
