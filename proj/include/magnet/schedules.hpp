#pragma once

namespace magnet {

/// Lowest temperature handed to the sampler; zero would divide the logits.
inline constexpr double kMinTemperature = 1e-4;

struct ScheduleParams {
  int total_steps = 20;
  double lambda0 = 10.0;  // guidance at the first iteration
  double lambda1 = 1.0;   // guidance once nothing is masked
  double tau0 = 3.0;
  double top_p = 0.9;

  void validate() const;
};

/// Cosine masking rate cos(pi (i-1) / 2s) for 1-based step i of s.
double gamma(int step, int total_steps);

/// Guidance coefficient interpolated by the masking rate:
/// gamma * lambda0 + (1 - gamma) * lambda1.
double cfg_coeff(double gamma_value, double lambda0, double lambda1);

/// Linearly annealed temperature tau0 (s - i + 1) / s, clamped at kMinTemperature.
double temperature(int step, int total_steps, double tau0);

}  // namespace magnet
