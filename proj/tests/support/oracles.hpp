#pragma once

#include <functional>
#include <string>
#include <vector>

namespace s2vae::oracle {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Adaptive Gauss-Kronrod value of log C_d(kappa) from the unnormalized
/// density, independent of the library's special functions.
double log_normalizer_quadrature(int d, double kappa);

CheckResult check_special_functions();
CheckResult check_normalizer_quadrature();
CheckResult check_entropy_kl_mc(int draws = 200000);
CheckResult check_sampler_statistics(int draws = 100000);
CheckResult check_reparam_gradients(int draws = 50000);
CheckResult check_log_space_stability();
/// Finite-difference audit of every differentiable network piece.
CheckResult check_network_gradients();

/// The distribution oracle suite run by the selftest command.
std::vector<CheckResult> selftest_suite();

}  // namespace s2vae::oracle
