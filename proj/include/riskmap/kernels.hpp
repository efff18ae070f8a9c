#pragma once

#include <Eigen/Dense>
#include <cstdint>

// Data-parallel inner loops. Every kernel here has a *_serial reference twin
// that sums in a plainly different order; tests compare the two and the
// benchmark tool times them.
//
// The parallel kernels use a fixed block decomposition (block partials are
// combined in block order), so results do not depend on the thread count.

namespace riskmap::kernels {

inline constexpr int kBlock = 1024;

// Blocked pairwise-style reduction: identical value for 1..N threads.
double blocked_sum(const double* v, std::int64_t n);
// Straight left-to-right sum, kept as the test reference.
double serial_sum(const double* v, std::int64_t n);

// Poisson log likelihood over panel cells,
//   sum_c included(c) * (obs_c * logmean_c - exp(logmean_c)),
// without the lgamma(obs+1) term (a data constant the caller adds once).
// `included` entries are 0/1 masks for structural zeros.
double poisson_loglik_core(const Eigen::VectorXd& log_mean,
                           const Eigen::VectorXd& obs,
                           const Eigen::VectorXd& included);
double poisson_loglik_core_serial(const Eigen::VectorXd& log_mean,
                                  const Eigen::VectorXd& obs,
                                  const Eigen::VectorXd& included);

}  // namespace riskmap::kernels
