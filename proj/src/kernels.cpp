#include "riskmap/kernels.hpp"

#include <cmath>
#include <vector>

namespace riskmap::kernels {

namespace {

// One block of the Poisson kernel; mask folded in as a multiplier so the
// instruction stream is branch-free.
inline double poisson_block(const double* lm, const double* y, const double* inc,
                            std::int64_t n) {
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i)
    acc += inc[i] * (y[i] * lm[i] - std::exp(lm[i]));
  return acc;
}

}  // namespace

double blocked_sum(const double* v, std::int64_t n) {
  if (n <= 0) return 0.0;
  const std::int64_t nblocks = (n + kBlock - 1) / kBlock;
  std::vector<double> partial(static_cast<std::size_t>(nblocks));
#pragma omp parallel for schedule(static) if (nblocks > 4)
  for (std::int64_t b = 0; b < nblocks; ++b) {
    const std::int64_t lo = b * kBlock;
    const std::int64_t hi = std::min<std::int64_t>(lo + kBlock, n);
    double acc = 0.0;
    for (std::int64_t i = lo; i < hi; ++i) acc += v[i];
    partial[static_cast<std::size_t>(b)] = acc;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

double serial_sum(const double* v, std::int64_t n) {
  double total = 0.0;
  for (std::int64_t i = 0; i < n; ++i) total += v[i];
  return total;
}

double poisson_loglik_core(const Eigen::VectorXd& log_mean, const Eigen::VectorXd& obs,
                           const Eigen::VectorXd& included) {
  const std::int64_t n = log_mean.size();
  if (n == 0) return 0.0;
  const std::int64_t nblocks = (n + kBlock - 1) / kBlock;
  std::vector<double> partial(static_cast<std::size_t>(nblocks));
#pragma omp parallel for schedule(static) if (nblocks > 4)
  for (std::int64_t b = 0; b < nblocks; ++b) {
    const std::int64_t lo = b * kBlock;
    const std::int64_t hi = std::min<std::int64_t>(lo + kBlock, n);
    partial[static_cast<std::size_t>(b)] =
        poisson_block(log_mean.data() + lo, obs.data() + lo, included.data() + lo,
                      hi - lo);
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

double poisson_loglik_core_serial(const Eigen::VectorXd& log_mean,
                                  const Eigen::VectorXd& obs,
                                  const Eigen::VectorXd& included) {
  // Reverse order on purpose: an independent summation path for the tests.
  double total = 0.0;
  for (std::int64_t i = log_mean.size() - 1; i >= 0; --i)
    total += included[i] * (obs[i] * log_mean[i] - std::exp(log_mean[i]));
  return total;
}

}  // namespace riskmap::kernels
