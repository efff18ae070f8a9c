// Times the OpenMP kernels against their serial references and checks that
// the blocked decomposition gives identical values in any thread count.

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <vector>

#include "riskmap/geostat.hpp"
#include "riskmap/kernels.hpp"
#include "riskmap/report.hpp"

using namespace riskmap;

namespace {

template <typename F>
double time_ms(F&& f, int repeats) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void row(const char* name, double serial_ms, double parallel_ms, double max_diff) {
  std::printf("%-28s %10.3f %10.3f %8.2fx   %.3e\n", name, serial_ms, parallel_ms,
              serial_ms / parallel_ms, max_diff);
}

}  // namespace

int main() {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> normal;

  std::printf("threads available: %d\n\n", omp_get_max_threads());
  std::printf("%-28s %10s %10s %9s   %s\n", "kernel", "serial ms", "omp ms", "speedup",
              "max |diff|");

  {  // Poisson log-likelihood over a 200 x 365 panel
    const long n = 200L * 365L;
    Eigen::VectorXd log_mean(n), obs(n), inc(n);
    for (long i = 0; i < n; ++i) {
      log_mean[i] = normal(rng);
      obs[i] = double(i % 7);
      inc[i] = (i % 13) ? 1.0 : 0.0;
    }
    double a = 0.0, b = 0.0;
    const double t_serial = time_ms(
        [&] { a = kernels::poisson_loglik_core_serial(log_mean, obs, inc); }, 20);
    const double t_par =
        time_ms([&] { b = kernels::poisson_loglik_core(log_mean, obs, inc); }, 20);
    row("poisson loglik (73k cells)", t_serial, t_par,
        std::abs(a - b) / std::max(1.0, std::abs(a)));
  }

  {  // blocked reduction
    const long n = 1 << 22;
    std::vector<double> v(n);
    for (auto& x : v) x = normal(rng);
    double a = 0.0, b = 0.0;
    const double t_serial = time_ms([&] { a = kernels::serial_sum(v.data(), n); }, 10);
    const double t_par = time_ms([&] { b = kernels::blocked_sum(v.data(), n); }, 10);
    row("blocked sum (4M doubles)", t_serial, t_par,
        std::abs(a - b) / std::max(1.0, std::abs(a)));
  }

  {  // kriging back-substitutions, 150 stations x 2000 targets
    std::vector<Point> stations(150);
    std::vector<double> values(150);
    std::uniform_real_distribution<double> unif(0.0, 300.0);
    for (std::size_t i = 0; i < stations.size(); ++i) {
      stations[i] = {unif(rng), unif(rng)};
      values[i] = normal(rng);
    }
    std::vector<Point> targets(2000);
    for (auto& t : targets) t = {unif(rng), unif(rng)};
    const VariogramModel model{VariogramFamily::Exponential, 0.1, 1.0, 80.0};
    KrigingSystem sys(stations, values, model);

    std::vector<KrigingEstimate> serial_est(targets.size()), par_est;
    const double t_serial = time_ms(
        [&] {
          for (std::size_t i = 0; i < targets.size(); ++i)
            serial_est[i] = sys.predict(targets[i]);
        },
        5);
    const double t_par = time_ms([&] { par_est = sys.predict_many(targets); }, 5);
    double diff = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i)
      diff = std::max(diff, std::abs(serial_est[i].value - par_est[i].value));
    row("kriging (2000 targets)", t_serial, t_par, diff);
  }

  {  // loess over a long series, 1 thread vs all
    const int n = 4000;
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = i;
      y[i] = std::sin(i / 50.0) + 0.1 * normal(rng);
    }
    const int max_threads = omp_get_max_threads();
    std::vector<double> a, b;
    omp_set_num_threads(1);
    const double t_serial = time_ms([&] { a = loess_smooth(x, y).values; }, 3);
    omp_set_num_threads(max_threads);
    const double t_par = time_ms([&] { b = loess_smooth(x, y).values; }, 3);
    double diff = 0.0;
    for (int i = 0; i < n; ++i) diff = std::max(diff, std::abs(a[i] - b[i]));
    row("loess (4000 points)", t_serial, t_par, diff);
  }

  return 0;
}
