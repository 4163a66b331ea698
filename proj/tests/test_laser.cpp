#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "oracles.hpp"
#include "support.hpp"
#include "tdrc/laser.hpp"

using namespace tdrc;
using tdrc::test::constant_drive;
using tdrc::test::make_drive;

using oracle::fixed_point;
using oracle::kPi;
using oracle::quiet;
using oracle::solitary;

TEST_SUITE("laser") {

TEST_CASE("steady state matches an independent root finder above threshold") {
  for (double ratio : {1.2, 1.5, 2.0, 3.0}) {
    const LaserParams p = solitary(ratio);
    const ReservoirState ss = steady_state(p);
    const auto [S, N] = fixed_point(p);
    CHECK(ss.intensity() == doctest::Approx(S).epsilon(1e-10));
    CHECK(ss.carriers == doctest::Approx(N).epsilon(1e-10));
  }
}

TEST_CASE("steady state below threshold and without pump") {
  LaserParams p = solitary(0.0);
  ReservoirState ss = steady_state(p);
  CHECK(ss.field == Complex{});
  CHECK(ss.carriers == 0.0);
  p.bias_ratio = 0.5;
  ss = steady_state(p);
  CHECK(ss.intensity() == 0.0);
  CHECK(ss.carriers == doctest::Approx(0.5 * p.threshold() * p.tau_n));
}

TEST_CASE("non-finite parameters are rejected") {
  LaserParams p = default_laser_params();
  p.alpha = std::nan("");
  CHECK_THROWS_AS(steady_state(p), DomainError);
  p = default_laser_params();
  p.tau_p = -1.0;
  CHECK_THROWS_AS(p.validate(), DomainError);
  IntegratorConfig c;
  c.dt = 0.01171875 / 4.0;
  CHECK_THROWS_AS(c.validate(), DomainError);
}

TEST_CASE("default gain gives 5 GHz relaxation at 1.5x threshold") {
  LaserParams p = default_laser_params();
  p.bias_ratio = 1.5;
  CHECK(relaxation_frequency_estimate(p) == doctest::Approx(5.0).epsilon(1e-6));
}

TEST_CASE("zero field stays exactly zero without feedback, injection or noise") {
  const LaserParams p = solitary(2.0);
  ReservoirState x{Complex{}, p.n0};
  IntegratorConfig cfg = quiet();
  NoiseRng rng(1);
  double prev_n = x.carriers;
  for (int k = 0; k < 1000; ++k) {
    x = step(x, {}, k * cfg.dt, p, cfg, rng);
    CHECK(x.field == Complex{});
    CHECK(x.carriers > prev_n);  // relaxes toward I*tau_n > N0
    prev_n = x.carriers;
  }
}

TEST_CASE("below threshold the field decays monotonically") {
  CHECK(oracle::below_threshold_decays(0.9));
}

TEST_CASE("relaxation oscillation frequency agrees with the linearization") {
  for (double ratio : {1.5, 2.0, 3.0}) {
    const LaserParams p = solitary(ratio);
    const double lin = oracle::jacobian_ro_frequency(p);
    const double sim = oracle::simulated_ro_frequency(p);
    INFO("ratio " << ratio << " linearized " << lin << " simulated " << sim);
    CHECK(std::abs(sim - lin) <= 0.05 * lin);
  }
}

TEST_CASE("non-finite state raises IntegrationBlowup") {
  const LaserParams p = solitary(1.5);
  NoiseRng rng(1);
  ReservoirState bad{Complex(std::nan(""), 0.0), p.n0};
  CHECK_THROWS_AS(step(bad, {}, 0.0, p, quiet(), rng), IntegrationBlowup);
  ReservoirState huge{Complex(1e200, 0.0), p.n0};
  CHECK_THROWS_AS(step(huge, {}, 0.0, p, quiet(), rng), IntegrationBlowup);
}

TEST_CASE("delay line returns the sample from round(tau/dt) pushes ago") {
  DelayLine line(1.0, 0.3);  // 3.33 -> 3
  CHECK(line.size() == 3);
  for (int k = 0; k < 10; ++k) {
    if (k >= 3) CHECK(line.oldest() == Complex(k - 3, 0));
    line.push(Complex(k, 0));
  }
  CHECK(line.next_oldest(Complex(99, 0)) == Complex(8, 0));
  CHECK_THROWS_AS(DelayLine(0.1, 0.3), DomainError);
}

TEST_CASE("detection filter is exact on a ramp and has unit DC gain") {
  const double fc = 40.0, dt = IntegratorConfig{}.dt;
  DetectionFilter f(fc, dt, 0.0);
  const double w = 2 * kPi * fc;
  for (int k = 1; k <= 2000; ++k) {
    const double t = k * dt;
    const double y = f.push(t);
    CHECK(y == doctest::Approx(t - (1.0 - std::exp(-w * t)) / w).epsilon(1e-10));
  }
  DetectionFilter c(fc, dt, 3.0);
  for (int k = 0; k < 100; ++k) c.push(3.0);
  CHECK(c.value() == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("detection filter white gain matches the empirical variance") {
  DetectionFilter f(40.0, IntegratorConfig{}.dt, 0.0);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  double sum = 0, sum2 = 0;
  const int count = 1000000;
  for (int k = 0; k < 1000; ++k) f.push(n(rng));
  for (int k = 0; k < count; ++k) {
    const double y = f.push(n(rng));
    sum += y;
    sum2 += y * y;
  }
  const double var = sum2 / count - (sum / count) * (sum / count);
  CHECK(var == doctest::Approx(f.white_gain()).epsilon(0.03));
}

TEST_CASE("detection noise has the configured rms and its own stream") {
  const LaserParams p = solitary(1.5);
  IntegratorConfig cfg;
  cfg.detection_noise = 2.0;
  const auto drive = constant_drive({}, 200000, cfg.dt);
  const ReservoirState ss = steady_state(p);
  const VectorXd clean = integrate(p, drive, quiet(), ss);
  const VectorXd noisy = integrate(p, drive, cfg, ss);
  const VectorXd diff = noisy - clean;
  const double rms = std::sqrt((diff.array() - diff.mean()).square().mean());
  CHECK(rms == doctest::Approx(2.0).epsilon(0.05));
  cfg.noise = false;
  CHECK(integrate(p, drive, cfg, ss) == clean);
}

TEST_CASE("zero drive below threshold without noise gives a zero trace") {
  LaserParams p = default_laser_params();
  p.beta_sp = 0.0;
  const IntegratorConfig cfg = quiet();
  const VectorXd trace = integrate(p, constant_drive({}, 20000, cfg.dt), cfg, steady_state(p));
  CHECK(trace.cwiseAbs().maxCoeff() <= 1e-12 * steady_state(solitary(1.5)).intensity());
}

TEST_CASE("integration is deterministic per seed") {
  const LaserParams p = default_laser_params();
  IntegratorConfig cfg;
  const auto drive = constant_drive(Complex(1.0, 0.0), 30000, cfg.dt);
  const ReservoirState init = steady_state(p);
  const VectorXd a = integrate(p, drive, cfg, init);
  const VectorXd b = integrate(p, drive, cfg, init);
  CHECK(a == b);
  cfg.seed = 2;
  CHECK(integrate(p, drive, cfg, init) != a);
}

TEST_CASE("integrate_at reproduces integrate at the requested samples") {
  const LaserParams p = default_laser_params();
  IntegratorConfig cfg;
  VectorXcd levels(300);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.5);
  for (auto& v : levels) v = Complex(u(rng), 0.0);
  const auto drive = make_drive(levels, cfg.dt, 16);
  const ReservoirState init = steady_state(p);
  const VectorXd full = integrate(p, drive, cfg, init);
  std::vector<std::size_t> idx{0, 0, 5, 77, 77, 1000, 4799};
  const VectorXd at = integrate_at(p, drive, cfg, init, idx);
  for (std::size_t i = 0; i < idx.size(); ++i) CHECK(at[i] == full[idx[i]]);
  std::vector<std::size_t> bad{4800};
  CHECK_THROWS_AS(integrate_at(p, drive, cfg, init, bad), IndexError);
  std::vector<std::size_t> unsorted{5, 3};
  CHECK_THROWS_AS(integrate_at(p, drive, cfg, init, unsorted), DomainError);
}

TEST_CASE("drive checks") {
  const LaserParams p = default_laser_params();
  IntegratorConfig cfg;
  CHECK_THROWS_AS(integrate(p, make_drive(VectorXcd(0), cfg.dt), cfg, {}), DomainError);
  CHECK_THROWS_AS(integrate(p, constant_drive({}, 10, 2 * cfg.dt), cfg, {}), DomainError);
}

TEST_CASE("deterministic convergence order under dt halving is at least 1.8") {
  const auto r = oracle::convergence_order();
  INFO("errors " << r.e01 << " " << r.e12 << " order " << r.order());
  CHECK(r.e01 > 0.0);
  CHECK(r.order() >= 1.8);
}

TEST_CASE("feedback echo appears one delay after the response") {
  const auto r = oracle::feedback_echo();
  INFO("echo delay " << r.delay);
  CHECK(std::abs(r.delay - r.tau) <= r.dt);
  CHECK(r.quiet_level < 1e-6);
}

TEST_CASE("constant injection in the locked regime gives a flat trace") {
  LaserParams p = default_laser_params();
  p.beta_sp = 0.0;
  p.delta_f = 0.0;
  const IntegratorConfig cfg = quiet();
  // The turn-on transient echoes once per roundtrip and halves each time,
  // so look past a few roundtrips.
  const VectorXd trace =
      integrate(p, constant_drive(Complex(1.0, 0.0), 150000, cfg.dt), cfg, steady_state(p));
  const VectorXd tail = trace.tail(40000);
  const double mean = tail.mean();
  const double sd = std::sqrt((tail.array() - mean).square().mean());
  INFO("mean " << mean << " sd " << sd);
  CHECK(sd / mean < 1e-3);
}

TEST_CASE("stronger injection settles faster") {
  auto rise_time = [](double kappa_inj) {
    LaserParams p = default_laser_params();
    p.kappa_f = 0.0;
    p.beta_sp = 0.0;
    p.bias_ratio = 1.5;
    p.kappa_inj = kappa_inj;
    const IntegratorConfig cfg = quiet();
    const Eigen::Index n = 40000, jump = 10000;
    VectorXcd d(n);
    for (Eigen::Index k = 0; k < n; ++k) d[k] = Complex(k < jump ? 0.5 : 1.0, 0.0);
    const VectorXd tr = integrate(p, make_drive(d, cfg.dt), cfg, steady_state(p));
    const double lo = tr[jump - 1], hi = tr[n - 1];
    // Last instant outside +-10% of the final step.
    Eigen::Index last = jump;
    for (Eigen::Index k = jump; k < n; ++k)
      if (std::abs(tr[k] - hi) > 0.1 * std::abs(hi - lo)) last = k;
    const VectorXd tail = tr.tail(5000);
    const double sd = std::sqrt((tail.array() - tail.mean()).square().mean());
    CHECK(sd / tail.mean() < 1e-3);
    return (last - jump) * cfg.dt;
  };
  const double slow = rise_time(30.0), fast = rise_time(300.0);
  INFO("settling " << slow << " vs " << fast);
  CHECK(fast < slow);
}

}  // TEST_SUITE
