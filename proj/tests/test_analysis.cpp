#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "support.hpp"
#include "tdrc/analysis.hpp"

using namespace tdrc;
using oracle::first_order_db;
using oracle::make_spectrum;
using oracle::tone;

using oracle::kPi;

namespace {

VectorXd white(Eigen::Index n, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, sigma);
  VectorXd v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("on-bin sinusoid stands far above the floor") {
  const double dt = 1.0 / 1024.0;
  const int L = 1024;
  const double f0 = 100.0 * (1.0 / dt) / L;
  VectorXd x = white(L * 16, 0.01, 1);
  for (Eigen::Index k = 0; k < x.size(); ++k) x[k] += std::sin(2 * kPi * f0 * k * dt);
  const PsdEstimate p = estimate_psd(x, dt, L, 64);
  Eigen::Index peak;
  p.psd.maxCoeff(&peak);
  CHECK(p.freqs[peak] == doctest::Approx(f0));
  std::vector<double> v(p.psd.data(), p.psd.data() + p.psd.size());
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  CHECK(p.psd[peak] - v[v.size() / 2] >= 30.0);
}

TEST_CASE("white noise gives a flat spectrum with the right level") {
  const double dt = 0.001, sigma = 2.0;
  const int L = 256;
  const VectorXd x = white((64 + 1) * L / 2, sigma, 2);
  const PsdEstimate p = estimate_psd(x, dt, L, 64);
  CHECK(p.n_averages == 64);
  const VectorXd inner = p.psd.segment(1, p.psd.size() - 2);
  const double mean_db = inner.mean();
  CHECK((inner.array() - mean_db).abs().maxCoeff() < 3.0);
  // One-sided density integrates to the variance.
  const double level = (Eigen::pow(10.0, inner.array() / 10.0)).mean();
  CHECK(level * p.nyquist() == doctest::Approx(sigma * sigma).epsilon(0.05));
}

TEST_CASE("DC-only trace puts its power at zero frequency") {
  const PsdEstimate p = estimate_psd(VectorXd::Constant(4096, 3.0), 0.01, 512, 8);
  Eigen::Index peak;
  p.psd.maxCoeff(&peak);
  CHECK(peak == 0);
  // Hann leakage into the first bin only: (1/4)^2 of the DC amplitude, doubled
  // by the one-sided fold.
  CHECK(p.psd[1] - p.psd[0] == doctest::Approx(10.0 * std::log10(2.0 / 4.0)).epsilon(1e-9));
  CHECK(p.psd.tail(p.psd.size() - 2).maxCoeff() <= p.psd[0] - 150.0);
}

TEST_CASE("psd argument checks") {
  CHECK_THROWS_AS(estimate_psd(VectorXd::Zero(100), 0.01, 128, 4), DomainError);
  CHECK_THROWS_AS(estimate_psd(VectorXd::Zero(1000), 0.01, 100, 4), DomainError);
  CHECK_THROWS_AS(estimate_psd(VectorXd::Zero(1000), 0.0, 128, 4), DomainError);
  CHECK(estimate_psd(VectorXd::Zero(256), 0.01, 128, 10).n_averages == 3);
}

TEST_CASE("10 dB bandwidth of first-order low-pass spectra is 3 fc") {
  for (double fc : {2.0, 5.0, 10.0}) {
    const PsdEstimate p = make_spectrum([fc](double f) { return first_order_db(f, fc); });
    const Bandwidth10dB b = bandwidth_10db(p);
    INFO("fc " << fc << " bw " << b.bandwidth);
    CHECK_FALSE(b.saturated);
    CHECK(std::abs(b.bandwidth - 3.0 * fc) <= 0.05 * 3.0 * fc);
  }
}

TEST_CASE("flat spectrum saturates at Nyquist") {
  const PsdEstimate p = make_spectrum([](double) { return -20.0; });
  const Bandwidth10dB b = bandwidth_10db(p);
  CHECK(b.saturated);
  CHECK(b.bandwidth == p.nyquist());
  CHECK(b.reference == -20.0);
}

TEST_CASE("two-plateau step is found at the step") {
  const double f1 = 20.0;
  const PsdEstimate p = make_spectrum([f1](double f) { return f < f1 ? 0.0 : -12.0; });
  const Bandwidth10dB b = bandwidth_10db(p);
  CHECK(std::abs(b.bandwidth - f1) <= 3.0 * p.resolution);
}

TEST_CASE("bandwidth ignores a dB offset and short dips") {
  const auto base = [](double f) { return first_order_db(f, 5.0); };
  const double ref = bandwidth_10db(make_spectrum(base)).bandwidth;
  CHECK(bandwidth_10db(make_spectrum([&](double f) { return base(f) + 37.0; })).bandwidth ==
        doctest::Approx(ref).epsilon(1e-12));
  // A notch narrower than the persistence run does not end the band.
  const auto notch = [&](double f) { return std::abs(f - 8.0) < 0.03 ? base(f) - 30.0 : base(f); };
  CHECK(bandwidth_10db(make_spectrum(notch)).bandwidth == doctest::Approx(ref).epsilon(1e-12));
  CHECK_THROWS_AS(bandwidth_10db(make_spectrum(base), PlateauBand{0.5, 0.1}), DomainError);
}

TEST_CASE("locking: 6 dB beat tone is unlocked, 1 dB is locked") {
  const double df = -12.0;
  LockingResult r = detect_locking(make_spectrum(tone(12.3, 6.0, 0.3)), df);
  CHECK_FALSE(r.locked);
  REQUIRE(r.beat_freq.has_value());
  CHECK(*r.beat_freq == doctest::Approx(12.3).epsilon(0.005));
  CHECK(r.prominence > 5.0);

  r = detect_locking(make_spectrum(tone(12.3, 1.0, 0.3)), df);
  CHECK(r.locked);
  CHECK_FALSE(r.beat_freq.has_value());
  CHECK(r.prominence < 3.0);

  r = detect_locking(make_spectrum(tone(12.0, 0.0, 0.3)), df);
  CHECK(r.locked);
  CHECK(std::abs(r.prominence) < 0.01);
}

TEST_CASE("locking: tolerance window edges") {
  const double df = 20.0, tol = 1.5;
  // Inside the window near its edge.
  LockingResult r = detect_locking(make_spectrum(tone(df + 0.8 * tol, 6.0, 0.1)), df, tol);
  CHECK_FALSE(r.locked);
  CHECK(*r.beat_freq == doctest::Approx(df + 0.8 * tol).epsilon(0.005));
  r = detect_locking(make_spectrum(tone(df - 0.8 * tol, 6.0, 0.1)), df, tol);
  CHECK_FALSE(r.locked);
  // Beyond both the window and its flanks.
  CHECK(detect_locking(make_spectrum(tone(df + 3.0 * tol, 6.0, 0.1)), df, tol).locked);
  CHECK(detect_locking(make_spectrum(tone(df - 3.0 * tol, 6.0, 0.1)), df, tol).locked);
  // Window reaching down to DC has no left flank.
  r = detect_locking(make_spectrum(tone(0.6, 6.0, 0.1)), 0.4, tol);
  CHECK_FALSE(r.locked);
  // Window past Nyquist.
  const PsdEstimate small = make_spectrum(tone(5.0, 6.0, 0.3), 0.01, 1001);
  CHECK_THROWS_AS(detect_locking(small, 9.0, tol), DomainError);
  CHECK_THROWS_AS(detect_locking(small, 5.0, 0.0), DomainError);
}

TEST_CASE("locking depends on |delta_f| and not on a dB offset") {
  const auto base = tone(15.5, 4.0, 0.3);
  const LockingResult a = detect_locking(make_spectrum(base), 15.0);
  const LockingResult b = detect_locking(make_spectrum(base), -15.0);
  const LockingResult c = detect_locking(make_spectrum([&](double f) { return base(f) - 55.0; }), 15.0);
  CHECK_FALSE(a.locked);
  CHECK(a.locked == b.locked);
  CHECK(a.beat_freq == b.beat_freq);
  CHECK(a.beat_freq == c.beat_freq);
  CHECK(a.prominence == doctest::Approx(c.prominence).epsilon(1e-9));
}

TEST_CASE("persistence of a two-level alternation is bimodal") {
  const double dt = 1.0 / 64.0;
  const int P = 64;  // samples per fold period
  VectorXd x(P * 10);
  for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = (k / P) % 2 ? 1.0 : 0.2;
  const PersistenceHistogram h = persistence_histogram(x, dt, P * dt, 16, 32);
  CHECK(h.total() == x.size());
  for (Eigen::Index t = 0; t < h.counts.rows(); ++t) {
    CHECK((h.counts.row(t).array() > 0).count() == 2);
    CHECK(h.counts(t, 0) == h.counts(t, 31));
  }
}

TEST_CASE("samples on a time-bin edge go to the later bin") {
  const double dt = 1.0 / 64.0;
  const int P = 100;
  VectorXd x(P * 4);
  for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = static_cast<double>(k % P);
  const PersistenceHistogram h = persistence_histogram(x, dt, P * dt, P, P);
  for (Eigen::Index t = 0; t < P; ++t) CHECK(h.counts(t, t) == 4);
}

TEST_CASE("persistence of a periodic trace at its own period is unimodal") {
  const double dt = 1.0 / 64.0;
  const int P = 64;
  VectorXd x(P * 6);
  for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = std::sin(2 * kPi * (k % P) / P);
  const PersistenceHistogram h = persistence_histogram(x, dt, P * dt, P, 50);
  for (Eigen::Index t = 0; t < h.counts.rows(); ++t) {
    CHECK((h.counts.row(t).array() > 0).count() == 1);
    CHECK(h.counts.row(t).sum() == 6);
  }
}

TEST_CASE("persistence conserves mass and checks arguments") {
  const VectorXd x = white(10007, 1.0, 3);
  const PersistenceHistogram h = persistence_histogram(x, 0.01, 0.37, 40, 25);
  CHECK(h.total() == x.size());
  // Values outside a given range land in the edge bins.
  const PersistenceHistogram r = persistence_histogram(x, 0.01, 0.37, 40, 25, std::pair{-0.5, 0.5});
  CHECK(r.total() == x.size());
  CHECK(r.counts.col(0).sum() >= (x.array() < -0.5).count());
  CHECK(persistence_histogram(VectorXd::Constant(100, 2.0), 0.1, 1.0, 4, 4).total() == 100);
  CHECK_THROWS_AS(persistence_histogram(x, 0.01, 0.005, 4, 4), DomainError);
  CHECK_THROWS_AS(persistence_histogram(x.head(50), 0.01, 0.3, 4, 4), DomainError);
  CHECK_THROWS_AS(persistence_histogram(x, 0.01, 0.37, 0, 4), DomainError);
}

TEST_CASE("psd and persistence csv layout") {
  tdrc::test::TempDir dir("analysis");
  const PsdEstimate p = make_spectrum([](double) { return 1.5; }, 0.5, 4);
  write_psd_csv(dir / "psd.csv", p);
  CHECK(tdrc::test::slurp(dir / "psd.csv") == "freq_GHz,psd_dB\n0,1.5\n0.5,1.5\n1,1.5\n1.5,1.5\n");
  VectorXd x(8);
  x << 0, 1, 0, 1, 1, 0, 1, 0;
  const PersistenceHistogram h = persistence_histogram(x, 1.0, 4.0, 2, 2);
  write_persistence_csv(dir / "pers.csv", h);
  CHECK(tdrc::test::slurp(dir / "pers.csv") == "2,2\n2,2\n");
  const std::string axes = tdrc::test::slurp(dir / "pers.csv.axes.csv");
  CHECK(axes.rfind("axis,index,center\ntime_ns,0,1\n", 0) == 0);
}

}  // TEST_SUITE
