#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "support.hpp"
#include "tdrc/input.hpp"

using namespace tdrc;

namespace {

constexpr double kPi = std::numbers::pi;

// Reverse Bessel polynomial of order 4, ascending powers.
const std::vector<double> kBessel4{105.0, 105.0, 45.0, 10.0, 1.0};

Complex analog_bessel(Complex s) {
  Complex den{};
  for (auto it = kBessel4.rbegin(); it != kBessel4.rend(); ++it) den = den * s + *it;
  return kBessel4[0] / den;
}

double analog_3db() {
  double lo = 0.1, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (std::norm(analog_bessel({0.0, mid})) > 0.5 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Least-squares amplitude of a known-frequency sinusoid.
double tone_amplitude(const VectorXd& x, double f, double rate, Eigen::Index from) {
  const Eigen::Index n = x.size() - from;
  MatrixXd A(n, 2);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double ph = 2 * kPi * f * static_cast<double>(k + from) / rate;
    A(k, 0) = std::cos(ph);
    A(k, 1) = std::sin(ph);
  }
  const Eigen::Vector2d c = A.colPivHouseholderQr().solve(x.tail(n));
  return c.norm();
}

MaskSpec toy_spec() { return {2, 2.0, 2, 1, 1, 1.0}; }

}  // namespace

TEST_SUITE("input") {

TEST_CASE("presets have the expected geometry") {
  const MaskSpec s = MaskSpec::theta_small();
  CHECK(s.symbol_samples() == 2080);
  CHECK(s.theta == doctest::Approx(0.01171875).epsilon(1e-12));
  CHECK(s.chunk_repeats == 8);
  const MaskSpec l = MaskSpec::theta_large();
  CHECK(l.symbol_samples() == 2080);
  CHECK(l.theta == doctest::Approx(0.09375).epsilon(1e-12));
  CHECK(l.repetition == 8);
  CHECK(s.symbol_period() == doctest::Approx(24.375));
}

TEST_CASE("mask and delay are offset by ten AWG samples") {
  const LaserParams p = default_laser_params();
  for (const MaskSpec& s : {MaskSpec::theta_small(), MaskSpec::theta_large()}) {
    const auto delay_samples = static_cast<int>(std::floor(p.tau_delay * s.awg_rate));
    CHECK(delay_samples - s.symbol_samples() == 10);
  }
}

TEST_CASE("mask values are uniform and seeded") {
  MaskSpec s = MaskSpec::theta_small(7);
  const VectorXd a = make_mask(s);
  CHECK(a.size() == 260);
  CHECK(a.minCoeff() >= 0.0);
  CHECK(a.maxCoeff() < 1.0);
  CHECK(make_mask(s) == a);
  s.seed = 8;
  const VectorXd b = make_mask(s);
  CHECK((a.array() != b.array()).count() >= 250);
  MaskSpec big = s;
  big.n_nodes = 1000000;
  CHECK(std::abs(make_mask(big).mean() - 0.5) <= 0.002);
}

TEST_CASE("encode examples") {
  const MaskSpec s = MaskSpec::theta_large();
  VectorXd mask = make_mask(s);
  std::vector<double> zero{0.0};
  CHECK(encode(zero, mask, s).isZero(0.0));
  CHECK(encode(zero, mask, s).size() == 2080);
  std::vector<double> one{1.0};
  const VectorXd ones = encode(one, VectorXd::Ones(260), s);
  CHECK(ones.size() == 2080);
  CHECK((ones.array() == 1.0).all());

  const MaskSpec toy = toy_spec();
  VectorXd m(2);
  m << 0.5, 1.5;
  std::vector<double> u{0.5, 1.0};
  VectorXd expect(8);
  expect << 0.25, 0.25, 0.75, 0.75, 0.5, 0.5, 1.5, 1.5;
  CHECK(encode(u, m, toy) == expect);
  CHECK_THROWS_AS(encode(u, VectorXd::Ones(3), toy), DomainError);
}

TEST_CASE("chunk repeats copy the masked chunk") {
  const MaskSpec s = MaskSpec::theta_small();
  const VectorXd mask = make_mask(s);
  std::vector<double> u{0.3, 0.9};
  const VectorXd e = encode(u, mask, s);
  REQUIRE(e.size() == 2 * 2080);
  for (int sym = 0; sym < 2; ++sym)
    for (int c = 0; c < 8; ++c)
      CHECK(e.segment(sym * 2080 + c * 260, 260).isApprox(u[sym] * mask, 1e-15));
}

TEST_CASE("encode is linear in the input") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  const MaskSpec s = MaskSpec::theta_small();
  const VectorXd mask = make_mask(s);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> u(3), au(3);
    const double a = d(rng);
    for (int i = 0; i < 3; ++i) {
      u[i] = d(rng);
      au[i] = a * u[i];
    }
    CHECK(encode(au, mask, s).isApprox(a * encode(u, mask, s), 1e-14));
  }
}

TEST_CASE("markers partition the drive into equal symbols") {
  const MaskSpec s = MaskSpec::theta_small();
  IntegratorConfig cfg;
  std::vector<double> u{0.1, 0.2, 0.3, 0.4};
  const VectorXd x = encode(u, make_mask(s), s);
  const EncodedDrive d = synthesize_drive(x, 1.0, MzmConfig{}, cfg, s.awg_rate, 2080);
  REQUIRE(d.markers.size() == 4);
  for (std::size_t m = 0; m < 4; ++m) CHECK(d.markers[m] == m * 2080 * 16);
  CHECK(d.size() == 4 * 2080 * 16);
  CHECK(d.input_period == doctest::Approx(s.symbol_period()));
  CHECK_THROWS_AS(synthesize_drive(x, 1.0, MzmConfig{}, cfg, s.awg_rate, 2000), DomainError);
}

TEST_CASE("Bessel design matches the analog prototype under the bilinear map") {
  const double w3 = analog_3db();
  CHECK(w3 == doctest::Approx(2.1139).epsilon(1e-4));
  const AwgModel awg;
  const IirFilter f = bessel_lowpass(4, awg.analog_cutoff, awg.output_rate);
  CHECK(std::abs(f.response(0.0, awg.output_rate)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(f.response(awg.analog_cutoff, awg.output_rate)) ==
        doctest::Approx(std::sqrt(0.5)).epsilon(1e-9));
  const double K = 1.0 / std::tan(kPi * awg.analog_cutoff / awg.output_rate);
  for (double fr : {1.0, 5.0, 12.0, 20.0, 30.0, 40.0}) {
    const double wa = w3 * K * std::tan(kPi * fr / awg.output_rate);
    CHECK(std::abs(f.response(fr, awg.output_rate)) ==
          doctest::Approx(std::abs(analog_bessel({0.0, wa}))).epsilon(1e-9));
  }
}

TEST_CASE("bandlimit keeps DC, impulse area and attenuates the cutoff tone") {
  const AwgModel awg;
  const VectorXd c = VectorXd::Constant(500, 0.37);
  CHECK((bandlimit(c, awg) - c).cwiseAbs().maxCoeff() <= 1e-9);

  VectorXd imp = VectorXd::Zero(4000);
  imp[1] = 1.0;
  CHECK(bandlimit(imp, awg).sum() == doctest::Approx(1.0).epsilon(1e-6));

  VectorXd tone(20000);
  for (Eigen::Index k = 0; k < tone.size(); ++k)
    tone[k] = std::sin(2 * kPi * awg.analog_cutoff * k / awg.output_rate);
  const double amp = tone_amplitude(bandlimit(tone, awg), awg.analog_cutoff, awg.output_rate, 2000);
  const double oracle = std::abs(analog_bessel({0.0, analog_3db()}));
  CHECK(std::abs(amp - oracle) <= 0.02 * oracle);

  AwgModel bad = awg;
  bad.analog_cutoff = 50.0;
  CHECK_THROWS_AS(bandlimit(c, bad), DomainError);
}

TEST_CASE("modulator contrast and power scaling") {
  const MzmConfig mzm;
  IntegratorConfig cfg;
  VectorXd sq(128);
  sq.head(64).setZero();
  sq.tail(64).setOnes();
  const EncodedDrive d = synthesize_drive(sq, 1.0, mzm, cfg, kAwgRate, 0);
  const double ratio = std::norm(d.levels[100]) / std::norm(d.levels[10]);
  const double hi = std::pow(std::sin(0.25 * kPi + 0.2 * kPi), 2);
  const double lo = std::pow(std::sin(0.25 * kPi - 0.2 * kPi), 2);
  CHECK(ratio == doctest::Approx(hi / lo).epsilon(0.01));
  double mean = 0.0;
  for (const auto& v : d.levels) mean += std::norm(v);
  CHECK(mean / 128 == doctest::Approx(1.0).epsilon(1e-12));

  // Quadrature point: constant level gives exactly the average power.
  const VectorXd mid = VectorXd::Constant(16, 0.5);
  const EncodedDrive q = synthesize_drive(mid, 0.7, mzm, cfg, kAwgRate, 0);
  for (const auto& v : q.levels) CHECK(std::norm(v) == doctest::Approx(0.7).epsilon(1e-14));
  const EncodedDrive z = synthesize_drive(mid, 0.0, mzm, cfg, kAwgRate, 0);
  CHECK(z.levels.isZero(0.0));
  CHECK_THROWS_AS(synthesize_drive(mid, -1.0, mzm, cfg, kAwgRate, 0), DomainError);
}

TEST_CASE("drive holds each AWG level over the integration grid") {
  IntegratorConfig cfg;
  CHECK(upsample_factor(kAwgRate, cfg.dt) == 16);
  CHECK_THROWS_AS(upsample_factor(100.0, cfg.dt), DomainError);
  VectorXd x(3);
  x << 0.0, 0.5, 1.0;
  const EncodedDrive d = synthesize_drive(x, 1.0, MzmConfig{}, cfg, kAwgRate, 0);
  const VectorXcd s = d.samples();
  REQUIRE(s.size() == 48);
  for (Eigen::Index k = 0; k < 48; ++k) CHECK(s[k] == d.levels[k / 16]);
  CHECK(d[47] == d.levels[2]);
}

TEST_CASE("mask csv round trip") {
  tdrc::test::TempDir dir("mask");
  const MaskSpec s = MaskSpec::theta_small(99);
  const VectorXd m = make_mask(s);
  write_mask_csv(dir / "mask.csv", m, s);
  CHECK(read_mask_csv(dir / "mask.csv") == m);
  tdrc::test::write_text(dir / "bad.csv", "# mask n_nodes=2 seed=1\n0.5\nx\n");
  CHECK_THROWS_AS(read_mask_csv(dir / "bad.csv"), ParseError);
  tdrc::test::write_text(dir / "short.csv", "# mask n_nodes=3 seed=1\n0.5\n0.1\n");
  CHECK_THROWS_AS(read_mask_csv(dir / "short.csv"), DomainError);
}

}  // TEST_SUITE
