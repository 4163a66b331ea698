#include "tdrc/input.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

namespace tdrc {

namespace {
constexpr double kPi = std::numbers::pi;

double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

// Reverse Bessel polynomial coefficients, ascending powers of s.
std::vector<double> bessel_polynomial(int n) {
  std::vector<double> c(static_cast<std::size_t>(n + 1));
  for (int k = 0; k <= n; ++k)
    c[static_cast<std::size_t>(k)] =
        factorial(2 * n - k) / (std::pow(2.0, n - k) * factorial(k) * factorial(n - k));
  return c;
}

Complex eval_poly(const std::vector<double>& c, Complex s) {
  Complex r{};
  for (auto it = c.rbegin(); it != c.rend(); ++it) r = r * s + *it;
  return r;
}

// Frequency where the delay-normalized prototype is 3 dB down.
double bessel_3db(const std::vector<double>& c) {
  const double dc = c[0];
  auto mag2 = [&](double w) { return std::norm(dc / eval_poly(c, Complex(0.0, w))); };
  double lo = 0.0, hi = 1.0;
  while (mag2(hi) > 0.5) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mag2(mid) > 0.5 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// (1 - z^-1)^k (1 + z^-1)^(n-k)
std::vector<double> bilinear_term(int n, int k) {
  std::vector<double> p{1.0};
  auto mul = [&](double sign) {
    std::vector<double> q(p.size() + 1, 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
      q[i] += p[i];
      q[i + 1] += sign * p[i];
    }
    p = std::move(q);
  };
  for (int i = 0; i < k; ++i) mul(-1.0);
  for (int i = 0; i < n - k; ++i) mul(+1.0);
  return p;
}

}  // namespace

void MaskSpec::validate() const {
  if (n_nodes < 1) throw DomainError("mask: n_nodes must be >= 1");
  if (repetition < 1 || chunk_repeats < 1)
    throw DomainError("mask: repetition and chunk_repeats must be >= 1");
  if (!(awg_rate > 0.0)) throw DomainError("mask: awg_rate must be > 0");
  if (!(theta > 0.0)) throw DomainError("mask: theta must be > 0");
  if (std::abs(theta * awg_rate - repetition) > 1e-6 * repetition)
    throw DomainError("mask: theta must equal repetition / awg_rate");
}

MaskSpec MaskSpec::theta_small(std::uint64_t seed) {
  return {260, 1.0 / kAwgRate, 1, 8, seed, kAwgRate};
}

MaskSpec MaskSpec::theta_large(std::uint64_t seed) {
  return {260, 8.0 / kAwgRate, 8, 1, seed, kAwgRate};
}

VectorXd make_mask(const MaskSpec& spec) {
  if (spec.n_nodes < 1) throw DomainError("make_mask: n_nodes must be >= 1");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  VectorXd mask(spec.n_nodes);
  for (auto& v : mask) v = uniform(rng);
  return mask;
}

VectorXd encode(std::span<const double> inputs, const VectorXd& mask,
                const MaskSpec& spec) {
  spec.validate();
  if (mask.size() != spec.n_nodes)
    throw DomainError("encode: mask length " + std::to_string(mask.size()) +
                      " != n_nodes " + std::to_string(spec.n_nodes));
  const Eigen::Index per_symbol = spec.symbol_samples();
  VectorXd out(per_symbol * static_cast<Eigen::Index>(inputs.size()));
  Eigen::Index pos = 0;
  for (double u : inputs) {
    for (int c = 0; c < spec.chunk_repeats; ++c)
      for (Eigen::Index j = 0; j < mask.size(); ++j) {
        out.segment(pos, spec.repetition).setConstant(u * mask[j]);
        pos += spec.repetition;
      }
  }
  return out;
}

VectorXd encode(const VectorXd& inputs, const VectorXd& mask, const MaskSpec& spec) {
  return encode(std::span<const double>(inputs.data(), static_cast<std::size_t>(inputs.size())),
                mask, spec);
}

void AwgModel::validate() const {
  if (!(output_rate > 0.0)) throw DomainError("awg: output_rate must be > 0");
  if (!(analog_cutoff > 0.0)) throw DomainError("awg: analog_cutoff must be > 0");
  if (analog_cutoff >= 0.5 * output_rate)
    throw DomainError("awg: analog_cutoff must be below Nyquist (" +
                      std::to_string(0.5 * output_rate) + " GHz)");
  if (filter_order < 1 || filter_order > 10)
    throw DomainError("awg: filter_order must be in [1, 10]");
}

Complex IirFilter::response(double f, double rate) const {
  const Complex zinv = std::polar(1.0, -2.0 * kPi * f / rate);
  Complex num{}, den{};
  for (auto it = b.rbegin(); it != b.rend(); ++it) num = num * zinv + *it;
  for (auto it = a.rbegin(); it != a.rend(); ++it) den = den * zinv + *it;
  return num / den;
}

IirFilter bessel_lowpass(int order, double cutoff, double rate) {
  const auto c = bessel_polynomial(order);
  const double w3 = bessel_3db(c);
  // Analog H(s) = c0 / sum c_k (s*w3/wc)^k, s = K (1-z^-1)/(1+z^-1) with
  // K chosen so the analog cutoff lands on the digital one.
  const double wc = 2.0 * kPi * cutoff;
  const double K = wc / std::tan(kPi * cutoff / rate);
  const double scale = w3 * K / wc;
  IirFilter f;
  f.a.assign(static_cast<std::size_t>(order + 1), 0.0);
  f.b = bilinear_term(order, 0);
  for (auto& v : f.b) v *= c[0];
  for (int k = 0; k <= order; ++k) {
    const auto term = bilinear_term(order, k);
    const double w = c[static_cast<std::size_t>(k)] * std::pow(scale, k);
    for (std::size_t i = 0; i < term.size(); ++i) f.a[i] += w * term[i];
  }
  const double a0 = f.a[0];
  for (auto& v : f.a) v /= a0;
  for (auto& v : f.b) v /= a0;
  return f;
}

VectorXd bandlimit(const VectorXd& waveform, const AwgModel& awg) {
  awg.validate();
  if (waveform.size() == 0) throw DomainError("bandlimit: empty waveform");
  const IirFilter f = bessel_lowpass(awg.filter_order, awg.analog_cutoff, awg.output_rate);
  const std::size_t order = f.a.size() - 1;

  // Transposed direct form II, state initialized to the DC steady state of
  // the first sample.
  std::vector<double> z(order, 0.0);
  const double x0 = waveform[0];
  for (std::size_t i = order; i-- > 0;) {
    const double next = i + 1 < order ? z[i + 1] : 0.0;
    z[i] = f.b[i + 1] * x0 - f.a[i + 1] * x0 + next;
  }

  VectorXd out(waveform.size());
  for (Eigen::Index n = 0; n < waveform.size(); ++n) {
    const double x = waveform[n];
    const double y = f.b[0] * x + (order ? z[0] : 0.0);
    for (std::size_t i = 0; i < order; ++i) {
      const double next = i + 1 < order ? z[i + 1] : 0.0;
      z[i] = f.b[i + 1] * x - f.a[i + 1] * y + next;
    }
    out[n] = y;
  }
  return out;
}

double MzmConfig::transfer(double v) const {
  const double s = std::sin(0.25 * kPi + 0.5 * kPi * v / v_pi);
  return s * s;
}

void MzmConfig::validate() const {
  if (!(v_pi > 0.0)) throw DomainError("mzm: v_pi must be > 0");
  if (!(swing >= 0.0) || swing > 0.5) throw DomainError("mzm: swing must be in [0, 0.5]");
  if (!(input_hi > input_lo)) throw DomainError("mzm: input_hi must exceed input_lo");
}

std::size_t upsample_factor(double awg_rate, double dt) {
  const double ratio = 1.0 / (awg_rate * dt);
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-6 * rounded)
    throw DomainError("AWG sample period must be an integer multiple of dt");
  return static_cast<std::size_t>(rounded);
}

EncodedDrive synthesize_drive(const VectorXd& filtered, double p_inj_avg,
                              const MzmConfig& mzm, const IntegratorConfig& cfg,
                              double awg_rate, std::size_t symbol_samples) {
  mzm.validate();
  cfg.validate();
  if (!(p_inj_avg >= 0.0) || !std::isfinite(p_inj_avg))
    throw DomainError("synthesize_drive: injection power must be >= 0");
  if (filtered.size() == 0) throw DomainError("synthesize_drive: empty waveform");
  const std::size_t factor = upsample_factor(awg_rate, cfg.dt);
  const auto n_awg = static_cast<std::size_t>(filtered.size());
  if (symbol_samples == 0) symbol_samples = n_awg;
  if (n_awg % symbol_samples != 0)
    throw DomainError("synthesize_drive: waveform is not a whole number of symbols");

  VectorXd transfer(filtered.size());
  for (Eigen::Index i = 0; i < filtered.size(); ++i)
    transfer[i] = mzm.transfer(mzm.voltage(filtered[i]));
  const double mean = transfer.mean();
  const double scale = (p_inj_avg > 0.0 && mean > 0.0) ? p_inj_avg / mean : 0.0;

  EncodedDrive drive;
  drive.dt = cfg.dt;
  drive.input_period = static_cast<double>(symbol_samples) / awg_rate;
  drive.hold = factor;
  drive.levels.resize(filtered.size());
  // The transfer is quadratic in the field; keep the amplitude real.
  for (Eigen::Index i = 0; i < filtered.size(); ++i)
    drive.levels[i] = Complex(std::sqrt(scale * transfer[i]), 0.0);
  for (std::size_t m = 0; m < n_awg / symbol_samples; ++m)
    drive.markers.push_back(m * symbol_samples * factor);
  return drive;
}

void write_mask_csv(const std::filesystem::path& path, const VectorXd& mask,
                    const MaskSpec& spec) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << "# mask n_nodes=" << mask.size() << " seed=" << spec.seed << "\n";
  os << std::setprecision(17);
  for (double v : mask) os << v << "\n";
}

VectorXd read_mask_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path.string());
  std::string line;
  std::vector<double> values;
  long declared = -1;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("n_nodes=");
      if (pos != std::string::npos) declared = std::stol(line.substr(pos + 8));
      continue;
    }
    std::istringstream ls(line);
    double v;
    if (!(ls >> v)) throw ParseError("mask value is not a number", lineno);
    values.push_back(v);
  }
  if (declared >= 0 && static_cast<std::size_t>(declared) != values.size())
    throw DomainError("mask file declares " + std::to_string(declared) + " nodes but holds " +
                      std::to_string(values.size()));
  return Eigen::Map<VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace tdrc
