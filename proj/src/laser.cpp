#include "tdrc/laser.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace tdrc {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kMaxStep = 0.01171875 / 8.0;

void require_finite(double v, const char* name) {
  if (!std::isfinite(v))
    throw DomainError(std::string("laser parameter '") + name + "' is not finite");
}

void require_positive(double v, const char* name) {
  require_finite(v, name);
  if (!(v > 0.0))
    throw DomainError(std::string("laser parameter '") + name + "' must be > 0");
}

void require_nonnegative(double v, const char* name) {
  require_finite(v, name);
  if (v < 0.0)
    throw DomainError(std::string("laser parameter '") + name + "' must be >= 0");
}

struct Derivative {
  Complex field;
  double carriers;
};

// Right-hand side without the delayed and injected terms' time lookup.
struct Rhs {
  explicit Rhs(const LaserParams& p)
      : gain_factor(0.5 * Complex(1.0, p.alpha)),
        g(p.g),
        n0(p.n0),
        s(p.s),
        loss(1.0 / p.tau_p),
        inv_tau_n(1.0 / p.tau_n),
        pump(p.i_bias()),
        feedback(std::polar(p.kappa_f, p.phi_f)),
        injection(p.kappa_inj * std::sqrt(p.photons_per_mw)) {}

  Derivative operator()(Complex e, double n, Complex tap, Complex inj) const {
    const double photons = std::norm(e);
    const double gain = g * (n - n0) / (1.0 + s * photons);
    return {gain_factor * (gain - loss) * e + feedback * tap + injection * inj,
            pump - n * inv_tau_n - gain * photons};
  }

  Complex gain_factor;
  double g, n0, s, loss, inv_tau_n, pump;
  Complex feedback;
  double injection;
};

// exp(i*2*pi*delta_f*t), advanced by multiplication and re-anchored
// periodically so rounding does not accumulate.
class Rotator {
 public:
  Rotator(double delta_f, double t0, double dt)
      : delta_f_(delta_f), t0_(t0), dt_(dt),
        increment_(std::polar(1.0, kTwoPi * std::fmod(delta_f * dt, 1.0))) {
    anchor(0);
  }
  Complex value() const { return value_; }
  void advance() {
    ++index_;
    if ((index_ & 1023u) == 0)
      anchor(index_);
    else
      value_ *= increment_;
  }

 private:
  void anchor(std::uint64_t k) {
    const double cycles = delta_f_ * (t0_ + static_cast<double>(k) * dt_);
    value_ = std::polar(1.0, kTwoPi * (cycles - std::floor(cycles)));
  }
  double delta_f_, t0_, dt_;
  Complex increment_;
  Complex value_;
  std::uint64_t index_ = 0;
};

Complex phasor_at(double delta_f, double t) {
  const double cycles = delta_f * t;
  return std::polar(1.0, kTwoPi * (cycles - std::floor(cycles)));
}

inline ReservoirState heun(const Rhs& rhs, const ReservoirState& x, Complex tap0,
                           Complex tap1, Complex inj0, Complex inj1, double dt) {
  const Derivative k0 = rhs(x.field, x.carriers, tap0, inj0);
  const Complex ep = x.field + dt * k0.field;
  const double np = x.carriers + dt * k0.carriers;
  const Derivative k1 = rhs(ep, np, tap1, inj1);
  return {x.field + 0.5 * dt * (k0.field + k1.field),
          x.carriers + 0.5 * dt * (k0.carriers + k1.carriers)};
}

}  // namespace

double LaserParams::feedback_frequency_shift() const {
  if (kappa_f == 0.0) return 0.0;
  // On a mode the round-trip phase phi_f - 2*pi*f*tau is a multiple of 2*pi.
  const double target = -alpha * kappa_f / kTwoPi;
  const double m = std::round(target * tau_delay - phi_f / kTwoPi);
  return (m + phi_f / kTwoPi) / tau_delay;
}

void LaserParams::validate() const {
  require_finite(alpha, "alpha");
  require_positive(g, "g");
  require_finite(n0, "n0");
  require_nonnegative(s, "s");
  require_positive(tau_p, "tau_p");
  require_positive(tau_n, "tau_n");
  require_nonnegative(bias_ratio, "bias_ratio");
  require_nonnegative(kappa_f, "kappa_f");
  require_positive(tau_delay, "tau_delay");
  require_finite(phi_f, "phi_f");
  require_nonnegative(kappa_inj, "kappa_inj");
  require_finite(delta_f, "delta_f");
  require_nonnegative(beta_sp, "beta_sp");
  require_nonnegative(photons_per_mw, "photons_per_mw");
}

void IntegratorConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("integrator dt must be > 0");
  if (!(detection_cutoff > 0.0) || !std::isfinite(detection_cutoff))
    throw DomainError("detection_cutoff must be > 0");
  if (dt > kMaxStep * (1.0 + 1e-12))
    throw DomainError("integrator dt must resolve the shortest node (dt <= 11.71875 ps / 8)");
  if (!(detection_noise >= 0.0) || !std::isfinite(detection_noise))
    throw DomainError("detection_noise must be >= 0");
}

double relaxation_frequency_estimate(const LaserParams& p) {
  const double photons = steady_state(p).intensity();
  return std::sqrt(p.g * photons / p.tau_p) / kTwoPi;
}

double gain_for_relaxation_frequency(LaserParams p, double f_ro, double ratio) {
  p.bias_ratio = ratio;
  // f_RO grows monotonically with g at fixed bias ratio.
  double lo = 1e-9, hi = 1e-2;
  for (int i = 0; i < 200; ++i) {
    const double mid = std::sqrt(lo * hi);
    p.g = mid;
    if (relaxation_frequency_estimate(p) < f_ro)
      lo = mid;
    else
      hi = mid;
  }
  return std::sqrt(lo * hi);
}

LaserParams default_laser_params() {
  LaserParams p;
  p.g = gain_for_relaxation_frequency(p, 5.0, 1.5);
  p.kappa_f = 60.0;
  p.phi_f = 0.0;
  p.kappa_inj = 30.0;
  p.photons_per_mw = 1.0e5;
  p.beta_sp = 5.0e-6;
  return p;
}

IntegrationBlowup::IntegrationBlowup(double t_, ReservoirState s)
    : Error([&] {
        std::ostringstream os;
        os << "integration blow-up at t=" << t_ << " ns (E=" << s.field
           << ", N=" << s.carriers << "); reduce dt or check parameters";
        return os.str();
      }()),
      t(t_),
      state(s) {}

DelayLine::DelayLine(double tau_delay, double dt, Complex fill_value) {
  if (!(tau_delay > 0.0) || !(dt > 0.0)) throw DomainError("delay line needs tau > 0 and dt > 0");
  const double steps = std::round(tau_delay / dt);
  if (steps < 1.0) throw DomainError("feedback delay shorter than one integration step");
  buffer_.assign(static_cast<std::size_t>(steps), fill_value);
}

void DelayLine::fill(Complex value) {
  std::fill(buffer_.begin(), buffer_.end(), value);
  cursor_ = 0;
}

ReservoirState steady_state(const LaserParams& p) {
  p.validate();
  const double pump = p.i_bias();
  const double threshold = p.threshold();
  if (pump <= threshold) return {Complex{}, pump * p.tau_n};
  // Gain clamped to loss: N = N0 + (1 + s*S)/(g*tau_p) together with
  // pump - N/tau_n = S/tau_p is linear in S.
  const double photons =
      (pump - threshold) / (1.0 / p.tau_p + p.s / (p.g * p.tau_p * p.tau_n));
  const double carriers = p.n0 + (1.0 + p.s * photons) / (p.g * p.tau_p);
  return {Complex(std::sqrt(photons), 0.0), carriers};
}

namespace {

inline void add_noise(ReservoirState& next, double carriers, double beta_dt,
                      NoiseRng& rng, std::normal_distribution<double>& normal) {
  const double sigma = std::sqrt(0.5 * beta_dt * carriers);
  const double re = normal(rng);
  const double im = normal(rng);
  next.field += sigma * Complex(re, im);
}

inline void check_state(const ReservoirState& s, double t) {
  if (!s.finite() || s.carriers < 0.0) throw IntegrationBlowup(t, s);
}

}  // namespace

ReservoirState step(const ReservoirState& state, const StepInputs& in, double t,
                    const LaserParams& params, const IntegratorConfig& cfg,
                    NoiseRng& rng) {
  if (!state.finite()) throw IntegrationBlowup(t, state);
  const Rhs rhs(params);
  const double dt = cfg.dt;
  const double detuning = params.delta_f + params.feedback_frequency_shift();
  ReservoirState next =
      heun(rhs, state, in.tap_now, in.tap_next, in.drive_now * phasor_at(detuning, t),
           in.drive_next * phasor_at(detuning, t + dt), dt);
  if (cfg.noise && params.beta_sp > 0.0) {
    std::normal_distribution<double> normal;
    add_noise(next, state.carriers, params.beta_sp * dt, rng, normal);
  }
  check_state(next, t + dt);
  return next;
}

DetectionFilter::DetectionFilter(double cutoff_ghz, double dt, double initial)
    : y_(initial), prev_(initial) {
  const double h = kTwoPi * cutoff_ghz * dt;
  decay_ = std::exp(-h);
  const double phi = -std::expm1(-h) / h;
  w_next_ = 1.0 - phi;
  w_prev_ = phi - decay_;
}

double DetectionFilter::white_gain() const {
  // Impulse response b0, (b1 + a*b0)*a^(n-1) for n >= 1.
  const double tail = w_prev_ + decay_ * w_next_;
  return w_next_ * w_next_ + tail * tail / (1.0 - decay_ * decay_);
}

namespace {

// Shared integration loop; calls sink(k, detected) for every output sample.
template <typename Sink>
ReservoirState run_integration(const LaserParams& params, const EncodedDrive& drive,
                               const IntegratorConfig& cfg, const ReservoirState& init,
                               Sink&& sink) {
  params.validate();
  cfg.validate();
  if (drive.size() == 0) throw DomainError("integrate: empty drive");
  if (std::abs(drive.dt - cfg.dt) > 1e-9 * cfg.dt)
    throw DomainError("integrate: drive sample interval must equal integrator dt");
  if (!init.finite()) throw DomainError("integrate: non-finite initial state");

  const double dt = cfg.dt;
  const Rhs rhs(params);
  const bool noisy = cfg.noise && params.beta_sp > 0.0;
  const double beta_dt = params.beta_sp * dt;
  NoiseRng rng(cfg.seed);
  std::normal_distribution<double> normal;

  DelayLine line(params.tau_delay, dt, init.field);
  const auto warmup = static_cast<std::size_t>(std::ceil(5.0 * params.tau_delay / dt));
  const double t0 = -static_cast<double>(warmup) * dt;
  Rotator rot(params.delta_f + params.feedback_frequency_shift(), t0, dt);

  ReservoirState x = init;
  const std::size_t n = drive.size();
  const std::size_t total = warmup + n;

  DetectionFilter detector(cfg.detection_cutoff, dt, x.intensity());
  const bool detector_noisy = cfg.noise && cfg.detection_noise > 0.0;
  const double detector_sigma =
      detector_noisy ? cfg.detection_noise / std::sqrt(detector.white_gain()) : 0.0;
  NoiseRng detector_rng(mix64(cfg.seed ^ 0x6a09e667f3bcc909ULL));
  std::normal_distribution<double> detector_normal;

  // Position of the step-end drive sample as (level, offset within level).
  const auto last_level = drive.levels.size() - 1;
  Eigen::Index level = 0;
  std::size_t sub = 0;

  Complex inj_now = drive.levels[0] * rot.value();
  for (std::size_t k = 0; k < total; ++k) {
    if (k >= warmup) sink(k - warmup, detector.value());
    if (k + 1 == total) break;

    // Warm-up holds the first value.
    if (k + 1 > warmup && ++sub == drive.hold) {
      sub = 0;
      if (level < last_level) ++level;
    }
    rot.advance();
    const Complex inj_next = drive.levels[level] * rot.value();
    const Complex tap0 = line.oldest();
    const Complex tap1 = line.next_oldest(x.field);

    ReservoirState next = heun(rhs, x, tap0, tap1, inj_now, inj_next, dt);
    if (noisy) add_noise(next, x.carriers, beta_dt, rng, normal);
    if (!next.finite() || next.carriers < 0.0)
      throw IntegrationBlowup(t0 + static_cast<double>(k + 1) * dt, next);

    line.push(x.field);
    x = next;
    inj_now = inj_next;
    detector.push(detector_noisy ? x.intensity() + detector_sigma * detector_normal(detector_rng)
                                 : x.intensity());
  }
  return x;
}

}  // namespace

IntegrationResult integrate_detailed(const LaserParams& params,
                                     const EncodedDrive& drive,
                                     const IntegratorConfig& cfg,
                                     const ReservoirState& init) {
  VectorXd out(static_cast<Eigen::Index>(drive.size()));
  const ReservoirState last = run_integration(
      params, drive, cfg, init,
      [&](std::size_t k, double v) { out[static_cast<Eigen::Index>(k)] = v; });
  return {std::move(out), last};
}

VectorXd integrate_at(const LaserParams& params, const EncodedDrive& drive,
                      const IntegratorConfig& cfg, const ReservoirState& init,
                      std::span<const std::size_t> indices) {
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= drive.size())
      throw IndexError("integrate_at: sample " + std::to_string(indices[i]) +
                       " outside drive of length " + std::to_string(drive.size()));
    if (i > 0 && indices[i] < indices[i - 1])
      throw DomainError("integrate_at: indices must be ascending");
  }
  VectorXd out(static_cast<Eigen::Index>(indices.size()));
  std::size_t pos = 0;
  run_integration(params, drive, cfg, init, [&](std::size_t k, double v) {
    while (pos < indices.size() && indices[pos] == k) out[static_cast<Eigen::Index>(pos++)] = v;
  });
  return out;
}

VectorXd integrate(const LaserParams& params, const EncodedDrive& drive,
                   const IntegratorConfig& cfg, const ReservoirState& init) {
  return integrate_detailed(params, drive, cfg, init).detected;
}

}  // namespace tdrc
