#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>

#include "tdrc/common.hpp"
#include "tdrc/drive.hpp"

namespace tdrc {

/// Single-mode semiconductor laser with delayed optical feedback and
/// external injection, in the rotating frame of the free-running laser:
///
///   dE/dt = (1+i*alpha)/2 * [G(N,|E|^2) - 1/tau_p] * E
///           + kappa_f * exp(i*phi_f) * E(t - tau_delay)
///           + kappa_inj * sqrt(photons_per_mw) * A(t) * exp(i*2*pi*(f_fb + delta_f)*t)
///           + spontaneous emission noise
///   dN/dt = I_bias - N/tau_n - G(N,|E|^2) * |E|^2
///   G     = g*(N - N0) / (1 + s*|E|^2)
///
/// with f_fb = feedback_frequency_shift(), so delta_f is the detuning from
/// the response laser's own emission with its feedback loop closed.
/// Times in ns, frequencies in GHz, |E|^2 in photons, A(t) in sqrt(mW).
struct LaserParams {
  double alpha = 3.0;
  double g = 0.0;      // 1/(ns * carrier); see default_laser_params()
  double n0 = 1.5e8;
  double s = 5e-7;
  double tau_p = 0.002;
  double tau_n = 2.0;
  // I_bias expressed relative to the solitary threshold so that edits to
  // gain or lifetimes keep the operating point.
  double bias_ratio = 10.6 / 10.8;
  double kappa_f = 0.0;
  double tau_delay = 24.5;
  double phi_f = 0.0;
  double kappa_inj = 0.0;
  double delta_f = 0.0;  // f_drive - f_response, GHz
  double beta_sp = 0.0;
  // Photon-number scale of 1 mW of injected power.
  double photons_per_mw = 1.0;

  double threshold() const { return (n0 + 1.0 / (g * tau_p)) / tau_n; }
  /// Emission frequency of the laser with feedback relative to the solitary
  /// laser (GHz): the external-cavity mode nearest -alpha*kappa_f/(2*pi).
  /// delta_f is measured from this frequency.
  double feedback_frequency_shift() const;
  double i_bias() const { return bias_ratio * threshold(); }

  /// Throws DomainError if any field is non-finite or violates its sign
  /// constraint.
  void validate() const;

  bool operator==(const LaserParams&) const = default;
};

/// Documented default parameter set. The differential gain is chosen so
/// the small-signal relaxation oscillation at 1.5x threshold is 5 GHz.
LaserParams default_laser_params();

/// Gain value giving relaxation frequency `f_ro` (GHz) at pump `ratio`*I_th,
/// using f_RO = sqrt(g*S0/tau_p)/(2*pi). Other fields of `p` are kept.
double gain_for_relaxation_frequency(LaserParams p, double f_ro, double ratio);

/// Small-signal estimate sqrt(g*S0/tau_p)/(2*pi) at the current bias (GHz);
/// zero below threshold.
double relaxation_frequency_estimate(const LaserParams& p);

struct ReservoirState {
  Complex field{0.0, 0.0};
  double carriers = 0.0;

  double intensity() const { return std::norm(field); }
  bool finite() const {
    return std::isfinite(field.real()) && std::isfinite(field.imag()) &&
           std::isfinite(carriers);
  }
  bool operator==(const ReservoirState&) const = default;
};

enum class Scheme { heun };

struct IntegratorConfig {
  double dt = 0.01171875 / 16.0;  // ns
  std::uint64_t seed = 1;
  double detection_cutoff = 40.0;  // GHz
  Scheme scheme = Scheme::heun;
  // RMS of additive white detector noise after the detection low-pass, in
  // photons. Drawn from its own stream, independent of beta_sp.
  double detection_noise = 0.0;
  bool noise = true;  // false disables both noise sources

  void validate() const;
  bool operator==(const IntegratorConfig&) const = default;
};

/// Raised when a step produces a non-finite or negative-carrier state.
struct IntegrationBlowup : Error {
  IntegrationBlowup(double t, ReservoirState state);
  double t;
  ReservoirState state;
};

/// Fixed-length history of field samples covering one feedback roundtrip.
class DelayLine {
 public:
  DelayLine(double tau_delay, double dt, Complex fill = {});

  std::size_t size() const { return buffer_.size(); }
  /// Sample stored `size()` steps ago.
  Complex oldest() const { return buffer_[cursor_]; }
  /// Sample stored `size()-1` steps ago; `current` when size() == 1.
  Complex next_oldest(Complex current) const {
    if (buffer_.size() == 1) return current;
    std::size_t i = cursor_ + 1;
    return buffer_[i == buffer_.size() ? 0 : i];
  }
  void push(Complex value) {
    buffer_[cursor_] = value;
    if (++cursor_ == buffer_.size()) cursor_ = 0;
  }
  void fill(Complex value);

 private:
  std::vector<Complex> buffer_;
  std::size_t cursor_ = 0;
};

using NoiseRng = std::mt19937_64;

/// Field inputs at both ends of one step.
struct StepInputs {
  Complex drive_now{};
  Complex drive_next{};
  Complex tap_now{};   // E(t - tau)
  Complex tap_next{};  // E(t + dt - tau)
};

/// Free-running operating point (feedback and injection ignored).
ReservoirState steady_state(const LaserParams& params);

/// One Heun step from time t, followed by an Euler-Maruyama spontaneous
/// emission kick with E|dW|^2 = beta_sp * N * dt.
ReservoirState step(const ReservoirState& state, const StepInputs& in, double t,
                    const LaserParams& params, const IntegratorConfig& cfg,
                    NoiseRng& rng);

struct IntegrationResult {
  VectorXd detected;  // low-passed |E|^2 on the drive grid
  ReservoirState final_state;
};

/// Integrates over the whole drive. The delay line starts filled with
/// `init.field`, then a warm-up of ceil(5*tau_delay/dt) steps runs with
/// drive[0] held and is discarded. Output sample k is the detected
/// intensity at t = k*dt.
IntegrationResult integrate_detailed(const LaserParams& params,
                                     const EncodedDrive& drive,
                                     const IntegratorConfig& cfg,
                                     const ReservoirState& init);

VectorXd integrate(const LaserParams& params, const EncodedDrive& drive,
                   const IntegratorConfig& cfg, const ReservoirState& init);

/// The values integrate() would return at `indices` (ascending, repeats
/// allowed), without holding the whole trace.
VectorXd integrate_at(const LaserParams& params, const EncodedDrive& drive,
                      const IntegratorConfig& cfg, const ReservoirState& init,
                      std::span<const std::size_t> indices);

/// First-order detection low-pass, exact for piecewise-linear input.
class DetectionFilter {
 public:
  DetectionFilter(double cutoff_ghz, double dt, double initial);
  double push(double x) {
    y_ = decay_ * y_ + w_next_ * x + w_prev_ * prev_;
    prev_ = x;
    return y_;
  }
  double value() const { return y_; }
  /// Output variance per unit variance of white input.
  double white_gain() const;

 private:
  double decay_, w_next_, w_prev_;
  double y_, prev_;
};

}  // namespace tdrc
