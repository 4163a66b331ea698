#pragma once

#include <cstdint>
#include <filesystem>
#include <span>

#include "tdrc/common.hpp"
#include "tdrc/drive.hpp"
#include "tdrc/laser.hpp"

namespace tdrc {

inline constexpr double kAwgRate = 256.0 / 3.0;  // GSa/s (85.33)

struct MaskSpec {
  int n_nodes = 260;
  double theta = 8.0 / kAwgRate;  // ns between virtual nodes
  int repetition = 8;             // AWG samples per mask value
  int chunk_repeats = 1;          // mask-chunk copies per input symbol
  std::uint64_t seed = 42;
  double awg_rate = kAwgRate;

  /// AWG samples per input symbol.
  int symbol_samples() const { return n_nodes * repetition * chunk_repeats; }
  /// Symbol duration in ns.
  double symbol_period() const { return symbol_samples() / awg_rate; }
  void validate() const;
  bool operator==(const MaskSpec&) const = default;

  /// 260 nodes at one AWG sample each, chunk repeated 8x (11.72 ps nodes).
  static MaskSpec theta_small(std::uint64_t seed = 42);
  /// 260 nodes, each mask value held for 8 AWG samples (93.75 ps nodes).
  static MaskSpec theta_large(std::uint64_t seed = 42);
};

/// Which chunk copy feeds the readout when chunk_repeats > 1.
enum class ChunkReadout { first, last };

/// i.i.d. uniform [0, 1) values, reproducible from spec.seed.
VectorXd make_mask(const MaskSpec& spec);

/// Staircase at the AWG rate: for each input u, the products u*mask[j],
/// each held `repetition` samples, the chunk emitted `chunk_repeats` times.
VectorXd encode(std::span<const double> inputs, const VectorXd& mask,
                const MaskSpec& spec);
VectorXd encode(const VectorXd& inputs, const VectorXd& mask, const MaskSpec& spec);

/// Analog output stage of the waveform generator.
struct AwgModel {
  double analog_cutoff = 32.0;  // GHz, -3 dB
  int filter_order = 4;
  double output_rate = kAwgRate;  // GSa/s

  void validate() const;
  bool operator==(const AwgModel&) const = default;
};

/// Digital IIR realization of a magnitude-normalized Bessel low-pass
/// (bilinear transform, prewarped at the cutoff). Coefficients are in
/// powers of z^-1 with a[0] == 1.
struct IirFilter {
  std::vector<double> b;
  std::vector<double> a;

  /// Complex response at frequency f (same units as the design rate).
  Complex response(double f, double rate) const;
};

IirFilter bessel_lowpass(int order, double cutoff, double rate);

/// Causal Bessel low-pass at awg.analog_cutoff with unit DC gain. Filter
/// state starts at rest on the first sample, so a constant input passes
/// through unchanged.
VectorXd bandlimit(const VectorXd& waveform, const AwgModel& awg);

/// Mach-Zehnder intensity modulator biased at quadrature.
struct MzmConfig {
  double v_pi = 1.0;
  double swing = 0.4;  // peak drive as a fraction of v_pi
  double input_lo = 0.0;
  double input_hi = 1.0;

  /// Drive voltage for a waveform value in [input_lo, input_hi].
  double voltage(double x) const {
    return swing * v_pi * (2.0 * (x - input_lo) / (input_hi - input_lo) - 1.0);
  }
  /// sin^2(pi/4 + pi*v/(2*v_pi)).
  double transfer(double v) const;

  void validate() const;
  bool operator==(const MzmConfig&) const = default;
};

/// Maps the filtered AWG waveform through the modulator, scales the mean
/// intensity to p_inj_avg (mW) and holds each AWG sample over the
/// integration grid. `symbol_samples` is the AWG length of one input symbol
/// (used for the markers; 0 means one symbol).
EncodedDrive synthesize_drive(const VectorXd& filtered, double p_inj_avg,
                              const MzmConfig& mzm, const IntegratorConfig& cfg,
                              double awg_rate, std::size_t symbol_samples);

/// Integration steps per AWG sample; throws unless it is an integer.
std::size_t upsample_factor(double awg_rate, double dt);

void write_mask_csv(const std::filesystem::path& path, const VectorXd& mask,
                    const MaskSpec& spec);
VectorXd read_mask_csv(const std::filesystem::path& path);

}  // namespace tdrc
