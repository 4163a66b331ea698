#pragma once

#include <filesystem>
#include <optional>

#include "tdrc/common.hpp"

namespace tdrc {

/// One-sided Welch estimate in dB (arbitrary reference).
struct PsdEstimate {
  VectorXd freqs;  // GHz, ascending from 0
  VectorXd psd;    // dB
  double resolution = 0.0;
  int n_averages = 0;

  double nyquist() const { return freqs.size() ? freqs[freqs.size() - 1] : 0.0; }
};

/// Averaged periodogram of up to `n_segments` Hann-windowed segments with
/// 50% overlap. `segment_len` must be a power of two no longer than the
/// trace; fewer segments are used when the trace is too short for all of
/// them (see PsdEstimate::n_averages).
PsdEstimate estimate_psd(const VectorXd& trace, double dt, int segment_len, int n_segments);

/// Centered moving average over `width` bins, shrinking at the edges.
VectorXd smooth_bins(const VectorXd& v, int width);

struct Bandwidth10dB {
  double bandwidth = 0.0;  // GHz
  double reference = 0.0;  // dB, median over the plateau band
  bool saturated = false;  // no crossing; bandwidth is Nyquist
};

struct PlateauBand {
  double lo = 0.05;  // GHz
  double hi = 0.5;
};

/// First frequency above the plateau where the 5-bin smoothed PSD is 10 dB
/// below the plateau median and stays there for 10 bins. The crossing is
/// interpolated linearly between bins.
Bandwidth10dB bandwidth_10db(const PsdEstimate& psd, PlateauBand plateau = {});

struct LockingResult {
  bool locked = true;
  std::optional<double> beat_freq;  // GHz, set when unlocked
  double prominence = 0.0;          // dB above the fitted background
};

/// Looks for a peak of >= 3 dB over a straight-line background (fitted to
/// flanking bands `tol` wide on each side) within |f - |delta_f|| <= tol.
/// A peak means the lasers are unlocked.
LockingResult detect_locking(const PsdEstimate& psd, double delta_f, double tol = 1.5,
                             double threshold_db = 3.0);

struct BandwidthResult {
  double bandwidth = 0.0;
  double reference_level = 0.0;
  bool saturated = false;
  bool locked = true;
  std::optional<double> beat_freq;
};

struct PersistenceHistogram {
  Eigen::MatrixXi counts;  // t_bins x i_bins
  double period = 0.0;     // ns
  double i_min = 0.0;
  double i_max = 0.0;

  long total() const { return counts.sum(); }
};

/// Folds the whole trace at `period` and bins (t mod period, intensity).
/// The intensity axis spans [min, max] of the trace unless a range is given.
PersistenceHistogram persistence_histogram(const VectorXd& trace, double dt, double period,
                                           int t_bins, int i_bins,
                                           std::optional<std::pair<double, double>> range = {});

void write_psd_csv(const std::filesystem::path& path, const PsdEstimate& psd);
/// Writes the count matrix (one time bin per row) and `<path>.axes.csv`
/// with bin centers.
void write_persistence_csv(const std::filesystem::path& path, const PersistenceHistogram& h);

}  // namespace tdrc
