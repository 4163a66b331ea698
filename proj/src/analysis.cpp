#include "tdrc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>

#include <unsupported/Eigen/FFT>

namespace tdrc {

namespace {

constexpr double kLockSmoothGHz = 0.25;

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

double median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

Eigen::Index bin_at_or_above(const VectorXd& freqs, double f) {
  const auto it = std::lower_bound(freqs.data(), freqs.data() + freqs.size(), f);
  return static_cast<Eigen::Index>(it - freqs.data());
}

}  // namespace

PsdEstimate estimate_psd(const VectorXd& trace, double dt, int segment_len, int n_segments) {
  if (!is_power_of_two(segment_len)) throw DomainError("estimate_psd: segment_len must be a power of two");
  if (n_segments < 1) throw DomainError("estimate_psd: n_segments must be >= 1");
  if (!(dt > 0.0)) throw DomainError("estimate_psd: dt must be > 0");
  if (trace.size() < segment_len)
    throw DomainError("estimate_psd: trace of " + std::to_string(trace.size()) +
                      " samples is shorter than one segment (" + std::to_string(segment_len) + ")");

  const Eigen::Index L = segment_len;
  const Eigen::Index hop = L / 2;
  const auto available = static_cast<int>((trace.size() - L) / hop + 1);
  const int used = std::min(n_segments, available);

  VectorXd window(L);
  for (Eigen::Index i = 0; i < L; ++i)
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                     static_cast<double>(L));
  const double fs = 1.0 / dt;
  const double norm = 1.0 / (fs * window.squaredNorm());

  Eigen::FFT<double> fft;
  std::vector<double> segment(static_cast<std::size_t>(L));
  std::vector<Complex> spectrum;
  const Eigen::Index bins = L / 2 + 1;
  VectorXd power = VectorXd::Zero(bins);
  for (int s = 0; s < used; ++s) {
    const Eigen::Index start = static_cast<Eigen::Index>(s) * hop;
    for (Eigen::Index i = 0; i < L; ++i)
      segment[static_cast<std::size_t>(i)] = trace[start + i] * window[i];
    fft.fwd(spectrum, segment);
    for (Eigen::Index k = 0; k < bins; ++k) power[k] += std::norm(spectrum[static_cast<std::size_t>(k)]);
  }

  PsdEstimate out;
  out.resolution = fs / static_cast<double>(L);
  out.n_averages = used;
  out.freqs.resize(bins);
  out.psd.resize(bins);
  for (Eigen::Index k = 0; k < bins; ++k) {
    const double one_sided = (k == 0 || k == bins - 1) ? 1.0 : 2.0;
    const double density = one_sided * norm * power[k] / used;
    out.freqs[k] = static_cast<double>(k) * out.resolution;
    out.psd[k] = 10.0 * std::log10(std::max(density, 1e-300));
  }
  return out;
}

VectorXd smooth_bins(const VectorXd& v, int width) {
  const Eigen::Index half = width / 2;
  VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const Eigen::Index lo = std::max<Eigen::Index>(0, i - half);
    const Eigen::Index hi = std::min<Eigen::Index>(v.size() - 1, i + half);
    out[i] = v.segment(lo, hi - lo + 1).mean();
  }
  return out;
}

Bandwidth10dB bandwidth_10db(const PsdEstimate& psd, PlateauBand plateau) {
  constexpr double kDrop = 10.0;
  constexpr int kSmooth = 5;
  constexpr int kPersist = 10;
  if (!(plateau.lo < plateau.hi) || plateau.lo < 0.0 || plateau.hi > psd.nyquist())
    throw DomainError("bandwidth_10db: plateau band outside the spectrum");
  const Eigen::Index first = bin_at_or_above(psd.freqs, plateau.lo);
  const Eigen::Index last = bin_at_or_above(psd.freqs, std::nextafter(plateau.hi, 1e300));
  if (last <= first) throw DomainError("bandwidth_10db: plateau band holds no bins");

  std::vector<double> band(psd.psd.data() + first, psd.psd.data() + last);
  Bandwidth10dB r;
  r.reference = median(std::move(band));
  const double level = r.reference - kDrop;
  const VectorXd smooth = smooth_bins(psd.psd, kSmooth);

  const Eigen::Index n = smooth.size();
  Eigen::Index run = 0;
  for (Eigen::Index k = last; k < n; ++k) {
    run = smooth[k] < level ? run + 1 : 0;
    if (run == kPersist) {
      const Eigen::Index cross = k - kPersist + 1;
      double f = psd.freqs[cross];
      if (cross > 0 && smooth[cross - 1] >= level) {
        const double a = smooth[cross - 1], b = smooth[cross];
        f = psd.freqs[cross - 1] + (a - level) / (a - b) * (psd.freqs[cross] - psd.freqs[cross - 1]);
      }
      r.bandwidth = f;
      return r;
    }
  }
  r.bandwidth = psd.nyquist();
  r.saturated = true;
  return r;
}

LockingResult detect_locking(const PsdEstimate& psd, double delta_f, double tol,
                             double threshold_db) {
  const double center = std::abs(delta_f);
  const double nyq = psd.nyquist();
  if (!(tol > 0.0)) throw DomainError("detect_locking: tol must be > 0");
  if (!(center < nyq) || center + tol > nyq)
    throw DomainError("detect_locking: search window exceeds the spectrum");

  // Beat notes are broad; average over ~kLockSmoothGHz to keep estimator
  // ripple well below the threshold.
  int width = static_cast<int>(std::lround(kLockSmoothGHz / psd.resolution)) | 1;
  width = std::max(width, 5);
  const VectorXd smooth = smooth_bins(psd.psd, width);
  const double f_min = psd.resolution;  // skip DC
  const double w_lo = std::max(center - tol, f_min);
  const double w_hi = center + tol;
  const double left_lo = std::max(center - 2.0 * tol, f_min);
  const double right_hi = std::min(center + 2.0 * tol, nyq);

  // Least-squares line through the flanks.
  double sn = 0, sf = 0, sp = 0, sff = 0, sfp = 0;
  const auto accumulate = [&](double lo, double hi) {
    for (Eigen::Index k = bin_at_or_above(psd.freqs, lo); k < psd.freqs.size() && psd.freqs[k] < hi; ++k) {
      const double f = psd.freqs[k], p = smooth[k];
      sn += 1; sf += f; sp += p; sff += f * f; sfp += f * p;
    }
  };
  if (left_lo < w_lo) accumulate(left_lo, w_lo);
  accumulate(std::nextafter(w_hi, 1e300), std::nextafter(right_hi, 1e300));
  if (sn < 4) throw DomainError("detect_locking: flanking bands hold too few bins");
  const double det = sn * sff - sf * sf;
  double slope = 0.0, intercept = sp / sn;
  if (det > 1e-12 * sn * sff) {
    slope = (sn * sfp - sf * sp) / det;
    intercept = (sp - slope * sf) / sn;
  }

  LockingResult r;
  double best = -1e300;
  double best_f = center;
  const Eigen::Index k0 = bin_at_or_above(psd.freqs, w_lo);
  for (Eigen::Index k = k0; k < psd.freqs.size() && psd.freqs[k] <= w_hi; ++k) {
    const bool local_peak = k > 0 && k + 1 < smooth.size() && smooth[k] >= smooth[k - 1] &&
                            smooth[k] >= smooth[k + 1];
    if (!local_peak) continue;
    const double excess = smooth[k] - (intercept + slope * psd.freqs[k]);
    if (excess > best) {
      best = excess;
      best_f = psd.freqs[k];
    }
  }
  r.prominence = best > -1e299 ? best : 0.0;
  if (best >= threshold_db) {
    r.locked = false;
    r.beat_freq = best_f;
  }
  return r;
}

PersistenceHistogram persistence_histogram(const VectorXd& trace, double dt, double period,
                                           int t_bins, int i_bins,
                                           std::optional<std::pair<double, double>> range) {
  if (!(period > dt)) throw DomainError("persistence_histogram: period must exceed dt");
  if (t_bins < 1 || i_bins < 1) throw DomainError("persistence_histogram: bin counts must be >= 1");
  if (static_cast<double>(trace.size()) * dt < 2.0 * period)
    throw DomainError("persistence_histogram: trace must span at least two periods");

  PersistenceHistogram h;
  h.period = period;
  h.i_min = range ? range->first : trace.minCoeff();
  h.i_max = range ? range->second : trace.maxCoeff();
  if (!(h.i_max > h.i_min)) {
    // Flat trace: give the axis unit width around the value.
    h.i_min -= 0.5;
    h.i_max += 0.5;
  }
  h.counts = Eigen::MatrixXi::Zero(t_bins, i_bins);
  const double span = h.i_max - h.i_min;
  for (Eigen::Index k = 0; k < trace.size(); ++k) {
    const double t = static_cast<double>(k) * dt;
    const double phase = t - std::floor(t / period) * period;
    // Samples on a bin edge belong to the later bin; the nudge keeps rounding
    // in phase / period from pushing them back.
    const int tb = std::min(t_bins - 1, static_cast<int>(phase * t_bins / period + 1e-9));
    const double rel = (trace[k] - h.i_min) / span;
    const int ib = std::clamp(static_cast<int>(std::floor(rel * i_bins)), 0, i_bins - 1);
    ++h.counts(tb, ib);
  }
  return h;
}

void write_psd_csv(const std::filesystem::path& path, const PsdEstimate& psd) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << "freq_GHz,psd_dB\n" << std::setprecision(10);
  for (Eigen::Index k = 0; k < psd.freqs.size(); ++k) os << psd.freqs[k] << ',' << psd.psd[k] << '\n';
}

void write_persistence_csv(const std::filesystem::path& path, const PersistenceHistogram& h) {
  {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path.string() + " for writing");
    for (Eigen::Index t = 0; t < h.counts.rows(); ++t) {
      for (Eigen::Index i = 0; i < h.counts.cols(); ++i) os << (i ? "," : "") << h.counts(t, i);
      os << '\n';
    }
  }
  std::ofstream ax(path.string() + ".axes.csv");
  if (!ax) throw Error("cannot open axes sidecar for " + path.string());
  ax << "axis,index,center\n" << std::setprecision(12);
  const double dtb = h.period / static_cast<double>(h.counts.rows());
  for (Eigen::Index t = 0; t < h.counts.rows(); ++t) ax << "time_ns," << t << ',' << (t + 0.5) * dtb << '\n';
  const double dib = (h.i_max - h.i_min) / static_cast<double>(h.counts.cols());
  for (Eigen::Index i = 0; i < h.counts.cols(); ++i)
    ax << "intensity," << i << ',' << h.i_min + (i + 0.5) * dib << '\n';
}

}  // namespace tdrc
