#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tdrc/analysis.hpp"
#include "tdrc/input.hpp"
#include "tdrc/laser.hpp"
#include "tdrc/readout.hpp"

namespace tdrc {

struct SeedSet {
  std::uint64_t mask = 0;
  std::uint64_t noise = 0;
  std::uint64_t trial = 0;

  /// All streams expanded from one master seed.
  static SeedSet from_master(std::uint64_t master);
  bool operator==(const SeedSet&) const = default;
};

/// White-noise probe used for the response-bandwidth measurement.
struct ProbeSpec {
  int segment_len = 1 << 17;  // integration samples per Welch segment
  int n_averages = 64;
  double lock_tol = 1.5;  // GHz
  PlateauBand plateau{};

  bool operator==(const ProbeSpec& o) const {
    return segment_len == o.segment_len && n_averages == o.n_averages &&
           lock_tol == o.lock_tol && plateau.lo == o.plateau.lo && plateau.hi == o.plateau.hi;
  }
};

struct SweepGrid {
  double delta_f_start = -40.0;
  double delta_f_stop = 10.0;
  double delta_f_step = 2.0;
  std::vector<double> p_inj{0.1, 1.0};
  bool task = false;  // also run the prediction task at each point

  /// start, start+step, ... up to stop inclusive (within step/1000).
  std::vector<double> delta_f_values() const;
  bool operator==(const SweepGrid&) const = default;
};

struct ExperimentConfig {
  LaserParams laser = default_laser_params();
  IntegratorConfig integrator{};
  MaskSpec mask = MaskSpec::theta_small();
  ChunkReadout chunk_readout = ChunkReadout::last;
  double readout_offset = 1.0;
  AwgModel awg{};
  MzmConfig mzm{};
  double p_inj = 1.0;  // mW, average injected power
  RidgeConfig ridge{};
  TaskSplit split{};
  SweepGrid sweep{};
  ProbeSpec probe{};
  SeedSet seeds = SeedSet::from_master(1);
  int trials = 1;  // noisy repetitions averaged per recorded trace
  bool identity_reservoir = false;  // diagnostic: node response = masked input
  std::string dataset;              // Santa Fe file; empty selects search/fallback
  std::string output_dir = "out";

  MaskSpec mask_spec() const;
  IntegratorConfig integrator_config(std::uint64_t noise_seed) const;
  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

/// Task input -> injected field on the integration grid.
EncodedDrive build_task_drive(const ExperimentConfig& cfg, const VectorXd& inputs,
                              const VectorXd& mask);

/// Uniform random AWG values (no mask), band-limited and modulated; at least
/// `min_samples` integration samples long.
EncodedDrive build_probe_drive(const ExperimentConfig& cfg, std::size_t min_samples);

/// Samplewise mean of `n_trials` integrations of the same drive with noise
/// streams derived from `noise_seed`; a single trial uses `noise_seed` as is.
VectorXd trial_average(const ExperimentConfig& cfg, const EncodedDrive& drive, int n_trials,
                       std::uint64_t noise_seed);

struct TaskResult {
  double nmse_test = 0.0;
  double nmse_train = 0.0;
  double nmse_persistence = 0.0;  // naive y(t+1) = y(t) on the test window
  VectorXd weights;
  VectorXd test_prediction;
  VectorXd test_target;
  // Statistics of the node readings (not of the full trace).
  double trace_mean = 0.0;
  double trace_std = 0.0;
};

/// Santa Fe one-step-ahead protocol on a normalized series: the first
/// split.inputs() values drive the reservoir, rows warmup..n_train-1 train
/// on y(t+1), the next n_discard are skipped and the following n_test are
/// scored.
TaskResult run_task(const VectorXd& series, const ExperimentConfig& cfg,
                    std::uint64_t noise_seed);
TaskResult run_task(const VectorXd& series, const ExperimentConfig& cfg);

/// Training and test rows of a state matrix against one-step targets.
struct TaskRows {
  MatrixXd train_X, test_X;
  VectorXd train_y, test_y;
};
TaskRows split_rows(const MatrixXd& X, const VectorXd& series, const TaskSplit& split);

struct ProbeResult {
  PsdEstimate psd;
  BandwidthResult bandwidth;
  VectorXd trace;
};

ProbeResult probe_bandwidth(const ExperimentConfig& cfg, std::uint64_t noise_seed);

struct SweepRow {
  double delta_f = 0.0;
  double p_inj = 0.0;
  double bandwidth = 0.0;
  bool saturated = false;
  bool locked = false;
  std::optional<double> beat_freq;
  std::optional<double> nmse;
  std::string status = "ok";

  bool operator==(const SweepRow&) const = default;
};

struct SweepResult {
  std::vector<SweepRow> rows;
};

/// Noise seed of one grid point; depends only on the point's coordinates.
std::uint64_t sweep_point_seed(const SeedSet& seeds, double delta_f, double p_inj);

/// Evaluates every (delta_f, p_inj) pair with `workers` threads (0 = hardware
/// concurrency). Rows are ordered p_inj-major, then delta_f, whatever the
/// completion order. Per-point failures land in the row's status.
SweepResult run_sweep(const ExperimentConfig& cfg, const std::vector<double>& delta_f,
                      const std::vector<double>& p_inj,
                      const std::optional<VectorXd>& task_series, unsigned workers = 0);

void write_sweep_csv(const std::filesystem::path& path, const SweepResult& result);

}  // namespace tdrc
