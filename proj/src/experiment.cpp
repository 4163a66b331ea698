#include "tdrc/experiment.hpp"

#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

namespace tdrc {

SeedSet SeedSet::from_master(std::uint64_t master) {
  return {derive_seed(master, SeedStream::mask), derive_seed(master, SeedStream::noise),
          derive_seed(master, SeedStream::trial)};
}

std::vector<double> SweepGrid::delta_f_values() const {
  if (!(delta_f_step > 0.0)) throw DomainError("sweep: delta_f_step must be > 0");
  if (delta_f_stop < delta_f_start) throw DomainError("sweep: delta_f_stop < delta_f_start");
  std::vector<double> v;
  const auto n = static_cast<long>(
      std::floor((delta_f_stop - delta_f_start) / delta_f_step + 1e-3));
  // Computed from the index so values do not accumulate rounding.
  for (long i = 0; i <= n; ++i) v.push_back(delta_f_start + static_cast<double>(i) * delta_f_step);
  return v;
}

MaskSpec ExperimentConfig::mask_spec() const {
  MaskSpec m = mask;
  m.seed = seeds.mask;
  return m;
}

IntegratorConfig ExperimentConfig::integrator_config(std::uint64_t noise_seed) const {
  IntegratorConfig c = integrator;
  c.seed = noise_seed;
  return c;
}

void ExperimentConfig::validate() const {
  laser.validate();
  integrator.validate();
  mask_spec().validate();
  awg.validate();
  mzm.validate();
  split.validate();
  if (!(p_inj >= 0.0)) throw DomainError("p_inj must be >= 0");
  if (!(ridge.lambda >= 0.0)) throw DomainError("ridge.lambda must be >= 0");
  if (trials < 1) throw DomainError("trials must be >= 1");
  if (integrator.dt > mask.theta / 8.0 * (1.0 + 1e-9))
    throw DomainError("integrator dt must resolve a virtual node (dt <= theta/8)");
  upsample_factor(mask.awg_rate, integrator.dt);
}

EncodedDrive build_task_drive(const ExperimentConfig& cfg, const VectorXd& inputs,
                              const VectorXd& mask) {
  const MaskSpec spec = cfg.mask_spec();
  const VectorXd staircase = encode(inputs, mask, spec);
  const VectorXd filtered = bandlimit(staircase, cfg.awg);
  return synthesize_drive(filtered, cfg.p_inj, cfg.mzm, cfg.integrator, spec.awg_rate,
                          static_cast<std::size_t>(spec.symbol_samples()));
}

EncodedDrive build_probe_drive(const ExperimentConfig& cfg, std::size_t min_samples) {
  const std::size_t factor = upsample_factor(cfg.mask.awg_rate, cfg.integrator.dt);
  const std::size_t n_awg = (min_samples + factor - 1) / factor;
  std::mt19937_64 rng(derive_seed(cfg.seeds.trial, SeedStream::probe));
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  VectorXd values(static_cast<Eigen::Index>(n_awg));
  for (auto& v : values) v = uniform(rng);
  const VectorXd filtered = bandlimit(values, cfg.awg);
  return synthesize_drive(filtered, cfg.p_inj, cfg.mzm, cfg.integrator, cfg.mask.awg_rate, 0);
}

VectorXd trial_average(const ExperimentConfig& cfg, const EncodedDrive& drive, int n_trials,
                       std::uint64_t noise_seed) {
  if (n_trials < 1) throw DomainError("trial_average: n_trials must be >= 1");
  const ReservoirState init = steady_state(cfg.laser);
  if (n_trials == 1) return integrate(cfg.laser, drive, cfg.integrator_config(noise_seed), init);
  VectorXd sum = VectorXd::Zero(static_cast<Eigen::Index>(drive.size()));
  for (int k = 0; k < n_trials; ++k)
    sum += integrate(cfg.laser, drive,
                     cfg.integrator_config(derive_seed(noise_seed, SeedStream::trial,
                                                       static_cast<std::uint64_t>(k))),
                     init);
  return sum / static_cast<double>(n_trials);
}

namespace {

// trial_average restricted to ascending sample indices.
VectorXd trial_average_at(const ExperimentConfig& cfg, const EncodedDrive& drive, int n_trials,
                          std::uint64_t noise_seed, std::span<const std::size_t> indices) {
  if (n_trials < 1) throw DomainError("trial_average: n_trials must be >= 1");
  const ReservoirState init = steady_state(cfg.laser);
  if (n_trials == 1)
    return integrate_at(cfg.laser, drive, cfg.integrator_config(noise_seed), init, indices);
  VectorXd sum = VectorXd::Zero(static_cast<Eigen::Index>(indices.size()));
  for (int k = 0; k < n_trials; ++k)
    sum += integrate_at(cfg.laser, drive,
                        cfg.integrator_config(derive_seed(noise_seed, SeedStream::trial,
                                                          static_cast<std::uint64_t>(k))),
                        init, indices);
  return sum / static_cast<double>(n_trials);
}

// Node readings without materializing the trace.
StateMatrix reservoir_states(const ExperimentConfig& cfg, const EncodedDrive& drive,
                             std::uint64_t noise_seed, TaskResult& diag) {
  const NodeSampling plan = node_sample_indices(cfg.mask_spec(), cfg.integrator, drive.markers,
                                                cfg.readout_offset, cfg.chunk_readout,
                                                drive.size());
  std::vector<std::size_t> order(plan.index.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return plan.index[a] < plan.index[b]; });
  std::vector<std::size_t> sorted(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) sorted[i] = plan.index[order[i]];

  const VectorXd values = trial_average_at(cfg, drive, cfg.trials, noise_seed, sorted);
  VectorXd readings(values.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    readings[static_cast<Eigen::Index>(order[i])] = values[static_cast<Eigen::Index>(i)];
  diag.trace_mean = readings.mean();
  diag.trace_std = std::sqrt((readings.array() - diag.trace_mean).square().mean());
  return assemble_states(readings, plan);
}

}  // namespace

TaskRows split_rows(const MatrixXd& X, const VectorXd& series, const TaskSplit& split) {
  split.validate();
  const int n = split.inputs();
  if (X.rows() < n) throw DomainError("split_rows: state matrix has fewer rows than inputs");
  if (series.size() < n + 1)
    throw DomainError("split_rows: series needs " + std::to_string(n + 1) + " values");
  TaskRows r;
  const int n_fit = split.n_train - split.warmup;
  r.train_X = X.middleRows(split.warmup, n_fit);
  r.train_y = series.segment(split.warmup + 1, n_fit);
  const int test0 = split.n_train + split.n_discard;
  r.test_X = X.middleRows(test0, split.n_test);
  r.test_y = series.segment(test0 + 1, split.n_test);
  return r;
}

TaskResult run_task(const VectorXd& series, const ExperimentConfig& cfg,
                    std::uint64_t noise_seed) {
  cfg.validate();
  const int n = cfg.split.inputs();
  if (series.size() < n + 1)
    throw DomainError("run_task: series has " + std::to_string(series.size()) +
                      " values; the protocol needs " + std::to_string(n + 1));
  const MaskSpec spec = cfg.mask_spec();
  const VectorXd mask = make_mask(spec);
  const VectorXd inputs = series.head(n);

  TaskResult result;
  MatrixXd X;
  if (cfg.identity_reservoir) {
    X = with_bias(MatrixXd(inputs * mask.transpose()));
  } else {
    const EncodedDrive drive = build_task_drive(cfg, inputs, mask);
    X = reservoir_states(cfg, drive, noise_seed, result).X;
  }

  const TaskRows rows = split_rows(X, series, cfg.split);
  result.weights = train_ridge(rows.train_X, rows.train_y, cfg.ridge, true);
  result.nmse_train = nmse(predict(rows.train_X, result.weights), rows.train_y);
  result.test_prediction = predict(rows.test_X, result.weights);
  result.test_target = rows.test_y;
  result.nmse_test = nmse(result.test_prediction, rows.test_y);
  const int test0 = cfg.split.n_train + cfg.split.n_discard;
  result.nmse_persistence = nmse(series.segment(test0, cfg.split.n_test), rows.test_y);
  return result;
}

TaskResult run_task(const VectorXd& series, const ExperimentConfig& cfg) {
  return run_task(series, cfg, cfg.seeds.noise);
}

ProbeResult probe_bandwidth(const ExperimentConfig& cfg, std::uint64_t noise_seed) {
  cfg.validate();
  const auto L = static_cast<std::size_t>(cfg.probe.segment_len);
  const std::size_t needed = (static_cast<std::size_t>(cfg.probe.n_averages) + 1) * L / 2;
  const EncodedDrive drive = build_probe_drive(cfg, needed);
  ProbeResult r;
  r.trace = trial_average(cfg, drive, cfg.trials, noise_seed);
  r.psd = estimate_psd(r.trace, cfg.integrator.dt, cfg.probe.segment_len, cfg.probe.n_averages);
  const Bandwidth10dB bw = bandwidth_10db(r.psd, cfg.probe.plateau);
  const LockingResult lock = detect_locking(r.psd, cfg.laser.delta_f, cfg.probe.lock_tol);
  r.bandwidth = {bw.bandwidth, bw.reference, bw.saturated, lock.locked, lock.beat_freq};
  return r;
}

std::uint64_t sweep_point_seed(const SeedSet& seeds, double delta_f, double p_inj) {
  return derive_seed(derive_seed(seeds.noise, SeedStream::sweep_point,
                                 std::bit_cast<std::uint64_t>(delta_f)),
                     SeedStream::sweep_point, std::bit_cast<std::uint64_t>(p_inj));
}

namespace {

SweepRow evaluate_point(const ExperimentConfig& base, double delta_f, double p_inj,
                        const std::optional<VectorXd>& task_series) {
  SweepRow row;
  row.delta_f = delta_f;
  row.p_inj = p_inj;
  try {
    ExperimentConfig cfg = base;
    cfg.laser.delta_f = delta_f;
    cfg.p_inj = p_inj;
    const std::uint64_t seed = sweep_point_seed(cfg.seeds, delta_f, p_inj);
    const ProbeResult probe = probe_bandwidth(cfg, seed);
    row.bandwidth = probe.bandwidth.bandwidth;
    row.saturated = probe.bandwidth.saturated;
    row.locked = probe.bandwidth.locked;
    row.beat_freq = probe.bandwidth.beat_freq;
    if (task_series)
      row.nmse = run_task(*task_series, cfg, derive_seed(seed, SeedStream::noise)).nmse_test;
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (char& c : msg)
      if (c == ',' || c == '\n') c = ';';
    row.status = "error: " + msg;
  }
  return row;
}

}  // namespace

SweepResult run_sweep(const ExperimentConfig& cfg, const std::vector<double>& delta_f,
                      const std::vector<double>& p_inj,
                      const std::optional<VectorXd>& task_series, unsigned workers) {
  if (delta_f.empty() || p_inj.empty()) throw DomainError("run_sweep: empty grid");
  struct Point {
    double delta_f, p_inj;
  };
  std::vector<Point> points;
  for (double p : p_inj)
    for (double d : delta_f) points.push_back({d, p});

  SweepResult result;
  result.rows.resize(points.size());
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(points.size()));

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++)
      result.rows[i] = evaluate_point(cfg, points[i].delta_f, points[i].p_inj, task_series);
  };
  std::vector<std::jthread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  pool.clear();
  return result;
}

void write_sweep_csv(const std::filesystem::path& path, const SweepResult& result) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << "delta_f_GHz,p_inj_mW,bandwidth_GHz,locked,nmse,status\n";
  char buf[64];
  for (const auto& r : result.rows) {
    auto num = [&](double v) {
      std::snprintf(buf, sizeof buf, "%.10g", v);
      return std::string(buf);
    };
    os << num(r.delta_f) << ',' << num(r.p_inj) << ',' << num(r.bandwidth) << ','
       << (r.locked ? 1 : 0) << ',' << (r.nmse ? num(*r.nmse) : std::string()) << ','
       << r.status << '\n';
  }
}

}  // namespace tdrc
