#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "tdrc/harness.hpp"

namespace tdrc {

namespace {

namespace fs = std::filesystem;

struct CommonOptions {
  std::string config_path;
  std::string preset;
  std::optional<std::uint64_t> master_seed;
  std::vector<std::string> overrides;
  std::string output_dir;
};

struct DataOptions {
  std::string path;
  bool synthetic = false;
};

struct TraceOptions {
  std::string format = "none";  // none, bin, csv
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config_path, "JSON config file (default: preset)");
  cmd->add_option("--preset", o.preset, "Start from a preset: theta-small, theta-large, full");
  cmd->add_option("--seed", o.master_seed, "Master seed; replaces all seeds in the config");
  cmd->add_option("--set", o.overrides, "Override a config field, e.g. --set laser.delta_f=-31")
      ->take_all();
  cmd->add_option("-o,--output-dir", o.output_dir, "Output directory (overrides output_dir)");
}

void add_data(CLI::App* cmd, DataOptions& d) {
  cmd->add_option("--data", d.path, "Santa Fe file, one integer per line");
  cmd->add_flag("--synthetic", d.synthetic, "Use the built-in chaotic series");
}

void add_trace(CLI::App* cmd, TraceOptions& t) {
  cmd->add_option("--trace-format", t.format, "Also export the trace: none, bin or csv")
      ->check(CLI::IsMember({"none", "bin", "csv"}));
}

ExperimentConfig resolve_config(const CommonOptions& o) {
  if (!o.config_path.empty() && !o.preset.empty())
    throw UsageError("--config and --preset are mutually exclusive");
  ExperimentConfig cfg = o.config_path.empty()
                             ? preset_config(o.preset.empty() ? "theta-small" : o.preset)
                             : load_config(o.config_path);
  if (o.master_seed) {
    cfg.seeds = SeedSet::from_master(*o.master_seed);
    cfg.mask.seed = cfg.seeds.mask;
    cfg.integrator.seed = cfg.seeds.noise;
  }
  for (const auto& s : o.overrides) apply_override(cfg, s);
  if (!o.output_dir.empty()) cfg.output_dir = o.output_dir;
  cfg.validate();
  return cfg;
}

SantaFeSeries resolve_dataset(const ExperimentConfig& cfg, const DataOptions& d) {
  const auto needed = static_cast<std::size_t>(std::max(cfg.split.inputs() + 1, kProtocolLength));
  if (!d.synthetic) {
    if (auto path = find_santafe(d.path.empty() ? cfg.dataset : d.path))
      return load_santafe(*path, cfg.split.n_train, static_cast<int>(needed));
    std::cerr << "tdrc: no Santa Fe file found; using the synthetic series\n";
  }
  return synthetic_santafe(needed, cfg.seeds.trial, cfg.split.n_train);
}

// Collects output files and writes the manifest last.
class Outputs {
 public:
  Outputs(const ExperimentConfig& cfg, std::string command)
      : cfg_(cfg), command_(std::move(command)), dir_(cfg.output_dir),
        start_(std::chrono::steady_clock::now()) {
    fs::create_directories(dir_);
  }

  fs::path path(const std::string& name) {
    files_.push_back(name);
    return dir_ / name;
  }
  void dataset(const SantaFeSeries& s) { dataset_ = Json{{"source", s.source}, {"hash", hash_hex(s.hash)}}; }
  void note(const std::string& key, Json value) { extra_[key] = std::move(value); }

  void finish() {
    Json m;
    m["tool"] = "tdrc";
    m["version"] = kVersion;
    m["command"] = command_;
    m["config_hash"] = config_hash(cfg_);
    m["seeds"] = {{"mask", cfg_.seeds.mask}, {"noise", cfg_.seeds.noise}, {"trial", cfg_.seeds.trial}};
    m["dataset"] = dataset_;
    Json files = Json::array();
    for (const auto& f : files_) files.push_back({{"file", f}, {"hash", hash_hex(file_hash(dir_ / f))}});
    m["outputs"] = files;
    for (auto it = extra_.begin(); it != extra_.end(); ++it) m[it.key()] = it.value();
    m["wall_time_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::ofstream os(dir_ / "manifest.json");
    if (!os) throw Error("cannot write manifest in " + dir_.string());
    os << m.dump(2) << "\n";
  }

 private:
  const ExperimentConfig& cfg_;
  std::string command_;
  fs::path dir_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::string> files_;
  Json dataset_ = nullptr;
  Json extra_ = Json::object();
};

void write_json(const fs::path& path, const Json& j) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << j.dump(2) << "\n";
}

void export_trace(Outputs& out, const TraceOptions& t, const VectorXd& trace, double dt) {
  if (t.format == "bin") write_trace_binary(out.path("trace.bin"), trace, dt);
  if (t.format == "csv") write_trace_csv(out.path("trace.csv"), trace, dt);
}

Json seeds_json(const SeedSet& s) {
  return {{"mask", s.mask}, {"noise", s.noise}, {"trial", s.trial}};
}

// ---- subcommands ------------------------------------------------------------

void cmd_gen_config(const CommonOptions& o, const std::string& file) {
  const ExperimentConfig cfg = resolve_config(o);
  if (file.empty())
    std::cout << serialize_config(cfg);
  else
    save_config(file, cfg);
}

void cmd_run_task(const CommonOptions& o, const DataOptions& d, const TraceOptions& t,
                  int trace_symbols) {
  const ExperimentConfig cfg = resolve_config(o);
  const SantaFeSeries data = resolve_dataset(cfg, d);
  Outputs out(cfg, "run-task");
  out.dataset(data);
  const TaskResult r = run_task(data.normalized, cfg);

  write_weights_csv(out.path("weights.csv"), r.weights);
  {
    std::ofstream os(out.path("predictions.csv"));
    os << "index,target,prediction\n";
    char buf[96];
    const int test0 = cfg.split.n_train + cfg.split.n_discard + 1;
    for (Eigen::Index i = 0; i < r.test_target.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g\n", static_cast<long>(test0 + i),
                    r.test_target[i], r.test_prediction[i]);
      os << buf;
    }
  }
  write_json(out.path("task_report.json"),
             {{"config_hash", config_hash(cfg)},
              {"seeds", seeds_json(cfg.seeds)},
              {"dataset", {{"source", data.source}, {"hash", hash_hex(data.hash)}}},
              {"n_train", cfg.split.n_train - cfg.split.warmup},
              {"n_test", cfg.split.n_test},
              {"nmse_train", r.nmse_train},
              {"nmse_test", r.nmse_test},
              {"nmse_persistence", r.nmse_persistence}});

  if (t.format != "none") {
    // A drive prefix yields the same trace prefix, so re-run only that.
    const int n = std::min(trace_symbols, cfg.split.inputs());
    const VectorXd mask = make_mask(cfg.mask_spec());
    const EncodedDrive drive = build_task_drive(cfg, data.normalized.head(n), mask);
    export_trace(out, t, trial_average(cfg, drive, cfg.trials, cfg.seeds.noise), cfg.integrator.dt);
  }
  out.finish();
  std::printf("nmse_test=%.6g nmse_train=%.6g persistence=%.6g\n", r.nmse_test, r.nmse_train,
              r.nmse_persistence);
}

void cmd_sweep(const CommonOptions& o, const DataOptions& d, bool task, unsigned workers) {
  ExperimentConfig cfg = resolve_config(o);
  if (task) cfg.sweep.task = true;
  Outputs out(cfg, "sweep");
  std::optional<VectorXd> series;
  if (cfg.sweep.task) {
    const SantaFeSeries data = resolve_dataset(cfg, d);
    out.dataset(data);
    series = data.normalized;
  }
  const SweepResult r = run_sweep(cfg, cfg.sweep.delta_f_values(), cfg.sweep.p_inj, series, workers);
  write_sweep_csv(out.path("sweep.csv"), r);
  out.finish();
  std::size_t failed = 0;
  for (const auto& row : r.rows) failed += row.status != "ok";
  std::printf("%zu rows, %zu failed\n", r.rows.size(), failed);
}

void cmd_bandwidth(const CommonOptions& o, const TraceOptions& t) {
  const ExperimentConfig cfg = resolve_config(o);
  Outputs out(cfg, "bandwidth");
  const ProbeResult r = probe_bandwidth(cfg, cfg.seeds.noise);
  write_psd_csv(out.path("psd.csv"), r.psd);
  Json j = {{"delta_f_GHz", cfg.laser.delta_f},
            {"p_inj_mW", cfg.p_inj},
            {"bandwidth_GHz", r.bandwidth.bandwidth},
            {"reference_dB", r.bandwidth.reference_level},
            {"saturated", r.bandwidth.saturated},
            {"locked", r.bandwidth.locked},
            {"beat_GHz", r.bandwidth.beat_freq ? Json(*r.bandwidth.beat_freq) : Json(nullptr)}};
  write_json(out.path("bandwidth.json"), j);
  export_trace(out, t, r.trace, cfg.integrator.dt);
  out.finish();
  std::printf("bandwidth=%.4g GHz%s %s\n", r.bandwidth.bandwidth,
              r.bandwidth.saturated ? " (saturated)" : "", r.bandwidth.locked ? "locked" : "unlocked");
}

void cmd_spectra(const CommonOptions& o, const DataOptions& d, const TraceOptions& t,
                 int symbols) {
  const ExperimentConfig cfg = resolve_config(o);
  const SantaFeSeries data = resolve_dataset(cfg, d);
  Outputs out(cfg, "spectra");
  out.dataset(data);
  const int n = std::min<int>(symbols, static_cast<int>(data.normalized.size()));
  const EncodedDrive drive = build_task_drive(cfg, data.normalized.head(n), make_mask(cfg.mask_spec()));
  const VectorXd trace = trial_average(cfg, drive, cfg.trials, cfg.seeds.noise);
  const long L = cfg.probe.segment_len;
  if (trace.size() < L)
    throw DomainError("spectra: " + std::to_string(n) + " symbols are shorter than one segment");
  const int segments = static_cast<int>((trace.size() - L) / (L / 2) + 1);
  const PsdEstimate psd = estimate_psd(trace, cfg.integrator.dt, static_cast<int>(L), segments);
  write_psd_csv(out.path("psd.csv"), psd);
  export_trace(out, t, trace, cfg.integrator.dt);
  out.note("segments", segments);
  out.finish();
  std::printf("%d segments, resolution %.4g GHz\n", segments, psd.resolution);
}

void cmd_persistence(const CommonOptions& o, const TraceOptions& t, double input, int symbols,
                     double period, int t_bins, int i_bins) {
  const ExperimentConfig cfg = resolve_config(o);
  Outputs out(cfg, "persistence");
  const MaskSpec spec = cfg.mask_spec();
  // A constant input repeats the masked chunk, so every chunk should give
  // the same response if the reservoir is consistent.
  const VectorXd inputs = VectorXd::Constant(symbols, input);
  const EncodedDrive drive = build_task_drive(cfg, inputs, make_mask(spec));
  VectorXd trace = trial_average(cfg, drive, cfg.trials, cfg.seeds.noise);
  if (!(period > 0.0)) period = spec.n_nodes * spec.repetition / spec.awg_rate;
  // Skip the first symbol to leave the start-up transient out.
  const auto skip = static_cast<Eigen::Index>(drive.markers.size() > 1 ? drive.markers[1] : 0);
  trace = trace.tail(trace.size() - skip).eval();
  const PersistenceHistogram h = persistence_histogram(trace, cfg.integrator.dt, period, t_bins, i_bins);
  write_persistence_csv(out.path("persistence.csv"), h);
  out.path("persistence.csv.axes.csv");
  export_trace(out, t, trace, cfg.integrator.dt);
  out.note("period_ns", period);
  out.finish();
  std::printf("%ld samples folded at %.6g ns\n", h.total(), period);
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e)) return 2;
  if (dynamic_cast<const ParseError*>(&e)) return 3;
  if (dynamic_cast<const IntegrationBlowup*>(&e)) return 5;
  if (dynamic_cast<const DomainError*>(&e) || dynamic_cast<const IndexError*>(&e) ||
      dynamic_cast<const RankDeficiencyError*>(&e))
    return 4;
  return 1;
}

const char* kind_of(int code) {
  switch (code) {
    case 2: return "usage";
    case 3: return "parse";
    case 4: return "domain";
    case 5: return "integration_blowup";
    default: return "runtime";
  }
}

void report_error(const std::string& kind, const std::string& message, int code,
                  const std::string& command, const std::string& dir) {
  const Json rec = {{"error", kind}, {"message", message}, {"exit_code", code}, {"command", command}};
  std::cerr << rec.dump() << "\n";
  if (dir.empty()) return;
  std::error_code ec;
  fs::create_directories(dir, ec);
  std::ofstream os(fs::path(dir) / "error.json");
  if (os) os << rec.dump(2) << "\n";
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Time-delay reservoir computer simulator"};
  app.name("tdrc");
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  CommonOptions common;
  DataOptions data;
  TraceOptions trace;

  auto* gen = app.add_subcommand("gen-config", "Write a config file (or print it)");
  add_common(gen, common);
  std::string config_out;
  gen->add_option("--file", config_out, "Destination file (default: stdout)");

  auto* task = app.add_subcommand("run-task", "Santa Fe one-step-ahead prediction");
  add_common(task, common);
  add_data(task, data);
  add_trace(task, trace);
  int trace_symbols = 16;
  task->add_option("--trace-symbols", trace_symbols, "Input symbols covered by the trace export")
      ->check(CLI::PositiveNumber);

  auto* sweep = app.add_subcommand("sweep", "Bandwidth and locking over the detuning/power grid");
  add_common(sweep, common);
  add_data(sweep, data);
  bool sweep_task = false;
  unsigned workers = 0;
  sweep->add_flag("--task", sweep_task, "Also run the prediction task at every point");
  sweep->add_option("--workers", workers, "Worker threads (0 = all cores)");

  auto* bw = app.add_subcommand("bandwidth", "Response bandwidth and locking at one point");
  add_common(bw, common);
  add_trace(bw, trace);

  auto* spectra = app.add_subcommand("spectra", "Power spectrum of the response to masked input");
  add_common(spectra, common);
  add_data(spectra, data);
  add_trace(spectra, trace);
  int spectra_symbols = 64;
  spectra->add_option("--symbols", spectra_symbols, "Input symbols to simulate")
      ->check(CLI::PositiveNumber);

  auto* persist = app.add_subcommand("persistence", "Folded-trace histogram for a repeated input");
  add_common(persist, common);
  add_trace(persist, trace);
  double p_input = 0.5, p_period = 0.0;
  int p_symbols = 16, t_bins = 256, i_bins = 128;
  persist->add_option("--input", p_input, "Constant input value");
  persist->add_option("--symbols", p_symbols, "Input symbols to simulate")->check(CLI::Range(2, 1 << 20));
  persist->add_option("--period", p_period, "Fold period in ns (default: one mask chunk)");
  persist->add_option("--t-bins", t_bins, "Time bins")->check(CLI::PositiveNumber);
  persist->add_option("--i-bins", i_bins, "Intensity bins")->check(CLI::PositiveNumber);

  std::string command;
  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    report_error("usage", e.what(), 2, "", "");
    return 2;
  }

  std::string out_dir = common.output_dir;
  try {
    const auto* sub = app.get_subcommands().front();
    command = sub->get_name();
    if (out_dir.empty() && command != "gen-config") out_dir = resolve_config(common).output_dir;
    if (sub == gen)
      cmd_gen_config(common, config_out);
    else if (sub == task)
      cmd_run_task(common, data, trace, trace_symbols);
    else if (sub == sweep)
      cmd_sweep(common, data, sweep_task, workers);
    else if (sub == bw)
      cmd_bandwidth(common, trace);
    else if (sub == spectra)
      cmd_spectra(common, data, trace, spectra_symbols);
    else
      cmd_persistence(common, trace, p_input, p_symbols, p_period, t_bins, i_bins);
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    report_error(kind_of(code), e.what(), code, command, out_dir);
    return code;
  }
  return 0;
}

}  // namespace tdrc
