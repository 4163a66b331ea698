#include "tdrc/harness.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace tdrc {

namespace {

// ---- JSON mapping ---------------------------------------------------------

// Reads fields of one JSON object, tracking which keys were consumed so that
// leftovers can be reported.
class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw UsageError("config: '" + where() + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;  // keep the default
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw UsageError("config: '" + join(key) + "' has the wrong type");
    }
  }

  Reader child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    static const Json empty = Json::object();
    return Reader(it == j_.end() ? empty : *it, join(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw UsageError("config: unknown key '" + join(it.key()) + "'");
  }

 private:
  std::string where() const { return path_.empty() ? "<root>" : path_; }
  std::string join(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Json laser_json(const LaserParams& p) {
  return {{"alpha", p.alpha},         {"g", p.g},
          {"n0", p.n0},               {"s", p.s},
          {"tau_p", p.tau_p},         {"tau_n", p.tau_n},
          {"bias_ratio", p.bias_ratio}, {"kappa_f", p.kappa_f},
          {"tau_delay", p.tau_delay}, {"phi_f", p.phi_f},
          {"kappa_inj", p.kappa_inj}, {"delta_f", p.delta_f},
          {"beta_sp", p.beta_sp},     {"photons_per_mw", p.photons_per_mw}};
}

void read_laser(Reader r, LaserParams& p) {
  r.get("alpha", p.alpha);
  r.get("g", p.g);
  r.get("n0", p.n0);
  r.get("s", p.s);
  r.get("tau_p", p.tau_p);
  r.get("tau_n", p.tau_n);
  r.get("bias_ratio", p.bias_ratio);
  r.get("kappa_f", p.kappa_f);
  r.get("tau_delay", p.tau_delay);
  r.get("phi_f", p.phi_f);
  r.get("kappa_inj", p.kappa_inj);
  r.get("delta_f", p.delta_f);
  r.get("beta_sp", p.beta_sp);
  r.get("photons_per_mw", p.photons_per_mw);
  r.finish();
}

const char* chunk_name(ChunkReadout c) { return c == ChunkReadout::first ? "first" : "last"; }

ChunkReadout chunk_from(const std::string& s) {
  if (s == "first") return ChunkReadout::first;
  if (s == "last") return ChunkReadout::last;
  throw UsageError("config: chunk_readout must be \"first\" or \"last\"");
}

}  // namespace

Json to_json(const ExperimentConfig& c) {
  Json j;
  j["laser"] = laser_json(c.laser);
  j["integrator"] = {{"dt", c.integrator.dt},
                     {"seed", c.integrator.seed},
                     {"detection_cutoff", c.integrator.detection_cutoff},
                     {"detection_noise", c.integrator.detection_noise},
                     {"scheme", "heun"},
                     {"noise", c.integrator.noise}};
  j["mask"] = {{"n_nodes", c.mask.n_nodes},       {"theta", c.mask.theta},
               {"repetition", c.mask.repetition}, {"chunk_repeats", c.mask.chunk_repeats},
               {"seed", c.mask.seed},             {"awg_rate", c.mask.awg_rate}};
  j["chunk_readout"] = chunk_name(c.chunk_readout);
  j["readout_offset"] = c.readout_offset;
  j["awg"] = {{"analog_cutoff", c.awg.analog_cutoff},
              {"filter_order", c.awg.filter_order},
              {"output_rate", c.awg.output_rate}};
  j["mzm"] = {{"v_pi", c.mzm.v_pi},
              {"swing", c.mzm.swing},
              {"input_lo", c.mzm.input_lo},
              {"input_hi", c.mzm.input_hi}};
  j["p_inj"] = c.p_inj;
  j["ridge"] = {{"lambda", c.ridge.lambda}, {"standardize", c.ridge.standardize}};
  j["split"] = {{"n_train", c.split.n_train},
                {"n_discard", c.split.n_discard},
                {"n_test", c.split.n_test},
                {"warmup", c.split.warmup}};
  j["sweep"] = {{"delta_f_start", c.sweep.delta_f_start},
                {"delta_f_stop", c.sweep.delta_f_stop},
                {"delta_f_step", c.sweep.delta_f_step},
                {"p_inj", c.sweep.p_inj},
                {"task", c.sweep.task}};
  j["probe"] = {{"segment_len", c.probe.segment_len},
                {"n_averages", c.probe.n_averages},
                {"lock_tol", c.probe.lock_tol},
                {"plateau_lo", c.probe.plateau.lo},
                {"plateau_hi", c.probe.plateau.hi}};
  j["seeds"] = {{"mask", c.seeds.mask}, {"noise", c.seeds.noise}, {"trial", c.seeds.trial}};
  j["trials"] = c.trials;
  j["identity_reservoir"] = c.identity_reservoir;
  j["dataset"] = c.dataset;
  j["output_dir"] = c.output_dir;
  return j;
}

ExperimentConfig config_from_json(const Json& j) {
  ExperimentConfig c;
  Reader root(j, "");
  read_laser(root.child("laser"), c.laser);
  {
    Reader r = root.child("integrator");
    r.get("dt", c.integrator.dt);
    r.get("seed", c.integrator.seed);
    r.get("detection_cutoff", c.integrator.detection_cutoff);
    r.get("detection_noise", c.integrator.detection_noise);
    std::string scheme = "heun";
    r.get("scheme", scheme);
    if (scheme != "heun") throw UsageError("config: integrator.scheme must be \"heun\"");
    r.get("noise", c.integrator.noise);
    r.finish();
  }
  {
    Reader r = root.child("mask");
    r.get("n_nodes", c.mask.n_nodes);
    r.get("theta", c.mask.theta);
    r.get("repetition", c.mask.repetition);
    r.get("chunk_repeats", c.mask.chunk_repeats);
    r.get("seed", c.mask.seed);
    r.get("awg_rate", c.mask.awg_rate);
    r.finish();
  }
  std::string chunk = chunk_name(c.chunk_readout);
  root.get("chunk_readout", chunk);
  c.chunk_readout = chunk_from(chunk);
  root.get("readout_offset", c.readout_offset);
  {
    Reader r = root.child("awg");
    r.get("analog_cutoff", c.awg.analog_cutoff);
    r.get("filter_order", c.awg.filter_order);
    r.get("output_rate", c.awg.output_rate);
    r.finish();
  }
  {
    Reader r = root.child("mzm");
    r.get("v_pi", c.mzm.v_pi);
    r.get("swing", c.mzm.swing);
    r.get("input_lo", c.mzm.input_lo);
    r.get("input_hi", c.mzm.input_hi);
    r.finish();
  }
  root.get("p_inj", c.p_inj);
  {
    Reader r = root.child("ridge");
    r.get("lambda", c.ridge.lambda);
    r.get("standardize", c.ridge.standardize);
    r.finish();
  }
  {
    Reader r = root.child("split");
    r.get("n_train", c.split.n_train);
    r.get("n_discard", c.split.n_discard);
    r.get("n_test", c.split.n_test);
    r.get("warmup", c.split.warmup);
    r.finish();
  }
  {
    Reader r = root.child("sweep");
    r.get("delta_f_start", c.sweep.delta_f_start);
    r.get("delta_f_stop", c.sweep.delta_f_stop);
    r.get("delta_f_step", c.sweep.delta_f_step);
    r.get("p_inj", c.sweep.p_inj);
    r.get("task", c.sweep.task);
    r.finish();
  }
  {
    Reader r = root.child("probe");
    r.get("segment_len", c.probe.segment_len);
    r.get("n_averages", c.probe.n_averages);
    r.get("lock_tol", c.probe.lock_tol);
    r.get("plateau_lo", c.probe.plateau.lo);
    r.get("plateau_hi", c.probe.plateau.hi);
    r.finish();
  }
  {
    Reader r = root.child("seeds");
    r.get("mask", c.seeds.mask);
    r.get("noise", c.seeds.noise);
    r.get("trial", c.seeds.trial);
    r.finish();
  }
  root.get("trials", c.trials);
  root.get("identity_reservoir", c.identity_reservoir);
  root.get("dataset", c.dataset);
  root.get("output_dir", c.output_dir);
  root.finish();
  return c;
}

std::string serialize_config(const ExperimentConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

ExperimentConfig parse_config(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // Byte offset -> line for the message.
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + static_cast<std::size_t>(
                              std::count(text.begin(), text.begin() + static_cast<long>(upto), '\n'));
    throw ParseError(std::string("config: ") + e.what(), line);
  }
  return config_from_json(j);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

void save_config(const std::filesystem::path& path, const ExperimentConfig& cfg) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << serialize_config(cfg);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  const auto walk = [&](auto&& self, const Json& j, const std::string& prefix) -> void {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
      if (it->is_object())
        self(self, *it, key);
      else
        keys.push_back(key);
    }
  };
  walk(walk, to_json(ExperimentConfig{}), "");
  return keys;
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw UsageError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  const auto keys = config_keys();
  if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
    std::string msg = "unknown config key '" + key + "'; valid keys:";
    for (const auto& k : keys) msg += "\n  " + k;
    throw UsageError(msg);
  }
  Json value;
  try {
    value = Json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    value = text;
  }
  Json j = to_json(cfg);
  std::string pointer = "/" + key;
  std::replace(pointer.begin(), pointer.end(), '.', '/');
  j[Json::json_pointer(pointer)] = value;
  cfg = config_from_json(j);
}

ExperimentConfig preset_config(const std::string& name, std::uint64_t master_seed) {
  ExperimentConfig c;
  c.seeds = SeedSet::from_master(master_seed);
  if (name == "theta-small") {
    c.mask = MaskSpec::theta_small();
  } else if (name == "theta-large") {
    c.mask = MaskSpec::theta_large();
  } else if (name == "full") {
    c.mask = MaskSpec::theta_small();
    c.trials = 256;
    c.probe.n_averages = 2048;
    c.sweep.delta_f_step = 1.0;
  } else {
    throw UsageError("unknown preset '" + name + "' (theta-small, theta-large, full)");
  }
  c.mask.seed = c.seeds.mask;
  c.integrator.seed = c.seeds.noise;
  return c;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const ExperimentConfig& cfg) {
  // Where results go does not change them.
  ExperimentConfig c = cfg;
  c.output_dir.clear();
  return hash_hex(fnv1a(serialize_config(c)));
}

std::uint64_t file_hash(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (is) {
    is.read(buf, sizeof buf);
    h = fnv1a(std::string_view(buf, static_cast<std::size_t>(is.gcount())), h);
  }
  return h;
}

// ---- dataset ----------------------------------------------------------------

VectorXd normalize_series(const std::vector<long>& values, int train) {
  if (values.empty()) throw DomainError("normalize_series: empty series");
  const auto n_fit = std::min<std::size_t>(values.size(), static_cast<std::size_t>(std::max(train, 1)));
  const auto [lo, hi] = std::minmax_element(values.begin(), values.begin() + static_cast<long>(n_fit));
  if (*hi == *lo) throw DomainError("normalize_series: training split is constant");
  VectorXd out(static_cast<Eigen::Index>(values.size()));
  const double scale = 1.0 / static_cast<double>(*hi - *lo);
  for (std::size_t i = 0; i < values.size(); ++i)
    out[static_cast<Eigen::Index>(i)] = static_cast<double>(values[i] - *lo) * scale;
  return out;
}

SantaFeSeries load_santafe(const std::filesystem::path& path, int train, int min_length) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open dataset " + path.string());
  SantaFeSeries s;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    const char* first = line.data() + b;
    const char* last = line.data() + e + 1;
    if (*first == '+') ++first;
    long v = 0;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last)
      throw ParseError("dataset " + path.string() + ": '" + line.substr(b, e + 1 - b) +
                           "' is not an integer",
                       lineno);
    s.values.push_back(v);
  }
  if (s.values.size() < static_cast<std::size_t>(min_length))
    throw DomainError("dataset " + path.string() + " has " + std::to_string(s.values.size()) +
                      " values; the prediction protocol needs at least " +
                      std::to_string(min_length));
  s.normalized = normalize_series(s.values, train);
  s.source = path.string();
  s.hash = file_hash(path);
  return s;
}

SantaFeSeries synthetic_santafe(std::size_t length, std::uint64_t seed, int train) {
  if (length < 2) throw DomainError("synthetic_santafe: length must be >= 2");
  // Solitary laser at 1.5x threshold with a short feedback loop and no
  // injection: irregular relaxation-oscillation pulsing, ~8 samples per
  // pulse at the chosen stride.
  LaserParams p = default_laser_params();
  p.bias_ratio = 1.5;
  p.kappa_f = 5.0;
  p.tau_delay = 0.5;
  p.kappa_inj = 0.0;
  p.beta_sp = 1e-6;
  p.photons_per_mw = 1.0;

  IntegratorConfig ic;
  ic.seed = derive_seed(seed, SeedStream::dataset);
  ic.detection_cutoff = 10.0;

  constexpr std::size_t kStride = 40;  // integration steps per series sample
  EncodedDrive drive;
  drive.dt = ic.dt;
  drive.levels = VectorXcd::Zero(static_cast<Eigen::Index>(length));
  drive.hold = kStride;
  drive.input_period = kStride * ic.dt;
  ReservoirState init = steady_state(p);
  init.field *= 1.01;
  const VectorXd trace = integrate(p, drive, ic, init);

  std::vector<double> sampled(length);
  for (std::size_t i = 0; i < length; ++i)
    sampled[i] = trace[static_cast<Eigen::Index>(i * kStride + kStride - 1)];
  const auto [lo, hi] = std::minmax_element(sampled.begin(), sampled.end());
  if (!(*hi > *lo)) throw DomainError("synthetic_santafe: generator produced a constant trace");

  SantaFeSeries s;
  s.values.resize(length);
  for (std::size_t i = 0; i < length; ++i)
    s.values[i] = std::lround(255.0 * (sampled[i] - *lo) / (*hi - *lo));
  s.normalized = normalize_series(s.values, train);
  s.source = "synthetic";
  std::string bytes;
  for (long v : s.values) bytes += std::to_string(v) + "\n";
  s.hash = fnv1a(bytes);
  return s;
}

std::optional<std::filesystem::path> find_santafe(const std::string& explicit_path) {
  namespace fs = std::filesystem;
  if (!explicit_path.empty()) return fs::path(explicit_path);
  std::vector<fs::path> candidates;
  if (const char* dir = std::getenv("TDRC_DATA_DIR")) candidates.push_back(fs::path(dir) / "santafe.txt");
  candidates.push_back(fs::path("data") / "santafe.txt");
#ifdef TDRC_SOURCE_DIR
  candidates.push_back(fs::path(TDRC_SOURCE_DIR) / "data" / "santafe.txt");
#endif
  for (const auto& c : candidates)
    if (fs::exists(c)) return c;
  return std::nullopt;
}

// ---- files ------------------------------------------------------------------

namespace {

static_assert(std::endian::native == std::endian::little,
              "trace files are written in host order; big-endian hosts need byte swaps");

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T take(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw ParseError("trace file truncated", 0);
  return v;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = {}) {
  std::ofstream os(path, mode);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  return os;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_trace_binary(const std::filesystem::path& path, const VectorXd& trace, double dt) {
  auto os = open_out(path, std::ios::binary);
  os.write("TDRC", 4);
  put<std::uint32_t>(os, 1);
  put<std::uint64_t>(os, static_cast<std::uint64_t>(trace.size()));
  put<double>(os, dt);
  put<std::uint64_t>(os, 0);
  os.write(reinterpret_cast<const char*>(trace.data()),
           static_cast<std::streamsize>(trace.size() * sizeof(double)));
}

TraceFile read_trace_binary(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "TDRC", 4) != 0) throw ParseError("not a TDRC trace file", 0);
  TraceFile t;
  t.version = take<std::uint32_t>(is);
  const auto n = take<std::uint64_t>(is);
  t.dt = take<double>(is);
  take<std::uint64_t>(is);
  t.samples.resize(static_cast<Eigen::Index>(n));
  is.read(reinterpret_cast<char*>(t.samples.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw ParseError("trace file truncated", 0);
  return t;
}

void write_trace_csv(const std::filesystem::path& path, const VectorXd& trace, double dt) {
  auto os = open_out(path);
  os << "time_ns,intensity\n";
  for (Eigen::Index i = 0; i < trace.size(); ++i)
    os << fmt(static_cast<double>(i) * dt) << ',' << fmt(trace[i]) << '\n';
}

void write_weights_csv(const std::filesystem::path& path, const VectorXd& w) {
  auto os = open_out(path);
  os << "index,value\n";
  for (Eigen::Index i = 0; i < w.size(); ++i) os << i << ',' << fmt(w[i]) << '\n';
}

}  // namespace tdrc
