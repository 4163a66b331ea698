#include "tdrc/readout.hpp"

#include <cmath>

namespace tdrc {

void TaskSplit::validate() const {
  if (n_train < 1 || n_discard < 0 || n_test < 2 || warmup < 0)
    throw DomainError("split: need n_train >= 1, n_test >= 2, n_discard/warmup >= 0");
  if (warmup >= n_train) throw DomainError("split: warmup must be shorter than n_train");
}

NodeSampling node_sample_indices(const MaskSpec& spec, const IntegratorConfig& cfg,
                                 std::span<const std::size_t> symbol_markers,
                                 double readout_offset, ChunkReadout chunk,
                                 std::size_t trace_len) {
  spec.validate();
  const double steps_per_node = spec.theta / cfg.dt;
  if (steps_per_node < 2.0 - 1e-9)
    throw DomainError("sample_nodes: theta must span at least two integration steps");
  if (!std::isfinite(readout_offset)) throw DomainError("sample_nodes: non-finite readout offset");
  const int c = chunk == ChunkReadout::last ? spec.chunk_repeats - 1 : 0;

  NodeSampling s;
  s.rows = static_cast<Eigen::Index>(symbol_markers.size());
  s.nodes = spec.n_nodes;
  s.node_times.resize(s.nodes);
  std::vector<long> offsets(static_cast<std::size_t>(s.nodes));
  for (Eigen::Index j = 0; j < s.nodes; ++j) {
    const double slot = static_cast<double>(c) * static_cast<double>(s.nodes) +
                        static_cast<double>(j) + readout_offset;
    s.node_times[j] = slot * spec.theta;
    offsets[static_cast<std::size_t>(j)] =
        static_cast<long>(std::ceil(slot * steps_per_node - 1e-9)) - 1;
  }
  const auto len = static_cast<long>(trace_len);
  s.index.reserve(static_cast<std::size_t>(s.rows * s.nodes));
  for (Eigen::Index k = 0; k < s.rows; ++k) {
    const auto start = static_cast<long>(symbol_markers[static_cast<std::size_t>(k)]);
    for (Eigen::Index j = 0; j < s.nodes; ++j) {
      const long idx = start + offsets[static_cast<std::size_t>(j)];
      if (idx < 0 || idx >= len)
        throw IndexError("sample_nodes: symbol " + std::to_string(k) + " node " +
                         std::to_string(j) + " maps to sample " + std::to_string(idx) +
                         " outside trace of length " + std::to_string(len));
      s.index.push_back(static_cast<std::size_t>(idx));
    }
  }
  return s;
}

StateMatrix assemble_states(const VectorXd& readings, const NodeSampling& sampling) {
  if (readings.size() != sampling.rows * sampling.nodes)
    throw DomainError("assemble_states: reading count does not match the sampling plan");
  StateMatrix sm;
  sm.X.resize(sampling.rows, sampling.nodes + 1);
  for (Eigen::Index k = 0; k < sampling.rows; ++k)
    sm.X.row(k).head(sampling.nodes) = readings.segment(k * sampling.nodes, sampling.nodes);
  sm.X.col(sampling.nodes).setOnes();
  sm.node_times = sampling.node_times;
  if (!sm.X.allFinite()) throw DomainError("sample_nodes: non-finite trace values");
  return sm;
}

StateMatrix sample_nodes(const VectorXd& trace, const MaskSpec& spec,
                         const IntegratorConfig& cfg,
                         std::span<const std::size_t> symbol_markers,
                         double readout_offset, ChunkReadout chunk) {
  const NodeSampling s = node_sample_indices(spec, cfg, symbol_markers, readout_offset, chunk,
                                             static_cast<std::size_t>(trace.size()));
  VectorXd readings(static_cast<Eigen::Index>(s.index.size()));
  for (std::size_t i = 0; i < s.index.size(); ++i)
    readings[static_cast<Eigen::Index>(i)] = trace[static_cast<Eigen::Index>(s.index[i])];
  return assemble_states(readings, s);
}

}  // namespace tdrc
