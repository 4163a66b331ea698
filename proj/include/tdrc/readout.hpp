#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "tdrc/common.hpp"
#include "tdrc/input.hpp"

namespace tdrc {

/// Virtual-node responses, one row per input symbol. The last column is a
/// constant bias of 1.
struct StateMatrix {
  MatrixXd X;
  VectorXd node_times;  // ns from symbol start for each node

  Eigen::Index rows() const { return X.rows(); }
  Eigen::Index nodes() const { return X.cols() - 1; }
};

struct RidgeConfig {
  double lambda = 0.01;
  bool standardize = true;  // z-score feature columns with training stats

  bool operator==(const RidgeConfig&) const = default;
};

/// Where each (symbol, node) reading comes from.
struct NodeSampling {
  std::vector<std::size_t> index;  // row-major: symbol k, node j at k*nodes + j
  VectorXd node_times;
  Eigen::Index rows = 0;
  Eigen::Index nodes = 0;
};

/// Index arithmetic of sample_nodes; throws IndexError for readings outside
/// a trace of `trace_len` samples.
NodeSampling node_sample_indices(const MaskSpec& spec, const IntegratorConfig& cfg,
                                 std::span<const std::size_t> symbol_markers,
                                 double readout_offset, ChunkReadout chunk,
                                 std::size_t trace_len);

/// State matrix from readings ordered like sampling.index.
StateMatrix assemble_states(const VectorXd& readings, const NodeSampling& sampling);

/// Samples the detected trace at symbol start + (c*n_nodes + j + offset)*theta,
/// where c is the readout chunk. The instant maps to the last integration
/// sample at or before it, so offset 1.0 reads the final sample of each node
/// slot.
StateMatrix sample_nodes(const VectorXd& trace, const MaskSpec& spec,
                         const IntegratorConfig& cfg,
                         std::span<const std::size_t> symbol_markers,
                         double readout_offset = 1.0,
                         ChunkReadout chunk = ChunkReadout::last);

/// Appends a constant-one column.
template <typename Derived>
Matrix<typename Derived::Scalar> with_bias(const Eigen::MatrixBase<Derived>& features) {
  using Scalar = typename Derived::Scalar;
  Matrix<Scalar> X(features.rows(), features.cols() + 1);
  X.leftCols(features.cols()) = features;
  X.col(features.cols()).setOnes();
  return X;
}

/// Minimizes |Xw - y|^2 + lambda*|w|^2 through the regularized normal
/// equations and a Cholesky factorization. When `bias_last` is set the last
/// column is left out of the penalty and out of standardization. Returned
/// weights always apply to the raw (unstandardized) X.
template <typename Scalar>
Vector<Scalar> train_ridge(const Matrix<Scalar>& X, const Vector<Scalar>& y,
                           const RidgeConfig& cfg, bool bias_last) {
  if (X.rows() < 1 || X.cols() < 1) throw DomainError("train_ridge: empty design matrix");
  if (X.rows() != y.size())
    throw DomainError("train_ridge: " + std::to_string(X.rows()) + " rows but " +
                      std::to_string(y.size()) + " targets");
  if (!X.allFinite() || !y.allFinite()) throw DomainError("train_ridge: non-finite input");
  if (!(cfg.lambda >= 0.0)) throw DomainError("train_ridge: lambda must be >= 0");

  const Eigen::Index p = X.cols();
  const Eigen::Index features = bias_last ? p - 1 : p;

  Vector<Scalar> mean = Vector<Scalar>::Zero(p);
  Vector<Scalar> scale = Vector<Scalar>::Ones(p);
  if (cfg.standardize) {
    const Scalar n = static_cast<Scalar>(X.rows());
    for (Eigen::Index j = 0; j < features; ++j) {
      const Scalar m = X.col(j).mean();
      const Scalar sd = std::sqrt((X.col(j).array() - m).square().sum() / n);
      if (bias_last) mean[j] = m;
      if (sd > Scalar(0)) scale[j] = sd;
    }
  }
  Matrix<Scalar> Z = (X.rowwise() - mean.transpose()).array().rowwise() /
                     scale.transpose().array();

  Matrix<Scalar> A = Matrix<Scalar>::Zero(p, p);
  A.template selfadjointView<Eigen::Lower>().rankUpdate(Z.transpose());
  A = A.template selfadjointView<Eigen::Lower>();
  A.diagonal().head(features).array() += static_cast<Scalar>(cfg.lambda);
  const Vector<Scalar> rhs = Z.transpose() * y;

  Eigen::LLT<Matrix<Scalar>> llt(A);
  if (llt.info() != Eigen::Success || !(llt.rcond() > Scalar(1e-14)))
    throw RankDeficiencyError("train_ridge: normal equations are singular; use lambda > 0");
  Vector<Scalar> w = llt.solve(rhs);

  w.array() /= scale.array();
  if (bias_last) w[p - 1] -= mean.head(features).dot(w.head(features));
  return w;
}

/// X*w. Each row's products are summed in ascending magnitude order, so the
/// result does not depend on column order.
template <typename Scalar>
Vector<Scalar> predict(const Matrix<Scalar>& X, const Vector<Scalar>& w) {
  if (X.cols() != w.size())
    throw DomainError("predict: " + std::to_string(X.cols()) + " columns but " +
                      std::to_string(w.size()) + " weights");
  Vector<Scalar> out(X.rows());
  std::vector<Scalar> terms(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j)
      terms[static_cast<std::size_t>(j)] = X(i, j) * w[j];
    std::sort(terms.begin(), terms.end(), [](Scalar a, Scalar b) {
      const Scalar fa = std::abs(a), fb = std::abs(b);
      return fa < fb || (fa == fb && a < b);
    });
    Scalar sum(0);
    for (Scalar t : terms) sum += t;
    out[i] = sum;
  }
  return out;
}

/// Mean squared difference after z-scoring each series over the window.
template <typename DerivedA, typename DerivedB>
double nmse(const Eigen::MatrixBase<DerivedA>& pred, const Eigen::MatrixBase<DerivedB>& target) {
  const Eigen::Index n = pred.size();
  if (n != target.size()) throw DomainError("nmse: length mismatch");
  if (n < 2) throw DomainError("nmse: need at least two samples");
  auto zscore = [](const auto& v) {
    const VectorXd x = v.template cast<double>();
    if (!x.allFinite()) throw DomainError("nmse: non-finite input");
    const double m = x.mean();
    const double var = (x.array() - m).square().mean();
    if (!(var > 0.0)) throw DomainError("nmse: series has zero variance");
    return VectorXd((x.array() - m) / std::sqrt(var));
  };
  return (zscore(pred) - zscore(target)).squaredNorm() / static_cast<double>(n);
}

struct TaskSplit {
  int n_train = 3000;
  int n_discard = 500;
  int n_test = 1000;
  int warmup = 50;  // leading symbols left out of training rows

  int inputs() const { return n_train + n_discard + n_test; }
  void validate() const;
  bool operator==(const TaskSplit&) const = default;
};

}  // namespace tdrc
