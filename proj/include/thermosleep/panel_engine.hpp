#pragma once

#include <Eigen/Dense>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "thermosleep/csv.hpp"

namespace thermosleep {

// ---------------------------------------------------------------------------
// Columnar panel: one observation per row, an outcome, covariate columns,
// one or more fixed-effect factor columns and a cluster factor.
// ---------------------------------------------------------------------------

struct FactorColumn {
  std::string name;
  std::vector<int> codes;           // per-row level code
  std::vector<std::string> labels;  // code -> label, first-appearance order

  int encode(std::string_view label) {
    const auto it = index_.find(std::string(label));
    if (it != index_.end()) return it->second;
    const int code = static_cast<int>(labels.size());
    labels.emplace_back(label);
    index_.emplace(labels.back(), code);
    return code;
  }
  void push(std::string_view label) { codes.push_back(encode(label)); }
  std::size_t n_levels() const { return labels.size(); }

 private:
  std::unordered_map<std::string, int> index_;
};

struct Panel {
  std::vector<double> y;
  std::vector<std::string> x_names;
  std::vector<std::vector<double>> x;  // column-major
  std::vector<FactorColumn> fe;
  FactorColumn cluster;

  std::size_t n_rows() const { return y.size(); }

  void validate() const {
    if (y.size() < 2) throw ValidationError("panel needs at least 2 rows");
    if (x.size() != x_names.size()) throw ValidationError("panel: x column/name count mismatch");
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (x[j].size() != y.size())
        throw ValidationError("panel: column '" + x_names[j] + "' has wrong length");
      for (std::size_t i = 0; i < x[j].size(); ++i)
        if (!std::isfinite(x[j][i]))
          throw ValidationError("panel: non-finite value in column '" + x_names[j] + "' at row " +
                                std::to_string(i));
    }
    for (std::size_t i = 0; i < y.size(); ++i)
      if (!std::isfinite(y[i]))
        throw ValidationError("panel: non-finite outcome at row " + std::to_string(i));
    for (const FactorColumn& f : fe)
      if (f.codes.size() != y.size())
        throw ValidationError("panel: fixed-effect column '" + f.name + "' has wrong length");
    if (cluster.codes.size() != y.size())
      throw ValidationError("panel: cluster column has wrong length");
  }
};

struct FitOptions {
  double demean_tol = 1e-10;       // see demean_hdfe for the op-level default
  int max_iter = 10000;
  double collinearity_tol = 1e-10; // relative pivot threshold
  bool drop_singletons = true;
  unsigned threads = 0;
};

struct DemeanInfo {
  int iterations = 0;     // max sweeps over any column
  double last_delta = 0.0;
  bool converged = false;
};

// ---------------------------------------------------------------------------
// Within transformation by alternating projections: sweep the fixed-effect
// dimensions, subtracting group means, until the largest subtracted mean
// falls below tol. Columns are independent, so they demean in parallel with
// bitwise-stable per-column results; group sums are compensated.
// ---------------------------------------------------------------------------

inline DemeanInfo demean_hdfe(std::vector<std::vector<double>*> columns,
                              const std::vector<const std::vector<int>*>& fe_codes,
                              const std::vector<std::size_t>& fe_levels, double tol = 1e-8,
                              int max_iter = 10000, unsigned threads = 0) {
  if (columns.empty() || fe_codes.empty()) return DemeanInfo{0, 0.0, true};
  const std::size_t n = columns.front()->size();
  if (n < 2) throw ValidationError("demean_hdfe needs at least 2 rows");
  for (const auto* col : columns)
    if (col->size() != n) throw ValidationError("demean_hdfe: ragged columns");

  std::vector<DemeanInfo> info(columns.size());
  parallel_for(
      columns.size(),
      [&](std::size_t ci) {
        std::vector<double>& v = *columns[ci];
        std::vector<KahanSum> sums;
        std::vector<std::size_t> counts;
        double delta = 0.0;
        int iter = 0;
        for (iter = 1; iter <= max_iter; ++iter) {
          delta = 0.0;
          for (std::size_t d = 0; d < fe_codes.size(); ++d) {
            const std::vector<int>& codes = *fe_codes[d];
            sums.assign(fe_levels[d], KahanSum{});
            counts.assign(fe_levels[d], 0);
            for (std::size_t i = 0; i < n; ++i) {
              sums[static_cast<std::size_t>(codes[i])].add(v[i]);
              ++counts[static_cast<std::size_t>(codes[i])];
            }
            for (std::size_t g = 0; g < fe_levels[d]; ++g) {
              if (counts[g] == 0) continue;
              const double mean = sums[g].value() / static_cast<double>(counts[g]);
              sums[g].sum = mean;  // reuse as mean store
              delta = std::max(delta, std::abs(mean));
            }
            for (std::size_t i = 0; i < n; ++i) v[i] -= sums[static_cast<std::size_t>(codes[i])].sum;
          }
          if (delta < tol) break;
        }
        info[ci].iterations = std::min(iter, max_iter);
        info[ci].last_delta = delta;
        info[ci].converged = delta < tol;
      },
      threads);

  DemeanInfo agg{0, 0.0, true};
  for (const DemeanInfo& i : info) {
    agg.iterations = std::max(agg.iterations, i.iterations);
    agg.last_delta = std::max(agg.last_delta, i.last_delta);
    agg.converged = agg.converged && i.converged;
  }
  if (!agg.converged)
    throw ConvergenceError("demeaning did not converge in " + std::to_string(max_iter) +
                               " sweeps (last delta " + fmt_double(agg.last_delta) + ")",
                           agg.last_delta);
  return agg;
}

// ---------------------------------------------------------------------------
// OLS with rank-revealing collinearity handling.
// ---------------------------------------------------------------------------

struct OlsResult {
  Eigen::VectorXd beta;                    // for kept columns
  std::vector<std::size_t> kept;           // indices into the input columns
  std::vector<std::size_t> dropped;        // collinear columns, by input index
  Eigen::VectorXd residuals;
};

inline OlsResult ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                     double collinearity_tol = 1e-10) {
  OlsResult out;
  if (X.cols() == 0) {
    out.residuals = y;
    out.beta.resize(0);
    return out;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(collinearity_tol);
  const Eigen::Index rank = qr.rank();
  if (rank == 0) throw NumericError("all covariate columns are collinear (rank 0)");
  const auto& perm = qr.colsPermutation().indices();
  for (Eigen::Index k = 0; k < X.cols(); ++k) {
    if (k < rank)
      out.kept.push_back(static_cast<std::size_t>(perm[k]));
    else
      out.dropped.push_back(static_cast<std::size_t>(perm[k]));
  }
  std::sort(out.kept.begin(), out.kept.end());
  std::sort(out.dropped.begin(), out.dropped.end());
  Eigen::MatrixXd Xk(X.rows(), rank);
  for (Eigen::Index j = 0; j < rank; ++j) Xk.col(j) = X.col(static_cast<Eigen::Index>(out.kept[j]));
  out.beta = Xk.householderQr().solve(y);
  out.residuals = y - Xk * out.beta;
  return out;
}

// ---------------------------------------------------------------------------
// Cluster-robust (CR1) sandwich covariance:
//   (X'X)^{-1} [ sum_g X_g' e_g e_g' X_g ] (X'X)^{-1} * G/(G-1) * (N-1)/(N-K)
// with K counting slope parameters plus absorbed fixed-effect degrees of
// freedom.
// ---------------------------------------------------------------------------

inline Eigen::MatrixXd cluster_robust_vcov(const Eigen::MatrixXd& X,
                                           const Eigen::VectorXd& residuals,
                                           const std::vector<int>& cluster_codes,
                                           std::size_t k_params) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (static_cast<Eigen::Index>(cluster_codes.size()) != n)
    throw ValidationError("cluster id count does not match rows");
  int n_clusters = 0;
  for (const int c : cluster_codes) n_clusters = std::max(n_clusters, c + 1);
  std::vector<char> seen(static_cast<std::size_t>(n_clusters), 0);
  for (const int c : cluster_codes) seen[static_cast<std::size_t>(c)] = 1;
  const std::size_t G =
      static_cast<std::size_t>(std::count(seen.begin(), seen.end(), char(1)));
  if (G < 2) throw NumericError("cluster-robust inference needs at least 2 clusters");
  if (static_cast<std::size_t>(n) <= k_params)
    throw NumericError("degrees of freedom exhausted: N <= K");
  if (p == 0) return Eigen::MatrixXd(0, 0);

  // Per-cluster score sums in fixed row order.
  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(n_clusters, p);
  for (Eigen::Index i = 0; i < n; ++i)
    scores.row(cluster_codes[static_cast<std::size_t>(i)]) += residuals[i] * X.row(i);
  const Eigen::MatrixXd meat = scores.transpose() * scores;

  const Eigen::MatrixXd xtx = X.transpose() * X;
  const Eigen::MatrixXd bread = xtx.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  const double scale = (static_cast<double>(G) / (static_cast<double>(G) - 1.0)) *
                       ((static_cast<double>(n) - 1.0) /
                        (static_cast<double>(n) - static_cast<double>(k_params)));
  Eigen::MatrixXd vcov = scale * bread * meat * bread;
  vcov = ((vcov + vcov.transpose()) / 2.0).eval();  // exact symmetry
  return vcov;
}

// ---------------------------------------------------------------------------
// Fit results.
// ---------------------------------------------------------------------------

struct FitResult {
  std::vector<std::string> names;  // kept covariates
  Eigen::VectorXd beta;
  Eigen::MatrixXd vcov;
  std::vector<std::string> dropped_columns;
  std::size_t n_obs = 0;
  std::size_t n_clusters = 0;
  std::size_t dropped_singletons = 0;
  std::size_t k_absorbed = 0;
  bool converged = false;
  int iterations = 0;
  double demean_delta = 0.0;

  double se(std::size_t i) const { return std::sqrt(std::max(0.0, vcov(i, i))); }
  std::optional<std::size_t> index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return i;
    return std::nullopt;
  }
  double coef_or_zero(const std::string& name) const {
    const auto i = index_of(name);
    return i ? beta[static_cast<Eigen::Index>(*i)] : 0.0;
  }
};

namespace detail {

// Iteratively drops observations alone in any fixed-effect cell; returns the
// keep mask and the number dropped.
inline std::pair<std::vector<char>, std::size_t> singleton_mask(
    const std::vector<FactorColumn>& fe, std::size_t n) {
  std::vector<char> keep(n, 1);
  std::size_t dropped = 0;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const FactorColumn& f : fe) {
      std::vector<std::size_t> count(f.n_levels(), 0);
      for (std::size_t i = 0; i < n; ++i)
        if (keep[i]) ++count[static_cast<std::size_t>(f.codes[i])];
      for (std::size_t i = 0; i < n; ++i) {
        if (keep[i] && count[static_cast<std::size_t>(f.codes[i])] == 1) {
          keep[i] = 0;
          ++dropped;
          changed = true;
        }
      }
    }
  }
  return {keep, dropped};
}

inline std::size_t count_present_levels(const std::vector<int>& codes) {
  int max_code = -1;
  for (const int c : codes) max_code = std::max(max_code, c);
  std::vector<char> present(static_cast<std::size_t>(max_code + 1), 0);
  for (const int c : codes) present[static_cast<std::size_t>(c)] = 1;
  return static_cast<std::size_t>(std::count(present.begin(), present.end(), char(1)));
}

// Union-find over the bipartite graph of the first two FE dimensions.
inline std::size_t connected_components(const std::vector<int>& a, const std::vector<int>& b) {
  int la = 0, lb = 0;
  for (const int c : a) la = std::max(la, c + 1);
  for (const int c : b) lb = std::max(lb, c + 1);
  std::vector<int> parent(static_cast<std::size_t>(la + lb));
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int v) {
    while (parent[static_cast<std::size_t>(v)] != v) {
      parent[static_cast<std::size_t>(v)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(v)])];
      v = parent[static_cast<std::size_t>(v)];
    }
    return v;
  };
  for (std::size_t i = 0; i < a.size(); ++i) {
    const int ra = find(a[i]);
    const int rb = find(la + b[i]);
    if (ra != rb) parent[static_cast<std::size_t>(ra)] = rb;
  }
  std::vector<char> root_seen(static_cast<std::size_t>(la + lb), 0);
  std::vector<char> node_used(static_cast<std::size_t>(la + lb), 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    node_used[static_cast<std::size_t>(a[i])] = 1;
    node_used[static_cast<std::size_t>(la + b[i])] = 1;
  }
  std::size_t ncc = 0;
  for (int v = 0; v < la + lb; ++v) {
    if (!node_used[static_cast<std::size_t>(v)]) continue;
    const int r = find(v);
    if (!root_seen[static_cast<std::size_t>(r)]) {
      root_seen[static_cast<std::size_t>(r)] = 1;
      ++ncc;
    }
  }
  return ncc;
}

// Absorbed degrees of freedom: L1 + (L2 - #components) + sum_{d>=3}(L_d - 1).
// The component correction is exact for two dimensions and the standard
// generic-rank approximation beyond that.
inline std::size_t absorbed_dof(const std::vector<const std::vector<int>*>& fe_codes) {
  if (fe_codes.empty()) return 0;
  std::vector<std::size_t> levels;
  levels.reserve(fe_codes.size());
  for (const auto* codes : fe_codes) levels.push_back(count_present_levels(*codes));
  std::size_t dof = levels[0];
  if (fe_codes.size() >= 2)
    dof += levels[1] - connected_components(*fe_codes[0], *fe_codes[1]);
  for (std::size_t d = 2; d < fe_codes.size(); ++d) dof += levels[d] - 1;
  return dof;
}

// Compacts codes to 0..L-1 over the kept rows.
inline std::vector<int> compact_codes(const std::vector<int>& codes, const std::vector<char>& keep,
                                      std::size_t n_kept) {
  int max_code = -1;
  for (std::size_t i = 0; i < codes.size(); ++i)
    if (keep[i]) max_code = std::max(max_code, codes[i]);
  std::vector<int> remap(static_cast<std::size_t>(max_code + 1), -1);
  std::vector<int> out;
  out.reserve(n_kept);
  int next = 0;
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (!keep[i]) continue;
    int& slot = remap[static_cast<std::size_t>(codes[i])];
    if (slot < 0) slot = next++;
    out.push_back(slot);
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Full pipeline: singleton pruning -> iterative demeaning -> OLS ->
// cluster-robust covariance.
// ---------------------------------------------------------------------------

inline FitResult fit(const Panel& panel, const FitOptions& opts = {}) {
  panel.validate();
  const std::size_t n_all = panel.n_rows();

  std::vector<char> keep(n_all, 1);
  std::size_t dropped_singletons = 0;
  if (opts.drop_singletons && !panel.fe.empty())
    std::tie(keep, dropped_singletons) = detail::singleton_mask(panel.fe, n_all);
  const std::size_t n = n_all - dropped_singletons;
  if (n < 2) throw NumericError("fewer than 2 observations remain after singleton pruning");

  std::vector<std::vector<double>> work;  // y then x columns, pruned
  work.reserve(1 + panel.x.size());
  auto pruned = [&](const std::vector<double>& col) {
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n_all; ++i)
      if (keep[i]) out.push_back(col[i]);
    return out;
  };
  work.push_back(pruned(panel.y));
  for (const auto& col : panel.x) work.push_back(pruned(col));

  std::vector<std::vector<int>> fe_codes;
  fe_codes.reserve(panel.fe.size());
  for (const FactorColumn& f : panel.fe) fe_codes.push_back(detail::compact_codes(f.codes, keep, n));
  std::vector<const std::vector<int>*> fe_ptrs;
  std::vector<std::size_t> fe_levels;
  for (const auto& c : fe_codes) {
    fe_ptrs.push_back(&c);
    fe_levels.push_back(detail::count_present_levels(c));
  }

  DemeanInfo dm{0, 0.0, true};
  if (!fe_ptrs.empty()) {
    std::vector<std::vector<double>*> cols;
    for (auto& w : work) cols.push_back(&w);
    dm = demean_hdfe(cols, fe_ptrs, fe_levels, opts.demean_tol, opts.max_iter, opts.threads);
  }

  Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(work[0].data(), static_cast<Eigen::Index>(n));
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(panel.x.size()));
  for (std::size_t j = 0; j < panel.x.size(); ++j)
    X.col(static_cast<Eigen::Index>(j)) =
        Eigen::Map<Eigen::VectorXd>(work[j + 1].data(), static_cast<Eigen::Index>(n));

  const OlsResult est = ols(X, y, opts.collinearity_tol);

  FitResult res;
  for (const std::size_t j : est.kept) res.names.push_back(panel.x_names[j]);
  for (const std::size_t j : est.dropped) res.dropped_columns.push_back(panel.x_names[j]);
  res.beta = est.beta;
  res.n_obs = n;
  res.dropped_singletons = dropped_singletons;
  res.k_absorbed = detail::absorbed_dof(fe_ptrs);
  res.converged = dm.converged;
  res.iterations = dm.iterations;
  res.demean_delta = dm.last_delta;

  std::vector<int> cluster = detail::compact_codes(panel.cluster.codes, keep, n);
  res.n_clusters = detail::count_present_levels(cluster);
  Eigen::MatrixXd Xk(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(est.kept.size()));
  for (std::size_t j = 0; j < est.kept.size(); ++j)
    Xk.col(static_cast<Eigen::Index>(j)) = X.col(static_cast<Eigen::Index>(est.kept[j]));
  res.vcov = cluster_robust_vcov(Xk, est.residuals, cluster, est.kept.size() + res.k_absorbed);
  return res;
}

// ---------------------------------------------------------------------------
// Dense dummy-variable reference implementation (test oracle). Builds the
// explicit indicator matrix for every fixed-effect level and runs one OLS;
// feasible only for small panels.
// ---------------------------------------------------------------------------

inline FitResult brute_force_fit(const Panel& panel, std::size_t max_rows = 4000) {
  panel.validate();
  const std::size_t n_all = panel.n_rows();
  if (n_all > max_rows)
    throw NumericError("brute_force_fit size guard exceeded: " + std::to_string(n_all) + " rows");

  // Independent re-derivation of the singleton drop (kept deliberately
  // separate from fit()'s implementation).
  std::vector<char> keep(n_all, 1);
  std::size_t dropped = 0;
  for (bool changed = true; changed;) {
    changed = false;
    for (const FactorColumn& f : panel.fe) {
      std::unordered_map<int, std::size_t> count;
      for (std::size_t i = 0; i < n_all; ++i)
        if (keep[i]) ++count[f.codes[i]];
      for (std::size_t i = 0; i < n_all; ++i)
        if (keep[i] && count[f.codes[i]] == 1) {
          keep[i] = 0;
          ++dropped;
          changed = true;
        }
    }
  }
  const std::size_t n = n_all - dropped;
  if (n < 2) throw NumericError("fewer than 2 observations remain after singleton pruning");

  const std::size_t p = panel.x.size();
  std::vector<std::size_t> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n_all; ++i)
    if (keep[i]) rows.push_back(i);

  std::size_t n_dummies = 0;
  std::vector<std::vector<int>> codes;
  for (const FactorColumn& f : panel.fe) {
    codes.push_back(detail::compact_codes(f.codes, keep, n));
    n_dummies += detail::count_present_levels(codes.back());
  }
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                            static_cast<Eigen::Index>(p + n_dummies));
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    y[static_cast<Eigen::Index>(r)] = panel.y[rows[r]];
    for (std::size_t j = 0; j < p; ++j)
      Z(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = panel.x[j][rows[r]];
  }
  std::size_t offset = p;
  for (const auto& c : codes) {
    const std::size_t levels = detail::count_present_levels(c);
    for (std::size_t r = 0; r < n; ++r)
      Z(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(offset + static_cast<std::size_t>(c[r]))) = 1.0;
    offset += levels;
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Z);
  qr.setThreshold(1e-10);
  const Eigen::Index rank = qr.rank();
  if (rank == 0) throw NumericError("brute_force_fit: zero-rank design");
  const auto& perm = qr.colsPermutation().indices();
  std::vector<std::size_t> kept_cols;
  for (Eigen::Index k = 0; k < rank; ++k) kept_cols.push_back(static_cast<std::size_t>(perm[k]));
  std::sort(kept_cols.begin(), kept_cols.end());
  Eigen::MatrixXd Zk(Z.rows(), rank);
  for (Eigen::Index j = 0; j < rank; ++j)
    Zk.col(j) = Z.col(static_cast<Eigen::Index>(kept_cols[static_cast<std::size_t>(j)]));
  const Eigen::VectorXd theta = Zk.householderQr().solve(y);
  const Eigen::VectorXd resid = y - Zk * theta;

  std::vector<int> cluster = detail::compact_codes(panel.cluster.codes, keep, n);
  const Eigen::MatrixXd vcov_full =
      cluster_robust_vcov(Zk, resid, cluster, static_cast<std::size_t>(rank));

  FitResult res;
  std::vector<std::size_t> slope_pos;  // position of each kept slope inside kept_cols
  for (std::size_t k = 0; k < kept_cols.size(); ++k) {
    if (kept_cols[k] < p) {
      slope_pos.push_back(k);
      res.names.push_back(panel.x_names[kept_cols[k]]);
    }
  }
  for (std::size_t j = 0; j < p; ++j)
    if (std::find(kept_cols.begin(), kept_cols.end(), j) == kept_cols.end())
      res.dropped_columns.push_back(panel.x_names[j]);
  res.beta.resize(static_cast<Eigen::Index>(slope_pos.size()));
  res.vcov.resize(static_cast<Eigen::Index>(slope_pos.size()),
                  static_cast<Eigen::Index>(slope_pos.size()));
  for (std::size_t a = 0; a < slope_pos.size(); ++a) {
    res.beta[static_cast<Eigen::Index>(a)] = theta[static_cast<Eigen::Index>(slope_pos[a])];
    for (std::size_t b = 0; b < slope_pos.size(); ++b)
      res.vcov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
          vcov_full(static_cast<Eigen::Index>(slope_pos[a]), static_cast<Eigen::Index>(slope_pos[b]));
  }
  res.n_obs = n;
  res.n_clusters = detail::count_present_levels(cluster);
  res.dropped_singletons = dropped;
  res.k_absorbed = static_cast<std::size_t>(rank) - slope_pos.size();
  res.converged = true;
  res.iterations = 1;
  return res;
}

// ---------------------------------------------------------------------------
// External interfaces: panel.csv in, fit.json out (docs/formats.md).
// ---------------------------------------------------------------------------

// Columns: y, cluster, fe_* (each a fixed-effect dimension), everything else
// is a covariate in header order.
inline Panel read_panel_csv(const std::string& path) {
  CsvReader in(path);
  const std::size_t c_y = in.col("y");
  const std::size_t c_cluster = in.col("cluster");
  Panel panel;
  panel.cluster.name = "cluster";
  std::vector<std::pair<std::size_t, std::size_t>> x_cols;   // csv col -> x index
  std::vector<std::pair<std::size_t, std::size_t>> fe_cols;  // csv col -> fe index
  for (std::size_t ci = 0; ci < in.header().size(); ++ci) {
    const std::string& name = in.header()[ci];
    if (name == "y" || name == "cluster") continue;
    if (name.rfind("fe_", 0) == 0) {
      fe_cols.emplace_back(ci, panel.fe.size());
      panel.fe.emplace_back();
      panel.fe.back().name = name.substr(3);
    } else {
      x_cols.emplace_back(ci, panel.x.size());
      panel.x_names.push_back(name);
      panel.x.emplace_back();
    }
  }
  while (in.next()) {
    panel.y.push_back(in.num_field(c_y, "y"));
    panel.cluster.push(in.field(c_cluster));
    for (const auto& [ci, xi] : x_cols) panel.x[xi].push_back(in.num_field(ci, panel.x_names[xi]));
    for (const auto& [ci, fi] : fe_cols) panel.fe[fi].push(in.field(ci));
  }
  return panel;
}

}  // namespace thermosleep
