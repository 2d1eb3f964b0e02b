#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include "test_helpers.hpp"
#include "thermosleep/panel_engine.hpp"

using namespace thermosleep;
using namespace tsl_test;

namespace {

// Dummy-matrix residual oracle: residuals of `col` after OLS on the full
// indicator matrix of all fixed-effect dimensions.
Eigen::VectorXd dummy_residuals(const std::vector<double>& col,
                                const std::vector<std::vector<int>>& fe,
                                const std::vector<int>& levels) {
  const Eigen::Index n = static_cast<Eigen::Index>(col.size());
  Eigen::Index total = 0;
  for (const int l : levels) total += l;
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, total);
  Eigen::Index off = 0;
  for (std::size_t d = 0; d < fe.size(); ++d) {
    for (Eigen::Index i = 0; i < n; ++i) D(i, off + fe[d][static_cast<std::size_t>(i)]) = 1.0;
    off += levels[d];
  }
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = col[static_cast<std::size_t>(i)];
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(D);
  qr.setThreshold(1e-10);
  return v - D * qr.solve(v);
}

Panel tiny_panel() {
  // 6 rows, 2 crossed FE dims, 2 clusters.
  Panel p;
  p.y = {3.0, 5.0, 2.0, 8.0, 7.0, 4.0};
  p.x_names = {"x"};
  p.x = {{1.0, 2.0, 0.5, 3.0, 2.5, 1.5}};
  p.fe.resize(2);
  p.fe[0].name = "a";
  p.fe[1].name = "b";
  for (const char* v : {"a1", "a1", "a2", "a2", "a1", "a2"}) p.fe[0].push(v);
  for (const char* v : {"b1", "b2", "b1", "b2", "b1", "b2"}) p.fe[1].push(v);
  p.cluster.name = "c";
  for (const char* v : {"c1", "c1", "c1", "c2", "c2", "c2"}) p.cluster.push(v);
  return p;
}

}  // namespace

TEST_CASE("demeaning: one dimension subtracts the group mean") {
  std::vector<double> col = {1.0, 2.0, 3.0};
  std::vector<int> codes = {0, 0, 0};
  std::vector<std::vector<double>*> cols = {&col};
  demean_hdfe(cols, {&codes}, {1});
  CHECK_THAT(col[0], Catch::Matchers::WithinAbs(-1.0, 1e-12));
  CHECK_THAT(col[1], Catch::Matchers::WithinAbs(0.0, 1e-12));
  CHECK_THAT(col[2], Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("demeaning: row-identity dimension zeroes every column") {
  std::vector<double> col = {4.0, -1.0, 9.0, 2.5};
  std::vector<int> codes = {0, 1, 2, 3};
  std::vector<std::vector<double>*> cols = {&col};
  demean_hdfe(cols, {&codes}, {4});
  for (const double v : col) CHECK_THAT(v, Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("demeaning matches the dummy-variable oracle on a crossed toy panel") {
  const Panel p = tiny_panel();
  std::vector<double> y = p.y, x = p.x[0];
  std::vector<std::vector<double>*> cols = {&y, &x};
  std::vector<std::vector<int>> fe = {p.fe[0].codes, p.fe[1].codes};
  demean_hdfe(cols, {&fe[0], &fe[1]}, {2, 2}, 1e-12);
  const Eigen::VectorXd ry = dummy_residuals(p.y, fe, {2, 2});
  const Eigen::VectorXd rx = dummy_residuals(p.x[0], fe, {2, 2});
  for (std::size_t i = 0; i < y.size(); ++i) {
    CHECK_THAT(y[i], Catch::Matchers::WithinAbs(ry[static_cast<Eigen::Index>(i)], 1e-8));
    CHECK_THAT(x[i], Catch::Matchers::WithinAbs(rx[static_cast<Eigen::Index>(i)], 1e-8));
  }
}

TEST_CASE("demeaning is a projection (second pass changes nothing beyond tol)") {
  Rng rng(31);
  Panel p = random_panel(rng, 200, 2, 2, {12, 9}, 5);
  std::vector<double> y = p.y;
  std::vector<std::vector<double>*> cols = {&y};
  demean_hdfe(cols, {&p.fe[0].codes, &p.fe[1].codes}, {12, 9}, 1e-10);
  std::vector<double> y2 = y;
  std::vector<std::vector<double>*> cols2 = {&y2};
  demean_hdfe(cols2, {&p.fe[0].codes, &p.fe[1].codes}, {12, 9}, 1e-10);
  for (std::size_t i = 0; i < y.size(); ++i)
    CHECK_THAT(y2[i], Catch::Matchers::WithinAbs(y[i], 1e-9));
}

TEST_CASE("demeaning reports non-convergence with the last delta") {
  Rng rng(32);
  Panel p = random_panel(rng, 120, 1, 2, {30, 25}, 4);
  std::vector<double> y = p.y;
  std::vector<std::vector<double>*> cols = {&y};
  try {
    demean_hdfe(cols, {&p.fe[0].codes, &p.fe[1].codes}, {30, 25}, 1e-14, 1);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.last_delta() > 0.0);
  }
}

TEST_CASE("ols exact and oracle cases") {
  SECTION("y = 2x exactly") {
    Eigen::MatrixXd X(4, 1);
    X << 1, 2, 3, 4;
    Eigen::VectorXd y(4);
    y << 2, 4, 6, 8;
    const OlsResult r = ols(X, y);
    CHECK_THAT(r.beta[0], Catch::Matchers::WithinAbs(2.0, 1e-12));
  }
  SECTION("random 50x3 matches the normal-equations oracle") {
    Rng rng(41);
    Eigen::MatrixXd X(50, 3);
    Eigen::VectorXd y(50);
    for (int i = 0; i < 50; ++i) {
      for (int j = 0; j < 3; ++j) X(i, j) = rng.normal();
      y[i] = rng.normal();
    }
    const OlsResult r = ols(X, y);
    const Eigen::VectorXd oracle = (X.transpose() * X).ldlt().solve(X.transpose() * y);
    for (int j = 0; j < 3; ++j)
      CHECK_THAT(r.beta[j], Catch::Matchers::WithinAbs(oracle[j], 1e-8));
  }
  SECTION("duplicated column: one dropped, fit unchanged") {
    Rng rng(42);
    Eigen::MatrixXd X(30, 3);
    Eigen::VectorXd y(30);
    for (int i = 0; i < 30; ++i) {
      X(i, 0) = rng.normal();
      X(i, 1) = X(i, 0);
      X(i, 2) = rng.normal();
      y[i] = rng.normal();
    }
    const OlsResult r = ols(X, y);
    CHECK(r.kept.size() == 2);
    CHECK(r.dropped.size() == 1);
    const OlsResult clean = ols(X(Eigen::all, std::vector<int>{0, 2}), y);
    CHECK_THAT(r.residuals.norm(), Catch::Matchers::WithinAbs(clean.residuals.norm(), 1e-10));
  }
  SECTION("all-collinear design is an error") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(10, 2);
    Eigen::VectorXd y = Eigen::VectorXd::Ones(10);
    CHECK_THROWS_AS(ols(X, y), NumericError);
  }
}

TEST_CASE("cluster-robust sandwich matches a term-by-term oracle") {
  // 3 clusters, 2 regressors, hand-built.
  Eigen::MatrixXd X(7, 2);
  X << 1.0, 0.5, 2.0, -1.0, 0.5, 0.25, -1.0, 2.0, 3.0, 1.0, 0.0, -2.0, 1.5, 0.5;
  Eigen::VectorXd e(7);
  e << 0.3, -0.2, 0.8, -0.5, 0.1, 0.4, -0.6;
  const std::vector<int> g = {0, 0, 1, 1, 1, 2, 2};
  const std::size_t K = 2;
  const Eigen::MatrixXd v = cluster_robust_vcov(X, e, g, K);

  // Oracle: explicit per-cluster outer products.
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(2, 2);
  for (int c = 0; c < 3; ++c) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(2);
    for (int i = 0; i < 7; ++i)
      if (g[static_cast<std::size_t>(i)] == c) s += e[i] * X.row(i).transpose();
    meat += s * s.transpose();
  }
  const Eigen::MatrixXd bread = (X.transpose() * X).inverse();
  const double scale = (3.0 / 2.0) * (6.0 / (7.0 - 2.0));
  const Eigen::MatrixXd oracle = scale * bread * meat * bread;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      CHECK_THAT(v(a, b), Catch::Matchers::WithinAbs(oracle(a, b), 1e-10));
  CHECK(v(0, 1) == v(1, 0));
}

TEST_CASE("singleton clusters reproduce HC1 exactly") {
  Rng rng(51);
  const int n = 40;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd e(n);
  std::vector<int> g(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = rng.normal();
    X(i, 1) = rng.normal();
    e[i] = rng.normal();
    g[static_cast<std::size_t>(i)] = i;
  }
  const Eigen::MatrixXd cr1 = cluster_robust_vcov(X, e, g, 2);
  // HC1 oracle.
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(2, 2);
  for (int i = 0; i < n; ++i)
    meat += e[i] * e[i] * X.row(i).transpose() * X.row(i);
  const Eigen::MatrixXd bread = (X.transpose() * X).inverse();
  const Eigen::MatrixXd hc1 = (n / (n - 2.0)) * bread * meat * bread;
  // CR1's G/(G-1) * (N-1)/(N-K) with G == N collapses to N/(N-K).
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      CHECK_THAT(cr1(a, b), Catch::Matchers::WithinAbs(hc1(a, b), 1e-12));
}

TEST_CASE("degenerate sandwich cases") {
  Eigen::MatrixXd X(4, 1);
  X << 1, 2, 3, 4;
  SECTION("all-zero residuals give a zero matrix") {
    const Eigen::MatrixXd v =
        cluster_robust_vcov(X, Eigen::VectorXd::Zero(4), {0, 0, 1, 1}, 1);
    CHECK(v(0, 0) == 0.0);
  }
  SECTION("a single cluster is an error") {
    CHECK_THROWS_AS(cluster_robust_vcov(X, Eigen::VectorXd::Ones(4), {0, 0, 0, 0}, 1),
                    NumericError);
  }
}

TEST_CASE("fit agrees with brute_force_fit (Frisch-Waugh-Lovell)") {
  SECTION("tiny crossed panel") {
    const Panel p = tiny_panel();
    const FitResult a = fit(p);
    const FitResult b = brute_force_fit(p);
    REQUIRE(a.names == b.names);
    CHECK_THAT(a.beta[0], Catch::Matchers::WithinAbs(b.beta[0], 1e-8));
    CHECK_THAT(a.se(0), Catch::Matchers::WithinRel(b.se(0), 1e-6));
    CHECK(a.n_obs == b.n_obs);
    CHECK(a.n_clusters == b.n_clusters);
    CHECK(a.dropped_singletons == b.dropped_singletons);
  }
  SECTION("seeded random panels, up to 3 crossed dimensions") {
    for (const std::uint64_t seed : {101u, 102u, 103u, 104u, 105u}) {
      Rng rng(seed);
      const int dims = 1 + static_cast<int>(rng.uniform_index(3));
      std::vector<int> levels;
      for (int d = 0; d < dims; ++d) levels.push_back(4 + static_cast<int>(rng.uniform_index(12)));
      const Panel p = random_panel(rng, 250, 3, dims, levels, 8);
      const FitResult a = fit(p);
      const FitResult b = brute_force_fit(p);
      REQUIRE(a.names == b.names);
      for (std::size_t j = 0; j < a.names.size(); ++j) {
        CHECK_THAT(a.beta[static_cast<Eigen::Index>(j)],
                   Catch::Matchers::WithinAbs(b.beta[static_cast<Eigen::Index>(j)], 1e-8));
        CHECK_THAT(a.se(j), Catch::Matchers::WithinRel(b.se(j), 1e-6));
      }
      CHECK(a.k_absorbed == b.k_absorbed);
    }
  }
}

TEST_CASE("singletons are pruned iteratively and counted") {
  Panel p;
  // u3 appears once; after dropping it, d3 becomes a singleton too.
  p.y = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
  p.x_names = {"x"};
  p.x = {{0.1, 0.2, 0.3, 0.4, 0.5, 0.6}};
  p.fe.resize(2);
  p.fe[0].name = "u";
  p.fe[1].name = "d";
  for (const char* v : {"u1", "u1", "u2", "u2", "u3", "u1"}) p.fe[0].push(v);
  for (const char* v : {"d1", "d2", "d1", "d2", "d3", "d3"}) p.fe[1].push(v);
  p.cluster.name = "c";
  for (const char* v : {"c1", "c1", "c2", "c2", "c1", "c2"}) p.cluster.push(v);
  const FitResult r = fit(p);
  CHECK(r.dropped_singletons == 2);  // u3 row, then the d3 leftover
  CHECK(r.n_obs == 4);
}

TEST_CASE("synthetic recovery: y = -0.3 x + user + date effects + noise") {
  Rng rng(61);
  const int n_users = 60, n_dates = 40;
  Panel p;
  p.x_names = {"tmin"};
  p.x.resize(1);
  p.fe.resize(2);
  p.fe[0].name = "user";
  p.fe[1].name = "date";
  p.cluster.name = "adm";
  std::vector<double> user_eff(n_users), date_eff(n_dates);
  for (double& v : user_eff) v = rng.normal(0.0, 20.0);
  for (double& v : date_eff) v = rng.normal(0.0, 5.0);
  for (int u = 0; u < n_users; ++u) {
    for (int d = 0; d < n_dates; ++d) {
      const double tmin = rng.uniform(-5.0, 30.0);
      p.x[0].push_back(tmin);
      p.y.push_back(-0.30 * tmin + user_eff[static_cast<std::size_t>(u)] +
                    date_eff[static_cast<std::size_t>(d)] + rng.normal(0.0, 5.0));
      p.fe[0].push("u" + std::to_string(u));
      p.fe[1].push("d" + std::to_string(d));
      p.cluster.push("a" + std::to_string(u % 12));
    }
  }
  const FitResult r = fit(p);
  REQUIRE(r.names == std::vector<std::string>{"tmin"});
  CHECK(std::abs(r.beta[0] - (-0.30)) < 3.0 * r.se(0));
  CHECK(r.converged);

  SECTION("null slope is recovered as approximately zero") {
    Panel p0 = p;
    for (std::size_t i = 0; i < p0.y.size(); ++i) p0.y[i] += 0.30 * p0.x[0][i];
    const FitResult r0 = fit(p0);
    CHECK(std::abs(r0.beta[0]) < 3.0 * r0.se(0));
  }
}

TEST_CASE("panel properties") {
  Rng rng(71);
  Panel p = random_panel(rng, 300, 2, 2, {20, 15}, 6);
  const FitResult base = fit(p);

  SECTION("adding a constant to y leaves slopes unchanged") {
    Panel shifted = p;
    for (double& v : shifted.y) v += 1234.5;
    const FitResult r = fit(shifted);
    for (Eigen::Index j = 0; j < base.beta.size(); ++j)
      CHECK_THAT(r.beta[j], Catch::Matchers::WithinAbs(base.beta[j], 1e-8));
  }
  SECTION("row permutation changes results by < 1e-10") {
    std::vector<std::size_t> perm(p.n_rows());
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = perm.size() - 1; i > 0; --i)
      std::swap(perm[i], perm[rng.uniform_index(i + 1)]);
    Panel q;
    q.x_names = p.x_names;
    q.x.resize(p.x.size());
    q.fe.resize(p.fe.size());
    for (std::size_t d = 0; d < p.fe.size(); ++d) q.fe[d].name = p.fe[d].name;
    q.cluster.name = p.cluster.name;
    for (const std::size_t i : perm) {
      q.y.push_back(p.y[i]);
      for (std::size_t j = 0; j < p.x.size(); ++j) q.x[j].push_back(p.x[j][i]);
      for (std::size_t d = 0; d < p.fe.size(); ++d)
        q.fe[d].push(p.fe[d].labels[static_cast<std::size_t>(p.fe[d].codes[i])]);
      q.cluster.push(p.cluster.labels[static_cast<std::size_t>(p.cluster.codes[i])]);
    }
    const FitResult r = fit(q);
    REQUIRE(r.names == base.names);
    for (Eigen::Index j = 0; j < base.beta.size(); ++j) {
      CHECK(std::abs(r.beta[j] - base.beta[j]) < 1e-10);
      CHECK(std::abs(r.vcov(j, j) - base.vcov(j, j)) < 1e-10);
    }
  }
  SECTION("scaling the noise by c scales vcov by c^2") {
    // Same X and FE structure; y built from fixed signal + scaled residual.
    Panel p1 = p, p2 = p;
    Rng noise_rng(72);
    std::vector<double> eps(p.n_rows());
    for (double& v : eps) v = noise_rng.normal();
    for (std::size_t i = 0; i < p.n_rows(); ++i) {
      const double signal = 2.0 * p.x[0][i] - 1.0 * p.x[1][i];
      p1.y[i] = signal + eps[i];
      p2.y[i] = signal + 3.0 * eps[i];
    }
    const FitResult r1 = fit(p1);
    const FitResult r2 = fit(p2);
    for (Eigen::Index j = 0; j < r1.beta.size(); ++j)
      CHECK_THAT(r2.vcov(j, j), Catch::Matchers::WithinRel(9.0 * r1.vcov(j, j), 1e-8));
  }
}

TEST_CASE("brute force guard and intercept-only case") {
  Rng rng(81);
  SECTION("size guard") {
    Panel p = random_panel(rng, 50, 1, 1, {5}, 3);
    CHECK_THROWS_AS(brute_force_fit(p, 40), NumericError);
  }
  SECTION("no covariates: beta empty, residuals are within-group deviations") {
    Panel p = random_panel(rng, 60, 0, 1, {4}, 3);
    const FitResult r = brute_force_fit(p);
    CHECK(r.beta.size() == 0);
    CHECK(r.names.empty());
  }
}

TEST_CASE("panel.csv round trip drives fit") {
  Rng rng(91);
  Panel p = random_panel(rng, 80, 2, 2, {8, 6}, 4);
  const std::string dir = (std::filesystem::temp_directory_path() / "tsl_panel_csv").string();
  std::filesystem::create_directories(dir);
  const std::string path = dir + "/panel.csv";
  {
    CsvWriter w(path, {"y", "x0", "x1", "fe_user", "fe_date", "cluster"});
    for (std::size_t i = 0; i < p.n_rows(); ++i)
      w.write_row({fmt_double(p.y[i]), fmt_double(p.x[0][i]), fmt_double(p.x[1][i]),
                   p.fe[0].labels[static_cast<std::size_t>(p.fe[0].codes[i])],
                   p.fe[1].labels[static_cast<std::size_t>(p.fe[1].codes[i])],
                   p.cluster.labels[static_cast<std::size_t>(p.cluster.codes[i])]});
    w.commit();
  }
  const Panel q = read_panel_csv(path);
  REQUIRE(q.n_rows() == p.n_rows());
  REQUIRE(q.x_names == std::vector<std::string>{"x0", "x1"});
  REQUIRE(q.fe.size() == 2);
  const FitResult a = fit(p);
  const FitResult b = fit(q);
  for (Eigen::Index j = 0; j < a.beta.size(); ++j)
    CHECK_THAT(a.beta[j], Catch::Matchers::WithinAbs(b.beta[j], 1e-12));
}
