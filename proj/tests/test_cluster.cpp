#include <catch2/catch.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "scsar/cluster.hpp"
#include "scsar/synthesis.hpp"
#include "test_util.hpp"

using namespace scsar;

namespace {

// Independent objective oracle: Gaussian unit terms with the
// uniform log-det share, plus phi times the same-label pair count, all
// recomputed from scratch.
double objective_oracle(const Dataset& d, const SpatialWeights& w,
                        const std::vector<ClusterFit>& fits, const std::vector<int>& labels,
                        double phi) {
  double q = 0.0;
  for (int i = 0; i < d.n(); ++i) {
    const ClusterFit& f = fits[labels[i]];
    double e = 0.0;
    switch (f.family) {
      case ModelFamily::ols:
        e = d.y(i) - d.X.row(i).dot(f.theta);
        break;
      case ModelFamily::sar: {
        double lag = 0.0;
        for (int j : w.neighbors(i)) lag += d.y(j);
        e = d.y(i) - f.spatial_param * lag - d.X.row(i).dot(f.theta);
        break;
      }
      default:
        FAIL("oracle supports ols/sar fixtures only");
    }
    q += -0.5 * std::log(2.0 * M_PI * f.sigma2) - e * e / (2.0 * f.sigma2) +
         f.log_det / f.n_units;
  }
  int same = 0;
  for (auto [i, j] : w.edges())
    if (labels[i] == labels[j]) ++same;
  return q + phi * same;
}

Dataset intercept_dataset(const Eigen::VectorXd& y) {
  const int n = static_cast<int>(y.size());
  Eigen::MatrixX2d coords(n, 2);
  for (int i = 0; i < n; ++i) {
    coords(i, 0) = i;
    coords(i, 1) = 0.0;
  }
  return testutil::make_dataset(y, Eigen::MatrixXd::Ones(n, 1), coords);
}

ClusterFit prescribed_ols(double mean, double sigma2, int n_units) {
  ClusterFit f;
  f.family = ModelFamily::ols;
  f.theta = Eigen::VectorXd::Constant(1, mean);
  f.sigma2 = sigma2;
  f.n_units = n_units;
  return f;
}

}  // namespace

TEST_CASE("initialization basics") {
  std::mt19937 rng(51);
  const int n = 30;
  Dataset d = testutil::make_dataset(testutil::random_vector(rng, n),
                                     testutil::random_design(rng, n, 1),
                                     testutil::random_coords(rng, n));

  SECTION("k = 1 labels everything together") {
    const ClusterAssignment a = initialize(d, 1, 7);
    CHECK(a.k == 1);
    for (int l : a.labels) CHECK(l == 0);
  }

  SECTION("deterministic given the seed") {
    CHECK(initialize(d, 3, 123).labels == initialize(d, 3, 123).labels);
  }

  SECTION("k > N is rejected") {
    CHECK_THROWS_AS(initialize(d, n + 1, 1), KExceedsN);
  }
}

TEST_CASE("initialization separates well-separated clouds exactly") {
  std::mt19937 rng(52);
  const int per_cloud = 20;
  Eigen::MatrixX2d coords(2 * per_cloud, 2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < per_cloud; ++i) {
    coords(i, 0) = u(rng);
    coords(i, 1) = u(rng);
    coords(per_cloud + i, 0) = 200.0 + u(rng);
    coords(per_cloud + i, 1) = 200.0 + u(rng);
  }
  Dataset d = testutil::make_dataset(testutil::random_vector(rng, 2 * per_cloud),
                                     Eigen::MatrixXd::Ones(2 * per_cloud, 1), coords);
  const ClusterAssignment a = initialize(d, 2, 99);
  for (int i = 1; i < per_cloud; ++i) CHECK(a.labels[i] == a.labels[0]);
  for (int i = per_cloud + 1; i < 2 * per_cloud; ++i)
    CHECK(a.labels[i] == a.labels[per_cloud]);
  CHECK(a.labels[0] != a.labels[per_cloud]);
}

TEST_CASE("penalty gain counts same-label neighbours") {
  SpatialWeights star(4, {{0, 1}, {0, 2}, {0, 3}});
  std::vector<int> labels{0, 1, 1, 1};
  CHECK(penalty_gain(star, labels, 0, 1) == 3);
  CHECK(penalty_gain(star, labels, 0, 0) == 0);

  SpatialWeights isolated(3, {{1, 2}});
  CHECK(penalty_gain(isolated, {0, 1, 1}, 0, 0) == 0);
  CHECK(penalty_gain(isolated, {0, 1, 1}, 0, 1) == 0);

  // 4-cycle with labels (0,0,1,1): unit 0 touches units 1 and 3.
  SpatialWeights cycle(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}});
  std::vector<int> half{0, 0, 1, 1};
  CHECK(penalty_gain(cycle, half, 0, 0) == 1);
  CHECK(penalty_gain(cycle, half, 0, 1) == 1);
}

TEST_CASE("step A with one cluster matches the pooled fit") {
  std::mt19937 rng(53);
  const int n = 40;
  auto w = testutil::random_graph(rng, n, 0.15);
  const Eigen::MatrixXd X = testutil::random_design(rng, n, 2);
  const Eigen::VectorXd y = X.col(1) - X.col(2) + testutil::random_vector(rng, n, 0.5);
  Dataset d = testutil::make_dataset(y, X, testutil::random_coords(rng, n));

  EngineConfig cfg;
  cfg.family = ModelFamily::sar;
  cfg.k = 1;
  ClusterAssignment all{std::vector<int>(n, 0), 1};
  const auto fits = step_a(d, w, all, cfg);
  const ClusterFit pooled = fit_sar(y, X, w, FitOptions{false, false});
  REQUIRE(fits.size() == 1);
  CHECK(fits[0].loglik == pooled.loglik);
  CHECK(fits[0].spatial_param == pooled.spatial_param);
  CHECK((fits[0].theta - pooled.theta).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("step A recovers two OLS regimes at the known split") {
  std::mt19937 rng(54);
  const int half = 30;
  Eigen::MatrixXd X = testutil::random_design(rng, 2 * half, 1);
  Eigen::VectorXd y(2 * half);
  for (int i = 0; i < half; ++i) y(i) = 3.0 + 2.0 * X(i, 1);
  for (int i = half; i < 2 * half; ++i) y(i) = -1.0 - X(i, 1);
  y += testutil::random_vector(rng, 2 * half, 0.3);
  Dataset d = testutil::make_dataset(y, X, testutil::random_coords(rng, 2 * half));

  EngineConfig cfg;
  cfg.family = ModelFamily::ols;
  cfg.k = 2;
  ClusterAssignment split{std::vector<int>(2 * half, 0), 2};
  for (int i = half; i < 2 * half; ++i) split.labels[i] = 1;

  const auto fits = step_a(d, SpatialWeights(2 * half), split, cfg, /*with_se=*/true);
  REQUIRE(fits.size() == 2);
  REQUIRE(fits[0].theta_se.has_value());
  CHECK(std::abs(fits[0].theta(0) - 3.0) <= 3.0 * (*fits[0].theta_se)(0));
  CHECK(std::abs(fits[0].theta(1) - 2.0) <= 3.0 * (*fits[0].theta_se)(1));
  CHECK(std::abs(fits[1].theta(0) + 1.0) <= 3.0 * (*fits[1].theta_se)(0));
  CHECK(std::abs(fits[1].theta(1) + 1.0) <= 3.0 * (*fits[1].theta_se)(1));
}

TEST_CASE("step A rejects undersized clusters") {
  std::mt19937 rng(55);
  const int n = 20;
  Dataset d = testutil::make_dataset(testutil::random_vector(rng, n),
                                     testutil::random_design(rng, n, 1),
                                     testutil::random_coords(rng, n));
  EngineConfig cfg;
  cfg.family = ModelFamily::ols;
  cfg.k = 2;
  ClusterAssignment lopsided{std::vector<int>(n, 0), 2};
  lopsided.labels[0] = 1;  // singleton cluster, below P+3
  CHECK_THROWS_AS(step_a(d, SpatialWeights(n), lopsided, cfg), ClusterTooSmall);
}

TEST_CASE("step B assigns by residual when phi is zero") {
  Eigen::VectorXd y(4);
  y << 0.05, 0.9, 1.1, -0.2;
  Dataset d = intercept_dataset(y);
  SpatialWeights w(4, {{0, 1}, {1, 2}, {2, 3}});
  std::vector<ClusterFit> fits{prescribed_ols(0.0, 1.0, 4), prescribed_ols(1.0, 1.0, 4)};

  EngineConfig cfg;
  cfg.family = ModelFamily::ols;
  cfg.k = 2;
  cfg.phi = 0.0;
  ClusterAssignment start{std::vector<int>(4, 0), 2};
  const ClusterAssignment out = step_b(d, w, fits, start, cfg);
  CHECK(out.labels == std::vector<int>{0, 1, 1, 0});
}

TEST_CASE("step B keeps a uniform labeling under a dominant penalty") {
  std::mt19937 rng(56);
  const int n = 12;
  Dataset d = intercept_dataset(testutil::random_vector(rng, n));
  SpatialWeights w(n, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}, {6, 7},
                       {7, 8}, {8, 9}, {9, 10}, {10, 11}});
  std::vector<ClusterFit> fits{prescribed_ols(0.0, 1.0, n), prescribed_ols(5.0, 1.0, n)};

  EngineConfig cfg;
  cfg.family = ModelFamily::ols;
  cfg.k = 2;
  cfg.phi = 1e6;
  ClusterAssignment uniform{std::vector<int>(n, 0), 2};
  CHECK(step_b(d, w, fits, uniform, cfg).labels == uniform.labels);
}

TEST_CASE("step B fixed point matches exhaustive enumeration on a path") {
  Eigen::VectorXd y(3);
  y << 0.9, 0.2, 0.8;
  Dataset d = intercept_dataset(y);
  SpatialWeights w(3, {{0, 1}, {1, 2}});
  std::vector<ClusterFit> fits{prescribed_ols(0.0, 1.0, 3), prescribed_ols(1.0, 1.0, 3)};

  EngineConfig cfg;
  cfg.family = ModelFamily::ols;
  cfg.k = 2;
  cfg.phi = 0.1;

  // Brute force over all 2^3 labelings.
  std::vector<int> best;
  double best_q = -1e300;
  for (int mask = 0; mask < 8; ++mask) {
    std::vector<int> labels{mask & 1, (mask >> 1) & 1, (mask >> 2) & 1};
    const double q = objective_oracle(d, w, fits, labels, cfg.phi);
    if (q > best_q) {
      best_q = q;
      best = labels;
    }
  }

  ClusterAssignment cur{std::vector<int>(3, 0), 2};
  for (int sweep = 0; sweep < 10; ++sweep) {
    const ClusterAssignment next = step_b(d, w, fits, cur, cfg);
    if (next.labels == cur.labels) break;
    cur = next;
  }
  CHECK(cur.labels == best);
  CHECK(objective_oracle(d, w, fits, cur.labels, cfg.phi) == Approx(best_q));
}

TEST_CASE("step B moves never decrease the objective at fixed fits") {
  std::mt19937 rng(57);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 15 + static_cast<int>(rng() % 20u);
    auto w = testutil::random_graph(rng, n, 0.2);
    Dataset d = intercept_dataset(testutil::random_vector(rng, n, 1.5));

    const int k = 2 + static_cast<int>(rng() % 2u);
    std::vector<ClusterFit> fits;
    const bool sar_case = w.has_edges() && (rng() % 2u);
    for (int j = 0; j < k; ++j) {
      ClusterFit f = prescribed_ols(-1.0 + j, 0.5 + 0.3 * j, n);
      if (sar_case) {
        f.family = ModelFamily::sar;
        const double hi = w.admissible_interval().second;
        f.spatial_param = 0.3 * hi / (1 + j);
        f.log_det = w.log_det(f.spatial_param);
      }
      fits.push_back(f);
    }

    EngineConfig cfg;
    cfg.family = sar_case ? ModelFamily::sar : ModelFamily::ols;
    cfg.k = k;
    cfg.phi = 0.4;
    ClusterAssignment start{std::vector<int>(n), k};
    for (int i = 0; i < n; ++i)
      start.labels[i] = static_cast<int>(rng() % static_cast<unsigned>(k));

    std::vector<MoveRecord> moves;
    step_b(d, w, fits, start, cfg, &moves);

    std::vector<int> labels = start.labels;
    for (const MoveRecord& m : moves) {
      const double before = objective_oracle(d, w, fits, labels, cfg.phi);
      CHECK(labels[m.unit] == m.from);
      labels[m.unit] = m.to;
      const double after = objective_oracle(d, w, fits, labels, cfg.phi);
      CHECK(after - before >= -1e-10);
      CHECK(after - before == Approx(m.delta).margin(1e-9));
    }
  }
}

TEST_CASE("relabeling clusters leaves the objective invariant") {
  std::mt19937 rng(58);
  const int n = 20;
  auto w = testutil::random_graph(rng, n, 0.25);
  Dataset d = intercept_dataset(testutil::random_vector(rng, n));
  std::vector<ClusterFit> fits{prescribed_ols(0.0, 1.0, n), prescribed_ols(1.0, 0.7, n),
                               prescribed_ols(-1.0, 1.3, n)};
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) labels[i] = static_cast<int>(rng() % 3u);

  const double base = penalized_objective_value(d, w, fits, labels, 0.6);
  // Permute cluster ids (0,1,2) -> (2,0,1) consistently in fits and labels.
  std::vector<ClusterFit> permuted_fits{fits[1], fits[2], fits[0]};
  std::vector<int> permuted_labels = labels;
  for (int& l : permuted_labels) l = (l + 2) % 3;
  CHECK(penalized_objective_value(d, w, permuted_fits, permuted_labels, 0.6) ==
        Approx(base).margin(1e-12));
}

TEST_CASE("run with one cluster equals the pooled fit") {
  std::mt19937 rng(59);
  const int n = 50;
  auto w = testutil::random_graph(rng, n, 0.12);
  const Eigen::MatrixXd X = testutil::random_design(rng, n, 2);
  const Eigen::VectorXd y = 2.0 * X.col(1) + testutil::random_vector(rng, n, 0.6);
  Dataset d = testutil::make_dataset(y, X, testutil::random_coords(rng, n));

  EngineConfig cfg;
  cfg.family = ModelFamily::sar;
  cfg.k = 1;
  cfg.phi = 0.75;
  const FitResult res = run(d, w, cfg);
  const ClusterFit pooled = fit_sar(y, X, w);

  CHECK(std::abs(res.fits[0].loglik - pooled.loglik) < 1e-8);
  CHECK((res.fits[0].theta - pooled.theta).lpNorm<Eigen::Infinity>() < 1e-8);
  CHECK(res.converged_by == StopRule::membership_fixed);

  const int p_total = static_cast<int>(pooled.theta.size()) + 2;
  CHECK(res.bic == Approx(p_total * std::log(double(n)) - 2.0 * pooled.loglik).margin(1e-8));
}

TEST_CASE("run is deterministic given the seed") {
  Eigen::VectorXd t1(2), t2(2);
  t1 << 2.0, -1.0;
  t2 << -1.0, 3.0;
  auto spec = banded_lattice_spec(8, 8, {{ModelFamily::sar, 0.03, t1, 0.5},
                                         {ModelFamily::sar, 0.0, t2, 0.5}}, 77);
  const SyntheticData data = generate(spec);

  EngineConfig cfg;
  cfg.family = ModelFamily::sar;
  cfg.k = 2;
  cfg.phi = 0.5;
  cfg.seed = 5;
  const FitResult a = run(data.dataset, data.weights, cfg);
  const FitResult b = run(data.dataset, data.weights, cfg);
  CHECK(a.assignment.labels == b.assignment.labels);
  CHECK(a.total_loglik == b.total_loglik);
  CHECK(a.penalized_objective == b.penalized_objective);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("run recovers three contiguous bands") {
  Eigen::VectorXd t1(2), t2(2), t3(2);
  t1 << 2.0, -1.0;
  t2 << -1.0, 3.0;
  t3 << 0.0, 1.0;
  auto spec = banded_lattice_spec(15, 15, {{ModelFamily::sar, 0.03, t1, 0.5},
                                           {ModelFamily::sar, 0.0, t2, 0.5},
                                           {ModelFamily::sar, 0.05, t3, 0.5}}, 2024);
  const SyntheticData data = generate(spec);

  EngineConfig cfg;
  cfg.family = ModelFamily::sar;
  cfg.k = 3;
  cfg.phi = 0.5;
  FitResult best;
  double best_q = -1e300;
  for (unsigned seed : {1u, 2u, 3u}) {
    cfg.seed = seed;
    FitResult r = run(data.dataset, data.weights, cfg);
    if (r.penalized_objective > best_q) {
      best_q = r.penalized_objective;
      best = std::move(r);
    }
  }
  CHECK(score_recovery(data.truth, best.assignment) >= 0.8);

  const auto sizes = best.assignment.sizes();
  int total = 0;
  for (int j = 0; j < best.assignment.k; ++j) {
    CHECK(best.fits[j].n_units == sizes[j]);
    total += sizes[j];
  }
  CHECK(total == data.dataset.n());
  CHECK(static_cast<int>(best.objective_trace.size()) == best.iterations);
}

TEST_CASE("run repairs undersized k-means clusters by donation") {
  std::mt19937 rng(60);
  const int n = 12;
  Eigen::MatrixX2d coords(n, 2);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int i = 0; i < 5; ++i) {
    coords(i, 0) = u(rng);
    coords(i, 1) = u(rng);
  }
  for (int i = 5; i < n; ++i) {
    coords(i, 0) = 50.0 + u(rng);
    coords(i, 1) = 50.0 + u(rng);
  }
  Dataset d = testutil::make_dataset(testutil::random_vector(rng, n),
                                     Eigen::MatrixXd::Ones(n, 1), coords);

  EngineConfig cfg;
  cfg.family = ModelFamily::ols;
  cfg.k = 2;
  cfg.phi = 0.0;
  cfg.min_cluster_size = 6;  // the 5-point cloud must be topped up
  const FitResult res = run(d, SpatialWeights(n), cfg);
  for (int s : res.assignment.sizes()) CHECK(s >= 6);
  CHECK_FALSE(res.warnings.empty());
}

TEST_CASE("run absorbs identical coordinates without failing") {
  std::mt19937 rng(61);
  const int n = 12;
  Dataset d = testutil::make_dataset(testutil::random_vector(rng, n),
                                     Eigen::MatrixXd::Ones(n, 1),
                                     Eigen::MatrixX2d::Zero(n, 2));
  EngineConfig cfg;
  cfg.family = ModelFamily::ols;
  cfg.k = 2;
  cfg.phi = 0.5;
  const FitResult res = run(d, SpatialWeights(n), cfg);
  const auto sizes = res.assignment.sizes();
  CHECK(sizes[0] + sizes[1] == n);
  for (int s : sizes) CHECK(s >= 4);  // P+3 with the intercept-only design
}

TEST_CASE("engine configuration validation") {
  std::mt19937 rng(62);
  const int n = 20;
  Dataset d = testutil::make_dataset(testutil::random_vector(rng, n),
                                     testutil::random_design(rng, n, 1),
                                     testutil::random_coords(rng, n));
  SpatialWeights w(n);

  EngineConfig cfg;
  cfg.family = ModelFamily::ols;
  cfg.k = n + 1;
  CHECK_THROWS_AS(run(d, w, cfg), KExceedsN);

  cfg.k = 5;  // 5 clusters * min  size 5 = 25 > 20
  CHECK_THROWS_AS(run(d, w, cfg), ConfigError);

  cfg.k = 2;
  cfg.eta = 0.0;
  CHECK_THROWS_AS(run(d, w, cfg), ConfigError);

  cfg.eta = 1e-6;
  cfg.phi = -0.1;
  CHECK_THROWS_AS(run(d, w, cfg), ConfigError);
}
