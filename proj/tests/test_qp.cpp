#include "chainmpc/qp.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

using namespace chainmpc;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct RandomQp {
  QpProblem qp;
  std::vector<int> choices;  // 2 for one-sided rows, 3 for two-sided rows
};

RandomQp make_random_qp(std::mt19937_64& gen) {
  std::uniform_int_distribution<int> ndist(1, 8);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = ndist(gen);
  const int m = std::uniform_int_distribution<int>(0, 12)(gen);

  RandomQp out;
  MatrixXd L = MatrixXd::NullaryExpr(n, n, [&]() { return normal(gen); });
  out.qp.H = L * L.transpose() + 0.1 * MatrixXd::Identity(n, n);
  out.qp.g = VectorXd::NullaryExpr(n, [&]() { return 3.0 * normal(gen); });
  out.qp.A = MatrixXd::NullaryExpr(m, n, [&]() { return normal(gen); });
  const VectorXd z0 = VectorXd::NullaryExpr(n, [&]() { return normal(gen); });
  const VectorXd Az0 = out.qp.A * z0;
  out.qp.lower.resize(m);
  out.qp.upper.resize(m);

  // Keep the enumeration tree bounded: at most six two-sided rows.
  int two_sided = 0;
  for (int i = 0; i < m; ++i) {
    const double r = std::uniform_real_distribution<double>(0.0, 1.0)(gen);
    const double slack_lo = std::uniform_real_distribution<double>(0.0, 1.0)(gen);
    const double slack_hi = std::uniform_real_distribution<double>(0.0, 1.0)(gen);
    if (r < 0.4 || two_sided >= 6) {
      out.qp.lower(i) = -kQpInfinity;
      out.qp.upper(i) = Az0(i) + slack_hi;
      out.choices.push_back(2);
    } else if (r < 0.55) {
      out.qp.lower(i) = Az0(i) - slack_lo;
      out.qp.upper(i) = kQpInfinity;
      out.choices.push_back(-2);
    } else {
      out.qp.lower(i) = Az0(i) - slack_lo;
      out.qp.upper(i) = Az0(i) + slack_hi;
      out.choices.push_back(3);
      ++two_sided;
    }
  }
  return out;
}

// Exhaustive active-set enumeration; returns the unique KKT point.
VectorXd enumerate_solution(const RandomQp& rq) {
  const QpProblem& qp = rq.qp;
  const int n = static_cast<int>(qp.H.rows());
  const int m = static_cast<int>(qp.A.rows());
  std::vector<int> state(m, 0);  // 0 inactive, -1 lower, +1 upper
  VectorXd best;
  for (;;) {
    std::vector<int> rows;
    for (int i = 0; i < m; ++i) {
      if (state[i] != 0) rows.push_back(i);
    }
    const int k = static_cast<int>(rows.size());
    if (k <= n) {
      MatrixXd K = MatrixXd::Zero(n + k, n + k);
      VectorXd rhs(n + k);
      K.topLeftCorner(n, n) = qp.H;
      rhs.head(n) = -qp.g;
      for (int r = 0; r < k; ++r) {
        K.block(n + r, 0, 1, n) = qp.A.row(rows[r]);
        K.block(0, n + r, n, 1) = qp.A.row(rows[r]).transpose();
        rhs(n + r) = state[rows[r]] < 0 ? qp.lower(rows[r]) : qp.upper(rows[r]);
      }
      Eigen::FullPivLU<MatrixXd> lu(K);
      if (lu.rank() == n + k) {
        const VectorXd s = lu.solve(rhs);
        const VectorXd z = s.head(n);
        const VectorXd Az = qp.A * z;
        bool ok = true;
        for (int i = 0; i < m && ok; ++i) ok = Az(i) >= qp.lower(i) - 1e-9 && Az(i) <= qp.upper(i) + 1e-9;
        for (int r = 0; r < k && ok; ++r) {
          const double y = s(n + r);
          ok = state[rows[r]] < 0 ? y <= 1e-9 : y >= -1e-9;
        }
        if (ok) return z;
      }
    }
    // Next assignment in mixed radix.
    int i = 0;
    for (; i < m; ++i) {
      const int c = rq.choices[i];
      if (c == 3) {
        state[i] = state[i] == 0 ? -1 : (state[i] == -1 ? 1 : 0);
      } else if (c == 2) {
        state[i] = state[i] == 0 ? 1 : 0;
      } else {
        state[i] = state[i] == 0 ? -1 : 0;
      }
      if (state[i] != 0) break;
    }
    if (i == m) break;
  }
  return best;
}

}  // namespace

TEST_CASE("random QPs agree with exhaustive active-set enumeration") {
  std::mt19937_64 gen(20240611);
  int solved = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const RandomQp rq = make_random_qp(gen);
    const VectorXd expected = enumerate_solution(rq);
    REQUIRE(expected.size() == rq.qp.H.rows());
    const QpSolution sol = solve_qp(rq.qp);
    CAPTURE(trial);
    REQUIRE(sol.status == QpStatus::solved);
    CHECK((sol.z - expected).lpNorm<Eigen::Infinity>() <= 1e-6);
    ++solved;
  }
  CHECK(solved == 200);
}

TEST_CASE("warm start from the previous solution converges within five iterations") {
  std::mt19937_64 gen(77);
  for (int trial = 0; trial < 50; ++trial) {
    const RandomQp rq = make_random_qp(gen);
    const QpSolution cold = solve_qp(rq.qp);
    REQUIRE(cold.status == QpStatus::solved);
    const QpSolution warm = solve_qp(rq.qp, {}, QpWarmStart{cold.z, cold.y});
    CHECK(warm.status == QpStatus::solved);
    CHECK(warm.iterations <= 5);
    CHECK((warm.z - cold.z).lpNorm<Eigen::Infinity>() <= 1e-6);
  }
}

TEST_CASE("box-constrained scalar problem") {
  QpProblem qp;
  qp.H = MatrixXd::Constant(1, 1, 2.0);
  qp.g = VectorXd::Constant(1, -10.0);
  qp.A = MatrixXd::Identity(1, 1);
  qp.lower = VectorXd::Constant(1, -1.0);
  qp.upper = VectorXd::Constant(1, 2.0);
  const QpSolution sol = solve_qp(qp);
  REQUIRE(sol.status == QpStatus::solved);
  CHECK(sol.z(0) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(sol.y(0) == doctest::Approx(6.0).epsilon(1e-7));
}

TEST_CASE("contradictory bounds are reported infeasible") {
  QpProblem qp;
  qp.H = MatrixXd::Identity(2, 2);
  qp.g = VectorXd::Zero(2);
  qp.A.resize(2, 2);
  qp.A << 1.0, 1.0, -1.0, -1.0;
  qp.lower = VectorXd::Constant(2, 1.0);
  qp.upper = VectorXd::Constant(2, kQpInfinity);
  const QpSolution sol = solve_qp(qp);
  CHECK(sol.status == QpStatus::infeasible);
}

TEST_CASE("unconstrained problem reduces to a linear solve") {
  QpProblem qp;
  qp.H = (MatrixXd(2, 2) << 4.0, 1.0, 1.0, 3.0).finished();
  qp.g = (VectorXd(2) << 1.0, 2.0).finished();
  qp.A.resize(0, 2);
  qp.lower.resize(0);
  qp.upper.resize(0);
  const QpSolution sol = solve_qp(qp);
  REQUIRE(sol.status == QpStatus::solved);
  const VectorXd expected = -qp.H.ldlt().solve(qp.g);
  CHECK((sol.z - expected).norm() <= 1e-8);
}

TEST_CASE("malformed problems are rejected") {
  QpProblem qp;
  qp.H = (MatrixXd(2, 2) << 1.0, 0.5, 0.0, 1.0).finished();
  qp.g = VectorXd::Zero(2);
  qp.A = MatrixXd::Identity(2, 2);
  qp.lower = VectorXd::Zero(2);
  qp.upper = VectorXd::Ones(2);
  CHECK_THROWS_AS(solve_qp(qp), std::invalid_argument);
  qp.H = MatrixXd::Identity(2, 2);
  qp.lower(0) = 2.0;
  CHECK_THROWS_AS(solve_qp(qp), std::invalid_argument);
  qp.lower = VectorXd::Zero(3);
  CHECK_THROWS_AS(solve_qp(qp), std::invalid_argument);
}

TEST_CASE("scalar textbook problems") {
  QpProblem qp;
  qp.H = MatrixXd::Identity(1, 1);
  qp.g = VectorXd::Constant(1, -1.0);
  qp.A.resize(0, 1);
  qp.lower.resize(0);
  qp.upper.resize(0);
  for (QpMethod method : {QpMethod::active_set, QpMethod::admm}) {
    QpSettings s;
    s.method = method;
    QpSolution sol = solve_qp(qp, s);
    REQUIRE(sol.status == QpStatus::solved);
    CHECK(sol.z(0) == doctest::Approx(1.0).epsilon(1e-8));

    QpProblem box;
    box.H = MatrixXd::Identity(1, 1);
    box.g = VectorXd::Zero(1);
    box.A = MatrixXd::Identity(1, 1);
    box.lower = VectorXd::Constant(1, 2.0);
    box.upper = VectorXd::Constant(1, 3.0);
    sol = solve_qp(box, s);
    REQUIRE(sol.status == QpStatus::solved);
    CHECK(sol.z(0) == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(sol.y(0) < 0.0);
  }
}

TEST_CASE("operator splitting agrees with the enumeration oracle") {
  std::mt19937_64 gen(99);
  QpSettings s;
  s.method = QpMethod::admm;
  for (int trial = 0; trial < 50; ++trial) {
    const RandomQp rq = make_random_qp(gen);
    const VectorXd expected = enumerate_solution(rq);
    const QpSolution sol = solve_qp(rq.qp, s);
    CAPTURE(trial);
    REQUIRE(sol.status == QpStatus::solved);
    CHECK((sol.z - expected).lpNorm<Eigen::Infinity>() <= 1e-6);
  }
}

TEST_CASE("solutions satisfy the KKT conditions") {
  std::mt19937_64 gen(123);
  for (int trial = 0; trial < 100; ++trial) {
    const RandomQp rq = make_random_qp(gen);
    const QpSolution sol = solve_qp(rq.qp);
    REQUIRE(sol.status == QpStatus::solved);
    const QpProblem& qp = rq.qp;
    const VectorXd Az = qp.A * sol.z;
    CHECK((qp.H * sol.z + qp.g + qp.A.transpose() * sol.y).lpNorm<Eigen::Infinity>() <= 1e-7);
    for (int i = 0; i < Az.size(); ++i) {
      CHECK(Az(i) >= qp.lower(i) - 1e-8);
      CHECK(Az(i) <= qp.upper(i) + 1e-8);
      if (sol.y(i) > 1e-9) CHECK(std::abs(Az(i) - qp.upper(i)) <= 1e-8);
      if (sol.y(i) < -1e-9) CHECK(std::abs(Az(i) - qp.lower(i)) <= 1e-8);
    }
  }
}

TEST_CASE("uniform row scaling leaves the solution unchanged") {
  std::mt19937_64 gen(321);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int trial = 0; trial < 50; ++trial) {
    const RandomQp rq = make_random_qp(gen);
    QpProblem scaled = rq.qp;
    for (int i = 0; i < scaled.A.rows(); ++i) {
      const double c = scale(gen);
      scaled.A.row(i) *= c;
      if (scaled.lower(i) > -kQpInfinity) scaled.lower(i) *= c;
      if (scaled.upper(i) < kQpInfinity) scaled.upper(i) *= c;
    }
    const QpSolution a = solve_qp(rq.qp);
    const QpSolution b = solve_qp(scaled);
    REQUIRE(a.status == QpStatus::solved);
    REQUIRE(b.status == QpStatus::solved);
    CHECK((a.z - b.z).lpNorm<Eigen::Infinity>() <= 1e-7);
  }
}

TEST_CASE("repeated solves are deterministic") {
  std::mt19937_64 gen(555);
  const RandomQp rq = make_random_qp(gen);
  for (QpMethod method : {QpMethod::active_set, QpMethod::admm}) {
    QpSettings s;
    s.method = method;
    const QpSolution a = solve_qp(rq.qp, s);
    const QpSolution b = solve_qp(rq.qp, s);
    CHECK(a.z == b.z);
    CHECK(a.iterations == b.iterations);
  }
}
