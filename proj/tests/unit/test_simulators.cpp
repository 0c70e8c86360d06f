#include <catch2/catch_amalgamated.hpp>

#include <numbers>

#include <koopid/analysis.hpp>
#include <koopid/error.hpp>
#include <koopid/simulators.hpp>

using namespace koopid;

namespace {

InputSignalSpec random_input(std::uint64_t seed, double duration = 100.0) {
  InputSignalSpec s;
  s.lo = -1.5;
  s.hi = 1.5;
  s.hold = 5.0;
  s.duration = duration;
  s.seed = seed;
  return s;
}

Vector zeros_for(double duration, double dt) { return Vector::Zero(sample_count(duration, dt)); }

Vector sine_profile(int n, double amp) {
  Vector w(n);
  for (int j = 0; j < n; ++j) w(j) = amp * std::sin(std::numbers::pi * j / (n - 1));
  return w;
}

double grid_energy(const Vector& w) {
  const double dx = 1.0 / static_cast<double>(w.size() - 1);
  return dx * (w.squaredNorm() - 0.5 * (w(0) * w(0) + w(w.size() - 1) * w(w.size() - 1)));
}

} // namespace

TEST_CASE("sample counts cover both endpoints", "[simulators]") {
  CHECK(sample_count(1000.0, 0.1) == 10001);
  CHECK(sample_count(50.0, 0.05) == 1001);
  CHECK(sample_count(0.0, 0.1) == 1);
}

TEST_CASE("natural cubic spline", "[simulators][input]") {
  const NaturalCubicSpline lin({0.0, 1.0, 3.0, 4.0}, {1.0, 3.0, 7.0, 9.0});
  for (double t : {-1.0, 0.0, 0.5, 2.2, 4.0, 6.0}) CHECK(lin(t) == Catch::Approx(1.0 + 2.0 * t).margin(1e-12));
  const NaturalCubicSpline s({0.0, 1.0, 2.0}, {0.0, 1.0, 0.0});
  CHECK(s(1.0) == 1.0);
  CHECK(s(0.5) == Catch::Approx(0.6875));
  CHECK_THROWS_AS(NaturalCubicSpline({0.0, 0.0}, {1.0, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS(NaturalCubicSpline({0.0, 1.0}, {1.0}), std::invalid_argument);
}

TEST_CASE("constant input mode yields a constant signal", "[simulators][input]") {
  InputSignalSpec s;
  s.constant = 0.37;
  s.hold = 5.0;
  s.duration = 50.0;
  const Vector u = gen_input(s, 0.1);
  CHECK(u.size() == 501);
  CHECK((u.array() == 0.37).all());
}

TEST_CASE("random input interpolates its knots", "[simulators][input]") {
  const InputSignalSpec s = random_input(3);
  const auto t = input_knot_times(s);
  const auto v = input_knot_values(s);
  REQUIRE(t.size() == 20);
  REQUIRE(v.size() == 20);
  const Vector u = gen_input(s, 0.1);
  for (std::size_t k = 0; k < t.size(); ++k) {
    CHECK(t[k] == Catch::Approx((static_cast<double>(k) + 0.5) * 5.0));
    CHECK(v[k] >= -1.5);
    CHECK(v[k] <= 1.5);
    CHECK(std::abs(u(std::llround(t[k] / 0.1)) - v[k]) < 1e-10);
  }
}

TEST_CASE("random input is deterministic per seed", "[simulators][input]") {
  const Vector a = gen_input(random_input(11), 0.1);
  const Vector b = gen_input(random_input(11), 0.1);
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0);
  CHECK(a != gen_input(random_input(12), 0.1));
}

TEST_CASE("degenerate input specs are rejected", "[simulators][input]") {
  InputSignalSpec s = random_input(1);
  s.hold = 0.0;
  CHECK_THROWS_AS(gen_input(s, 0.1), std::invalid_argument);
  s = random_input(1);
  s.lo = s.hi = 0.5;
  CHECK_THROWS_AS(gen_input(s, 0.1), std::invalid_argument);
  s = random_input(1, 9.0);
  CHECK_THROWS_AS(gen_input(s, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(gen_input(random_input(1), 0.0), std::invalid_argument);
}

TEST_CASE("Duffing equilibria", "[simulators][duffing]") {
  const DuffingParams p;
  const SimulationResult well = simulate_duffing(p, {1.0, 0.0}, zeros_for(100.0, p.dt_sample), 100.0);
  CHECK((well.state.row(0).array() - 1.0).abs().maxCoeff() < 1e-9);
  CHECK(well.state.row(1).cwiseAbs().maxCoeff() < 1e-9);
  const SimulationResult origin = simulate_duffing(p, {0.0, 0.0}, zeros_for(100.0, p.dt_sample), 100.0);
  CHECK(origin.state.norm() == 0.0);
  CHECK(well.series.observables() == 1);
  CHECK(well.series.samples() == 1001);
  CHECK(well.series.Y().row(0) == well.state.row(0));
}

TEST_CASE("Duffing converges to the right well and agrees with step halving", "[simulators][duffing]") {
  DuffingParams p;
  const double T = 60.0;
  const SimulationResult a = simulate_duffing(p, {0.9, 0.1}, zeros_for(T, p.dt_sample), T);
  p.substeps *= 2;
  const SimulationResult b = simulate_duffing(p, {0.9, 0.1}, zeros_for(T, p.dt_sample), T);
  CHECK(std::abs(a.state(0, a.state.cols() - 1) - 1.0) < 1e-6);
  CHECK(std::abs(a.state(1, a.state.cols() - 1)) < 1e-6);
  CHECK((a.state - b.state).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("RK4 convergence order on a forced Duffing run", "[simulators][duffing][property]") {
  const double T = 20.0;
  const Vector u = gen_input(random_input(5, T), 0.1);
  auto run = [&](int substeps) {
    DuffingParams p;
    p.substeps = substeps;
    return simulate_duffing(p, {0.3, -0.2}, u, T).state;
  };
  const Matrix ref = run(64);
  const double e1 = (run(2) - ref).cwiseAbs().maxCoeff();
  const double e2 = (run(4) - ref).cwiseAbs().maxCoeff();
  const double order = std::log2(e1 / e2);
  INFO("errors " << e1 << " " << e2);
  CHECK(order >= 3.5);
}

TEST_CASE("Duffing rejects short inputs and reports blow-up", "[simulators][duffing]") {
  const DuffingParams p;
  CHECK_THROWS_AS(simulate_duffing(p, {0.0, 0.0}, Vector::Zero(10), 5.0), std::invalid_argument);
  CHECK_THROWS_AS(simulate_duffing(p, {1e200, 0.0}, zeros_for(5.0, p.dt_sample), 5.0), NumericalError);
  DuffingParams bad;
  bad.substeps = 0;
  CHECK_THROWS_AS(simulate_duffing(bad, {0.0, 0.0}, zeros_for(5.0, 0.1), 5.0), std::invalid_argument);
}

TEST_CASE("Duffing system adapter matches the simulator", "[simulators][duffing]") {
  const DuffingParams p;
  const Vector u = gen_input(random_input(6, 20.0), p.dt_sample);
  const SimulationResult r = simulate_duffing(p, {0.2, 0.1}, u, 20.0);
  const DuffingSystem sys(p);
  Vector x = r.state.col(0);
  for (Index i = 0; i + 1 < r.state.cols(); ++i) x = sys.step(x, Vector::Constant(1, u(i)));
  CHECK((x - r.state.col(r.state.cols() - 1)).norm() == 0.0);
}

TEST_CASE("Burgers keeps a constant state constant", "[simulators][burgers]") {
  const BurgersParams p;
  const double c = 0.3;
  const Index n = sample_count(10.0, p.dt_sample);
  const SimulationResult r =
      simulate_burgers(p, Vector::Constant(p.grid_points, c), Matrix::Constant(2, n, c), 10.0, BurgersObservable::AllGrid);
  CHECK((r.state.array() - c).abs().maxCoeff() < 1e-14);
  CHECK(r.series.observables() == p.grid_points);
  CHECK(r.series.inputs() == 2);
}

TEST_CASE("Burgers with zero boundaries dissipates energy", "[simulators][burgers][property]") {
  const BurgersParams p;
  const Index n = sample_count(20.0, p.dt_sample);
  Vector w0 = sine_profile(p.grid_points, 0.8);
  for (int j = 0; j < p.grid_points; ++j) w0(j) += 0.3 * std::sin(3.0 * std::numbers::pi * j / (p.grid_points - 1));
  const SimulationResult r = simulate_burgers(p, w0, Matrix::Zero(2, n), 20.0, BurgersObservable::AllGrid);
  double prev = grid_energy(r.state.col(0));
  for (Index i = 1; i < n; ++i) {
    const double e = grid_energy(r.state.col(i));
    CHECK(e <= prev + 1e-10);
    prev = e;
  }
  CHECK(prev < 0.1 * grid_energy(r.state.col(0)));
}

TEST_CASE("Burgers grid refinement", "[simulators][burgers]") {
  auto run = [](int grid) {
    BurgersParams p;
    p.grid_points = grid;
    const double T = 10.0;
    const Index n = sample_count(T, p.dt_sample);
    Matrix b(2, n);
    for (Index i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) * p.dt_sample;
      b(0, i) = 0.2 * std::sin(0.5 * t);
      b(1, i) = -0.1 * std::sin(0.3 * t);
    }
    p.substeps = burgers_stable_substeps(p, 1.0);
    return simulate_burgers(p, sine_profile(grid, 0.5), b, T).series.Y();
  };
  const Matrix coarse = run(64);
  const Matrix fine = run(128);
  REQUIRE(coarse.rows() == 20);
  const Vector err = l2_error(fine, coarse, 0.05);
  INFO("max L2 " << err.maxCoeff());
  CHECK(err.maxCoeff() <= 1e-4);
}

TEST_CASE("Burgers stations and stability checks", "[simulators][burgers]") {
  const auto nodes = burgers_station_nodes(64);
  REQUIRE(nodes.size() == 20);
  CHECK(nodes.front() == 0);
  CHECK(nodes[10] == 32);
  for (std::size_t s = 0; s < nodes.size(); ++s) {
    const double x = static_cast<double>(nodes[s]) / 63.0;
    CHECK(std::abs(x - 0.05 * static_cast<double>(s)) <= 0.5 / 63.0);
  }
  BurgersParams p;
  p.substeps = 1;
  const Index n = sample_count(1.0, p.dt_sample);
  CHECK_THROWS_AS(simulate_burgers(p, Vector::Zero(64), Matrix::Zero(2, n), 1.0), std::invalid_argument);
  CHECK(burgers_stable_substeps(BurgersParams{}, 1.0) <= 40);
  CHECK(burgers_stable_substeps(BurgersParams{}, 20.0) > burgers_stable_substeps(BurgersParams{}, 1.0));
  CHECK_THROWS_AS(simulate_burgers(BurgersParams{}, Vector::Zero(10), Matrix::Zero(2, n), 1.0), std::invalid_argument);
  BurgersParams tiny;
  tiny.grid_points = 4;
  CHECK_THROWS_AS(BurgersSystem(tiny), std::invalid_argument);
}

TEST_CASE("Hopf cycle at radius sqrt(mu) with period 2pi/omega", "[simulators][hopf]") {
  HopfParams p;
  p.mu = 1.0;
  const double T = 500.0;
  const SimulationResult r = simulate_hopf(p, {1.0, 0.0}, zeros_for(T, p.dt_sample), T);
  const Vector radius = r.state.colwise().norm();
  CHECK((radius.array() - 1.0).abs().maxCoeff() < 1e-6);
  const auto c = upward_crossings(r.series.Y().row(0).transpose(), 0.0);
  REQUIRE(c.size() > 50);
  const double period = (c.back() - c.front()) / static_cast<double>(c.size() - 1) * p.dt_sample;
  CHECK(std::abs(period - 2.0 * std::numbers::pi / p.omega) < 1e-6);
}

TEST_CASE("Hopf origin and radial convergence", "[simulators][hopf]") {
  const HopfParams p;
  CHECK(simulate_hopf(p, {0.0, 0.0}, zeros_for(20.0, p.dt_sample), 20.0).state.norm() == 0.0);
  const double r0 = 0.01;
  const SimulationResult r = simulate_hopf(p, {r0, 0.0}, zeros_for(20.0, p.dt_sample), 20.0);
  const double rt = r.state.col(r.state.cols() - 1).norm();
  const double exact = std::sqrt(p.mu / (1.0 + (p.mu / (r0 * r0) - 1.0) * std::exp(-2.0 * p.mu * 20.0)));
  CHECK(std::abs(rt - std::sqrt(p.mu)) < 1e-4);
  CHECK(std::abs(rt - exact) < 1e-6);
}

TEST_CASE("Hopf observables", "[simulators][hopf]") {
  const HopfParams p;
  const Vector u = Vector::Constant(sample_count(5.0, p.dt_sample), 0.2);
  const SimulationResult x = simulate_hopf(p, {0.5, 0.5}, u, 5.0);
  const SimulationResult xy = simulate_hopf(p, {0.5, 0.5}, u, 5.0, HopfObservable::XY);
  CHECK(x.series.observables() == 1);
  CHECK(xy.series.observables() == 2);
  CHECK(xy.series.Y() == xy.state);
  CHECK(x.series.Y().row(0) == xy.state.row(0));
  CHECK(x.series.samples() == 101);
  // The input pushes x only: the two runs differ from the autonomous one.
  const SimulationResult free = simulate_hopf(p, {0.5, 0.5}, Vector::Zero(101), 5.0);
  CHECK((free.state - x.state).norm() > 1e-3);
}
