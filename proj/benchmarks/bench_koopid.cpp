#include <benchmark/benchmark.h>

#include <koopid/analysis.hpp>
#include <koopid/dictionary.hpp>
#include <koopid/estimators.hpp>
#include <koopid/random.hpp>
#include <koopid/simulators.hpp>

using namespace koopid;

namespace {

Matrix uniform(Index rows, Index cols, std::uint64_t seed) {
  RandomStream rng(seed);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(-1.0, 1.0);
  return m;
}

DictionarySpec burgers_spec() {
  DictionarySpec s;
  s.m = 20;
  s.q = 2;
  s.z = 30;
  s.lift = PolynomialLifting{2, 3, PolynomialScope::LatestFrame};
  return s;
}

} // namespace

// Degree 2..3 monomials of n variables, one evaluation per iteration.
static void BM_MonomialEvaluate(benchmark::State& state) {
  const Index n = state.range(0);
  const MonomialTable table(n, 2, 3);
  const Vector x = uniform(n, 1, 1);
  Vector out(table.size());
  for (auto _ : state) {
    table.evaluate(x.data(), out.data());
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * table.size());
}
BENCHMARK(BM_MonomialEvaluate)->Arg(2)->Arg(20)->Arg(31);

static void BM_AssembleBurgers(benchmark::State& state) {
  const Index samples = state.range(0);
  const ObservableSeries s(uniform(20, samples, 2), uniform(2, samples, 3), 0.1);
  const DictionarySpec spec = burgers_spec();
  for (auto _ : state) {
    LiftedData d = assemble(s, spec);
    benchmark::DoNotOptimize(d.Fn.data());
  }
  state.SetItemsProcessed(state.iterations() * (samples - spec.z - 1));
}
BENCHMARK(BM_AssembleBurgers)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_FitNonlinearControlled(benchmark::State& state) {
  DictionarySpec spec;
  spec.m = 1;
  spec.q = 1;
  spec.z = 1;
  spec.lift = PolynomialLifting{2, 4, PolynomialScope::AllFrames};
  const Index samples = state.range(0);
  const LiftedData data = assemble(ObservableSeries(uniform(1, samples, 4), uniform(1, samples, 5), 0.1), spec);
  for (auto _ : state) {
    KoopmanModel m = fit_nonlinear_controlled(data);
    benchmark::DoNotOptimize(m.A().data());
  }
}
BENCHMARK(BM_FitNonlinearControlled)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

static void BM_TruncatedSolve(benchmark::State& state) {
  const Index n = state.range(0);
  const Matrix z = uniform(n, 4 * n, 6), y = uniform(n, 4 * n, 7);
  for (auto _ : state) {
    Matrix m = truncated_pinv_solve(y, z, n / 2);
    benchmark::DoNotOptimize(m.data());
  }
}
BENCHMARK(BM_TruncatedSolve)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

static void BM_RolloutBurgersModel(benchmark::State& state) {
  const DictionarySpec spec = burgers_spec();
  const Dictionary d(spec);
  const Index n = d.state_dim();
  // Contracting random model of the Burgers shape.
  const KoopmanModel model(NonlinearControlledFamily{0.9 * Matrix::Identity(n, n), uniform(n, 2, 8) * 0.01,
                                                     uniform(n, d.lift_dim(), 9) * 1e-5},
                           spec, 0.1, full_rank);
  const Index steps = state.range(0);
  const Matrix u = uniform(2, steps, 10) * 0.1;
  const Vector x0 = uniform(n, 1, 11) * 0.1;
  for (auto _ : state) {
    Trajectory t = rollout(model, x0, u, steps);
    benchmark::DoNotOptimize(t.states.data());
  }
  state.SetItemsProcessed(state.iterations() * steps);
}
BENCHMARK(BM_RolloutBurgersModel)->Arg(200)->Unit(benchmark::kMillisecond);

static void BM_SimulateDuffing(benchmark::State& state) {
  const DuffingParams p;
  const double duration = static_cast<double>(state.range(0));
  const Vector u = gen_input(InputSignalSpec{-1.5, 1.5, 5.0, duration, 1, {}}, p.dt_sample);
  for (auto _ : state) {
    SimulationResult r = simulate_duffing(p, Eigen::Vector2d::Zero(), u, duration);
    benchmark::DoNotOptimize(r.state.data());
  }
}
BENCHMARK(BM_SimulateDuffing)->Arg(1000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
