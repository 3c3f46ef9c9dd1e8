#include <benchmark/benchmark.h>

#include "cascade/kernels.hpp"
#include "cascade/rng.hpp"

using namespace cascade;

namespace {

constexpr std::size_t kDim = 768;
constexpr std::size_t kClasses = 2;

struct Problem {
  DenseMatrix x;
  std::vector<std::uint32_t> y;
  std::vector<double> w, b;
  kernels::LinearParams params() const { return {w, b, kClasses, kDim}; }
};

Problem make_problem(std::size_t n) {
  Xoshiro256StarStar rng(derive_seed(7, {n}));
  Problem p;
  p.x = DenseMatrix(n, kDim);
  for (auto& v : p.x.data) v = rng.normal();
  p.y.resize(n);
  for (auto& v : p.y) v = static_cast<std::uint32_t>(rng.uniform_below(kClasses));
  p.w.resize(kClasses * kDim);
  p.b.assign(kClasses, 0.0);
  for (auto& v : p.w) v = 0.1 * rng.normal();
  return p;
}

template <bool Omp>
void predict_proba(benchmark::State& state) {
  const auto p = make_problem(static_cast<std::size_t>(state.range(0)));
  DenseMatrix out;
  for (auto _ : state) {
    if constexpr (Omp) {
      kernels::omp::predict_proba(p.x, p.params(), out);
    } else {
      kernels::ref::predict_proba(p.x, p.params(), out);
    }
    benchmark::DoNotOptimize(out.data.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Omp>
void objective_gradient(benchmark::State& state) {
  const auto p = make_problem(static_cast<std::size_t>(state.range(0)));
  std::vector<double> gw(kClasses * kDim), gb(kClasses);
  for (auto _ : state) {
    double f = 0.0;
    if constexpr (Omp) {
      f = kernels::omp::objective_gradient(p.x, p.y, p.params(), 1e-2, gw, gb);
    } else {
      f = kernels::ref::objective_gradient(p.x, p.y, p.params(), 1e-2, gw, gb);
    }
    benchmark::DoNotOptimize(f);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(predict_proba<false>)->Name("predict_proba/ref")->Arg(1000)->Arg(10000);
BENCHMARK(predict_proba<true>)->Name("predict_proba/omp")->Arg(1000)->Arg(10000);
BENCHMARK(objective_gradient<false>)->Name("objective_gradient/ref")->Arg(1000)->Arg(10000);
BENCHMARK(objective_gradient<true>)->Name("objective_gradient/omp")->Arg(1000)->Arg(10000);

BENCHMARK_MAIN();
