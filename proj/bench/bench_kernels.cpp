#include <benchmark/benchmark.h>

#include "scate/parallel_kernels.hpp"
#include "scate/rng.hpp"

using namespace scate;

namespace {

std::vector<kernels::TreeGroups> random_groups(int n_trees, int n, int leaves, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<kernels::TreeGroups> trees(n_trees);
  for (auto& t : trees) {
    t.group_of_row.resize(n);
    t.members.assign(leaves, {});
    for (int i = 0; i < n; ++i) {
      const int g = static_cast<int>(rng.below(leaves));
      t.group_of_row[i] = g;
      t.members[g].push_back(i);
    }
    // every group needs at least one member
    for (int g = 0; g < leaves; ++g) {
      if (t.members[g].empty()) {
        t.members[g].push_back(g % n);
      }
    }
  }
  return trees;
}

Matrix random_matrix(int r, int c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

void BM_Kernel(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto trees = random_groups(64, n, n / 4, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::kernel_accumulate(trees, n, n));
  }
}

void BM_KernelSerial(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto trees = random_groups(64, n, n / 4, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::kernel_accumulate_serial(trees, n, n));
  }
}

template <bool Parallel>
void smoother_bench(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto trees = random_groups(1, n, 64, 2);
  Matrix base = Matrix::Identity(n, n) * 0.1;
  for (auto _ : state) {
    state.PauseTiming();
    Matrix s = base;
    state.ResumeTiming();
    if constexpr (Parallel) {
      benchmark::DoNotOptimize(kernels::smoother_round(s, trees[0], 0.1));
    } else {
      benchmark::DoNotOptimize(kernels::smoother_round_serial(s, trees[0], 0.1));
    }
  }
}

template <bool Parallel>
void dense_bench(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Matrix X = random_matrix(n, 64, 3);
  Matrix W = random_matrix(64, 64, 4);
  Vector b = Vector::Zero(64);
  Matrix out;
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::dense_forward(X, W, b, out);
    } else {
      kernels::dense_forward_serial(X, W, b, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(BM_Kernel)->Arg(500)->Arg(2000);
BENCHMARK(BM_KernelSerial)->Arg(500)->Arg(2000);
BENCHMARK_TEMPLATE(smoother_bench, true)->Name("BM_SmootherRound")->Arg(500)->Arg(2000);
BENCHMARK_TEMPLATE(smoother_bench, false)->Name("BM_SmootherRoundSerial")->Arg(500)->Arg(2000);
BENCHMARK_TEMPLATE(dense_bench, true)->Name("BM_DenseForward")->Arg(1024)->Arg(8192);
BENCHMARK_TEMPLATE(dense_bench, false)->Name("BM_DenseForwardSerial")->Arg(1024)->Arg(8192);

BENCHMARK_MAIN();
