#include <benchmark/benchmark.h>

#include <random>

#include "nmpcmc/linalg.hpp"

using namespace nmpcmc;

namespace {

Matrix random_spd(int n, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Matrix g(n, n);
    for (int c = 0; c < n; ++c)
        for (int r = 0; r < n; ++r) g(r, c) = dist(gen);
    Matrix a = gemm(1.0, g, false, g, true, 0.0, {});
    for (int i = 0; i < n; ++i) a(i, i) += n;
    return a;
}

}  // namespace

static void BM_CholeskyFactor(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const Matrix a = random_spd(n, 7);
    for (auto _ : state) {
        Matrix l = cholesky_factor(a);
        benchmark::DoNotOptimize(l.data());
    }
}
BENCHMARK(BM_CholeskyFactor)->Arg(2)->Arg(4)->Arg(8)->Arg(16);

static void BM_CholeskySolve(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const Matrix l = cholesky_factor(random_spd(n, 7));
    Matrix b(n, 1);
    for (int i = 0; i < n; ++i) b(i, 0) = 1.0;
    for (auto _ : state) {
        Matrix x = cholesky_solve(l, b);
        benchmark::DoNotOptimize(x.data());
    }
}
BENCHMARK(BM_CholeskySolve)->Arg(2)->Arg(4)->Arg(8)->Arg(16);

static void BM_Gemm(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const Matrix a = random_spd(n, 11);
    const Matrix b = random_spd(n, 13);
    Matrix c(n, n);
    for (auto _ : state) {
        gemm_into(1.0, a, false, b, false, 0.0, c);
        benchmark::DoNotOptimize(c.data());
    }
}
BENCHMARK(BM_Gemm)->Arg(2)->Arg(4)->Arg(8)->Arg(16);

BENCHMARK_MAIN();
