#include <benchmark/benchmark.h>

#include "alora/adapters.hpp"
#include "alora/reference.hpp"
#include "alora/rng.hpp"
#include "alora/sample.hpp"

using namespace alora;

namespace {

std::vector<Sample> make_batch(std::size_t n, std::size_t d, RngStream& rng) {
    std::vector<Sample> batch(n);
    for (Sample& s : batch) {
        s.x.resize(d);
        s.y.resize(d);
        for (double& v : s.x) v = rng.normal();
        for (double& v : s.y) v = rng.normal();
    }
    return batch;
}

void BM_matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    RngStream rng(1);
    const Matrix a = gaussian(n, n, rng), b = gaussian(n, n, rng);
    for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
}

void BM_matmul_reference(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    RngStream rng(1);
    const Matrix a = gaussian(n, n, rng), b = gaussian(n, n, rng);
    for (auto _ : state) benchmark::DoNotOptimize(reference::matmul(a, b));
}

template <bool Parallel>
void BM_grad(benchmark::State& state) {
    const auto d = static_cast<std::size_t>(state.range(0));
    RngStream rng(2);
    const AdapterState adapter = init_adapter({d, d, 8, 3, Scheme::ALoRA, 1.0}, rng);
    const Matrix w0 = gaussian(d, d, rng);
    const auto batch = make_batch(32, d, rng);
    for (auto _ : state) {
        if constexpr (Parallel)
            benchmark::DoNotOptimize(grad(adapter, w0, batch));
        else
            benchmark::DoNotOptimize(reference::grad(adapter, w0, batch));
    }
}

}  // namespace

BENCHMARK(BM_matmul)->Arg(64)->Arg(256);
BENCHMARK(BM_matmul_reference)->Arg(64)->Arg(256);
BENCHMARK(BM_grad<true>)->Arg(64)->Arg(256);
BENCHMARK(BM_grad<false>)->Arg(64)->Arg(256);

BENCHMARK_MAIN();
