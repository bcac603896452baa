// Serial reference vs OpenMP kernel. The argument is the thread count for the
// parallel variant.

#include <numeric>
#include <vector>

#include <benchmark/benchmark.h>

#include "alloyfit/neural_net.hpp"
#include "alloyfit/parallel.hpp"
#include "alloyfit/reg_tree.hpp"
#include "alloyfit/rng.hpp"
#include "alloyfit/svr.hpp"

using namespace alloyfit;

namespace {

Eigen::MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-1.0, 1.0);
    }
    return m;
}

Eigen::VectorXd smooth_target(const Eigen::MatrixXd& X, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::VectorXd y(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) y(i) = X(i, 0) * X(i, 1) + std::sin(3.0 * X(i, 2)) + 0.1 * rng.normal();
    return y;
}

const svr::KernelSpec kGaussian{svr::KernelKind::Gaussian, 3, 0.1, 1.0};

void KernelMatrixSerial(benchmark::State& state) {
    const auto X = uniform_matrix(1500, 10, 1);
    for (auto _ : state) benchmark::DoNotOptimize(svr::serial::kernel_matrix(kGaussian, X));
}

void KernelMatrixParallel(benchmark::State& state) {
    const auto X = uniform_matrix(1500, 10, 1);
    set_jobs(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(svr::kernel_matrix(kGaussian, X));
}

void JacobianSerial(benchmark::State& state) {
    const auto X = uniform_matrix(4000, 10, 2);
    const auto net = nn::init_network({10, 10, 3});
    for (auto _ : state) benchmark::DoNotOptimize(nn::serial::jacobian(net, X));
}

void JacobianParallel(benchmark::State& state) {
    const auto X = uniform_matrix(4000, 10, 2);
    const auto net = nn::init_network({10, 10, 3});
    set_jobs(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(nn::jacobian(net, X));
}

struct SplitData {
    Eigen::MatrixXd X = uniform_matrix(8000, 10, 4);
    Eigen::VectorXd y = smooth_target(X, 5);
    std::vector<std::size_t> rows = std::vector<std::size_t>(8000);
    SplitData() { std::iota(rows.begin(), rows.end(), std::size_t{0}); }
};

void BestSplitSerial(benchmark::State& state) {
    const SplitData d;
    for (auto _ : state) benchmark::DoNotOptimize(tree::serial::best_split(d.X, d.y, d.rows, 1));
}

void BestSplitParallel(benchmark::State& state) {
    const SplitData d;
    set_jobs(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(tree::best_split(d.X, d.y, d.rows, 1));
}

struct PruneData {
    Eigen::MatrixXd X = uniform_matrix(3000, 10, 6);
    Eigen::VectorXd y = smooth_target(X, 7);
    Eigen::MatrixXd X_val = uniform_matrix(1000, 10, 8);
    Eigen::VectorXd y_val = smooth_target(X_val, 9);
    tree::PruneSequence seq = tree::prune_sequence(tree::grow(X, y));
};

void ValidationR2Serial(benchmark::State& state) {
    const PruneData d;
    for (auto _ : state) benchmark::DoNotOptimize(tree::serial::validation_r2(d.seq, d.X_val, d.y_val));
}

void ValidationR2Parallel(benchmark::State& state) {
    const PruneData d;
    set_jobs(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(tree::validation_r2(d.seq, d.X_val, d.y_val));
}

}  // namespace

BENCHMARK(KernelMatrixSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(KernelMatrixParallel)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(JacobianSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(JacobianParallel)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BestSplitSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BestSplitParallel)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(ValidationR2Serial)->Unit(benchmark::kMillisecond);
BENCHMARK(ValidationR2Parallel)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
