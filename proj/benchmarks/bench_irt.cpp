// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <cmath>
#include <string>

#include "tailor/irt.hpp"
#include "tailor/rng.hpp"

using namespace tailor;

namespace {

// Synthetic responses from spread-out 2PL parameters; matches the generator
// the tests recover against so timings reflect realistic convergence counts.
ScoreMatrix planted_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<double> alpha, beta, theta;
    for (std::size_t j = 0; j < cols; ++j) {
        double f = cols > 1 ? static_cast<double>(j) / static_cast<double>(cols - 1) : 0.5;
        alpha.push_back(0.3 * std::pow(10.0, f));
        beta.push_back(-2.0 + 4.0 * f);
    }
    shuffle_inplace(beta, rng);
    for (std::size_t i = 0; i < rows; ++i) {
        double f = rows > 1 ? static_cast<double>(i) / static_cast<double>(rows - 1) : 0.5;
        theta.push_back(-2.5 + 5.0 * f);
    }
    ScoreMatrix m;
    m.cells.assign(rows * cols, 0);
    for (std::size_t i = 0; i < rows; ++i) m.row_ids.push_back("r" + std::to_string(i));
    for (std::size_t j = 0; j < cols; ++j) m.item_ids.push_back("i" + std::to_string(j));
    for (std::size_t j = 0; j < cols; ++j) {
        for (int roll = 0; roll < 100; ++roll) {
            int ones = 0;
            for (std::size_t i = 0; i < rows; ++i) {
                double z = alpha[j] * (theta[i] - beta[j]);
                std::uint8_t y = rng.unit() < 1.0 / (1.0 + std::exp(-z)) ? 1 : 0;
                m.set(i, j, y);
                ones += y;
            }
            if (ones > 0 && ones < static_cast<int>(rows)) break;
        }
    }
    return m;
}

void BM_Fit2pl(benchmark::State& state) {
    const auto rows = static_cast<std::size_t>(state.range(0));
    const auto cols = static_cast<std::size_t>(state.range(1));
    ScoreMatrix m = planted_matrix(rows, cols, 7);
    for (auto _ : state) {
        FitResult fit = fit_2pl(m);
        benchmark::DoNotOptimize(fit.report.log_likelihood);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows * cols));
}
BENCHMARK(BM_Fit2pl)->Args({8, 40})->Args({30, 50})->Args({8, 100});

void BM_LogLikelihoodGradient(benchmark::State& state) {
    ScoreMatrix m = planted_matrix(30, 50, 7);
    FitResult fit = fit_2pl(m);
    for (auto _ : state) {
        LogLikelihoodGradient g = log_likelihood_gradient(m, fit.items, fit.abilities);
        benchmark::DoNotOptimize(g.d_theta.back());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m.rows() * m.cols()));
}
BENCHMARK(BM_LogLikelihoodGradient);

void BM_SelectTopK(benchmark::State& state) {
    ScoreMatrix m = planted_matrix(8, 100, 7);
    FitResult fit = fit_2pl(m);
    for (auto _ : state) {
        auto picked = select_top_k(fit.items, 40);
        benchmark::DoNotOptimize(picked.front());
    }
}
BENCHMARK(BM_SelectTopK);

}  // namespace

// The distro's libbenchmark_main.a ships stale LTO bytecode, so the
// entry point lives here instead of linking benchmark::benchmark_main.
BENCHMARK_MAIN();
