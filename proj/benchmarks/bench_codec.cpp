#include <benchmark/benchmark.h>

#include "tabdit/codec.hpp"
#include "tabdit/rng.hpp"
#include "tabdit/schema.hpp"

using namespace tabdit;

static void bench_encode_numeric(benchmark::State& state) {
    FieldSpec spec{.name = "v", .kind = FieldKind::Numerical};
    Rng rng(1);
    const double v = rng.uniform(0, 1e8);
    for (auto _ : state) {
        benchmark::DoNotOptimize(encode_numeric(v, spec, 4));
    }
}
BENCHMARK(bench_encode_numeric);

static void bench_tokenize_row(benchmark::State& state) {
    FieldSpec category{.name = "type", .kind = FieldKind::Categorical, .vocabulary = {"A", "B", "C"}};
    FieldSpec amount{.name = "amount", .kind = FieldKind::Numerical};
    amount.allows_negative = true;
    Schema schema = Schema::make({category, amount}, 4);
    Row row{.values = {std::string("B"), -1234.5}};
    for (auto _ : state) {
        benchmark::DoNotOptimize(tokenize_row(row, schema));
    }
}
BENCHMARK(bench_tokenize_row);

BENCHMARK_MAIN();
