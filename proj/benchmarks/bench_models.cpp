#include <benchmark/benchmark.h>

#include "tabdit/diffusion.hpp"
#include "tabdit/dit.hpp"
#include "tabdit/eval.hpp"
#include "tabdit/vae.hpp"

using namespace tabdit;

namespace {

Schema bench_schema() {
    FieldSpec kind{.name = "kind", .kind = FieldKind::Categorical, .vocabulary = {"A", "B", "C"}};
    FieldSpec date{.name = "date", .kind = FieldKind::Numerical};
    FieldSpec amount{.name = "amount", .kind = FieldKind::Numerical};
    return Schema::make({kind, date, amount}, 4);
}

VaeConfig bench_vae_config() {
    VaeConfig cfg;
    cfg.width = 72;
    cfg.heads = 8;
    cfg.encoder_blocks = 3;
    cfg.decoder_blocks = 3;
    cfg.latent_dim = 96;
    cfg.dropout = 0.0;
    return cfg;
}

std::vector<std::vector<int>> bench_rows(const Schema& schema, int count) {
    Rng rng(1);
    std::vector<std::vector<int>> rows;
    const char* kinds = "ABC";
    for (int i = 0; i < count; ++i) {
        Row row;
        row.values.emplace_back(std::string(1, kinds[rng.uniform_int(0, 2)]));
        row.values.emplace_back(static_cast<double>(rng.uniform_int(1000, 2000)));
        row.values.emplace_back(static_cast<double>(rng.uniform_int(10, 9999)));
        rows.push_back(tokenize_row(row, schema));
    }
    return rows;
}

}  // namespace

static void bench_vae_encode(benchmark::State& state) {
    Schema schema = bench_schema();
    RowVae vae(schema, bench_vae_config(), 2);
    auto rows = bench_rows(schema, static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(vae.encode_mu(rows));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bench_vae_encode)->Arg(16)->Arg(64);

static void bench_vae_decode(benchmark::State& state) {
    Schema schema = bench_schema();
    RowVae vae(schema, bench_vae_config(), 2);
    auto rows = bench_rows(schema, static_cast<int>(state.range(0)));
    auto mu = vae.encode_mu(rows);
    for (auto _ : state) {
        benchmark::DoNotOptimize(vae.decode_tokens(mu));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bench_vae_decode)->Arg(16)->Arg(64);

static void bench_vae_loss_backward(benchmark::State& state) {
    Schema schema = bench_schema();
    RowVae vae(schema, bench_vae_config(), 2);
    auto rows = bench_rows(schema, 32);
    Rng noise(3);
    for (auto _ : state) {
        vae.params().zero_grad();
        nn::Graph g(&vae.params());
        auto loss = vae.build_loss(g, rows, 1.0, &noise);
        g.backward(loss.loss);
        benchmark::DoNotOptimize(g.scalar(loss.loss));
    }
}
BENCHMARK(bench_vae_loss_backward);

static void bench_denoiser_forward(benchmark::State& state) {
    DitConfig cfg;
    cfg.depth = 6;
    cfg.heads = 6;
    cfg.hidden = 96;
    cfg.latent_dim = 96;
    cfg.tau_max = 20;
    cfg.diffusion_steps = 200;
    cfg.dropout = 0.0;
    Denoiser model(cfg, 4);
    Rng rng(5);
    nn::Tensor s_t = nn::Tensor::randn(static_cast<int>(state.range(0)) * 20, 96, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.denoise(s_t, 100));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bench_denoiser_forward)->Arg(1)->Arg(16);

static void bench_sample_chain(benchmark::State& state) {
    DitConfig cfg;
    cfg.depth = 2;
    cfg.heads = 4;
    cfg.hidden = 48;
    cfg.latent_dim = 48;
    cfg.tau_max = 10;
    cfg.diffusion_steps = 50;
    cfg.dropout = 0.0;
    Denoiser model(cfg, 6);
    NoiseSchedule schedule = NoiseSchedule::linear(50);
    SamplerDenoiser<float> sampler;
    sampler.uncond = [&](const nn::Tensor& s, int t) { return model.denoise(s, t); };
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            sample_chain(schedule, sampler, static_cast<int>(state.range(0)), 10, 48, 1.0, 7));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bench_sample_chain)->Arg(8);

static void bench_featurize_series(benchmark::State& state) {
    Schema schema = bench_schema();
    Rng rng(8);
    TimeSeries series;
    const char* kinds = "ABC";
    for (int r = 0; r < 30; ++r) {
        Row row;
        row.values.emplace_back(std::string(1, kinds[rng.uniform_int(0, 2)]));
        row.values.emplace_back(static_cast<double>(rng.uniform_int(1000, 2000)));
        row.values.emplace_back(static_cast<double>(rng.uniform_int(10, 9999)));
        series.rows.push_back(std::move(row));
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(eval::featurize_series(series, schema));
    }
}
BENCHMARK(bench_featurize_series);

BENCHMARK_MAIN();
