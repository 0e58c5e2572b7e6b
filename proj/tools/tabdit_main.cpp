// tabdit command line: dataset ingestion, two-stage training, sampling,
// evaluation and codec diagnostics.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "tabdit/checkpoint.hpp"
#include "tabdit/codec.hpp"
#include "tabdit/errors.hpp"
#include "tabdit/eval.hpp"
#include "tabdit/ingest.hpp"
#include "tabdit/pipeline.hpp"

using namespace tabdit;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---- run configuration ------------------------------------------------------

// Defaults follow the dataset-independent hyperparameter tables; every value
// can be overridden by the JSON config file and then by CLI flags.
json default_config() {
    return json{
        {"dataset",
         {{"child", ""},
          {"parent", ""},
          {"series_key", ""},
          {"order_by", ""},
          {"tau_max", 50},
          {"n", 4}}},
        {"vae",
         {{"width", 72},
          {"heads", 8},
          {"encoder_blocks", 3},
          {"decoder_blocks", 3},
          {"latent_dim", 792},
          {"dropout", 0.1},
          {"lr", 5e-5},
          {"weight_decay", 0.01},
          {"batch_size", 1024},
          {"max_steps", 20000},
          {"eval_every", 500},
          {"eval_rows", 256},
          {"target_token_accuracy", 2.0},
          {"padding_prob", 0.05},
          {"beta_max", 5.0},
          {"beta_min", 0.05},
          {"decay", 0.7},
          {"patience", 5}}},
        {"dit",
         {{"depth", 12},
          {"heads", 12},
          {"hidden", 792},
          {"diffusion_steps", 200},
          {"dropout", 0.1},
          {"positional", true},
          {"cond_width", 72},
          {"cond_heads", 8},
          {"cond_blocks", 3},
          {"lr", 1e-4},
          {"weight_decay", 0.01},
          {"batch_size", 128},
          {"max_steps", 30000}}},
        {"guidance", {{"scale", 4.0}, {"drop_prob", 0.005}}},
        {"evaluate",
         {{"runs", 3},
          {"folds", 3},
          {"label_attribute", ""},
          {"label_threshold", 0.0},
          {"label_positive_category", ""}}},
        {"conditional", false},
        {"latent_sampling", "mean"},
        {"seed", 0}};
}

void merge_into(json& base, const json& overlay) {
    for (auto it = overlay.begin(); it != overlay.end(); ++it) {
        if (it->is_object() && base.contains(it.key()) && base[it.key()].is_object())
            merge_into(base[it.key()], *it);
        else
            base[it.key()] = *it;
    }
}

json load_config(const std::string& path) {
    json cfg = default_config();
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open config '" + path + "'");
    json user;
    try {
        in >> user;
    } catch (const json::exception& e) {
        fail(ErrorCode::InvalidConfig, std::string("config JSON: ") + e.what());
    }
    merge_into(cfg, user);
    return cfg;
}

// Leaves of `cfg` that differ from the built-in defaults, for the manifest.
json config_overrides(const json& cfg, const json& defaults, const std::string& prefix = "") {
    json out = json::object();
    for (auto it = cfg.begin(); it != cfg.end(); ++it) {
        const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!defaults.contains(it.key())) {
            out[key] = *it;
        } else if (it->is_object() && defaults[it.key()].is_object()) {
            json inner = config_overrides(*it, defaults[it.key()], key);
            for (auto jt = inner.begin(); jt != inner.end(); ++jt) out[jt.key()] = *jt;
        } else if (*it != defaults[it.key()]) {
            out[key] = *it;
        }
    }
    return out;
}

std::string hex_hash(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

IngestConfig ingest_config_of(const json& cfg) {
    IngestConfig out;
    out.series_key = cfg["dataset"]["series_key"];
    out.order_by = cfg["dataset"]["order_by"];
    out.tau_max = cfg["dataset"]["tau_max"];
    out.significant_digits = cfg["dataset"]["n"];
    return out;
}

PipelineConfig pipeline_config_of(const json& cfg) {
    PipelineConfig out;
    out.tau_max = cfg["dataset"]["tau_max"];
    out.conditional = cfg["conditional"];
    out.latent_sampling = cfg["latent_sampling"];
    out.seed = cfg["seed"];

    const json& vae = cfg["vae"];
    out.vae.width = vae["width"];
    out.vae.heads = vae["heads"];
    out.vae.encoder_blocks = vae["encoder_blocks"];
    out.vae.decoder_blocks = vae["decoder_blocks"];
    out.vae.latent_dim = vae["latent_dim"];
    out.vae.dropout = vae["dropout"];
    out.vae_train.max_steps = vae["max_steps"];
    out.vae_train.batch_size = vae["batch_size"];
    out.vae_train.lr = vae["lr"];
    out.vae_train.weight_decay = vae["weight_decay"];
    out.vae_train.eval_every = vae["eval_every"];
    out.vae_train.eval_rows = vae["eval_rows"];
    out.vae_train.target_token_accuracy = vae["target_token_accuracy"];
    out.vae_train.padding_prob = vae["padding_prob"];
    out.vae_train.beta.beta_max = vae["beta_max"];
    out.vae_train.beta.beta_min = vae["beta_min"];
    out.vae_train.beta.decay = vae["decay"];
    out.vae_train.beta.patience = vae["patience"];

    const json& dit = cfg["dit"];
    out.dit.depth = dit["depth"];
    out.dit.heads = dit["heads"];
    out.dit.hidden = dit["hidden"];
    out.dit.diffusion_steps = dit["diffusion_steps"];
    out.dit.dropout = dit["dropout"];
    out.dit.positional = dit["positional"];
    out.dit.cond_width = dit["cond_width"];
    out.dit.cond_heads = dit["cond_heads"];
    out.dit.cond_blocks = dit["cond_blocks"];
    out.dit_train.max_steps = dit["max_steps"];
    out.dit_train.batch_size = dit["batch_size"];
    out.dit_train.lr = dit["lr"];
    out.dit_train.weight_decay = dit["weight_decay"];

    out.guidance.scale = cfg["guidance"]["scale"];
    out.guidance.drop_prob = cfg["guidance"]["drop_prob"];
    return out;
}

json history_json(const PipelineHistory& history) {
    json vae_curve = json::array();
    for (const auto& p : history.vae)
        vae_curve.push_back(
            json{{"step", p.step}, {"loss", p.loss}, {"recon", p.recon}, {"kl", p.kl}, {"beta", p.beta}});
    json dit_curve = json::array();
    for (const auto& p : history.denoiser)
        dit_curve.push_back(json{{"step", p.step}, {"loss", p.loss}});
    char before[17], after[17];
    std::snprintf(before, sizeof(before), "%016llx",
                  static_cast<unsigned long long>(history.vae_hash_before_denoiser));
    std::snprintf(after, sizeof(after), "%016llx",
                  static_cast<unsigned long long>(history.vae_hash_after_denoiser));
    return json{{"vae_loss_curve", vae_curve},
                {"denoiser_loss_curve", dit_curve},
                {"vae_token_accuracy", history.vae_token_accuracy},
                {"vae_hash_before_denoiser", before},
                {"vae_hash_after_denoiser", after}};
}

void write_json(const std::string& path, const json& doc) {
    write_file_atomic(path, doc.dump(2) + "\n");
}

// ---- output rendering ---------------------------------------------------------

std::string series_csv(const Schema& schema, const std::vector<GeneratedSeries>& series,
                       const std::vector<std::string>& ids) {
    std::vector<std::string> header = {"series_id"};
    for (const auto& field : schema.fields()) header.push_back(field.name);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < series.size(); ++i)
        for (const auto& row : series[i].rows) {
            std::vector<std::string> out = {ids[i]};
            for (std::size_t f = 0; f < row.values.size(); ++f)
                out.push_back(render_value(row.values[f], schema.fields()[f]));
            rows.push_back(std::move(out));
        }
    return format_csv(header, rows);
}

std::string parents_csv(const Schema& schema, const std::vector<Row>& parents,
                        const std::vector<std::string>& ids) {
    std::vector<std::string> header = {"series_id"};
    for (const auto& field : schema.fields()) header.push_back(field.name);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < parents.size(); ++i) {
        std::vector<std::string> out = {ids[i]};
        for (std::size_t f = 0; f < parents[i].values.size(); ++f)
            out.push_back(render_value(parents[i].values[f], schema.fields()[f]));
        rows.push_back(std::move(out));
    }
    return format_csv(header, rows);
}

// Parse a parent CSV against a fixed parent schema; returns rows plus ids.
std::pair<std::vector<Row>, std::vector<std::string>> read_parent_rows(const std::string& path,
                                                                       const Schema& schema,
                                                                       const std::string& key_name) {
    CsvTable table = read_csv_file(path);
    std::vector<int> cols;
    for (const auto& field : schema.fields()) {
        const int c = table.column(field.name);
        if (c < 0) fail(ErrorCode::SchemaMismatch, "condition CSV lacks column '" + field.name + "'");
        cols.push_back(c);
    }
    // Default key: the first column, provided it is not a schema field.
    int key_col = -1;
    if (!key_name.empty()) {
        key_col = table.column(key_name);
    } else if (!table.header.empty() &&
               std::find(cols.begin(), cols.end(), 0) == cols.end()) {
        key_col = 0;
    }
    std::vector<Row> rows;
    std::vector<std::string> ids;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        Row row;
        for (std::size_t f = 0; f < cols.size(); ++f) {
            const FieldSpec& spec = schema.fields()[f];
            const std::string& text = table.rows[r][cols[f]];
            if (spec.kind == FieldKind::Categorical) {
                row.values.emplace_back(text);
            } else if (!spec.date_unit.empty()) {
                std::int64_t value;
                bool has_time;
                if (!parse_date(text, value, has_time))
                    fail(ErrorCode::MixedTypeColumn, "'" + text + "' is not a date");
                if (has_time && spec.date_unit == "days") value /= 86400;
                row.values.emplace_back(static_cast<double>(value - spec.date_origin));
            } else {
                double value;
                if (!parse_number(text, value))
                    fail(ErrorCode::MixedTypeColumn, "'" + text + "' is not numeric");
                row.values.emplace_back(value);
            }
        }
        rows.push_back(std::move(row));
        ids.push_back(key_col >= 0 ? table.rows[r][key_col] : "p" + std::to_string(r));
    }
    if (rows.empty()) fail(ErrorCode::EmptyDataset, "condition CSV has no rows");
    return {rows, ids};
}

// ---- train -------------------------------------------------------------------

int cmd_train(const json& cfg, const std::string& stage, const std::string& out_dir) {
    const auto start = std::chrono::steady_clock::now();
    fs::create_directories(out_dir);

    const std::string child = cfg["dataset"]["child"];
    if (child.empty()) fail(ErrorCode::InvalidConfig, "dataset.child is required");
    TrainingCorpus corpus =
        ingest_corpus(child, cfg["dataset"]["parent"], ingest_config_of(cfg));
    PipelineConfig pipe_cfg = pipeline_config_of(cfg);

    json manifest;
    manifest["config"] = cfg;
    manifest["config_overrides"] = config_overrides(cfg, default_config());
    manifest["schema"] = json::parse(corpus.schema.to_json());
    manifest["series_count"] = corpus.series.size();
    manifest["row_count"] = corpus.total_rows();

    const std::string vae_path = out_dir + "/vae.bin";
    const std::string dit_path = out_dir + "/denoiser.bin";

    if (stage == "vae" || stage == "all") {
        RowVae vae(corpus.schema, pipe_cfg.vae, Rng::stream(pipe_cfg.seed, 1).next_u64());
        std::vector<std::vector<int>> rows;
        for (const auto& s : corpus.series)
            for (const auto& row : s.rows) rows.push_back(tokenize_row(row, corpus.schema));
        auto result =
            train_row_vae(vae, rows, pipe_cfg.vae_train, Rng::stream(pipe_cfg.seed, 2).next_u64());
        BetaState beta;
        beta.beta = result.final_beta;
        save_vae_checkpoint(vae_path, vae, beta, pipe_cfg.seed);
        json curve = json::array();
        for (const auto& p : result.history)
            curve.push_back(json{{"step", p.step},
                                 {"loss", p.loss},
                                 {"recon", p.recon},
                                 {"kl", p.kl},
                                 {"beta", p.beta}});
        manifest["vae"] = json{{"loss_curve", curve},
                               {"token_accuracy", result.token_accuracy},
                               {"steps_run", result.steps_run},
                               {"checkpoint", vae_path}};
    }

    if (stage == "dit" || stage == "all") {
        LoadedVae loaded = load_vae_checkpoint(vae_path);
        if (loaded.vae.schema().hash() != corpus.schema.hash())
            fail(ErrorCode::SchemaMismatch, "VAE checkpoint schema does not match the dataset");
        const std::uint64_t hash_before = loaded.vae.params().content_hash();

        nn::Tensor latents = encode_corpus(loaded.vae, corpus, pipe_cfg.tau_max,
                                           pipe_cfg.latent_sampling, pipe_cfg.seed);
        LatentScaler scaler = LatentScaler::fit(latents);
        scaler.normalize(latents);
        DitConfig dit_cfg = pipe_cfg.dit;
        dit_cfg.tau_max = pipe_cfg.tau_max;
        dit_cfg.latent_dim = loaded.vae.config().latent_dim;
        std::optional<Schema> parent_schema;
        if (pipe_cfg.conditional) {
            if (!corpus.parent_schema)
                fail(ErrorCode::SchemaMismatch, "conditional training needs a parent table");
            parent_schema = corpus.parent_schema;
        }
        Denoiser denoiser(dit_cfg, Rng::stream(pipe_cfg.seed, 3).next_u64(), parent_schema);
        NoiseSchedule schedule = NoiseSchedule::linear(dit_cfg.diffusion_steps);

        DitTrainConfig dit_train = pipe_cfg.dit_train;
        dit_train.cond_drop_prob = pipe_cfg.guidance.drop_prob;
        std::vector<std::vector<int>> parent_tokens;
        if (pipe_cfg.conditional)
            for (const auto& parent : corpus.parents)
                parent_tokens.push_back(tokenize_row(parent, *corpus.parent_schema));
        auto history = train_denoiser(denoiser, schedule, latents,
                                      pipe_cfg.conditional ? &parent_tokens : nullptr, dit_train,
                                      Rng::stream(pipe_cfg.seed, 4).next_u64());
        if (loaded.vae.params().content_hash() != hash_before)
            fail(ErrorCode::SchemaMismatch, "VAE changed during the denoiser stage");

        save_denoiser_checkpoint(dit_path, denoiser, schedule, scaler, corpus.schema.hash(),
                                 pipe_cfg.seed);
        json curve = json::array();
        for (const auto& p : history) curve.push_back(json{{"step", p.step}, {"loss", p.loss}});
        char hash_hexbuf[17];
        std::snprintf(hash_hexbuf, sizeof(hash_hexbuf), "%016llx",
                      static_cast<unsigned long long>(hash_before));
        manifest["denoiser"] = json{{"loss_curve", curve},
                                    {"checkpoint", dit_path},
                                    {"frozen_vae_hash", hash_hexbuf}};
    }

    if (stage == "sr") {
        if (!corpus.parent_schema)
            fail(ErrorCode::SchemaMismatch, "single-row training needs a parent table");
        // Deduplicate parents (one per original series key).
        std::vector<Row> parents;
        std::map<std::string, bool> seen;
        for (std::size_t i = 0; i < corpus.parents.size(); ++i)
            if (!seen.count(corpus.keys[i])) {
                seen[corpus.keys[i]] = true;
                parents.push_back(corpus.parents[i]);
            }
        SrPipeline sr = train_sr_pipeline(*corpus.parent_schema, parents, pipe_cfg);
        save_vae_checkpoint(out_dir + "/sr_vae.bin", sr.vae, BetaState{}, pipe_cfg.seed);
        save_denoiser_checkpoint(out_dir + "/sr_denoiser.bin", sr.denoiser, sr.schedule, sr.scaler,
                                 corpus.parent_schema->hash(), pipe_cfg.seed);
        manifest["sr"] = history_json(sr.history);
    }

    manifest["elapsed_seconds"] = seconds_since(start);
    write_json(out_dir + "/manifest.json", manifest);
    std::cout << "trained stage '" << stage << "' -> " << out_dir << "\n";
    return 0;
}

// ---- generate ------------------------------------------------------------------

int cmd_generate(const json& cfg, const std::string& checkpoint_dir, int count,
                 std::uint64_t seed, double guidance_scale, const std::string& condition_csv,
                 bool gen_parents, const std::string& out_csv, const std::string& out_parent_csv) {
    const auto start = std::chrono::steady_clock::now();

    LoadedVae vae = load_vae_checkpoint(checkpoint_dir + "/vae.bin");
    LoadedDenoiser denoiser = load_denoiser_checkpoint(checkpoint_dir + "/denoiser.bin");
    if (denoiser.child_schema_hash != vae.vae.schema().hash())
        fail(ErrorCode::SchemaMismatch, "denoiser was trained against a different schema");

    Pipeline pipeline{std::move(vae.vae), std::move(denoiser.model), std::move(denoiser.schedule),
                      GuidanceConfig{guidance_scale, 0.0}, std::move(denoiser.scaler),
                      PipelineHistory{}};

    std::optional<std::vector<Row>> conditions;
    std::vector<std::string> ids;
    std::optional<Schema> parent_schema;
    std::vector<Row> generated_parents;

    if (pipeline.denoiser.conditional()) {
        parent_schema = pipeline.denoiser.condition_encoder().schema();
        if (gen_parents) {
            LoadedVae sr_vae = load_vae_checkpoint(checkpoint_dir + "/sr_vae.bin");
            LoadedDenoiser sr_dit = load_denoiser_checkpoint(checkpoint_dir + "/sr_denoiser.bin");
            if (sr_vae.vae.schema().hash() != parent_schema->hash())
                fail(ErrorCode::SchemaMismatch, "SR models use a different parent schema");
            SrPipeline sr{std::move(sr_vae.vae), std::move(sr_dit.model),
                          std::move(sr_dit.schedule), std::move(sr_dit.scaler),
                          PipelineHistory{}};
            generated_parents = generate_parent_rows(sr, count, Rng::stream(seed, 91).next_u64());
            conditions = generated_parents;
            for (int i = 0; i < count; ++i) ids.push_back("g" + std::to_string(i));
        } else if (!condition_csv.empty()) {
            auto [rows, row_ids] = read_parent_rows(condition_csv, *parent_schema,
                                                    cfg["dataset"]["series_key"]);
            conditions = std::move(rows);
            ids = std::move(row_ids);
            count = static_cast<int>(conditions->size());
        } else {
            fail(ErrorCode::InvalidConfig,
                 "conditional checkpoint needs --condition or --gen-parents");
        }
    } else {
        if (!condition_csv.empty() || gen_parents)
            fail(ErrorCode::InvalidConfig, "checkpoint is unconditional");
        for (int i = 0; i < count; ++i) ids.push_back("s" + std::to_string(i));
    }

    auto series = generate_series(pipeline, count, conditions, guidance_scale, seed);
    write_file_atomic(out_csv, series_csv(pipeline.vae.schema(), series, ids));
    if (!out_parent_csv.empty()) {
        if (!parent_schema || !conditions)
            fail(ErrorCode::InvalidConfig, "no parent rows to write");
        write_file_atomic(out_parent_csv, parents_csv(*parent_schema, *conditions, ids));
    }

    json manifest;
    manifest["seed"] = seed;
    manifest["count"] = count;
    manifest["guidance_scale"] = guidance_scale;
    manifest["checkpoint"] = checkpoint_dir;
    manifest["schema_hash"] = hex_hash(pipeline.vae.schema().hash());
    manifest["vae_params_hash"] = hex_hash(pipeline.vae.params().content_hash());
    manifest["denoiser_params_hash"] = hex_hash(pipeline.denoiser.params().content_hash());
    manifest["output"] = out_csv;
    manifest["elapsed_seconds"] = seconds_since(start);
    std::size_t total_rows = 0;
    for (const auto& s : series) total_rows += s.rows.size();
    manifest["generated_rows"] = total_rows;
    write_json(out_csv + ".manifest.json", manifest);
    std::cout << "generated " << series.size() << " series (" << total_rows << " rows) -> "
              << out_csv << "\n";
    return 0;
}

// ---- evaluate ------------------------------------------------------------------

int cmd_evaluate(const json& cfg, const std::string& real_csv, const std::string& synthetic_csv,
                 const std::string& real_parent_csv, const std::string& synthetic_parent_csv,
                 const std::string& task, const std::string& out_path) {
    IngestConfig ingest_cfg = ingest_config_of(cfg);
    TrainingCorpus real = ingest_corpus(real_csv, real_parent_csv, ingest_cfg);
    // The synthetic side reuses the real schema so vocabularies line up.
    IngestConfig synth_cfg = ingest_cfg;
    synth_cfg.schema_override = real.schema;
    if (real.parent_schema) synth_cfg.parent_schema_override = real.parent_schema;
    TrainingCorpus synthetic = ingest_corpus(synthetic_csv, synthetic_parent_csv, synth_cfg);

    eval::EvalOptions options;
    options.task = task;
    options.runs = cfg["evaluate"]["runs"];
    options.folds = cfg["evaluate"]["folds"];
    options.seed = cfg["seed"];
    const std::string label_attribute = cfg["evaluate"]["label_attribute"];
    if (!label_attribute.empty() && task != "uncond" && task != "merged") {
        eval::LabelRule rule;
        rule.attribute = label_attribute;
        rule.threshold = cfg["evaluate"]["label_threshold"];
        rule.positive_category = cfg["evaluate"]["label_positive_category"];
        options.label = rule;
    }

    eval::EvalReport report = eval::evaluate_corpora(real, synthetic, options);
    if (out_path.empty()) {
        std::cout << report.to_json() << "\n";
    } else {
        write_file_atomic(out_path, report.to_json() + "\n");
        std::cout << "evaluation report -> " << out_path << "\n";
    }
    return 0;
}

// ---- diagnose ------------------------------------------------------------------

int cmd_diagnose(const json& cfg, const std::string& dataset_csv, const std::string& synthetic_csv,
                 const std::string& out_path) {
    IngestConfig ingest_cfg = ingest_config_of(cfg);
    TrainingCorpus corpus = ingest_corpus(dataset_csv, "", ingest_cfg);

    json doc;
    json per_field = json::object();
    std::vector<double> pooled;
    for (std::size_t f = 0; f < corpus.schema.fields().size(); ++f) {
        const FieldSpec& spec = corpus.schema.fields()[f];
        if (spec.kind != FieldKind::Numerical) continue;
        std::vector<double> values;
        for (const auto& series : corpus.series)
            for (const auto& row : series.rows)
                values.push_back(std::get<double>(row.values[f]));
        pooled.insert(pooled.end(), values.begin(), values.end());
        const DigitLengthStats stats = digit_length_stats(values);
        per_field[spec.name] = json{{"mu_s", stats.mean},
                                    {"sigma_s", stats.stddev},
                                    {"recommended_n", stats.recommended_n},
                                    {"count", stats.count}};
    }
    if (!pooled.empty()) {
        const DigitLengthStats stats = digit_length_stats(pooled);
        doc["overall"] = json{{"mu_s", stats.mean},
                              {"sigma_s", stats.stddev},
                              {"recommended_n", stats.recommended_n},
                              {"count", stats.count}};
    }
    doc["per_field"] = per_field;
    doc["configured_n"] = corpus.schema.significant_digits();

    auto histogram = [&](const TrainingCorpus& c) {
        std::map<int, int> bins;
        for (const auto& series : c.series) ++bins[static_cast<int>(series.rows.size())];
        json out = json::object();
        for (const auto& [len, count] : bins)
            out[std::to_string(len)] =
                static_cast<double>(count) / static_cast<double>(c.series.size());
        return out;
    };
    doc["length_histogram"] = histogram(corpus);
    if (!synthetic_csv.empty()) {
        IngestConfig synth_cfg = ingest_cfg;
        synth_cfg.schema_override = corpus.schema;
        TrainingCorpus synthetic = ingest_corpus(synthetic_csv, "", synth_cfg);
        doc["synthetic_length_histogram"] = histogram(synthetic);
    }

    if (out_path.empty()) {
        std::cout << doc.dump(2) << "\n";
    } else {
        write_json(out_path, doc);
        std::cout << "diagnostics -> " << out_path << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"TabDiT: latent-diffusion generation of tabular time series"};
    app.require_subcommand(0, 1);

    std::string config_path;
    bool print_config = false;
    app.add_option("--config", config_path, "JSON run configuration")->capture_default_str();
    app.add_flag("--print-effective-config", print_config,
                 "Dump the merged configuration and exit");

    // Shared overrides.
    std::optional<std::uint64_t> seed_flag;
    std::optional<int> tau_max_flag;
    app.add_option("--seed", seed_flag, "Override config seed");
    app.add_option("--tau-max", tau_max_flag, "Override dataset.tau_max");

    auto* train = app.add_subcommand("train", "Train the VAE and/or the denoiser");
    std::string stage = "all";
    std::string out_dir = "model";
    std::string child_csv, parent_csv;
    bool conditional_flag = false;
    train->add_option("--stage", stage, "vae | dit | sr | all")->capture_default_str();
    train->add_option("--out", out_dir, "Checkpoint directory")->capture_default_str();
    train->add_option("--child", child_csv, "Child CSV (overrides config)");
    train->add_option("--parent", parent_csv, "Parent CSV (overrides config)");
    train->add_flag("--conditional", conditional_flag, "Train with parent conditioning");

    auto* generate = app.add_subcommand("generate", "Sample synthetic series");
    std::string checkpoint_dir = "model";
    std::string out_csv = "generated.csv";
    std::string out_parent_csv;
    std::string condition_csv;
    bool gen_parents = false;
    int count = 100;
    std::uint64_t gen_seed = 0;
    double guidance_scale = -1.0;  // default: from config
    generate->add_option("--checkpoint", checkpoint_dir, "Checkpoint directory")
        ->capture_default_str();
    generate->add_option("--count", count, "Series to generate")->capture_default_str();
    generate->add_option("--seed", gen_seed, "Sampling seed")->capture_default_str();
    generate->add_option("--condition", condition_csv, "Parent CSV to condition on");
    generate->add_flag("--gen-parents", gen_parents, "Generate parent rows with the SR models");
    generate->add_option("--guidance", guidance_scale, "Guidance scale (default from config)");
    generate->add_option("--out", out_csv, "Output CSV")->capture_default_str();
    generate->add_option("--out-parent", out_parent_csv, "Where to write the parent rows CSV");

    auto* evaluate = app.add_subcommand("evaluate", "Score synthetic data against real data");
    std::string real_csv, synthetic_csv, real_parent_csv, synthetic_parent_csv;
    std::string task = "uncond";
    std::string report_path;
    evaluate->add_option("--real", real_csv, "Real child CSV")->required();
    evaluate->add_option("--synthetic", synthetic_csv, "Synthetic child CSV")->required();
    evaluate->add_option("--real-parent", real_parent_csv, "Real parent CSV");
    evaluate->add_option("--synthetic-parent", synthetic_parent_csv, "Synthetic parent CSV");
    evaluate->add_option("--task", task, "uncond | child | child-gt-cond | merged")
        ->capture_default_str();
    evaluate->add_option("--out", report_path, "Report JSON path (default stdout)");

    auto* diagnose = app.add_subcommand("diagnose", "Digit-length statistics and histograms");
    std::string dataset_csv, diag_synthetic_csv, diag_out;
    diagnose->add_option("--dataset", dataset_csv, "Dataset CSV")->required();
    diagnose->add_option("--synthetic", diag_synthetic_csv, "Synthetic CSV for comparison");
    diagnose->add_option("--out", diag_out, "Output JSON path (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        json cfg = load_config(config_path);
        if (seed_flag) cfg["seed"] = *seed_flag;
        if (tau_max_flag) cfg["dataset"]["tau_max"] = *tau_max_flag;
        if (!child_csv.empty()) cfg["dataset"]["child"] = child_csv;
        if (!parent_csv.empty()) cfg["dataset"]["parent"] = parent_csv;
        if (conditional_flag) cfg["conditional"] = true;

        if (print_config) {
            std::cout << cfg.dump(2) << "\n";
            return 0;
        }
        if (app.get_subcommands().empty()) {
            std::cout << app.help() << "\n";
            return 1;
        }

        if (app.got_subcommand(train)) return cmd_train(cfg, stage, out_dir);
        if (app.got_subcommand(generate)) {
            const double scale =
                guidance_scale < 0 ? double(cfg["guidance"]["scale"]) : guidance_scale;
            const std::uint64_t seed = seed_flag.value_or(gen_seed);
            return cmd_generate(cfg, checkpoint_dir, count, seed, scale, condition_csv,
                                gen_parents, out_csv, out_parent_csv);
        }
        if (app.got_subcommand(evaluate))
            return cmd_evaluate(cfg, real_csv, synthetic_csv, real_parent_csv,
                                synthetic_parent_csv, task, report_path);
        if (app.got_subcommand(diagnose))
            return cmd_diagnose(cfg, dataset_csv, diag_synthetic_csv, diag_out);
    } catch (const Error& e) {
        json err{{"error", error_code_name(e.code())}, {"message", e.what()}};
        std::cerr << err.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        json err{{"error", "Unhandled"}, {"message", e.what()}};
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 0;
}
