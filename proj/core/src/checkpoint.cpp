#include "tabdit/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "tabdit/csv.hpp"
#include "tabdit/errors.hpp"

namespace tabdit {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'T', 'B', 'D', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

json vae_config_json(const VaeConfig& cfg) {
    return json{{"width", cfg.width},
                {"heads", cfg.heads},
                {"encoder_blocks", cfg.encoder_blocks},
                {"decoder_blocks", cfg.decoder_blocks},
                {"latent_dim", cfg.latent_dim},
                {"dropout", cfg.dropout},
                {"logsig_clamp", cfg.logsig_clamp}};
}

VaeConfig vae_config_from(const json& j) {
    VaeConfig cfg;
    cfg.width = j.at("width");
    cfg.heads = j.at("heads");
    cfg.encoder_blocks = j.at("encoder_blocks");
    cfg.decoder_blocks = j.at("decoder_blocks");
    cfg.latent_dim = j.at("latent_dim");
    cfg.dropout = j.at("dropout");
    cfg.logsig_clamp = j.at("logsig_clamp");
    return cfg;
}

json dit_config_json(const DitConfig& cfg) {
    return json{{"depth", cfg.depth},
                {"heads", cfg.heads},
                {"hidden", cfg.hidden},
                {"latent_dim", cfg.latent_dim},
                {"tau_max", cfg.tau_max},
                {"diffusion_steps", cfg.diffusion_steps},
                {"dropout", cfg.dropout},
                {"positional", cfg.positional},
                {"cond_width", cfg.cond_width},
                {"cond_heads", cfg.cond_heads},
                {"cond_blocks", cfg.cond_blocks}};
}

DitConfig dit_config_from(const json& j) {
    DitConfig cfg;
    cfg.depth = j.at("depth");
    cfg.heads = j.at("heads");
    cfg.hidden = j.at("hidden");
    cfg.latent_dim = j.at("latent_dim");
    cfg.tau_max = j.at("tau_max");
    cfg.diffusion_steps = j.at("diffusion_steps");
    cfg.dropout = j.at("dropout");
    cfg.positional = j.at("positional");
    cfg.cond_width = j.at("cond_width");
    cfg.cond_heads = j.at("cond_heads");
    cfg.cond_blocks = j.at("cond_blocks");
    return cfg;
}

std::string pack(const json& header, const nn::ParamStore& params) {
    json meta = header;
    meta["optimizer_step"] = params.step_count();
    json tensors = json::array();
    std::size_t offset = 0;
    for (const auto& e : params.entries()) {
        tensors.push_back(
            json{{"name", e.name}, {"rows", e.value.rows}, {"cols", e.value.cols}, {"offset", offset}});
        offset += 3 * e.value.size();  // value + adam m + adam v
    }
    meta["tensors"] = std::move(tensors);

    const std::string header_text = meta.dump();
    std::string out;
    out.reserve(8 + 4 + 8 + header_text.size() + offset * sizeof(float));
    out.append(kMagic, 8);
    std::uint32_t version = kVersion;
    out.append(reinterpret_cast<const char*>(&version), 4);
    std::uint64_t header_len = header_text.size();
    out.append(reinterpret_cast<const char*>(&header_len), 8);
    out.append(header_text);
    for (const auto& e : params.entries()) {
        out.append(reinterpret_cast<const char*>(e.value.data.data()),
                   e.value.size() * sizeof(float));
        out.append(reinterpret_cast<const char*>(e.m.data.data()), e.m.size() * sizeof(float));
        out.append(reinterpret_cast<const char*>(e.v.data.data()), e.v.size() * sizeof(float));
    }
    return out;
}

struct Unpacked {
    json header;
    std::string blob;  // raw float payload
};

Unpacked unpack(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open checkpoint '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    std::string bytes = buffer.str();
    if (bytes.size() < 20 || std::memcmp(bytes.data(), kMagic, 8) != 0)
        fail(ErrorCode::IoError, "'" + path + "' is not a tabdit checkpoint");
    std::uint32_t version;
    std::memcpy(&version, bytes.data() + 8, 4);
    if (version != kVersion)
        fail(ErrorCode::IoError, "unsupported checkpoint version " + std::to_string(version));
    std::uint64_t header_len;
    std::memcpy(&header_len, bytes.data() + 12, 8);
    if (20 + header_len > bytes.size()) fail(ErrorCode::IoError, "truncated checkpoint header");
    Unpacked out;
    try {
        out.header = json::parse(bytes.substr(20, header_len));
    } catch (const json::exception& e) {
        fail(ErrorCode::IoError, std::string("checkpoint header: ") + e.what());
    }
    out.blob = bytes.substr(20 + header_len);
    return out;
}

void restore_params(nn::ParamStore& params, const json& header, const std::string& blob) {
    const auto& tensors = header.at("tensors");
    if (tensors.size() != params.count())
        fail(ErrorCode::SchemaMismatch, "checkpoint tensor count does not match the model");
    for (const auto& t : tensors) {
        const std::string name = t.at("name");
        auto ref = params.find(name);
        if (!ref.valid()) fail(ErrorCode::SchemaMismatch, "unknown tensor '" + name + "'");
        auto& entry = params.entry(ref);
        const int rows = t.at("rows");
        const int cols = t.at("cols");
        if (rows != entry.value.rows || cols != entry.value.cols)
            fail(ErrorCode::SchemaMismatch, "tensor '" + name + "' shape mismatch");
        const std::size_t offset = t.at("offset");
        const std::size_t count = entry.value.size();
        if ((offset + 3 * count) * sizeof(float) > blob.size())
            fail(ErrorCode::IoError, "checkpoint payload truncated at '" + name + "'");
        std::memcpy(entry.value.data.data(), blob.data() + offset * sizeof(float),
                    count * sizeof(float));
        std::memcpy(entry.m.data.data(), blob.data() + (offset + count) * sizeof(float),
                    count * sizeof(float));
        std::memcpy(entry.v.data.data(), blob.data() + (offset + 2 * count) * sizeof(float),
                    count * sizeof(float));
    }
    params.set_step_count(header.value("optimizer_step", static_cast<std::int64_t>(0)));
}

}  // namespace

void save_vae_checkpoint(const std::string& path, const RowVae& vae, const BetaState& beta,
                         std::uint64_t seed) {
    json header;
    header["kind"] = "vae";
    header["schema_hash"] = hash_hex(vae.schema().hash());
    header["schema"] = json::parse(vae.schema().to_json());
    header["config"] = vae_config_json(vae.config());
    // best starts at +infinity, which JSON cannot carry; store finite or null.
    header["beta_state"] = json{{"beta", beta.beta},
                                {"best", std::isfinite(beta.best) ? json(beta.best) : json()},
                                {"stale", beta.stale}};
    header["rng_seed"] = seed;
    write_file_atomic(path, pack(header, vae.params()));
}

LoadedVae load_vae_checkpoint(const std::string& path) {
    Unpacked raw = unpack(path);
    if (raw.header.at("kind") != "vae")
        fail(ErrorCode::IoError, "'" + path + "' is not a VAE checkpoint");
    Schema schema = Schema::from_json(raw.header.at("schema").dump());
    VaeConfig cfg = vae_config_from(raw.header.at("config"));
    LoadedVae out{RowVae(schema, cfg, 0), BetaState{}, 0};
    restore_params(out.vae.params(), raw.header, raw.blob);
    const auto& beta = raw.header.at("beta_state");
    out.beta.beta = beta.at("beta");
    out.beta.best = beta.at("best").is_number() ? beta.at("best").get<double>()
                                                : std::numeric_limits<double>::infinity();
    out.beta.stale = beta.at("stale");
    out.seed = raw.header.at("rng_seed");
    return out;
}

void save_denoiser_checkpoint(const std::string& path, const Denoiser& model,
                              const NoiseSchedule& schedule, const LatentScaler& scaler,
                              std::uint64_t child_schema_hash, std::uint64_t seed) {
    json header;
    header["kind"] = "denoiser";
    header["schema_hash"] = hash_hex(child_schema_hash);
    header["config"] = dit_config_json(model.config());
    std::vector<double> betas;
    for (int t = 1; t <= schedule.steps(); ++t) betas.push_back(schedule.beta(t));
    header["schedule_betas"] = betas;
    header["rng_seed"] = seed;
    if (!scaler.empty()) {
        header["latent_mean"] = scaler.mean;
        header["latent_std"] = scaler.stddev;
    }
    if (model.conditional()) {
        const Schema& parent = model.condition_encoder().schema();
        header["parent_schema"] = json::parse(parent.to_json());
        header["parent_schema_hash"] = hash_hex(parent.hash());
    }
    write_file_atomic(path, pack(header, model.params()));
}

LoadedDenoiser load_denoiser_checkpoint(const std::string& path) {
    Unpacked raw = unpack(path);
    if (raw.header.at("kind") != "denoiser")
        fail(ErrorCode::IoError, "'" + path + "' is not a denoiser checkpoint");
    DitConfig cfg = dit_config_from(raw.header.at("config"));
    std::optional<Schema> parent_schema;
    if (raw.header.contains("parent_schema"))
        parent_schema = Schema::from_json(raw.header.at("parent_schema").dump());
    LoadedDenoiser out{Denoiser(cfg, 0, parent_schema),
                       NoiseSchedule::from_betas(
                           raw.header.at("schedule_betas").get<std::vector<double>>()),
                       LatentScaler{}, 0, 0};
    restore_params(out.model.params(), raw.header, raw.blob);
    if (raw.header.contains("latent_mean")) {
        out.scaler.mean = raw.header.at("latent_mean").get<std::vector<float>>();
        out.scaler.stddev = raw.header.at("latent_std").get<std::vector<float>>();
    }
    out.child_schema_hash =
        std::stoull(raw.header.at("schema_hash").get<std::string>(), nullptr, 16);
    out.seed = raw.header.at("rng_seed");
    return out;
}

CheckpointInfo peek_checkpoint(const std::string& path) {
    Unpacked raw = unpack(path);
    CheckpointInfo info;
    info.kind = raw.header.at("kind");
    info.schema_hash = std::stoull(raw.header.at("schema_hash").get<std::string>(), nullptr, 16);
    return info;
}

}  // namespace tabdit
