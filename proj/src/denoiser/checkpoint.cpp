#include "polypgen/denoiser/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include "polypgen/io/container.hpp"

using nlohmann::json;

namespace polypgen::denoiser {

std::string_view model_kind_name(ModelKind k) { return k == ModelKind::mask_model ? "mask_model" : "image_model"; }

ModelKind parse_model_kind(std::string_view s) {
    if (s == "mask_model") return ModelKind::mask_model;
    if (s == "image_model") return ModelKind::image_model;
    throw Error(ErrorCode::InvalidConfig, "unknown model kind: " + std::string(s));
}

namespace {

json diffusion_json(const diffusion::DiffusionConfig& d) {
    return json{{"schedule", diffusion::schedule_kind_name(d.schedule_kind)},
                {"T", d.timesteps},
                {"cosine_offset", d.cosine_offset},
                {"beta_start", d.beta_start},
                {"beta_end", d.beta_end},
                {"beta_max", d.beta_max},
                {"conditioning", diffusion::conditioning_name(d.conditioning)}};
}

diffusion::DiffusionConfig diffusion_from_json(const json& j) {
    diffusion::DiffusionConfig d;
    d.schedule_kind = diffusion::parse_schedule_kind(j.at("schedule").get<std::string>());
    d.timesteps = j.at("T").get<int>();
    d.cosine_offset = j.at("cosine_offset").get<double>();
    d.beta_start = j.at("beta_start").get<double>();
    d.beta_end = j.at("beta_end").get<double>();
    d.beta_max = j.at("beta_max").get<double>();
    d.conditioning = diffusion::parse_conditioning(j.at("conditioning").get<std::string>());
    return d;
}

json header_of(const DenoiserCheckpoint& c) {
    json h{{"kind", model_kind_name(c.kind)},
           {"arch", c.arch},
           {"diffusion", diffusion_json(c.diffusion)},
           {"diffusion_digest", c.diffusion.fingerprint()},
           {"resolution", c.resolution},
           {"step", c.step},
           {"seed", c.seed}};
    if (c.latent) {
        h["latent"] = json{{"autoencoder_digest", c.latent->autoencoder_digest},
                           {"factor", c.latent->factor},
                           {"latent_channels", c.latent->latent_channels},
                           {"scale", c.latent->scale}};
    }
    return h;
}

}  // namespace

std::string DenoiserCheckpoint::digest() const { return io::container_digest(kDenoiserMagic, header_of(*this), parameters); }

void save_checkpoint(const DenoiserCheckpoint& ckpt, const std::filesystem::path& path) {
    io::write_container(path, kDenoiserMagic, header_of(ckpt), ckpt.parameters);
}

DenoiserCheckpoint load_checkpoint(const std::filesystem::path& path) {
    io::Container c = io::read_container(path, kDenoiserMagic);
    DenoiserCheckpoint ckpt;
    try {
        const json& h = c.header;
        ckpt.kind = parse_model_kind(h.at("kind").get<std::string>());
        ckpt.arch = h.at("arch").get<DenoiserArch>();
        ckpt.diffusion = diffusion_from_json(h.at("diffusion"));
        if (h.at("diffusion_digest").get<std::string>() != ckpt.diffusion.fingerprint())
            throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": diffusion config digest mismatch");
        ckpt.resolution = h.at("resolution").get<int>();
        ckpt.step = h.at("step").get<std::int64_t>();
        ckpt.seed = h.at("seed").get<std::uint64_t>();
        if (h.contains("latent")) {
            const json& l = h.at("latent");
            ckpt.latent = LatentInfo{l.at("autoencoder_digest").get<std::string>(), l.at("factor").get<int>(),
                                     l.at("latent_channels").get<int>(), l.at("scale").get<double>()};
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": " + e.what());
    }
    ckpt.arch.validate();
    ckpt.parameters = std::move(c.parameters);
    // Parameter count must match what the recorded architecture registers.
    if (DenoiserNet<float>(ckpt.arch).params().size() != ckpt.parameters.size())
        throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": parameter count does not match architecture");
    return ckpt;
}

}  // namespace polypgen::denoiser
