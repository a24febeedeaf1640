#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace polypgen::diffusion {

enum class ScheduleKind { linear, cosine };
enum class Conditioning { none, mask_concat };

std::string_view schedule_kind_name(ScheduleKind k);
ScheduleKind parse_schedule_kind(std::string_view s);
std::string_view conditioning_name(Conditioning c);
Conditioning parse_conditioning(std::string_view s);

struct DiffusionConfig {
    ScheduleKind schedule_kind = ScheduleKind::cosine;
    int timesteps = 1000;
    double cosine_offset = 0.008;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    double beta_max = 0.999;
    Conditioning conditioning = Conditioning::none;

    /// Canonical text form; its SHA-256 is the fingerprint stored in checkpoints.
    std::string canonical() const;
    std::string fingerprint() const;
    friend bool operator==(const DiffusionConfig&, const DiffusionConfig&) = default;
};

/// Per-timestep coefficients indexed 0..T. Index 0 holds the ᾱ_0 = 1
/// convention (beta[0] = 0); steps 1..T are the real process.
struct NoiseSchedule {
    int timesteps = 0;
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;
    std::vector<double> posterior_var;
};

NoiseSchedule make_schedule(const DiffusionConfig& cfg);

}  // namespace polypgen::diffusion
