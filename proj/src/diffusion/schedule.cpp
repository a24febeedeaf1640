#include "polypgen/diffusion/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "polypgen/error.hpp"
#include "polypgen/io/digest.hpp"

namespace polypgen::diffusion {

std::string_view schedule_kind_name(ScheduleKind k) { return k == ScheduleKind::linear ? "linear" : "cosine"; }

ScheduleKind parse_schedule_kind(std::string_view s) {
    if (s == "linear") return ScheduleKind::linear;
    if (s == "cosine") return ScheduleKind::cosine;
    throw Error(ErrorCode::InvalidConfig, "unknown schedule kind: " + std::string(s));
}

std::string_view conditioning_name(Conditioning c) { return c == Conditioning::none ? "none" : "mask_concat"; }

Conditioning parse_conditioning(std::string_view s) {
    if (s == "none") return Conditioning::none;
    if (s == "mask_concat") return Conditioning::mask_concat;
    throw Error(ErrorCode::InvalidConfig, "unknown conditioning: " + std::string(s));
}

std::string DiffusionConfig::canonical() const {
    std::ostringstream os;
    os.precision(17);
    os << "schedule=" << schedule_kind_name(schedule_kind) << ";T=" << timesteps << ";s=" << cosine_offset
       << ";beta_start=" << beta_start << ";beta_end=" << beta_end << ";beta_max=" << beta_max
       << ";conditioning=" << conditioning_name(conditioning);
    return os.str();
}

std::string DiffusionConfig::fingerprint() const { return io::sha256_hex(canonical()); }

NoiseSchedule make_schedule(const DiffusionConfig& cfg) {
    require(cfg.timesteps >= 2, ErrorCode::InvalidConfig, "T must be >= 2");
    require(cfg.cosine_offset > 0.0, ErrorCode::InvalidConfig, "cosine offset must be positive");
    require(cfg.beta_max > 0.0 && cfg.beta_max < 1.0, ErrorCode::InvalidConfig, "beta_max must be in (0,1)");
    const int T = cfg.timesteps;
    NoiseSchedule s;
    s.timesteps = T;
    s.beta.assign(static_cast<std::size_t>(T) + 1, 0.0);

    if (cfg.schedule_kind == ScheduleKind::linear) {
        require(cfg.beta_start > 0.0 && cfg.beta_end >= cfg.beta_start && cfg.beta_end <= cfg.beta_max,
                ErrorCode::InvalidConfig, "linear schedule needs 0 < beta_start <= beta_end <= beta_max");
        for (int t = 1; t <= T; ++t)
            s.beta[t] = cfg.beta_start + (cfg.beta_end - cfg.beta_start) * (t - 1) / static_cast<double>(T - 1);
    } else {
        const double off = cfg.cosine_offset;
        auto f = [&](double t) {
            const double c = std::cos((t / T + off) / (1.0 + off) * std::numbers::pi / 2.0);
            return c * c;
        };
        const double f0 = f(0.0);
        for (int t = 1; t <= T; ++t) {
            const double prev = f(t - 1.0) / f0;
            const double cur = f(static_cast<double>(t)) / f0;
            s.beta[t] = std::min(1.0 - cur / prev, cfg.beta_max);
        }
    }

    s.alpha.assign(static_cast<std::size_t>(T) + 1, 1.0);
    s.alpha_bar.assign(static_cast<std::size_t>(T) + 1, 1.0);
    s.posterior_var.assign(static_cast<std::size_t>(T) + 1, 0.0);
    for (int t = 1; t <= T; ++t) {
        s.alpha[t] = 1.0 - s.beta[t];
        s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
        s.posterior_var[t] = s.beta[t] * (1.0 - s.alpha_bar[t - 1]) / (1.0 - s.alpha_bar[t]);
    }
    return s;
}

}  // namespace polypgen::diffusion
