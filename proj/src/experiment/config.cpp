#include "polypgen/experiment/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

namespace fs = std::filesystem;

namespace polypgen::experiment {

std::string_view feature_kind_name(metrics::FeatureKind k) {
    return k == metrics::FeatureKind::downsample_pixels ? "downsample_pixels" : "trained_encoder";
}

metrics::FeatureKind parse_feature_kind(std::string_view s) {
    if (s == "downsample_pixels") return metrics::FeatureKind::downsample_pixels;
    if (s == "trained_encoder") return metrics::FeatureKind::trained_encoder;
    throw Error(ErrorCode::InvalidConfig, "unknown feature extractor: " + std::string(s));
}

ExperimentConfig::ExperimentConfig() {
    for (GeneratorConfig* g : {&mask, &image}) {
        g->diffusion.timesteps = 200;
        g->arch.base_channels = 8;
        g->arch.depth = 2;
        g->train.learning_rate = 1e-3;
        g->train.batch_size = 16;
        g->train.total_steps = 2000;
        g->train.checkpoint_every = 500;
    }
    image.diffusion.conditioning = diffusion::Conditioning::mask_concat;
    ae.base_channels = 8;
    ae_train.total_steps = 1000;
    seg.epochs = 20;
    mixing.real_count = 10;
    mixing.synthetic_counts = {0, 10, 20, 30};
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::string_view unquote(std::string_view s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
    return s;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
    throw Error(ErrorCode::InvalidConfig,
                std::string(key) + ": expected " + std::string(expected) + ", got '" + std::string(value) + "'");
}

template <class N>
N parse_number(std::string_view key, std::string_view v) {
    N out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "a number");
    return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "true") return true;
    if (v == "false") return false;
    bad_value(key, v, "true or false");
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

std::string quote(const std::string& s) { return "\"" + s + "\""; }

struct Field {
    std::string key;
    std::function<void(std::string_view)> set;
    std::function<std::string()> get;
};

class Registry {
public:
    void integer(const std::string& key, auto& ref) {
        using N = std::remove_reference_t<decltype(ref)>;
        fields_.push_back({key, [&ref, key](std::string_view v) { ref = parse_number<N>(key, v); },
                           [&ref] { return std::to_string(ref); }});
    }
    void real(const std::string& key, double& ref) {
        fields_.push_back({key, [&ref, key](std::string_view v) { ref = parse_number<double>(key, v); },
                           [&ref] { return format_double(ref); }});
    }
    void boolean(const std::string& key, bool& ref) {
        fields_.push_back({key, [&ref, key](std::string_view v) { ref = parse_bool(key, v); },
                           [&ref] { return std::string(ref ? "true" : "false"); }});
    }
    void text(const std::string& key, std::string& ref) {
        fields_.push_back({key, [&ref](std::string_view v) { ref = std::string(unquote(v)); }, [&ref] { return quote(ref); }});
    }
    void path(const std::string& key, fs::path& ref) {
        fields_.push_back({key, [&ref](std::string_view v) { ref = fs::path(std::string(unquote(v))); },
                           [&ref] { return quote(ref.string()); }});
    }
    template <class E, class Parse, class Name>
    void choice(const std::string& key, E& ref, Parse parse, Name name) {
        fields_.push_back({key, [&ref, parse](std::string_view v) { ref = parse(unquote(v)); },
                           [&ref, name] { return quote(std::string(name(ref))); }});
    }
    void counts(const std::string& key, std::vector<std::size_t>& ref) {
        fields_.push_back({key,
                           [&ref, key](std::string_view v) {
                               if (v.size() < 2 || v.front() != '[' || v.back() != ']') bad_value(key, v, "a [list]");
                               ref.clear();
                               std::string_view body = trim(v.substr(1, v.size() - 2));
                               while (!body.empty()) {
                                   const auto comma = body.find(',');
                                   ref.push_back(parse_number<std::size_t>(key, trim(body.substr(0, comma))));
                                   if (comma == std::string_view::npos) break;
                                   body = trim(body.substr(comma + 1));
                               }
                           },
                           [&ref] {
                               std::string s = "[";
                               for (std::size_t i = 0; i < ref.size(); ++i) s += (i ? ", " : "") + std::to_string(ref[i]);
                               return s + "]";
                           }});
    }

    const std::vector<Field>& fields() const { return fields_; }
    const Field* find(std::string_view key) const {
        for (const auto& f : fields_)
            if (f.key == key) return &f;
        return nullptr;
    }

private:
    std::vector<Field> fields_;
};

DataSource parse_source(std::string_view s) {
    if (s == "toy") return DataSource::toy;
    if (s == "directory") return DataSource::directory;
    throw Error(ErrorCode::InvalidConfig, "unknown data.source: " + std::string(s));
}

std::string_view source_name(DataSource s) { return s == DataSource::toy ? "toy" : "directory"; }

void bind_generator(Registry& r, const std::string& p, GeneratorConfig& g) {
    r.choice(p + "schedule", g.diffusion.schedule_kind, diffusion::parse_schedule_kind, diffusion::schedule_kind_name);
    r.integer(p + "timesteps", g.diffusion.timesteps);
    r.real(p + "cosine_offset", g.diffusion.cosine_offset);
    r.real(p + "beta_start", g.diffusion.beta_start);
    r.real(p + "beta_end", g.diffusion.beta_end);
    r.real(p + "beta_max", g.diffusion.beta_max);
    r.integer(p + "base_channels", g.arch.base_channels);
    r.integer(p + "depth", g.arch.depth);
    r.integer(p + "embed_dim", g.arch.embed_dim);
    r.real(p + "lr", g.train.learning_rate);
    r.integer(p + "batch_size", g.train.batch_size);
    r.integer(p + "steps", g.train.total_steps);
    r.integer(p + "checkpoint_every", g.train.checkpoint_every);
    r.real(p + "ema_decay", g.train.ema_decay);
}

Registry bind(ExperimentConfig& c) {
    Registry r;
    r.text("run_id", c.run_id);
    r.path("output_root", c.output_root);
    r.integer("seed", c.seed);
    r.boolean("latent_mode", c.latent_mode);
    r.integer("parallelism", c.parallelism);

    r.choice("data.source", c.data.source, parse_source, source_name);
    r.path("data.path", c.data.path);
    r.path("data.test_path", c.data.test_path);
    r.integer("data.resolution", c.data.resolution);
    r.integer("data.channels", c.data.channels);
    r.integer("data.toy_count", c.data.toy_count);
    r.integer("data.train_count", c.data.train_count);
    r.integer("data.test_count", c.data.test_count);
    r.real("data.mask_threshold", c.data.mask_threshold);

    bind_generator(r, "mask.", c.mask);
    bind_generator(r, "image.", c.image);

    r.integer("ae.factor", c.ae.factor);
    r.integer("ae.latent_channels", c.ae.latent_channels);
    r.integer("ae.base_channels", c.ae.base_channels);
    r.real("ae.lr", c.ae_train.learning_rate);
    r.integer("ae.batch_size", c.ae_train.batch_size);
    r.integer("ae.steps", c.ae_train.total_steps);

    r.integer("generation.masks", c.generation.masks);
    r.integer("generation.eval_samples", c.generation.eval_samples);
    r.choice("generation.features", c.generation.features, parse_feature_kind, feature_kind_name);
    r.integer("generation.gallery_cells", c.generation.gallery_cells);

    r.choice("seg.model", c.seg.arch.kind, seg::parse_seg_model, seg::seg_model_name);
    r.integer("seg.width", c.seg.arch.width);
    r.real("seg.lr", c.seg.learning_rate);
    r.integer("seg.epochs", c.seg.epochs);
    r.integer("seg.batch_size", c.seg.batch_size);

    r.integer("mixing.real_count", c.mixing.real_count);
    r.counts("mixing.synthetic_counts", c.mixing.synthetic_counts);
    return r;
}

}  // namespace

void ExperimentConfig::validate() const {
    require(!run_id.empty() && run_id.find('/') == std::string::npos && run_id != "." && run_id != "..",
            ErrorCode::InvalidConfig, "run_id must be a plain directory name");
    require(parallelism >= 1, ErrorCode::InvalidConfig, "parallelism must be >= 1");
    require(data.resolution >= 8, ErrorCode::InvalidConfig, "data.resolution must be >= 8");
    require(data.channels == 1 || data.channels == 3, ErrorCode::InvalidConfig, "data.channels must be 1 or 3");
    require(data.mask_threshold > 0.0 && data.mask_threshold < 1.0, ErrorCode::InvalidConfig,
            "data.mask_threshold must be in (0,1)");
    if (data.source == DataSource::directory) {
        require(!data.path.empty(), ErrorCode::InvalidConfig, "data.path is required for a directory source");
        if (!fs::is_directory(data.path)) throw Error(ErrorCode::UnreadableFile, data.path.string());
    } else {
        require(data.toy_count > 0, ErrorCode::InvalidConfig, "data.toy_count must be > 0");
    }
    if (!data.test_path.empty() && !fs::is_directory(data.test_path))
        throw Error(ErrorCode::UnreadableFile, data.test_path.string());
    require(data.test_path.empty() ? data.test_count > 0 : true, ErrorCode::InvalidConfig, "data.test_count must be > 0");
    for (const GeneratorConfig* g : {&mask, &image}) {
        g->train.validate();
        require(g->diffusion.timesteps >= 2, ErrorCode::InvalidConfig, "timesteps must be >= 2");
        denoiser::DenoiserArch a = g->arch;
        a.cond_channels = g == &image ? 1 : 0;
        a.validate();
    }
    if (latent_mode) {
        ae.validate();
        ae_train.validate();
        require(data.resolution % ae.factor == 0, ErrorCode::IndivisibleSize, "data.resolution must divide by ae.factor");
    }
    require(generation.eval_samples >= 2, ErrorCode::InvalidConfig, "generation.eval_samples must be >= 2");
    seg.validate();
    mixing.validate();
    require(mixing.synthetic_counts.back() <= generation.masks, ErrorCode::InvalidConfig,
            "mixing.synthetic_counts exceeds generation.masks");
}

ExperimentConfig parse_config(std::string_view text) {
    ExperimentConfig cfg;
    const Registry reg = bind(cfg);
    std::set<std::string> seen;
    std::string section;
    int line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        bool quoted = false;  // '#' inside a quoted value is kept
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (line[i] == '#' && !quoted) {
                line = line.substr(0, i);
                break;
            }
        }
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(line_no);
        if (line.front() == '[' && line.find('=') == std::string_view::npos) {
            require(line.back() == ']', ErrorCode::InvalidConfig, where + ": unterminated section header");
            section = std::string(trim(line.substr(1, line.size() - 2)));
            if (!section.empty()) section += '.';
            continue;
        }
        const auto eq = line.find('=');
        require(eq != std::string_view::npos, ErrorCode::InvalidConfig, where + ": expected key = value");
        const std::string key = section + std::string(trim(line.substr(0, eq)));
        const Field* f = reg.find(key);
        require(f != nullptr, ErrorCode::InvalidConfig, where + ": unknown key '" + key + "'");
        require(seen.insert(key).second, ErrorCode::InvalidConfig, where + ": duplicate key '" + key + "'");
        f->set(trim(line.substr(eq + 1)));
    }
    return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::UnreadableFile, path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string format_config(const ExperimentConfig& cfg) {
    ExperimentConfig copy = cfg;
    const Registry reg = bind(copy);
    std::string out;
    for (const auto& f : reg.fields()) out += f.key + " = " + f.get() + "\n";
    return out;
}

}  // namespace polypgen::experiment
