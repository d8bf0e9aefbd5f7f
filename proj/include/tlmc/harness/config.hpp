#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tlmc/baselines/residual_variance.hpp"
#include "tlmc/caches/cache.hpp"
#include "tlmc/caches/records.hpp"
#include "tlmc/core/error.hpp"
#include "tlmc/estimators/integrator.hpp"

namespace tlmc {

using Json = nlohmann::json;

// Everything one run needs. Keys in config files use the member names below,
// CLI flags the same names with dashes.
struct RunConfig {
    std::string scene;
    EstimatorMode mode = EstimatorMode::TwoLevel;
    int spp = 1;
    int frames = 1;
    std::uint64_t seed = 1;
    int threads = 1;
    std::string out = "out";

    std::vector<int> nc{15, 5, 5};
    int nc_biased = 5;
    int nr = 1;
    double sph_c = 0.01;
    double rr_probability = 0.1;
    double roughness_cutoff = 0.0625;
    int max_depth = 128;

    int hidden_layers = 4;
    int width = 64;
    int hash_levels = 12;
    int hash_features = 2;
    int log2_table_size = 15;
    int base_resolution = 16;
    int max_resolution = 512;
    int sh_bands = 4;
    double learning_rate = 0.01;
    int steps_per_frame = 4;
    int batch_size = 16384;
    LossKind loss = LossKind::RelativeL2;
    double training_fraction = 0.025;
    CacheKind cache = CacheKind::Nirc;  // what `train` fits

    bool write_frames = false;
    int vrel_stride = 8;    // pixel subset for the per-frame V_rel trace; 0 disables it
    int vrel_samples = 16;
    double ema_alpha = 0.9;

    int reference_spp = 16384;
    std::uint64_t reference_seed = 7;
    std::string reference_cache = "reference_cache";
    int ensemble_renders = 64;
    std::vector<double> epsilons{0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    int bias_map_spp = 5120;

    int fit_samples = 2048;
    int measure_samples = 128;
    int compare_stride = 1;

    int hemisphere_stride = 0;  // >0 dumps octahedral cache maps on this pixel grid
    int hemisphere_resolution = 32;
    std::string snapshot_in;
    std::string snapshot_out;
    std::string nirc_snapshot;  // sweep-epsilon, precompute-reference
    std::string nrc_snapshot;

    void validate() const;
};

enum class FieldKind { Int, Uint, Real, Bool, Text, IntList, RealList, Choice };

struct ConfigField {
    std::string name;
    FieldKind kind;
    std::string help;
    std::function<void(RunConfig&, const Json&)> set;
    std::function<Json(const RunConfig&)> get;
};

namespace detail {

template <class T>
T json_as(const Json& j, const std::string& key, FieldKind kind) {
    auto bad = [&](const char* want) { return ConfigError("config key '" + key + "' expects " + want + ", got " + j.dump()); };
    if constexpr (std::is_same_v<T, bool>) {
        if (!j.is_boolean()) throw bad("a boolean");
        return j.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
        if (!j.is_string()) throw bad("a string");
        return j.get<std::string>();
    } else if constexpr (std::is_integral_v<T>) {
        if (!j.is_number_integer()) throw bad("an integer");
        if (kind == FieldKind::Uint && j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0)
            throw bad("a non-negative integer");
        if constexpr (std::is_same_v<T, int>) {
            std::int64_t v = j.get<std::int64_t>();
            if (v < INT32_MIN || v > INT32_MAX) throw bad("a 32-bit integer");
            return int(v);
        } else {
            return j.get<T>();
        }
    } else {
        if (!j.is_number()) throw bad("a number");
        return j.get<T>();
    }
}

template <class T, class Acc>
ConfigField bind(std::string name, FieldKind kind, std::string help, Acc acc) {
    ConfigField f{name, kind, std::move(help), {}, {}};
    f.set = [name, kind, acc](RunConfig& c, const Json& j) {
        if constexpr (std::is_same_v<T, std::vector<int>> || std::is_same_v<T, std::vector<double>>) {
            using E = typename T::value_type;
            if (!j.is_array()) throw ConfigError("config key '" + name + "' expects a list, got " + j.dump());
            T v;
            for (const auto& e : j) v.push_back(json_as<E>(e, name, std::is_same_v<E, int> ? FieldKind::Int : FieldKind::Real));
            acc(c) = v;
        } else {
            acc(c) = json_as<T>(j, name, kind);
        }
    };
    f.get = [acc](const RunConfig& c) { return Json(acc(const_cast<RunConfig&>(c))); };
    return f;
}

template <class Enum>
ConfigField bind_choice(std::string name, std::string help, std::function<Enum&(RunConfig&)> acc,
                        std::function<Enum(const std::string&)> parse, std::function<const char*(Enum)> print) {
    ConfigField f{name, FieldKind::Choice, std::move(help), {}, {}};
    f.set = [name, acc, parse](RunConfig& c, const Json& j) { acc(c) = parse(json_as<std::string>(j, name, FieldKind::Text)); };
    f.get = [acc, print](const RunConfig& c) { return Json(print(acc(const_cast<RunConfig&>(c)))); };
    return f;
}

}  // namespace detail

#define TLMC_FIELD(T, kind, member, help) \
    detail::bind<T>(#member, FieldKind::kind, help, [](RunConfig& c) -> T& { return c.member; })

inline const std::vector<ConfigField>& config_fields() {
    static const std::vector<ConfigField> fields = [] {
        std::vector<ConfigField> f{
            TLMC_FIELD(std::string, Text, scene, "scene file"),
            detail::bind_choice<EstimatorMode>(
                "mode", "pt | two-level | biased-nirc-bth | biased-nirc-sph | biased-nrc-sph",
                [](RunConfig& c) -> EstimatorMode& { return c.mode; }, parse_estimator_mode,
                [](EstimatorMode m) { return to_string(m); }),
            TLMC_FIELD(int, Int, spp, "samples per pixel per frame"),
            TLMC_FIELD(int, Int, frames, "frames to run; 0 only echoes the config"),
            TLMC_FIELD(std::uint64_t, Uint, seed, "root seed"),
            TLMC_FIELD(int, Int, threads, "worker threads"),
            TLMC_FIELD(std::string, Text, out, "output directory"),
            TLMC_FIELD(std::vector<int>, IntList, nc, "cache samples at the first three non-delta vertices"),
            TLMC_FIELD(int, Int, nc_biased, "cache samples at a biased termination vertex"),
            TLMC_FIELD(int, Int, nr, "residual continuations from the first vertex"),
            TLMC_FIELD(double, Real, sph_c, "spread-angle threshold constant"),
            TLMC_FIELD(double, Real, rr_probability, "roulette termination probability"),
            TLMC_FIELD(double, Real, roughness_cutoff, "nrc skips the first vertex below this roughness"),
            TLMC_FIELD(int, Int, max_depth, "hard cap on path vertices"),
            TLMC_FIELD(int, Int, hidden_layers, "MLP hidden layers"),
            TLMC_FIELD(int, Int, width, "MLP width"),
            TLMC_FIELD(int, Int, hash_levels, "hash grid levels"),
            TLMC_FIELD(int, Int, hash_features, "features per level"),
            TLMC_FIELD(int, Int, log2_table_size, "log2 entries per level"),
            TLMC_FIELD(int, Int, base_resolution, "coarsest grid resolution"),
            TLMC_FIELD(int, Int, max_resolution, "finest grid resolution"),
            TLMC_FIELD(int, Int, sh_bands, "SH bands of the direction encoding"),
            TLMC_FIELD(double, Real, learning_rate, "Adam learning rate"),
            TLMC_FIELD(int, Int, steps_per_frame, "optimizer steps per frame"),
            TLMC_FIELD(int, Int, batch_size, "records per optimizer step"),
            detail::bind_choice<LossKind>(
                "loss", "relative-l2 | l2 | variance", [](RunConfig& c) -> LossKind& { return c.loss; },
                parse_loss_kind, [](LossKind k) { return to_string(k); }),
            TLMC_FIELD(double, Real, training_fraction, "training paths per frame relative to the pixel count"),
            detail::bind_choice<CacheKind>(
                "cache", "nirc | nrc | nvc (train)", [](RunConfig& c) -> CacheKind& { return c.cache; },
                parse_cache_kind, [](CacheKind k) { return to_string(k); }),
            TLMC_FIELD(bool, Bool, write_frames, "write a PFM per frame"),
            TLMC_FIELD(int, Int, vrel_stride, "pixel stride of the V_rel trace (0 = off)"),
            TLMC_FIELD(int, Int, vrel_samples, "residual samples per traced pixel"),
            TLMC_FIELD(double, Real, ema_alpha, "EMA decay of the traces"),
            TLMC_FIELD(int, Int, reference_spp, "reference render spp"),
            TLMC_FIELD(std::uint64_t, Uint, reference_seed, "reference render seed"),
            TLMC_FIELD(std::string, Text, reference_cache, "reference cache directory"),
            TLMC_FIELD(int, Int, ensemble_renders, "renders per ensemble"),
            TLMC_FIELD(std::vector<double>, RealList, epsilons, "relative-bias thresholds of the sweep"),
            TLMC_FIELD(int, Int, bias_map_spp, "spp of the converged first-vertex renders"),
            TLMC_FIELD(int, Int, fit_samples, "control-variate fitting samples per pixel"),
            TLMC_FIELD(int, Int, measure_samples, "residual samples per pixel"),
            TLMC_FIELD(int, Int, compare_stride, "pixel stride of compare"),
            TLMC_FIELD(int, Int, hemisphere_stride, "pixel stride of octahedral cache dumps (0 = off)"),
            TLMC_FIELD(int, Int, hemisphere_resolution, "octahedral dump resolution"),
            TLMC_FIELD(std::string, Text, snapshot_in, "cache snapshot to start from"),
            TLMC_FIELD(std::string, Text, snapshot_out, "where to save the trained cache"),
            TLMC_FIELD(std::string, Text, nirc_snapshot, "trained nirc for sweep-epsilon / precompute-reference"),
            TLMC_FIELD(std::string, Text, nrc_snapshot, "trained nrc for sweep-epsilon / precompute-reference"),
        };
        return f;
    }();
    return fields;
}

#undef TLMC_FIELD

inline const ConfigField* find_config_field(const std::string& name) {
    for (const auto& f : config_fields())
        if (f.name == name) return &f;
    return nullptr;
}

// Overlays every key of `j` onto `cfg`. Unknown keys are errors.
inline void apply_json(RunConfig& cfg, const Json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const ConfigField* f = find_config_field(it.key());
        if (!f) throw ConfigError("unknown config key '" + it.key() + "'");
        f->set(cfg, it.value());
    }
}

inline Json to_json(const RunConfig& cfg) {
    Json j = Json::object();
    for (const auto& f : config_fields()) j[f.name] = f.get(cfg);
    return j;
}

// Parses a command-line value for `field`: lists may be comma separated.
inline Json parse_field_text(const ConfigField& f, const std::string& text) {
    try {
        switch (f.kind) {
            case FieldKind::Text:
            case FieldKind::Choice: return Json(text);
            case FieldKind::IntList:
            case FieldKind::RealList: return Json::parse(text.front() == '[' ? text : "[" + text + "]");
            default: return Json::parse(text);
        }
    } catch (const Json::parse_error&) {
        throw ConfigError("--" + f.name + ": cannot parse '" + text + "'");
    }
}

inline Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    try {
        return Json::parse(in, nullptr, true, true);
    } catch (const Json::parse_error& e) {
        throw ConfigError("config file '" + path + "': " + e.what());
    }
}

inline RunConfig load_run_config(const std::string& path, RunConfig base = {}) {
    apply_json(base, read_json_file(path));
    base.validate();
    return base;
}

inline EstimatorConfig estimator_config(const RunConfig& c) {
    EstimatorConfig e;
    e.mode = c.mode;
    for (int i = 0; i < 3; ++i) e.nc[i] = c.nc[std::size_t(i)];
    e.nc_biased = c.nc_biased;
    e.nr = c.nr;
    e.sph_c = c.sph_c;
    e.rr_probability = c.rr_probability;
    e.roughness_cutoff = c.roughness_cutoff;
    e.max_depth = c.max_depth;
    return e;
}

inline CacheConfig cache_config(const RunConfig& c) {
    CacheConfig cc;
    cc.network.hidden_layers = c.hidden_layers;
    cc.network.width = c.width;
    cc.network.sh_bands = c.sh_bands;
    cc.network.grid.levels = c.hash_levels;
    cc.network.grid.features = c.hash_features;
    cc.network.grid.log2_table_size = c.log2_table_size;
    cc.network.grid.base_resolution = c.base_resolution;
    cc.network.grid.max_resolution = c.max_resolution;
    cc.training.loss = c.loss;
    cc.training.adam.learning_rate = c.learning_rate;
    cc.training.steps_per_frame = c.steps_per_frame;
    cc.training.batch_size = c.batch_size;
    return cc;
}

inline TrainingPassConfig training_pass_config(const RunConfig& c) {
    TrainingPassConfig t;
    t.training_fraction = c.training_fraction;
    t.rr_survival = 1.0 - c.rr_probability;
    t.max_depth = c.max_depth;
    t.threads = c.threads;
    return t;
}

inline CompareConfig compare_config(const RunConfig& c) {
    CompareConfig cc;
    cc.fit_samples = c.fit_samples;
    cc.measure_samples = c.measure_samples;
    cc.pixel_stride = c.compare_stride;
    cc.threads = c.threads;
    cc.seed = c.seed;
    return cc;
}

inline void RunConfig::validate() const {
    auto need = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError(msg);
    };
    need(spp >= 1, "spp must be >= 1");
    need(frames >= 0, "frames must be >= 0");
    need(threads >= 1, "threads must be >= 1");
    need(nc.size() == 3, "nc needs exactly three entries");
    need(hidden_layers >= 1 && width >= 1, "network needs at least one hidden layer of width >= 1");
    need(hash_levels >= 1 && hash_features >= 1, "hash grid needs levels >= 1 and features >= 1");
    need(log2_table_size >= 4 && log2_table_size <= 24, "log2_table_size must lie in [4, 24]");
    need(base_resolution >= 1 && max_resolution >= base_resolution, "grid resolutions must satisfy 1 <= base <= max");
    need(sh_bands >= 1 && sh_bands <= 8, "sh_bands must lie in [1, 8]");
    need(learning_rate > 0, "learning_rate must be positive");
    need(steps_per_frame >= 0 && batch_size >= 1, "steps_per_frame >= 0 and batch_size >= 1 required");
    need(training_fraction > 0 && training_fraction <= 1, "training_fraction must lie in (0, 1]");
    need(loss != LossKind::BinaryCrossEntropy, "bce is implied for the visibility cache; pick relative-l2, l2 or variance");
    need(vrel_stride >= 0 && vrel_samples >= 2, "vrel_stride >= 0 and vrel_samples >= 2 required");
    need(ema_alpha >= 0 && ema_alpha < 1, "ema_alpha must lie in [0, 1)");
    need(reference_spp >= 1 && bias_map_spp >= 1, "reference_spp and bias_map_spp must be >= 1");
    need(ensemble_renders >= 2, "ensemble_renders must be >= 2");
    for (double e : epsilons) need(e >= 0, "epsilons must be non-negative");
    need(fit_samples >= 1 && measure_samples >= 2 && compare_stride >= 1, "compare sample counts and stride must be positive");
    need(hemisphere_stride >= 0 && hemisphere_resolution >= 2, "hemisphere_stride >= 0 and hemisphere_resolution >= 2");
    need(!out.empty(), "out must not be empty");
    estimator_config(*this).validate();
}

}  // namespace tlmc
