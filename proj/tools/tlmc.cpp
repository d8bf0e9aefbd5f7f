// tlmc: command-line front end. See README.md for the subcommands.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "tlmc/estimators/env_direct.hpp"
#include "tlmc/harness/analysis.hpp"
#include "tlmc/harness/config.hpp"
#include "tlmc/harness/experiment.hpp"
#include "tlmc/harness/reference.hpp"
#include "tlmc/scene/parser.hpp"

using namespace tlmc;
namespace fs = std::filesystem;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kDivergence = 3 };

std::string flag_name(const std::string& key) {
    std::string s = key;
    std::replace(s.begin(), s.end(), '_', '-');
    return "--" + s;
}

// Every RunConfig field becomes a string-valued flag, parsed with the same rules as the config file.
struct FlagSet {
    std::map<std::string, std::string> values;
    std::string config_file;

    void attach(CLI::App* app) {
        for (const auto& f : config_fields()) app->add_option(flag_name(f.name), values[f.name], f.help);
        app->add_option("--config", config_file, "JSON config; its keys override flags");
    }

    RunConfig resolve(CLI::App* app) const {
        RunConfig cfg;
        for (const auto& f : config_fields()) {
            if (app->count(flag_name(f.name)) == 0) continue;
            f.set(cfg, parse_field_text(f, values.at(f.name)));
        }
        if (!config_file.empty()) apply_json(cfg, read_json_file(config_file));
        cfg.validate();
        return cfg;
    }
};

void print_row(const FrameRow& r) {
    std::printf("frame %4d  %-16s spp %d  mrse %-12s path %-8s loss %s\n", r.frame, r.mode.c_str(), r.spp,
                csv_number(r.mrse).c_str(), csv_number(r.avg_path_length).c_str(), csv_number(r.train_loss).c_str());
    std::fflush(stdout);
}

std::function<std::optional<Image>(const Scene&)> stored_reference(const RunConfig& cfg) {
    auto store = std::make_shared<ReferenceStore>(cfg.reference_cache);
    auto cache = std::make_shared<std::map<std::uint64_t, std::optional<Image>>>();
    int spp = cfg.reference_spp;
    std::uint64_t seed = cfg.reference_seed;
    return [store, cache, spp, seed](const Scene& s) {
        std::uint64_t h = s.state_hash();
        auto it = cache->find(h);
        if (it == cache->end()) it = cache->emplace(h, store->load(pt_reference_key(s, spp, seed))).first;
        return it->second;
    };
}

void need_scene(const RunConfig& cfg) {
    if (cfg.scene.empty()) throw ConfigError("--scene is required");
}

int cmd_render(const RunConfig& cfg) {
    need_scene(cfg);
    ExperimentOptions o;
    o.reference = stored_reference(cfg);
    o.on_frame = print_row;
    ExperimentResult r = run_experiment(cfg, o);
    if (cfg.frames == 0) std::cout << r.config_echo << "\n";
    else std::printf("wrote %s\n", (fs::path(cfg.out) / "frames.csv").string().c_str());
    return kOk;
}

int cmd_train(const RunConfig& cfg) {
    need_scene(cfg);
    ExperimentOptions o;
    o.train_only = cfg.cache;
    o.on_frame = print_row;
    ExperimentResult r = run_experiment(cfg, o);
    if (cfg.frames == 0) std::cout << r.config_echo << "\n";
    return kOk;
}

// Trains the caches a mode needs for cfg.frames frames, without rendering.
std::unique_ptr<Experiment> trained(const RunConfig& cfg, std::optional<CacheKind> only = std::nullopt) {
    ExperimentOptions o;
    o.render = false;
    o.train_only = only;
    o.on_frame = print_row;
    auto e = std::make_unique<Experiment>(cfg, o);
    for (int f = 0; f < cfg.frames; ++f) e->step();
    e->finish();
    return e;
}

int cmd_compare(const RunConfig& cfg) {
    need_scene(cfg);
    auto e = trained(cfg, CacheKind::Nirc);
    EstimatorConfig ec = estimator_config(cfg);
    ec.mode = EstimatorMode::Pt;
    Integrator integ(e->scene(), ec);
    CompareConfig cc = compare_config(cfg);
    CompareResult res = compare_residual_variance(integ, e->nirc(), cc);
    write_compare_csv(cfg.out, res);
    if (cfg.hemisphere_stride > 0)
        dump_integrand_reconstructions(integ, e->nirc(), cc, cfg.hemisphere_stride, cfg.hemisphere_resolution,
                                       fs::path(cfg.out) / "reconstructions");
    std::printf("V_rel over %d pixels\n  pt    %.6g\n  nirc  %.6g\n  vmf   %.6g\n  sh    %.6g\n", res.pixels, res.pt,
                res.nirc, res.vmf, res.sh);
    return kOk;
}

int cmd_ensemble(const RunConfig& cfg) {
    need_scene(cfg);
    auto e = trained(cfg);
    Scene& scene = e->scene();
    scene.set_frame(cfg.frames);
    ReferenceStore store(cfg.reference_cache);
    Image ref = pt_reference(store, scene, cfg.reference_spp, cfg.reference_seed, cfg.threads, false);
    EnsembleReport r = ensemble_report(e->integrator(), ref, cfg.ensemble_renders, cfg.spp, cfg.seed, cfg.frames, cfg.threads);
    Json j = {{"mode", to_string(cfg.mode)},
              {"renders", cfg.ensemble_renders},
              {"spp", cfg.spp},
              {"rbias2", r.bv.rbias2},
              {"rbias2_ci95", r.bv.ci95()},
              {"rbias2_raw", r.bv.rbias2_raw},
              {"z", r.bv.z},
              {"rvar", r.bv.rvar},
              {"mrse_of_mean", r.mrse},
              {"avg_path_length", r.avg_path_length},
              {"ir_bounces", r.ir_bounces},
              {"rejected", r.rejected}};
    if (r.bv.small_ensemble) {
        j["note"] = r.bv.note;
        std::fprintf(stderr, "warning: %s\n", r.bv.note.c_str());
    }
    fs::create_directories(cfg.out);
    std::ofstream(fs::path(cfg.out) / "ensemble.json") << j.dump(2) << "\n";
    std::printf("rBias2 %.6g +- %.3g  rVar %.6g  path %.4f\n", r.bv.rbias2, r.bv.ci95(), r.bv.rvar, r.avg_path_length);
    return kOk;
}

NeuralCache load_cache(CacheKind kind, const Scene& scene, const RunConfig& cfg, const std::string& path) {
    if (path.empty())
        throw ConfigError(std::string("--") + to_string(kind) + "-snapshot is required (train one with `tlmc train --cache " +
                          to_string(kind) + "`)");
    NeuralCache c(kind, scene, cache_config(cfg), cfg.seed);
    c.load(path);
    return c;
}

int cmd_precompute(const RunConfig& cfg) {
    need_scene(cfg);
    Scene scene = load_scene_file(cfg.scene);
    ReferenceStore store(cfg.reference_cache);
    std::set<std::uint64_t> done;
    int last = std::max(cfg.frames - 1, 0);
    for (int f = 0; f <= last; ++f) {
        scene.set_frame(f);
        if (!done.insert(scene.state_hash()).second) continue;
        ReferenceKey k = pt_reference_key(scene, cfg.reference_spp, cfg.reference_seed);
        if (store.contains(k)) {
            std::printf("frame %d: reference present (%s)\n", f, store.path(k).string().c_str());
            continue;
        }
        std::printf("frame %d: rendering %d spp reference...\n", f, cfg.reference_spp);
        std::fflush(stdout);
        pt_reference(store, scene, cfg.reference_spp, cfg.reference_seed, cfg.threads, true);
    }
    scene.set_frame(0);
    EstimatorConfig ec = estimator_config(cfg);
    for (auto [kind, path] : {std::pair{CacheKind::Nirc, cfg.nirc_snapshot}, std::pair{CacheKind::Nrc, cfg.nrc_snapshot}}) {
        if (path.empty()) continue;
        NeuralCache c = load_cache(kind, scene, cfg, path);
        std::printf("%s: converged first-vertex render at %d spp...\n", to_string(kind), cfg.bias_map_spp);
        std::fflush(stdout);
        v1_terminated(store, scene, c, ec, cfg.bias_map_spp, cfg.reference_seed, cfg.threads, true);
    }
    return kOk;
}

int cmd_sweep(const RunConfig& cfg) {
    need_scene(cfg);
    Scene scene = load_scene_file(cfg.scene);
    ReferenceStore store(cfg.reference_cache);
    Image ref = pt_reference(store, scene, cfg.reference_spp, cfg.reference_seed, cfg.threads, false);
    EstimatorConfig ec = estimator_config(cfg);
    NeuralCache nirc = load_cache(CacheKind::Nirc, scene, cfg, cfg.nirc_snapshot);
    NeuralCache nrc = load_cache(CacheKind::Nrc, scene, cfg, cfg.nrc_snapshot);
    std::vector<SweepRow> rows;
    for (const NeuralCache* c : {&nirc, &nrc}) {
        Image conv = v1_terminated(store, scene, *c, ec, cfg.bias_map_spp, cfg.reference_seed, cfg.threads, false);
        auto part = adaptive_termination_analysis(scene, *c, ec, ref, relative_bias_map(conv, ref), cfg.epsilons,
                                                  cfg.ensemble_renders, cfg.spp, cfg.seed, cfg.threads);
        rows.insert(rows.end(), part.begin(), part.end());
    }
    fs::create_directories(cfg.out);
    write_sweep_csv((fs::path(cfg.out) / "sweep.csv").string(), rows);
    std::printf("%-5s %8s %10s %12s %12s\n", "cache", "eps", "%IR", "rBias2", "rVar");
    for (const auto& r : rows)
        std::printf("%-5s %8.3g %10.4f %12.6g %12.6g\n", r.cache.c_str(), r.epsilon, r.report.ir_bounces,
                    r.report.bv.rbias2, r.report.bv.rvar);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tlmc: two-level Monte Carlo rendering with neural caches"};
    app.require_subcommand(1);
    struct Command {
        const char* name;
        const char* help;
        int (*run)(const RunConfig&);
    };
    const Command commands[] = {
        {"render", "render one mode on one scene, training its caches online", cmd_render},
        {"train", "train a cache headless (--cache nirc|nrc|nvc)", cmd_train},
        {"compare", "residual variance of PT, NIRC, vMF and SH control variates", cmd_compare},
        {"sweep-epsilon", "adaptive first-vertex termination sweep for NIRC and NRC", cmd_sweep},
        {"ensemble", "bias/variance decomposition over independent renders", cmd_ensemble},
        {"precompute-reference", "render and cache references and converged bias-map renders", cmd_precompute},
    };
    std::vector<FlagSet> flags(std::size(commands));
    std::vector<CLI::App*> subs;
    for (std::size_t i = 0; i < std::size(commands); ++i) {
        CLI::App* s = app.add_subcommand(commands[i].name, commands[i].help);
        flags[i].attach(s);
        subs.push_back(s);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }
    for (std::size_t i = 0; i < subs.size(); ++i) {
        if (!subs[i]->parsed()) continue;
        try {
            RunConfig cfg = flags[i].resolve(subs[i]);
            return commands[i].run(cfg);
        } catch (const DivergenceError& e) {
            std::fprintf(stderr, "divergence: %s\n", e.what());
            return kDivergence;
        } catch (const ConfigError& e) {
            std::fprintf(stderr, "config error: %s\n", e.what());
            return kConfig;
        } catch (const ParseError& e) {
            std::fprintf(stderr, "scene error: %s\n", e.what());
            return kConfig;
        } catch (const FormatError& e) {
            std::fprintf(stderr, "format error: %s\n", e.what());
            return kConfig;
        } catch (const std::exception& e) {
            std::fprintf(stderr, "error: %s\n", e.what());
            return kFailure;
        }
    }
    return kFailure;
}
