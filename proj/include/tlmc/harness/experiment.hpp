#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tlmc/baselines/residual_variance.hpp"
#include "tlmc/caches/records.hpp"
#include "tlmc/core/pfm.hpp"
#include "tlmc/estimators/render.hpp"
#include "tlmc/harness/config.hpp"
#include "tlmc/harness/csv.hpp"
#include "tlmc/harness/metrics.hpp"
#include "tlmc/harness/visualize.hpp"
#include "tlmc/scene/parser.hpp"

namespace tlmc {

struct ExperimentOptions {
    // Reference for the scene's current frame, if one is available.
    std::function<std::optional<Image>(const Scene&)> reference;
    bool write_files = true;
    bool render = true;
    std::optional<CacheKind> train_only;  // `train`: fit this cache, skip rendering
    std::function<void(const FrameRow&)> on_frame;
};

inline std::vector<std::string> experiment_extra_columns() {
    return {"vrel", "vrel_ema", "mrse_ema", "smape", "cache_termination_rate", "rejected", "train_records"};
}

struct LossTraceEntry {
    int frame = 0;
    std::string cache;
    int step = 0;
    double loss = 0;
};

// The frame loop: render, collect training records, train. One instance per run.
class Experiment {
public:
    explicit Experiment(RunConfig cfg, ExperimentOptions opt = {}) : cfg_(std::move(cfg)), opt_(std::move(opt)) {
        cfg_.validate();
        if (cfg_.scene.empty()) throw ConfigError("no scene given");
        scene_ = load_scene_file(cfg_.scene);
        est_ = estimator_config(cfg_);
        CacheConfig cc = cache_config(cfg_);
        if (opt_.write_files) std::filesystem::create_directories(cfg_.out);
        auto make = [&](CacheKind k) {
            CacheConfig c = cc;
            if (opt_.write_files)
                c.training.divergence_snapshot = (std::filesystem::path(cfg_.out) / ("divergence_" + std::string(to_string(k)) + ".snap")).string();
            NeuralCache cache(k, scene_, c, cfg_.seed);
            if (!cfg_.snapshot_in.empty()) cache.load(cfg_.snapshot_in);
            return cache;
        };
        if (opt_.train_only) {
            opt_.render = false;
            if (*opt_.train_only == CacheKind::Nrc) nrc_ = make(CacheKind::Nrc);
            else if (*opt_.train_only == CacheKind::Nvc) nvc_ = make(CacheKind::Nvc);
            else nirc_ = make(CacheKind::Nirc);
        } else {
            if (uses_nirc(cfg_.mode)) nirc_ = make(CacheKind::Nirc);
            if (uses_nrc(cfg_.mode)) nrc_ = make(CacheKind::Nrc);
        }
        if (opt_.write_files) {
            std::ofstream(std::filesystem::path(cfg_.out) / "config.json") << to_json(cfg_).dump(2) << "\n";
            csv_ = FrameCsv((std::filesystem::path(cfg_.out) / "frames.csv").string(), experiment_extra_columns());
        }
        vrel_ema_ = Ema(cfg_.ema_alpha);
        mrse_ema_ = Ema(cfg_.ema_alpha);
    }

    const RunConfig& config() const { return cfg_; }
    Scene& scene() { return scene_; }
    int frame() const { return frame_; }
    NeuralCache* nirc() { return nirc_ ? &*nirc_ : nullptr; }
    NeuralCache* nrc() { return nrc_ ? &*nrc_ : nullptr; }
    NeuralCache* nvc() { return nvc_ ? &*nvc_ : nullptr; }
    const RenderResult& last_render() const { return last_; }
    const std::vector<FrameRow>& rows() const { return rows_; }
    const std::vector<LossTraceEntry>& loss_trace() const { return loss_trace_; }

    Integrator integrator() const {
        CacheSet cs;
        cs.nirc = nirc_ ? &*nirc_ : nullptr;
        cs.nrc = nrc_ ? &*nrc_ : nullptr;
        return Integrator(scene_, est_, cs);
    }

    FrameRow step() {
        scene_.set_frame(frame_);
        FrameRow row;
        row.frame = frame_;
        row.mode = opt_.train_only ? std::string("train-") + to_string(*opt_.train_only) : to_string(cfg_.mode);
        row.spp = opt_.render ? cfg_.spp : 0;
        double vrel = kMissing, vrel_ema = kMissing, mrse_ema = kMissing, smape_v = kMissing, term = kMissing,
               rejected = kMissing, records = kMissing;
        if (opt_.render) {
            Integrator integ = integrator();
            RenderOptions ro;
            ro.seed = cfg_.seed;
            ro.frame = frame_;
            ro.spp = cfg_.spp;
            ro.threads = cfg_.threads;
            last_ = render_frame(integ, ro);
            row.avg_path_length = last_.mean_terminal_vertex;
            row.ir_bounces = last_.ir_bounces;
            term = last_.cache_termination_rate;
            rejected = double(last_.rejected);
            if (opt_.reference) {
                if (auto ref = opt_.reference(scene_)) {
                    row.mrse = mrse(last_.image, *ref);
                    smape_v = smape(last_.image, *ref);
                    mrse_ema = mrse_ema_.add(row.mrse);
                }
            }
            if (nirc_ && cfg_.vrel_stride > 0) {
                vrel = frame_residual_variance(integ, *nirc_, cfg_.vrel_stride, cfg_.vrel_samples, cfg_.seed, frame_,
                                               cfg_.threads);
                vrel_ema = vrel_ema_.add(vrel);
            }
            if (opt_.write_files && cfg_.write_frames) {
                char name[32];
                std::snprintf(name, sizeof name, "frame_%04d.pfm", frame_);
                write_pfm((std::filesystem::path(cfg_.out) / name).string(), last_.image);
            }
        }
        double loss_sum = 0;
        int loss_n = 0;
        std::size_t record_count = 0;
        TrainingPassConfig tp = training_pass_config(cfg_);
        const int paths = training_path_count(scene_, tp);
        for (NeuralCache* c : {nirc(), nrc(), nvc()}) {
            if (!c || cfg_.steps_per_frame == 0) continue;
            c->update_bounds(scene_.bounds());
            auto recs = collect_training_records(scene_, c->kind(), paths, cfg_.seed, frame_, tp);
            record_count += recs.size();
            if (recs.empty()) continue;
            RngStream rng = RngStream::keyed(cfg_.seed, {std::uint64_t(RngDomain::Training), std::uint64_t(c->kind()),
                                                         std::uint64_t(frame_), 1});
            TrainStats ts;
            try {
                ts = c->train_frame(recs, rng);
            } catch (const DivergenceError&) {
                write_loss_trace();
                throw;
            }
            for (std::size_t s = 0; s < ts.losses.size(); ++s) {
                loss_trace_.push_back({frame_, to_string(c->kind()), int(s), ts.losses[s]});
                loss_sum += ts.losses[s];
                ++loss_n;
            }
        }
        if (loss_n) row.train_loss = loss_sum / loss_n;
        if (nirc_ || nrc_ || nvc_) records = double(record_count);
        row.extras = {vrel, vrel_ema, mrse_ema, smape_v, term, rejected, records};
        if (opt_.write_files) csv_.write(row);
        if (opt_.on_frame) opt_.on_frame(row);
        rows_.push_back(row);
        ++frame_;
        return row;
    }

    // Final artifacts: last image, snapshots, cache maps, loss trace, summary.
    void finish() {
        if (!opt_.write_files) return;
        std::filesystem::path out(cfg_.out);
        if (opt_.render && last_.image.pixel_count()) write_pfm((out / "final.pfm").string(), last_.image);
        for (NeuralCache* c : {nirc(), nrc(), nvc()}) {
            if (!c) continue;
            std::string path = cfg_.snapshot_out.empty() ? (out / (std::string(to_string(c->kind())) + ".snap")).string()
                                                         : cfg_.snapshot_out;
            c->save(path);
            if (cfg_.hemisphere_stride > 0 && c->kind() != CacheKind::Nrc)
                dump_cache_hemispheres(scene_, *c, cfg_.hemisphere_stride, cfg_.hemisphere_resolution, out / "hemispheres");
        }
        write_loss_trace();
        Json report = Json::object();
        report["frames"] = frame_;
        if (!rows_.empty()) {
            const FrameRow& r = rows_.back();
            auto num = [](double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); };
            report["final"] = {{"mrse", num(r.mrse)},
                               {"avg_path_length", num(r.avg_path_length)},
                               {"ir_bounces", num(r.ir_bounces)},
                               {"train_loss", num(r.train_loss)},
                               {"vrel", num(r.extras[0])},
                               {"vrel_ema", num(r.extras[1])}};
        }
        std::ofstream(out / "report.json") << report.dump(2) << "\n";
    }

private:
    void write_loss_trace() const {
        if (!opt_.write_files) return;
        CsvWriter w((std::filesystem::path(cfg_.out) / "loss_trace.csv").string(), {"frame", "cache", "step", "loss"});
        for (const auto& e : loss_trace_)
            w.row({std::to_string(e.frame), e.cache, std::to_string(e.step), csv_number(e.loss)});
    }

    RunConfig cfg_;
    ExperimentOptions opt_;
    Scene scene_;
    EstimatorConfig est_;
    std::optional<NeuralCache> nirc_, nrc_, nvc_;
    FrameCsv csv_;
    Ema vrel_ema_, mrse_ema_;
    RenderResult last_;
    std::vector<FrameRow> rows_;
    std::vector<LossTraceEntry> loss_trace_;
    int frame_ = 0;
};

struct ExperimentResult {
    std::string config_echo;  // pretty JSON of the validated config
    std::vector<FrameRow> rows;
    Image final_image;
};

// frames = 0 validates and echoes the config without touching the filesystem.
inline ExperimentResult run_experiment(const RunConfig& cfg, ExperimentOptions opt = {}) {
    cfg.validate();
    ExperimentResult res;
    res.config_echo = to_json(cfg).dump(2);
    if (cfg.frames == 0) return res;
    Experiment e(cfg, std::move(opt));
    for (int f = 0; f < cfg.frames; ++f) e.step();
    e.finish();
    res.rows = e.rows();
    res.final_image = e.last_render().image;
    return res;
}

}  // namespace tlmc
