#include "cavityforge/commands.hpp"

#include "cavityforge/boxes.hpp"
#include "cavityforge/errors.hpp"
#include "cavityforge/lut.hpp"
#include "cavityforge/manifest.hpp"
#include "cavityforge/parallel.hpp"
#include "cavityforge/raster.hpp"
#include "cavityforge/rng.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>

namespace cavityforge::cli {

namespace {

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string image_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "img_%04d", index);
    return buf;
}

void echo_config(const config::Config& cfg, const fs::path& path) {
    io::write_text_file_atomic(path, config::dump_config(cfg));
}

}  // namespace

void RunLog::info(const std::string& line) const {
    if (out) *out << line << '\n';
}

void RunLog::warn(const std::string& line) {
    ++warnings;
    if (err) *err << "warning: " << line << '\n';
}

SimulateSummary simulate(const config::Config& cfg, const fs::path& lut_path, RunLog& log) {
    std::vector<double> seconds;
    const physics::ProfileLut lut = physics::build_lut(cfg.lut_grid, cfg.microscope, cfg.simulation, cfg.jobs, &seconds);
    if (lut_path.has_parent_path()) fs::create_directories(lut_path.parent_path());
    physics::save_lut(lut, lut_path);
    echo_config(cfg, fs::path(lut_path.string() + ".config.json"));
    SimulateSummary s;
    s.profiles = seconds.size();
    if (!seconds.empty()) {
        s.min_seconds = *std::min_element(seconds.begin(), seconds.end());
        s.max_seconds = *std::max_element(seconds.begin(), seconds.end());
        double sum = 0.0;
        for (double v : seconds) sum += v;
        s.mean_seconds = sum / static_cast<double>(seconds.size());
    }
    log.info("simulated " + std::to_string(s.profiles) + " profiles; seconds per profile min " +
             fmt("%.3f", s.min_seconds) + " mean " + fmt("%.3f", s.mean_seconds) + " max " + fmt("%.3f", s.max_seconds));
    log.info("wrote " + lut_path.string());
    return s;
}

std::vector<compose::BackgroundImage> load_backgrounds(const fs::path& dir, double default_scale) {
    if (!fs::is_directory(dir)) throw IoError("background directory " + dir.string() + " does not exist");
    std::map<std::string, double> scales;
    const fs::path scale_file = dir / "pixel_scales.txt";
    if (fs::exists(scale_file)) {
        std::istringstream in(io::read_text_file(scale_file));
        std::string line;
        std::size_t n = 0;
        while (std::getline(in, line)) {
            ++n;
            if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
            std::istringstream ls(line);
            std::string name;
            double scale = 0.0;
            if (!(ls >> name)) continue;
            if (!(ls >> scale) || !(scale > 0.0)) throw ParseError(scale_file.string() + ": expected '<file> <nm/px>'", n);
            scales[name] = scale;
        }
    }
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto ext = e.path().extension().string();
        if (e.is_regular_file() && (ext == ".pgm" || ext == ".png")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<compose::BackgroundImage> out;
    for (const auto& f : files) {
        compose::BackgroundImage bg;
        bg.raster = io::read_raster(f);
        bg.source_id = f.filename().string();
        auto it = scales.find(bg.source_id);
        bg.pixel_scale = it == scales.end() ? default_scale : it->second;
        out.push_back(std::move(bg));
    }
    return out;
}

GenerateSummary generate(const config::Config& cfg, const fs::path& backgrounds_dir, const fs::path& lut_path,
                         const fs::path& out_dir, RunLog& log) {
    const auto& g = cfg.generation;
    const auto backgrounds = load_backgrounds(backgrounds_dir, g.default_pixel_scale);
    if (backgrounds.empty()) throw IoError("no background images (*.pgm, *.png) in " + backgrounds_dir.string());
    for (const auto& bg : backgrounds) g.background_limits.check(bg);
    if (!fs::exists(lut_path)) throw IoError("LUT " + lut_path.string() + " does not exist; run 'simulate' first");
    const physics::ProfileLut lut = physics::load_lut(lut_path);
    const compose::ComposeOptions copt = cfg.compose_options();

    fs::create_directories(out_dir / "images");
    fs::create_directories(out_dir / "labels");
    if (g.write_masks) fs::create_directories(out_dir / "masks");
    echo_config(cfg, out_dir / "resolved_config.json");

    struct ImageResult {
        bool ok = false;
        std::string error;
        std::uint64_t seed = 0;
        double base_defocus = 0.0;
        std::string source;
        io::ManifestEntry entry;
        std::string provenance;
        std::vector<std::string> warnings;
        int dropped = 0;
    };
    // Boxes are sized from the first-fringe position of the profile each
    // feature will use; featureless profiles get the fallback square's extent.
    const double floor = cfg.fringe.contrast_floor;
    const compose::ExtentFn extent = [&lut, floor](double radius_nm, double defocus_um) {
        return lut.lookup(radius_nm, defocus_um).first_fringe_rho(floor).value_or(1.5);
    };
    std::vector<ImageResult> results(static_cast<std::size_t>(g.images));
    parallel_for(results.size(), cfg.jobs, [&](std::size_t i) {
        ImageResult& r = results[i];
        const std::string name = image_name(static_cast<int>(i));
        const auto& bg = backgrounds[i % backgrounds.size()];
        r.source = bg.source_id;
        r.seed = derive_seed(cfg.seed, {stream_id(Stream::Corpus), i});
        Engine eng(derive_seed(r.seed, {stream_id(Stream::Defocus)}));
        r.base_defocus = uniform(eng, g.base_defocus_min_um, g.base_defocus_max_um);
        if (g.base_defocus_min_um == g.base_defocus_max_um) r.base_defocus = g.base_defocus_min_um;
        const compose::DefocusDistribution dz{r.base_defocus, g.defocus_jitter};
        compose::LabeledImage img;
        try {
            const auto plan = compose::sample_plan(bg, g.sizes, dz, g.plan, r.seed, extent);
            img = compose::compose_image(bg, plan, lut, copt);
        } catch (const CompositionError& e) {
            r.error = e.what();
            return;
        }
        r.warnings = img.warnings;
        r.dropped = img.dropped;
        const std::string image_rel = "images/" + name + "." + g.image_format;
        const std::string label_rel = "labels/" + name + ".txt";
        io::write_raster(out_dir / image_rel, img.image.raster);
        io::save_box_file((out_dir / label_rel).string(), img.labels);
        if (g.write_masks) io::write_mask(out_dir / "masks" / (name + ".png"), img.label_mask());
        r.entry = {image_rel, label_rel, bg.pixel_scale, bg.width(), bg.height(), g.split,
                   static_cast<std::int64_t>(img.labels.size()), std::nullopt};
        std::string prov;
        char buf[512];
        for (std::size_t k = 0; k < img.features.size(); ++k) {
            const auto& f = img.features[k];
            std::string warp;
            for (const auto& h : f.warp) {
                std::snprintf(buf, sizeof buf, "%s%d:%.6f:%.6f", warp.empty() ? "" : ";", h.order, h.amplitude, h.phase);
                warp += buf;
            }
            std::snprintf(buf, sizeof buf, "%s,%zu,%d,%.6f,%.6f,%.6f,%.6f,%016llx,%s,%.4f,%d,%d,%d,%d,", name.c_str(), k,
                          f.plan_id, f.radius_nm, f.defocus_um, f.lut_radius_nm, f.lut_defocus_um,
                          static_cast<unsigned long long>(f.seed),
                          f.method == label::LabelMethod::Watershed ? "watershed" : "square", f.fringe_radius_px,
                          f.label_box.x0, f.label_box.y0, f.label_box.x1, f.label_box.y1);
            prov += buf + warp + "\n";
        }
        r.provenance = std::move(prov);
        r.ok = true;
    });

    GenerateSummary s;
    io::DatasetManifest manifest;
    std::string provenance =
        "image_id,feature,plan_id,radius_nm,defocus_um,lut_radius_nm,lut_defocus_um,seed,label_method,"
        "fringe_radius_px,x0,y0,x1,y1,warp\n";
    std::string seeds = "# image_id seed base_defocus_um background\n";
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        const std::string name = image_name(static_cast<int>(i));
        char buf[256];
        std::snprintf(buf, sizeof buf, "%s %016llx %.6f %s\n", name.c_str(), static_cast<unsigned long long>(r.seed),
                      r.base_defocus, r.source.c_str());
        seeds += buf;
        for (const auto& w : r.warnings) log.warn(name + ": " + w);
        if (!r.ok) {
            ++s.skipped;
            log.warn(name + " skipped: " + r.error);
            continue;
        }
        ++s.images;
        s.features += r.entry.features;
        s.dropped += r.dropped;
        manifest.entries.push_back(r.entry);
        provenance += r.provenance;
        log.info(name + ": " + std::to_string(r.entry.features) + " features");
    }
    io::save_manifest(out_dir / "manifest.txt", manifest);
    io::write_text_file_atomic(out_dir / "provenance.csv", provenance);
    io::write_text_file_atomic(out_dir / "seeds.txt", seeds);
    // Recount from disk so the written dataset is verified end to end.
    const auto check = io::load_manifest(out_dir / "manifest.txt", true);
    log.info("generated " + std::to_string(check.image_count()) + " images, " + std::to_string(check.feature_count()) +
             " features (" + std::to_string(s.dropped) + " dropped, " + std::to_string(s.skipped) + " images skipped)");
    return s;
}

std::vector<std::vector<io::BoxRecord>> load_predictions(const io::DatasetManifest& manifest,
                                                         const fs::path& predictions_dir, RunLog& log) {
    if (!fs::is_directory(predictions_dir)) throw IoError("prediction directory " + predictions_dir.string() + " does not exist");
    std::vector<std::vector<io::BoxRecord>> out;
    for (const auto& e : manifest.entries) {
        const fs::path p = predictions_dir / (fs::path(e.image).stem().string() + ".txt");
        if (!fs::exists(p)) {
            log.warn("no prediction file for " + e.image + "; treating as no detections");
            out.emplace_back();
            continue;
        }
        auto recs = io::read_box_file(p.string());
        for (const auto& r : recs) {
            if (!r.confidence) throw ParseError(p.string() + ": prediction records need a confidence field", 0);
        }
        out.push_back(std::move(recs));
    }
    return out;
}

regulation::FilterReport filter(const config::Config& cfg, const fs::path& predictions_dir,
                                const fs::path& manifest_path, const fs::path& out_dir, RunLog& log) {
    const auto manifest = io::load_manifest(manifest_path, true);
    const auto preds = load_predictions(manifest, predictions_dir, log);
    if (auto w = cfg.regulation.preset.ordering_warning()) log.warn(*w);
    std::vector<regulation::FilterDecision> decisions;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        decisions.push_back(regulation::apply_filter(fs::path(manifest.entries[i].image).stem().string(), preds[i],
                                                     cfg.regulation.preset, cfg.regulation.zero_predictions));
    }
    const auto rep = regulation::filtering_report(decisions);
    fs::create_directories(out_dir);
    echo_config(cfg, out_dir / "resolved_config.json");
    io::write_text_file_atomic(out_dir / "decisions.csv", regulation::decisions_csv(rep));
    const std::string summary = "preset " + regulation::to_string(cfg.regulation.preset.name) + " individual " +
                                fmt("%.2f", cfg.regulation.preset.individual) + " image " +
                                fmt("%.2f", cfg.regulation.preset.image) + "\nimages " + std::to_string(rep.total) +
                                " failed " + std::to_string(rep.failed) + " filtering rate " + rep.rate_display() + "\n";
    io::write_text_file_atomic(out_dir / "summary.txt", summary);
    log.info("filtering rate " + rep.rate_display() + " (" + std::to_string(rep.failed) + "/" +
             std::to_string(rep.total) + " images flagged)");
    return rep;
}

std::vector<metrics::EvalImage> load_corpus(const config::Config& cfg, const fs::path& predictions_dir,
                                            const fs::path& manifest_path, const std::optional<fs::path>& gt_dir,
                                            RunLog& log) {
    const auto manifest = io::load_manifest(manifest_path, true);
    const auto preds = load_predictions(manifest, predictions_dir, log);
    const fs::path root = manifest_path.parent_path();
    const auto& mode = cfg.evaluation.ground_truth;
    std::vector<metrics::EvalImage> corpus;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        const auto& e = manifest.entries[i];
        const std::string stem = fs::path(e.image).stem().string();
        metrics::EvalImage img;
        img.id = stem;
        img.width = e.width;
        img.height = e.height;
        img.pixel_scale = e.pixel_scale;
        img.thickness_nm = e.thickness_nm.value_or(cfg.evaluation.thickness_nm);
        img.predictions = preds[i];
        const fs::path label = gt_dir ? *gt_dir / (stem + ".txt") : root / e.label;
        img.gt_boxes = io::read_box_file(label.string());
        const fs::path mask = root / "masks" / (stem + ".png");
        if (mode != "box" && fs::exists(mask)) {
            img.gt_mask = io::read_mask(mask);
            if (img.gt_mask->width() != e.width || img.gt_mask->height() != e.height) {
                throw ManifestError("ground-truth mask size differs from the image", e.image);
            }
        } else if (mode == "mask") {
            throw IoError("ground_truth is 'mask' but " + mask.string() + " is missing");
        }
        corpus.push_back(std::move(img));
    }
    return corpus;
}

metrics::EvaluationReport evaluate(const config::Config& cfg, const fs::path& predictions_dir,
                                   const fs::path& manifest_path, const std::optional<fs::path>& gt_dir,
                                   const fs::path& out_dir, RunLog& log) {
    const auto corpus = load_corpus(cfg, predictions_dir, manifest_path, gt_dir, log);
    if (auto w = cfg.regulation.preset.ordering_warning()) log.warn(*w);
    const auto rep = metrics::evaluate(corpus, cfg.regulation.preset, cfg.regulation.zero_predictions, cfg.jobs);
    const auto sweep = metrics::threshold_sweep(corpus, cfg.evaluation.sweep_individual, cfg.evaluation.sweep_image,
                                                cfg.regulation.zero_predictions);
    fs::create_directories(out_dir);
    echo_config(cfg, out_dir / "resolved_config.json");
    io::write_text_file_atomic(out_dir / "report.csv", metrics::report_csv(rep));
    io::write_text_file_atomic(out_dir / "aggregate.csv", metrics::aggregate_csv(rep));
    io::write_text_file_atomic(out_dir / "report.txt", metrics::report_text(rep));
    io::write_text_file_atomic(out_dir / "sweep.csv", metrics::sweep_csv(sweep));
    for (const auto& r : rep.rows) {
        if (r.scores.precision_undefined) log.warn(r.id + ": precision undefined (no predicted pixels), reported as 0");
        if (r.scores.recall_undefined) log.warn(r.id + ": recall undefined (no ground-truth pixels), reported as 0");
    }
    if (rep.unfiltered.r2.undefined) log.warn("swelling R^2 undefined (fewer than two images or constant ground truth)");
    log.info(metrics::report_text(rep));
    return rep;
}

void report(const config::Config& cfg, const std::optional<fs::path>& predictions_dir, const fs::path& manifest_path,
            const std::vector<fs::path>& labelers, const fs::path& out_dir, RunLog& log) {
    fs::create_directories(out_dir);
    echo_config(cfg, out_dir / "resolved_config.json");
    if (predictions_dir) {
        const auto corpus = load_corpus(cfg, *predictions_dir, manifest_path, std::nullopt, log);
        const auto rep = metrics::evaluate(corpus, cfg.regulation.preset, cfg.regulation.zero_predictions, cfg.jobs);
        std::string conf = "image_id,image_confidence,f1,passed\n";
        std::string swell = "image_id,swelling_pred_pct,swelling_gt_pct,normalized_swelling\n";
        for (const auto& r : rep.rows) {
            conf += r.id + "," + fmt("%.6f", r.image_confidence) + "," + fmt("%.6f", r.scores.f1) + "," +
                    (r.passed ? "1" : "0") + "\n";
            swell += r.id + "," + fmt("%.6f", r.swelling_pred) + "," + fmt("%.6f", r.swelling_gt) + "," +
                     (r.normalized_swelling.undefined ? std::string("nan") : fmt("%.6f", r.normalized_swelling.value)) +
                     "\n";
            if (r.normalized_swelling.undefined) log.warn(r.id + ": normalized swelling undefined (zero ground truth)");
        }
        io::write_text_file_atomic(out_dir / "confidence_vs_f1.csv", conf);
        io::write_text_file_atomic(out_dir / "normalized_swelling.csv", swell);
        log.info("wrote confidence_vs_f1.csv and normalized_swelling.csv");
    }
    if (!labelers.empty()) {
        const auto manifest = io::load_manifest(manifest_path, true);
        std::map<std::string, metrics::ImageGeometry> geometry;
        for (const auto& e : manifest.entries) {
            geometry[fs::path(e.image).stem().string()] = {e.width, e.height, e.pixel_scale,
                                                            e.thickness_nm.value_or(cfg.evaluation.thickness_nm)};
        }
        std::vector<metrics::LabelSet> sets;
        std::vector<std::string> names;
        for (const auto& dir : labelers) {
            metrics::LabelSet set;
            for (const auto& [id, _] : geometry) {
                const fs::path p = dir / (id + ".txt");
                if (!fs::exists(p)) throw IoError("labeler " + dir.string() + " has no labels for " + id);
                set[id] = io::read_box_file(p.string());
            }
            sets.push_back(std::move(set));
            names.push_back(dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string());
        }
        const auto rr = metrics::round_robin(sets, geometry);
        io::write_text_file_atomic(out_dir / "round_robin.csv", metrics::round_robin_csv(rr, names));
        std::string sw = "labeler";
        for (const auto& id : rr.image_ids) sw += "," + id;
        sw += "\n";
        for (std::size_t i = 0; i < names.size(); ++i) {
            sw += names[i];
            for (double v : rr.swelling[i]) sw += "," + fmt("%.6f", v);
            sw += "\n";
        }
        io::write_text_file_atomic(out_dir / "labeler_swelling.csv", sw);
        log.info("wrote round_robin.csv and labeler_swelling.csv for " + std::to_string(names.size()) + " labelers");
    }
    if (!predictions_dir && labelers.empty()) log.warn("report: nothing to do (give --predictions and/or --labelers)");
}

namespace {

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> jobs;
    std::string out;
};

struct Thresholds {
    std::optional<std::string> preset;
    std::optional<double> individual;
    std::optional<double> image;
};

void add_common(CLI::App* sub, Common& c, bool out_required) {
    sub->add_option("--config", c.config_path, "JSON configuration file (defaults when omitted)")->check(CLI::ExistingFile);
    sub->add_option("--seed", c.seed, "64-bit root seed (overrides the config)");
    sub->add_option("--jobs", c.jobs, "worker threads (overrides the config)")->check(CLI::PositiveNumber);
    auto* o = sub->add_option("--out", c.out, "output path");
    if (out_required) o->required();
}

void add_thresholds(CLI::App* sub, Thresholds& t) {
    sub->add_option("--preset", t.preset, "threshold preset: high, standard or low");
    sub->add_option("--individual-thr", t.individual, "individual prediction threshold")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--image-thr", t.image, "image confidence threshold")->check(CLI::Range(0.0, 1.0));
}

config::Config resolve(const Common& c, const Thresholds* t) {
    config::Config cfg = c.config_path.empty() ? config::Config{} : config::load_config(c.config_path);
    if (c.seed) cfg.seed = *c.seed;
    if (c.jobs) cfg.jobs = *c.jobs;
    if (t) {
        if (t->preset) cfg.regulation.preset = regulation::preset_by_name(*t->preset);
        if (t->individual || t->image) {
            const double ind = t->individual.value_or(cfg.regulation.preset.individual);
            const double img = t->image.value_or(cfg.regulation.preset.image);
            cfg.regulation.preset = regulation::ThresholdPreset::custom(ind, img);
        }
    }
    cfg.validate();
    return cfg;
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"cavityforge: physics-based synthetic TEM cavity datasets, self-regulation filtering and evaluation"};
    app.require_subcommand(1);

    Common c_sim, c_gen, c_fil, c_eval, c_rep;
    Thresholds t_fil, t_eval, t_rep;
    std::string backgrounds, lut, predictions, manifest, ground_truth;
    std::vector<std::string> labelers;

    auto* sim = app.add_subcommand("simulate", "simulate contrast profiles and write the lookup table");
    add_common(sim, c_sim, true);

    auto* gen = app.add_subcommand("generate", "compose a labeled synthetic dataset");
    add_common(gen, c_gen, true);
    gen->add_option("--backgrounds", backgrounds, "directory of clean background images")->required();
    gen->add_option("--lut", lut, "lookup table written by 'simulate'")->required();

    auto* fil = app.add_subcommand("filter", "apply self-regulation to prediction files");
    add_common(fil, c_fil, true);
    add_thresholds(fil, t_fil);
    fil->add_option("--predictions", predictions, "directory of prediction files")->required();
    fil->add_option("--manifest", manifest, "dataset manifest")->required();

    auto* ev = app.add_subcommand("evaluate", "score predictions against ground truth");
    add_common(ev, c_eval, true);
    add_thresholds(ev, t_eval);
    ev->add_option("--predictions", predictions, "directory of prediction files")->required();
    ev->add_option("--manifest", manifest, "dataset manifest")->required();
    ev->add_option("--ground-truth", ground_truth, "directory of ground-truth label files (default: manifest labels)");

    auto* rep = app.add_subcommand("report", "plot-ready CSVs and labeler round-robin");
    add_common(rep, c_rep, true);
    add_thresholds(rep, t_rep);
    rep->add_option("--predictions", predictions, "directory of prediction files");
    rep->add_option("--manifest", manifest, "dataset manifest")->required();
    rep->add_option("--labelers", labelers, "label directories, one per labeler")->expected(2, -1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    RunLog log{&std::cout, &std::cerr, 0};
    try {
        if (*sim) {
            simulate(resolve(c_sim, nullptr), c_sim.out, log);
        } else if (*gen) {
            generate(resolve(c_gen, nullptr), backgrounds, lut, c_gen.out, log);
        } else if (*fil) {
            filter(resolve(c_fil, &t_fil), predictions, manifest, c_fil.out, log);
        } else if (*ev) {
            std::optional<fs::path> gt;
            if (!ground_truth.empty()) gt = ground_truth;
            evaluate(resolve(c_eval, &t_eval), predictions, manifest, gt, c_eval.out, log);
        } else if (*rep) {
            std::optional<fs::path> pd;
            if (!predictions.empty()) pd = predictions;
            std::vector<fs::path> dirs(labelers.begin(), labelers.end());
            report(resolve(c_rep, &t_rep), pd, manifest, dirs, c_rep.out, log);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        std::cerr << "warnings: " << log.warnings << '\n';
        return 1;
    }
    std::cerr << "warnings: " << log.warnings << '\n';
    return 0;
}

}  // namespace cavityforge::cli
