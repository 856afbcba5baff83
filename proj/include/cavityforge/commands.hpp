#pragma once

#include "cavityforge/compositor.hpp"
#include "cavityforge/config.hpp"
#include "cavityforge/manifest.hpp"
#include "cavityforge/metrics.hpp"
#include "cavityforge/regulation.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cavityforge::cli {

namespace fs = std::filesystem;

/// Counts warnings across a run; they never change the exit code.
struct RunLog {
    std::ostream* out = nullptr;   ///< progress and results, may be null
    std::ostream* err = nullptr;   ///< warnings, may be null
    int warnings = 0;

    void info(const std::string& line) const;
    void warn(const std::string& line);
};

struct SimulateSummary {
    std::size_t profiles = 0;
    double min_seconds = 0.0;
    double mean_seconds = 0.0;
    double max_seconds = 0.0;
};

/// Builds the LUT for cfg.lut_grid and writes it to `lut_path`; the resolved
/// config is echoed next to it as <lut_path>.config.json.
SimulateSummary simulate(const config::Config& cfg, const fs::path& lut_path, RunLog& log);

/// Background rasters (*.pgm, *.png) of a directory in name order. Pixel
/// scales come from an optional `pixel_scales.txt` ("<file name> <nm/px>" per
/// line), otherwise `default_scale`.
std::vector<compose::BackgroundImage> load_backgrounds(const fs::path& dir, double default_scale);

struct GenerateSummary {
    int images = 0;
    int skipped = 0;
    std::int64_t features = 0;
    int dropped = 0;
};

/// Writes images/, labels/, optional masks/, manifest.txt, provenance.csv,
/// seeds.txt and resolved_config.json under `out_dir`. Byte-identical output
/// for identical (config, seed, backgrounds, LUT) regardless of cfg.jobs.
GenerateSummary generate(const config::Config& cfg, const fs::path& backgrounds_dir, const fs::path& lut_path,
                         const fs::path& out_dir, RunLog& log);

/// Predictions for every manifest entry, read from <dir>/<image stem>.txt; a
/// missing file counts as no predictions (with a warning).
std::vector<std::vector<io::BoxRecord>> load_predictions(const io::DatasetManifest& manifest,
                                                         const fs::path& predictions_dir, RunLog& log);

/// Writes decisions.csv and summary.txt; returns the report.
regulation::FilterReport filter(const config::Config& cfg, const fs::path& predictions_dir,
                                const fs::path& manifest_path, const fs::path& out_dir, RunLog& log);

/// Assembles the evaluation corpus: ground truth from `gt_dir` (default: the
/// manifest's label files), masks from <manifest dir>/masks when the
/// ground_truth mode allows it.
std::vector<metrics::EvalImage> load_corpus(const config::Config& cfg, const fs::path& predictions_dir,
                                            const fs::path& manifest_path, const std::optional<fs::path>& gt_dir,
                                            RunLog& log);

/// Writes report.csv, aggregate.csv, report.txt and sweep.csv.
metrics::EvaluationReport evaluate(const config::Config& cfg, const fs::path& predictions_dir,
                                   const fs::path& manifest_path, const std::optional<fs::path>& gt_dir,
                                   const fs::path& out_dir, RunLog& log);

/// Plot-ready CSVs: confidence_vs_f1.csv and normalized_swelling.csv from
/// predictions, and round_robin.csv plus labeler_swelling.csv when label
/// directories are given.
void report(const config::Config& cfg, const std::optional<fs::path>& predictions_dir, const fs::path& manifest_path,
            const std::vector<fs::path>& labelers, const fs::path& out_dir, RunLog& log);

/// Command-line entry point; returns the process exit code.
int run(int argc, char** argv);

}  // namespace cavityforge::cli
