#include "cavityforge/config.hpp"

#include "cavityforge/errors.hpp"
#include "cavityforge/manifest.hpp"

#include <json.hpp>

#include <cmath>
#include <set>

namespace cavityforge::config {

using nlohmann::json;

namespace {

// Reads the keys of one JSON object and rejects any key it was not asked about.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError("'" + display() + "' must be an object");
    }

    std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json* find(const std::string& key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void number(const std::string& key, double& out, double scale = 1.0) {
        if (const json* v = find(key)) {
            if (!v->is_number()) throw ConfigError("'" + key_path(key) + "' must be a number");
            out = v->get<double>() * scale;
        }
    }
    void integer(const std::string& key, int& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_integer()) throw ConfigError("'" + key_path(key) + "' must be an integer");
            out = v->get<int>();
        }
    }
    void unsigned_integer(const std::string& key, std::uint64_t& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_unsigned()) throw ConfigError("'" + key_path(key) + "' must be a non-negative integer");
            out = v->get<std::uint64_t>();
        }
    }
    void boolean(const std::string& key, bool& out) {
        if (const json* v = find(key)) {
            if (!v->is_boolean()) throw ConfigError("'" + key_path(key) + "' must be true or false");
            out = v->get<bool>();
        }
    }
    void string(const std::string& key, std::string& out, const std::set<std::string>& allowed = {}) {
        if (const json* v = find(key)) {
            if (!v->is_string()) throw ConfigError("'" + key_path(key) + "' must be a string");
            out = v->get<std::string>();
            if (!allowed.empty() && !allowed.count(out)) {
                std::string list;
                for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
                throw ConfigError("'" + key_path(key) + "' must be one of: " + list);
            }
        }
    }
    void numbers(const std::string& key, std::vector<double>& out, double scale = 1.0) {
        if (const json* v = find(key)) out = number_list(*v, key_path(key), scale);
    }
    void pair(const std::string& key, double& lo, double& hi, double scale = 1.0) {
        if (const json* v = find(key)) {
            const auto p = number_list(*v, key_path(key), scale);
            if (p.size() != 2) throw ConfigError("'" + key_path(key) + "' must be a [min, max] pair");
            lo = p[0];
            hi = p[1];
        }
    }
    std::optional<Section> object(const std::string& key) {
        if (const json* v = find(key)) return Section(*v, key_path(key));
        return std::nullopt;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) throw ConfigError("unknown key '" + key_path(it.key()) + "'");
        }
    }

    static std::vector<double> number_list(const json& v, const std::string& where, double scale) {
        if (!v.is_array()) throw ConfigError("'" + where + "' must be an array of numbers");
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number()) throw ConfigError("'" + where + "' must be an array of numbers");
            out.push_back(e.get<double>() * scale);
        }
        return out;
    }

private:
    std::string display() const { return path_.empty() ? "<root>" : path_; }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

std::vector<double> radius_axis(const json& v, const std::string& where) {
    if (v.is_array()) return Section::number_list(v, where, 1.0);
    Section s(v, where);
    double start = 0.0, stop = 0.0, step = 0.0;
    s.number("start", start);
    s.number("stop", stop);
    s.number("step", step);
    s.finish();
    if (!(step > 0.0) || !(stop >= start)) throw ConfigError("'" + where + "' needs start <= stop and step > 0");
    std::vector<double> out;
    const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
    for (long i = 0; i <= n; ++i) out.push_back(start + static_cast<double>(i) * step);
    return out;
}

template <class Fn>
void as_config_error(const std::string& prefix, Fn&& fn) {
    try {
        fn();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(prefix + ": " + e.what());
    }
}

}  // namespace

patch::SizeClassTable SizeClassConfig::table() const {
    return patch::SizeClassTable(small_upper_nm, medium_upper_nm, small_amplitude, medium_amplitude, large_amplitude);
}

compose::ComposeOptions Config::compose_options() const {
    compose::ComposeOptions o;
    o.size_classes = size_classes.table();
    o.warp.max_attempts = warp_attempts;
    o.warp.fringe = fringe;
    o.label = label;
    o.label.fringe = fringe;
    o.detector = detector;
    o.normalize.ring_px = generation.normalization_ring_px;
    o.blend_tolerance = generation.blend_tolerance;
    o.max_drop_fraction = generation.max_drop_fraction;
    return o;
}

void Config::validate() const {
    // Checked here first so the message names the file's key, not the struct field.
    if (!(microscope.accelerating_voltage > 0.0) || !std::isfinite(microscope.accelerating_voltage)) {
        throw ConfigError("microscope.accelerating_voltage_v must be a positive finite voltage");
    }
    if (!(microscope.foil_thickness > 0.0)) throw ConfigError("microscope.foil_thickness_nm must be > 0");
    if (!(microscope.cavity_depth >= 0.0 && microscope.cavity_depth <= microscope.foil_thickness)) {
        throw ConfigError("microscope.cavity_depth_nm must lie in [0, foil_thickness_nm]");
    }
    as_config_error("microscope", [&] { microscope.validate(); });
    as_config_error("simulation", [&] { simulation.validate(); });
    as_config_error("lut", [&] {
        physics::GridSpec g = lut_grid;
        g.normalize();
    });
    as_config_error("size_classes", [&] { (void)size_classes.table(); });
    if (fringe.rays < 32) throw ConfigError("fringe.rays must be >= 32");
    if (!(fringe.contrast_floor > 0.0 && fringe.contrast_floor < 1.0)) throw ConfigError("fringe.contrast_floor must lie in (0, 1)");
    if (!(fringe.success_fraction > 0.0 && fringe.success_fraction <= 1.0)) throw ConfigError("fringe.success_fraction must lie in (0, 1]");
    if (!(fringe.step_px > 0.0)) throw ConfigError("fringe.step_px must be > 0");
    if (warp_attempts < 1) throw ConfigError("warp.max_attempts must be >= 1");
    if (!(label.fallback_radius_px > 0.0)) throw ConfigError("label.fallback_radius_px must be > 0");
    if (!(label.fallback_scale > 0.0)) throw ConfigError("label.fallback_scale must be > 0");
    if (!(label.snap_window_px >= 0.0)) throw ConfigError("label.snap_window_px must be >= 0");
    as_config_error("detector", [&] { detector.validate(); });
    const auto& g = generation;
    if (g.images < 0) throw ConfigError("generation.images must be >= 0");
    if (!(g.default_pixel_scale > 0.0)) throw ConfigError("generation.default_pixel_scale must be > 0");
    if (!(g.base_defocus_min_um <= g.base_defocus_max_um)) throw ConfigError("generation.base_defocus must be [min, max]");
    if (g.base_defocus_min_um <= 0.0 && g.base_defocus_max_um >= 0.0) {
        throw ConfigError("generation.base_defocus must not include zero");
    }
    as_config_error("generation.size_distribution", [&] { g.sizes.validate(); });
    as_config_error("generation.defocus_jitter", [&] {
        compose::DefocusDistribution d{g.base_defocus_min_um, g.defocus_jitter};
        d.validate();
    });
    if (g.plan.target_count < 0) throw ConfigError("generation.features_per_image must be >= 0");
    if (!(g.plan.footprint_rho > 0.0)) throw ConfigError("generation.footprint_rho must be > 0");
    if (g.plan.margin_px < 0) throw ConfigError("generation.margin_px must be >= 0");
    if (g.plan.max_attempts < 1) throw ConfigError("generation.max_attempts must be >= 1");
    if (!(g.plan.max_area_fraction > 0.0 && g.plan.max_area_fraction <= 1.0)) throw ConfigError("generation.max_area_fraction must lie in (0, 1]");
    if (g.normalization_ring_px < 1) throw ConfigError("generation.normalization_ring_px must be >= 1");
    if (!(g.max_drop_fraction >= 0.0 && g.max_drop_fraction <= 1.0)) throw ConfigError("generation.max_drop_fraction must lie in [0, 1]");
    if (!(g.blend_tolerance > 0.0)) throw ConfigError("generation.blend_tolerance must be > 0");
    const auto& r = regulation.preset;
    if (!(r.individual >= 0.0 && r.individual <= 1.0 && r.image >= 0.0 && r.image <= 1.0)) {
        throw ConfigError("regulation thresholds must lie in [0, 1]");
    }
    if (!(evaluation.thickness_nm > 0.0)) throw ConfigError("evaluation.thickness_nm must be > 0");
}

Config parse_config(std::string_view text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    Config c;
    Section top(root, "");
    std::string unit = "um";
    top.string("defocus_unit", unit, {"um", "nm", "mm"});
    const double dz = unit == "nm" ? 1e-3 : unit == "mm" ? 1e3 : 1.0;
    top.unsigned_integer("seed", c.seed);
    {
        int jobs = static_cast<int>(c.jobs);
        top.integer("jobs", jobs);
        if (jobs < 1) throw ConfigError("'jobs' must be >= 1");
        c.jobs = static_cast<unsigned>(jobs);
    }
    if (auto s = top.object("microscope")) {
        auto& m = c.microscope;
        s->number("accelerating_voltage_v", m.accelerating_voltage);
        s->number("phase_per_m", m.mean_inner_potential_phase);
        s->number("absorption_per_m", m.absorption_coefficient);
        s->number("foil_thickness_nm", m.foil_thickness, 1e-9);
        s->number("cavity_depth_nm", m.cavity_depth, 1e-9);
        s->finish();
    }
    if (auto s = top.object("simulation")) {
        auto& st = c.simulation;
        s->integer("radial_samples", st.n_radial_samples);
        s->integer("quadrature_nodes", st.n_quadrature_nodes);
        s->integer("max_quadrature_nodes", st.max_quadrature_nodes);
        s->number("rho_max", st.rho_max);
        s->number("rho_max_limit", st.rho_max_limit);
        s->number("convergence_tol", st.convergence_tol);
        s->number("far_field_tol", st.far_field_tol);
        s->pair("radius_range_nm", st.limits.min_radius_nm, st.limits.max_radius_nm);
        s->pair("defocus_range", st.limits.min_defocus_um, st.limits.max_defocus_um, dz);
        s->finish();
    }
    if (auto s = top.object("lut")) {
        if (const json* v = s->find("radii_nm")) c.lut_grid.radii_nm = radius_axis(*v, "lut.radii_nm");
        s->numbers("defocus", c.lut_grid.defocus_um, dz);
        s->finish();
    }
    if (auto s = top.object("size_classes")) {
        auto& sc = c.size_classes;
        s->number("small_upper_nm", sc.small_upper_nm);
        s->number("medium_upper_nm", sc.medium_upper_nm);
        std::vector<double> amps{sc.small_amplitude, sc.medium_amplitude, sc.large_amplitude};
        s->numbers("max_warp", amps);
        if (amps.size() != 3) throw ConfigError("'size_classes.max_warp' must hold three amplitudes");
        sc.small_amplitude = amps[0];
        sc.medium_amplitude = amps[1];
        sc.large_amplitude = amps[2];
        s->finish();
    }
    if (auto s = top.object("fringe")) {
        s->integer("rays", c.fringe.rays);
        s->number("contrast_floor", c.fringe.contrast_floor);
        s->number("success_fraction", c.fringe.success_fraction);
        s->number("step_px", c.fringe.step_px);
        s->finish();
    }
    if (auto s = top.object("warp")) {
        s->integer("max_attempts", c.warp_attempts);
        s->finish();
    }
    if (auto s = top.object("label")) {
        s->number("fallback_radius_px", c.label.fallback_radius_px);
        s->number("fallback_scale", c.label.fallback_scale);
        s->number("snap_window_px", c.label.snap_window_px);
        s->finish();
    }
    c.label.fringe = c.fringe;
    if (auto s = top.object("detector")) {
        s->number("mtf_plateau", c.detector.mtf_plateau);
        s->number("mtf_halfwidth_nyquist", c.detector.mtf_halfwidth_nyquist);
        s->number("dqe_zero", c.detector.dqe_zero);
        s->number("dose_per_pixel", c.detector.dose_per_pixel);
        s->finish();
    }
    if (auto s = top.object("generation")) {
        auto& g = c.generation;
        s->integer("images", g.images);
        s->string("split", g.split);
        s->string("image_format", g.image_format, {"pgm", "png"});
        s->boolean("write_masks", g.write_masks);
        s->number("default_pixel_scale", g.default_pixel_scale);
        s->pair("base_defocus", g.base_defocus_min_um, g.base_defocus_max_um, dz);
        s->number("defocus_jitter", g.defocus_jitter);
        s->integer("features_per_image", g.plan.target_count);
        s->number("footprint_rho", g.plan.footprint_rho);
        s->integer("margin_px", g.plan.margin_px);
        s->integer("max_attempts", g.plan.max_attempts);
        s->number("max_area_fraction", g.plan.max_area_fraction);
        if (auto d = s->object("size_distribution")) {
            d->number("median_nm", g.sizes.median_nm);
            d->number("log_sigma", g.sizes.log_sigma);
            d->number("min_nm", g.sizes.min_nm);
            d->number("max_nm", g.sizes.max_nm);
            d->numbers("edges_nm", g.sizes.edges_nm);
            d->numbers("weights", g.sizes.weights);
            d->finish();
        }
        if (auto b = s->object("background_limits")) {
            b->pair("pixel_scale", g.background_limits.min_pixel_scale, g.background_limits.max_pixel_scale);
            double lo = g.background_limits.min_side, hi = g.background_limits.max_side;
            b->pair("side_px", lo, hi);
            g.background_limits.min_side = static_cast<int>(lo);
            g.background_limits.max_side = static_cast<int>(hi);
            b->finish();
        }
        s->integer("normalization_ring_px", g.normalization_ring_px);
        s->number("max_drop_fraction", g.max_drop_fraction);
        s->number("blend_tolerance", g.blend_tolerance);
        s->finish();
    }
    if (auto s = top.object("regulation")) {
        std::string preset = "standard";
        const bool named = s->find("preset") != nullptr;
        s->string("preset", preset, {"high", "standard", "low", "custom"});
        const bool has_ind = s->find("individual_threshold") != nullptr;
        const bool has_img = s->find("image_threshold") != nullptr;
        if (preset == "custom" || (!named && (has_ind || has_img))) {
            double ind = c.regulation.preset.individual, img = c.regulation.preset.image;
            s->number("individual_threshold", ind);
            s->number("image_threshold", img);
            c.regulation.preset = regulation::ThresholdPreset::custom(ind, img);
        } else {
            if (has_ind || has_img) {
                throw ConfigError("'regulation' thresholds need preset \"custom\" (got \"" + preset + "\")");
            }
            c.regulation.preset = regulation::preset_by_name(preset);
        }
        std::string zero = "fail";
        s->string("zero_predictions", zero, {"fail", "pass"});
        c.regulation.zero_predictions =
            zero == "pass" ? regulation::ZeroPredictionPolicy::PassThrough : regulation::ZeroPredictionPolicy::Fail;
        s->finish();
    }
    if (auto s = top.object("evaluation")) {
        s->number("thickness_nm", c.evaluation.thickness_nm);
        s->string("ground_truth", c.evaluation.ground_truth, {"auto", "mask", "box"});
        if (auto w = s->object("sweep")) {
            w->numbers("individual", c.evaluation.sweep_individual);
            w->numbers("image", c.evaluation.sweep_image);
            w->finish();
        }
        s->finish();
    }
    top.finish();
    c.validate();
    return c;
}

Config load_config(const std::filesystem::path& path) {
    try {
        return parse_config(io::read_text_file(path));
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string dump_config(const Config& c) {
    json j;
    j["defocus_unit"] = "um";
    j["seed"] = c.seed;
    j["jobs"] = c.jobs;
    j["microscope"] = {
        {"accelerating_voltage_v", c.microscope.accelerating_voltage},
        {"phase_per_m", c.microscope.mean_inner_potential_phase},
        {"absorption_per_m", c.microscope.absorption_coefficient},
        {"foil_thickness_nm", c.microscope.foil_thickness / 1e-9},
        {"cavity_depth_nm", c.microscope.cavity_depth / 1e-9},
    };
    const auto& st = c.simulation;
    j["simulation"] = {
        {"radial_samples", st.n_radial_samples},
        {"quadrature_nodes", st.n_quadrature_nodes},
        {"max_quadrature_nodes", st.max_quadrature_nodes},
        {"rho_max", st.rho_max},
        {"rho_max_limit", st.rho_max_limit},
        {"convergence_tol", st.convergence_tol},
        {"far_field_tol", st.far_field_tol},
        {"radius_range_nm", {st.limits.min_radius_nm, st.limits.max_radius_nm}},
        {"defocus_range", {st.limits.min_defocus_um, st.limits.max_defocus_um}},
    };
    j["lut"] = {{"radii_nm", c.lut_grid.radii_nm}, {"defocus", c.lut_grid.defocus_um}};
    j["size_classes"] = {
        {"small_upper_nm", c.size_classes.small_upper_nm},
        {"medium_upper_nm", c.size_classes.medium_upper_nm},
        {"max_warp", {c.size_classes.small_amplitude, c.size_classes.medium_amplitude, c.size_classes.large_amplitude}},
    };
    j["fringe"] = {
        {"rays", c.fringe.rays},
        {"contrast_floor", c.fringe.contrast_floor},
        {"success_fraction", c.fringe.success_fraction},
        {"step_px", c.fringe.step_px},
    };
    j["warp"] = {{"max_attempts", c.warp_attempts}};
    j["label"] = {
        {"fallback_radius_px", c.label.fallback_radius_px},
        {"fallback_scale", c.label.fallback_scale},
        {"snap_window_px", c.label.snap_window_px},
    };
    j["detector"] = {
        {"mtf_plateau", c.detector.mtf_plateau},
        {"mtf_halfwidth_nyquist", c.detector.mtf_halfwidth_nyquist},
        {"dqe_zero", c.detector.dqe_zero},
        {"dose_per_pixel", c.detector.dose_per_pixel},
    };
    const auto& g = c.generation;
    j["generation"] = {
        {"images", g.images},
        {"split", g.split},
        {"image_format", g.image_format},
        {"write_masks", g.write_masks},
        {"default_pixel_scale", g.default_pixel_scale},
        {"base_defocus", {g.base_defocus_min_um, g.base_defocus_max_um}},
        {"defocus_jitter", g.defocus_jitter},
        {"features_per_image", g.plan.target_count},
        {"footprint_rho", g.plan.footprint_rho},
        {"margin_px", g.plan.margin_px},
        {"max_attempts", g.plan.max_attempts},
        {"max_area_fraction", g.plan.max_area_fraction},
        {"size_distribution",
         {{"median_nm", g.sizes.median_nm},
          {"log_sigma", g.sizes.log_sigma},
          {"min_nm", g.sizes.min_nm},
          {"max_nm", g.sizes.max_nm},
          {"edges_nm", g.sizes.edges_nm},
          {"weights", g.sizes.weights}}},
        {"background_limits",
         {{"pixel_scale", {g.background_limits.min_pixel_scale, g.background_limits.max_pixel_scale}},
          {"side_px", {g.background_limits.min_side, g.background_limits.max_side}}}},
        {"normalization_ring_px", g.normalization_ring_px},
        {"max_drop_fraction", g.max_drop_fraction},
        {"blend_tolerance", g.blend_tolerance},
    };
    const auto& p = c.regulation.preset;
    json reg = {{"preset", regulation::to_string(p.name)},
                {"zero_predictions",
                 c.regulation.zero_predictions == regulation::ZeroPredictionPolicy::PassThrough ? "pass" : "fail"}};
    if (p.name == regulation::PresetName::Custom) {
        reg["individual_threshold"] = p.individual;
        reg["image_threshold"] = p.image;
    }
    j["regulation"] = reg;
    j["evaluation"] = {
        {"thickness_nm", c.evaluation.thickness_nm},
        {"ground_truth", c.evaluation.ground_truth},
        {"sweep", {{"individual", c.evaluation.sweep_individual}, {"image", c.evaluation.sweep_image}}},
    };
    return j.dump(2) + "\n";
}

}  // namespace cavityforge::config
