#pragma once

// Single-binary command line: synth, degrade, pair, corr-map, loss, eval,
// train-toy, compare, report. Every numeric knob defaults to the standard
// values (gamma 4, window 31, e 1e-10, w_a 1, scale 4, max shift 6).
// File outputs are written atomically; errors come back as a one-line
// "error: ..." on stderr with a nonzero exit code.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <mutex>
#include <thread>

#include "s3ps/corrmap.hpp"
#include "s3ps/io.hpp"
#include "s3ps/metrics.hpp"
#include "s3ps/s3loss.hpp"
#include "s3ps/scalepipe.hpp"
#include "s3ps/toytrain.hpp"

namespace s3ps {
namespace cli {

namespace fs = std::filesystem;
using nlohmann::json;

// S3PS_THREADS caps the data parallelism of eval/compare; defaults to the
// hardware count.
inline int thread_count() {
    if (const char* env = std::getenv("S3PS_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? int(hw) : 1;
}

// Deterministic index-striped parallel loop: worker t takes i = t, t+T, ...
template <class F>
inline void parallel_for_index(size_t n, F&& f) {
    const int threads = std::min<size_t>(size_t(thread_count()), n ? n : 1);
    if (threads <= 1) {
        for (size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex err_mutex;
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&, t] {
            try {
                for (size_t i = size_t(t); i < n; i += size_t(threads)) f(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// scene directories

inline std::string manifest_path(const fs::path& dir) { return (dir / "scene.json").string(); }

inline json load_manifest(const fs::path& dir) {
    const std::string path = manifest_path(dir);
    std::ifstream f(path);
    if (!f) fail(strfmt("missing scene manifest '%s'", path.c_str()));
    json m;
    try {
        f >> m;
    } catch (const std::exception& e) {
        fail(strfmt("malformed scene manifest '%s': %s", path.c_str(), e.what()));
    }
    return m;
}

inline void save_manifest(const fs::path& dir, const json& m) {
    atomic_write_bytes(manifest_path(dir), m.dump(2) + "\n");
}

inline bool has_file(const json& m, const char* key) {
    return m.contains("files") && m["files"].contains(key);
}

inline std::string file_of(const fs::path& dir, const json& m, const char* key) {
    if (!has_file(m, key))
        fail(strfmt("scene '%s' has no '%s' entry", dir.string().c_str(), key));
    return (dir / m["files"][key].get<std::string>()).string();
}

// Scene dirs: each argument either holds a scene.json itself or is a root
// whose immediate subdirectories do.
inline std::vector<fs::path> collect_scene_dirs(const std::vector<std::string>& args) {
    std::vector<fs::path> out;
    for (const std::string& a : args) {
        const fs::path p(a);
        if (fs::exists(p / "scene.json")) {
            out.push_back(p);
            continue;
        }
        if (!fs::is_directory(p)) fail(strfmt("'%s' is not a scene directory", a.c_str()));
        std::vector<fs::path> subs;
        for (const auto& entry : fs::directory_iterator(p))
            if (entry.is_directory() && fs::exists(entry.path() / "scene.json"))
                subs.push_back(entry.path());
        std::sort(subs.begin(), subs.end());
        if (subs.empty()) fail(strfmt("no scenes under '%s'", a.c_str()));
        out.insert(out.end(), subs.begin(), subs.end());
    }
    return out;
}

inline ScenePair load_scene_pair(const fs::path& dir, const json& m) {
    ScenePair sp;
    sp.scale = m.value("scale", 4);
    sp.p0 = load_plane(file_of(dir, m, "p0"));
    sp.m1 = load_raster(file_of(dir, m, "m1")).raster;
    sp.m1.level = 1;
    if (has_file(m, "p1")) sp.p1 = load_plane(file_of(dir, m, "p1"));
    if (has_file(m, "m2")) {
        sp.m2 = load_raster(file_of(dir, m, "m2")).raster;
        sp.m2->level = 2;
    }
    if (has_file(m, "g0")) sp.g0 = load_raster(file_of(dir, m, "g0")).raster;
    sp.validate();
    return sp;
}

// ---------------------------------------------------------------------------
// shared option payloads

struct StatOptions {
    double gamma = 4.0;
    int window = 31;
    double eps = 1e-10;
    double wa = 1.0;
    bool no_corr_map = false;

    CorrParams corr() const { return CorrParams{gamma, StatConfig{window, eps}}; }
    LossConfig loss() const {
        LossConfig cfg;
        cfg.w_a = wa;
        cfg.corr = corr();
        cfg.use_corr_map = !no_corr_map;
        cfg.stat = StatConfig{window, eps};
        return cfg;
    }
    void add_flags(CLI::App* cmd, bool with_loss) {
        cmd->add_option("--gamma", gamma, "correlation map exponent")->capture_default_str();
        cmd->add_option("--window", window, "box filter window (odd)")->capture_default_str();
        cmd->add_option("--eps", eps, "stabilizer under the std square root")
            ->capture_default_str();
        if (with_loss) {
            cmd->add_option("--wa", wa, "spatial loss weight")->capture_default_str();
            cmd->add_flag("--no-corr-map", no_corr_map,
                          "ablation: use S = 1 instead of the correlation map");
        }
    }
};

inline std::vector<double> parse_csv_doubles(const std::string& s, const char* what) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str()) fail(strfmt("bad %s value '%s'", what, tok.c_str()));
        out.push_back(v);
    }
    if (out.empty()) fail(strfmt("empty %s list", what));
    return out;
}

// ---------------------------------------------------------------------------
// subcommand bodies

struct SynthArgs {
    std::string out;
    uint64_t seed = 0;
    int size = 128;
    int scale = 4;
    int window = 31;
    double shift_x = 0.0, shift_y = 0.0;
    std::vector<std::string> movers;  // "W,H,DX,DY"
    std::string gains = "0.85,1.0,0.7";
    bool write_ideal = true;
};

inline void run_synth(const SynthArgs& a) {
    SynthConfig cfg;
    cfg.width1 = a.size;
    cfg.height1 = a.size;
    cfg.scale = a.scale;
    cfg.seed = a.seed;
    cfg.shift_x = a.shift_x;
    cfg.shift_y = a.shift_y;
    cfg.stat_window = a.window;
    cfg.band_gains = parse_csv_doubles(a.gains, "band gain");
    for (const std::string& m : a.movers) {
        const auto vals = parse_csv_doubles(m, "mover");
        if (vals.size() != 4) fail(strfmt("mover '%s' needs W,H,DX,DY", m.c_str()));
        cfg.movers.push_back(MoverSpec{int(vals[0]), int(vals[1]), vals[2], vals[3]});
    }
    const SynthScene sc = synth_scene(cfg);

    const fs::path dir(a.out);
    fs::create_directories(dir);
    save_plane_raw(sc.pair.p0, (dir / "p0.raw").string(), 0);
    save_raster_raw(sc.pair.m1, (dir / "m1.raw").string(), 0);

    json m;
    m["scale"] = cfg.scale;
    m["seed"] = cfg.seed;
    m["level1_size"] = {cfg.width1, cfg.height1};
    m["band_gains"] = cfg.band_gains;
    m["files"]["p0"] = "p0.raw";
    m["files"]["m1"] = "m1.raw";
    if (a.write_ideal) {
        save_raster_raw(sc.truth.ideal_g0, (dir / "ideal_g0.raw").string(), 0);
        m["files"]["ideal_g0"] = "ideal_g0.raw";
    }
    m["truth"]["shift"] = {sc.truth.shift_x, sc.truth.shift_y};
    m["truth"]["movers"] = json::array();
    for (const PlacedMover& pm : sc.truth.movers)
        m["truth"]["movers"].push_back({{"x", pm.x},
                                        {"y", pm.y},
                                        {"w", pm.width},
                                        {"h", pm.height},
                                        {"dx", pm.dx},
                                        {"dy", pm.dy},
                                        {"value", pm.value}});
    save_manifest(dir, m);
}

inline void run_degrade(const std::string& in, const std::string& out, int scale) {
    const RasterFile rf = load_raster(in);
    const Raster d = degrade(rf.raster, scale);
    save_raster(d, out, rf.bit_depth);
}

inline void run_pair(const std::vector<std::string>& scene_args) {
    for (const fs::path& dir : collect_scene_dirs(scene_args)) {
        json m = load_manifest(dir);
        ScenePair sp = load_scene_pair(dir, m);
        sp = make_training_pair(std::move(sp));
        save_plane_raw(*sp.p1, (dir / "p1.raw").string(), 0);
        save_raster_raw(*sp.m2, (dir / "m2.raw").string(), 0);
        m["files"]["p1"] = "p1.raw";
        m["files"]["m2"] = "m2.raw";
        save_manifest(dir, m);
    }
}

inline void run_corr_map(const std::string& ms_path, const std::string& pan_path,
                         const std::string& out, const std::string& heatmap,
                         const StatOptions& opts) {
    const Raster ms = load_raster(ms_path).raster;
    const Plane pan = load_plane(pan_path);
    const CorrMap s = corr_map(ms, pan, opts.corr());
    save_plane_raw(s.s, out, 1);
    if (!heatmap.empty()) save_heatmap_pgm(s.s, heatmap);
}

inline void run_loss(const std::string& g_path, const std::string& ms_path,
                     const std::string& pan_path, const std::string& s_path,
                     const std::string& out_csv, const std::string& contrib_prefix,
                     const StatOptions& opts) {
    const Raster g = load_raster(g_path).raster;
    const Raster ms = load_raster(ms_path).raster;
    const Plane pan = load_plane(pan_path);
    CorrMap s;
    if (!s_path.empty())
        s.s = load_plane(s_path);
    else
        s = corr_map(ms, pan, opts.corr());

    const LossConfig cfg = opts.loss();
    const bool want_contrib = !contrib_prefix.empty();
    const LossBreakdown b = s3_loss(g, ms, pan, s, cfg, want_contrib);

    std::string csv = csv_row({"l_c", "l_a", "w_a", "l_s3"});
    csv += csv_row({csv_num(b.l_c), csv_num(b.l_a), csv_num(cfg.w_a), csv_num(b.l_s3)});
    if (out_csv.empty())
        std::fputs(csv.c_str(), stdout);
    else
        atomic_write_bytes(out_csv, csv);
    if (want_contrib) {
        // normalize contribution heatmaps to their own maxima
        auto dump = [&](const Plane& p, const std::string& suffix) {
            double peak = 0.0;
            for (double v : p.v) peak = std::max(peak, v);
            Plane scaled = p;
            if (peak > 0.0)
                for (double& v : scaled.v) v /= peak;
            save_heatmap_pgm(scaled, contrib_prefix + suffix + ".pgm");
            save_plane_raw(p, contrib_prefix + suffix + ".raw", 1);
        };
        dump(*b.contrib_c, "_c");
        dump(*b.contrib_a, "_a");
    }
}

inline SccMode parse_scc_mode(const std::string& mode) {
    if (mode == "grayed") return SccMode::Grayed;
    if (mode == "band-average") return SccMode::BandAverage;
    fail(strfmt("unknown scc mode '%s' (grayed or band-average)", mode.c_str()));
}

inline std::string metric_header() {
    return csv_row({"scene", "ergas1", "scc1", "scc0", "n_ergas1", "best_dx", "best_dy"});
}

inline std::string metric_row_csv(const MetricRow& r) {
    return csv_row({r.id, csv_num(r.ergas1), csv_num(r.scc1), csv_num(r.scc0),
                    csv_num(r.n_ergas1), std::to_string(r.best_dx), std::to_string(r.best_dy)});
}

inline std::string summary_rows_csv(const MetricReport& rep, const std::string& prefix = {}) {
    std::string out;
    out += csv_row({prefix + "mean", csv_num(rep.ergas1.mean), csv_num(rep.scc1.mean),
                    csv_num(rep.scc0.mean), csv_num(rep.n_ergas1.mean), "", ""});
    out += csv_row({prefix + "stderr", csv_num(rep.ergas1.se), csv_num(rep.scc1.se),
                    csv_num(rep.scc0.se), csv_num(rep.n_ergas1.se), "", ""});
    return out;
}

inline void run_eval(const std::vector<std::string>& scene_args, const std::string& out_csv,
                     int max_shift, const std::string& scc_mode) {
    const auto dirs = collect_scene_dirs(scene_args);
    const TranslationSearch search = TranslationSearch::grid(max_shift);
    const SccMode mode = parse_scc_mode(scc_mode);
    std::vector<MetricRow> rows(dirs.size());
    parallel_for_index(dirs.size(), [&](size_t i) {
        const json m = load_manifest(dirs[i]);
        const ScenePair sp = load_scene_pair(dirs[i], m);
        if (!sp.g0) fail(strfmt("scene '%s' has no g0 result", dirs[i].string().c_str()));
        rows[i] = evaluate_scene(sp, search, mode, dirs[i].filename().string());
    });
    const MetricReport rep = make_report(rows);
    std::string csv = metric_header();
    for (const MetricRow& r : rep.rows) csv += metric_row_csv(r);
    csv += summary_rows_csv(rep);
    if (out_csv.empty())
        std::fputs(csv.c_str(), stdout);
    else
        atomic_write_bytes(out_csv, csv);
}

struct TrainArgs {
    std::vector<std::string> scenes;
    std::string config;
    std::string mode = "s3";
    std::string out = "params.bin";
    std::string curve;
    int iterations = 2000;
    double lr = 1e-3;
    double wd = 1e-7;
    int drop_at = -1;  // default: iterations/2
    uint64_t seed = 0;
    int hidden = 8;
    int hp_window = 5;
    StatOptions stat;
};

// JSON config file for train-toy; explicitly passed flags take precedence.
inline void apply_train_config(TrainArgs& a, const CLI::App& cmd) {
    const std::string bytes = read_file_bytes(a.config);
    json j;
    try {
        j = json::parse(bytes);
    } catch (const std::exception& e) {
        fail(strfmt("malformed config '%s': %s", a.config.c_str(), e.what()));
    }
    auto unset = [&](const char* flag) { return cmd.count(flag) == 0; };
    if (j.contains("mode") && unset("--mode")) a.mode = j["mode"].get<std::string>();
    if (j.contains("iters") && unset("--iters")) a.iterations = j["iters"].get<int>();
    if (j.contains("lr") && unset("--lr")) a.lr = j["lr"].get<double>();
    if (j.contains("wd") && unset("--wd")) a.wd = j["wd"].get<double>();
    if (j.contains("drop_at") && unset("--drop-at")) a.drop_at = j["drop_at"].get<int>();
    if (j.contains("seed") && unset("--seed")) a.seed = j["seed"].get<uint64_t>();
    if (j.contains("hidden") && unset("--hidden")) a.hidden = j["hidden"].get<int>();
    if (j.contains("hp_window") && unset("--hp-window"))
        a.hp_window = j["hp_window"].get<int>();
    if (j.contains("gamma") && unset("--gamma")) a.stat.gamma = j["gamma"].get<double>();
    if (j.contains("window") && unset("--window")) a.stat.window = j["window"].get<int>();
    if (j.contains("eps") && unset("--eps")) a.stat.eps = j["eps"].get<double>();
    if (j.contains("wa") && unset("--wa")) a.stat.wa = j["wa"].get<double>();
    if (j.contains("no_corr_map") && unset("--no-corr-map"))
        a.stat.no_corr_map = j["no_corr_map"].get<bool>();
}

inline void run_train(const TrainArgs& a) {
    TrainConfig cfg;
    if (a.mode == "spectral")
        cfg.loss_mode = LossMode::SpectralL2;
    else if (a.mode == "s3")
        cfg.loss_mode = LossMode::S3;
    else
        fail(strfmt("unknown training mode '%s' (spectral or s3)", a.mode.c_str()));
    cfg.iterations = a.iterations;
    cfg.lr = a.lr;
    cfg.weight_decay = a.wd;
    cfg.drop_at = a.drop_at >= 0 ? a.drop_at : a.iterations / 2;
    cfg.seed = a.seed;
    cfg.hidden = a.hidden;
    cfg.hp_window = a.hp_window;
    cfg.loss = a.stat.loss();

    std::vector<TrainScene> dataset;
    for (const fs::path& dir : collect_scene_dirs(a.scenes)) {
        json m = load_manifest(dir);
        ScenePair sp = load_scene_pair(dir, m);
        if (!sp.p1 || !sp.m2) sp = make_training_pair(std::move(sp));
        TrainScene ts;
        ts.m1 = sp.m1;
        ts.p1 = *sp.p1;
        ts.m2 = *sp.m2;
        // S is fixed per scene; persist it next to the inputs for inspection
        ts.s = corr_map(sp.m1, *sp.p1, cfg.loss.corr);
        save_plane_raw(ts.s.s, (dir / "s.raw").string(), 1);
        m["files"]["s"] = "s.raw";
        save_manifest(dir, m);
        dataset.push_back(std::move(ts));
    }
    const TrainResult res = train(dataset, cfg);
    save_toy_params(res.params, a.out);
    if (!a.curve.empty()) {
        std::string csv = csv_row({"iteration", "loss"});
        for (size_t i = 0; i < res.curve.size(); ++i)
            csv += csv_row({std::to_string(i), csv_num(res.curve[i])});
        atomic_write_bytes(a.curve, csv);
    }
}

inline void run_compare(const std::string& params_a, const std::string& params_b,
                        const std::vector<std::string>& scene_args, const std::string& out_csv,
                        int max_shift) {
    const ToyModelParams theta_a = load_toy_params(params_a);
    const ToyModelParams theta_b = load_toy_params(params_b);
    const auto dirs = collect_scene_dirs(scene_args);
    const TranslationSearch search = TranslationSearch::grid(max_shift);

    std::vector<MetricRow> rows_a(dirs.size()), rows_b(dirs.size());
    parallel_for_index(dirs.size(), [&](size_t i) {
        const json m = load_manifest(dirs[i]);
        ScenePair sp = load_scene_pair(dirs[i], m);
        const std::string id = dirs[i].filename().string();
        sp.g0 = toy_forward(theta_a, sp.m1, sp.p0);
        rows_a[i] = evaluate_scene(sp, search, SccMode::Grayed, id);
        sp.g0 = toy_forward(theta_b, sp.m1, sp.p0);
        rows_b[i] = evaluate_scene(sp, search, SccMode::Grayed, id);
    });
    const MetricReport rep_a = make_report(rows_a);
    const MetricReport rep_b = make_report(rows_b);

    std::string csv =
        csv_row({"scene", "model", "ergas1", "scc1", "scc0", "n_ergas1", "best_dx", "best_dy"});
    auto emit = [&](const MetricReport& rep, const std::string& model) {
        for (const MetricRow& r : rep.rows)
            csv += csv_row({r.id, model, csv_num(r.ergas1), csv_num(r.scc1), csv_num(r.scc0),
                            csv_num(r.n_ergas1), std::to_string(r.best_dx),
                            std::to_string(r.best_dy)});
    };
    emit(rep_a, "a");
    emit(rep_b, "b");
    auto summary = [&](const MetricReport& rep, const std::string& model) {
        csv += csv_row({"mean", model, csv_num(rep.ergas1.mean), csv_num(rep.scc1.mean),
                        csv_num(rep.scc0.mean), csv_num(rep.n_ergas1.mean), "", ""});
        csv += csv_row({"stderr", model, csv_num(rep.ergas1.se), csv_num(rep.scc1.se),
                        csv_num(rep.scc0.se), csv_num(rep.n_ergas1.se), "", ""});
    };
    summary(rep_a, "a");
    summary(rep_b, "b");
    if (out_csv.empty())
        std::fputs(csv.c_str(), stdout);
    else
        atomic_write_bytes(out_csv, csv);
}

// Aggregate per-scene rows of an eval-format CSV into summary statistics.
inline void run_report(const std::string& in_csv, const std::string& out_csv) {
    const std::string bytes = read_file_bytes(in_csv);
    std::stringstream ss(bytes);
    std::string line;
    if (!std::getline(ss, line)) fail(strfmt("'%s' is empty", in_csv.c_str()));

    std::vector<std::string> header;
    {
        std::stringstream hs(line);
        std::string cell;
        while (std::getline(hs, cell, ',')) header.push_back(cell);
    }
    const std::vector<std::string> metrics = {"ergas1", "scc1", "scc0", "n_ergas1"};
    std::vector<int> cols;
    for (const std::string& name : metrics) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            fail(strfmt("'%s' lacks a '%s' column", in_csv.c_str(), name.c_str()));
        cols.push_back(int(it - header.begin()));
    }

    std::vector<std::vector<double>> values(metrics.size());
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.empty() || cells[0] == "mean" || cells[0] == "stderr") continue;
        for (size_t k = 0; k < cols.size(); ++k) {
            if (size_t(cols[k]) >= cells.size())
                fail(strfmt("'%s': short row '%s'", in_csv.c_str(), line.c_str()));
            values[k].push_back(std::atof(cells[cols[k]].c_str()));
        }
    }
    if (values[0].empty()) fail(strfmt("'%s' has no scene rows", in_csv.c_str()));

    std::string csv = csv_row({"metric", "mean", "stderr", "count"});
    for (size_t k = 0; k < metrics.size(); ++k) {
        const Aggregate a = aggregate(values[k]);
        csv += csv_row({metrics[k], csv_num(a.mean), csv_num(a.se),
                        std::to_string(values[k].size())});
    }
    if (out_csv.empty())
        std::fputs(csv.c_str(), stdout);
    else
        atomic_write_bytes(out_csv, csv);
}

// ---------------------------------------------------------------------------
// argument wiring

inline int run_cli(int argc, const char* const* argv) {
    CLI::App app{"spectral-spatial structure loss toolkit for pan-sharpening"};
    app.require_subcommand(1);

    // synth
    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic misaligned scene");
    synth_cmd->add_option("--out", synth.out, "output scene directory")->required();
    synth_cmd->add_option("--seed", synth.seed, "generator seed")->capture_default_str();
    synth_cmd->add_option("--size", synth.size, "level-1 side length")->capture_default_str();
    synth_cmd->add_option("--scale", synth.scale, "resolution ratio between levels")
        ->capture_default_str();
    synth_cmd->add_option("--window", synth.window, "stat window the scene is sized for")
        ->capture_default_str();
    synth_cmd->add_option("--shift-x", synth.shift_x, "global MS shift, level-0 px")
        ->capture_default_str();
    synth_cmd->add_option("--shift-y", synth.shift_y, "global MS shift, level-0 px")
        ->capture_default_str();
    synth_cmd->add_option("--mover", synth.movers, "mover spec W,H,DX,DY (repeatable)");
    synth_cmd->add_option("--gains", synth.gains, "band gains, comma separated")
        ->capture_default_str();
    synth_cmd->add_flag("!--no-ideal", synth.write_ideal, "skip the PAN-aligned reference");

    // degrade
    std::string deg_in, deg_out;
    int deg_scale = 4;
    auto* deg_cmd = app.add_subcommand("degrade", "low-pass and decimate a raster");
    deg_cmd->add_option("--in", deg_in, "input raster")->required();
    deg_cmd->add_option("--out", deg_out, "output raster")->required();
    deg_cmd->add_option("--scale", deg_scale, "decimation factor")->capture_default_str();

    // pair
    std::vector<std::string> pair_scenes;
    auto* pair_cmd = app.add_subcommand("pair", "fill lower-scale training inputs (p1, m2)");
    pair_cmd->add_option("scenes", pair_scenes, "scene directories or a root of scenes")
        ->required();

    // corr-map
    std::string cm_ms, cm_pan, cm_out, cm_heat;
    StatOptions cm_opts;
    auto* cm_cmd = app.add_subcommand("corr-map", "correlation map S between MS and PAN");
    cm_cmd->add_option("--ms", cm_ms, "MS raster")->required();
    cm_cmd->add_option("--pan", cm_pan, "PAN plane")->required();
    cm_cmd->add_option("--out", cm_out, "output raw plane")->required();
    cm_cmd->add_option("--heatmap", cm_heat, "optional 8-bit pgm heatmap");
    cm_opts.add_flags(cm_cmd, false);

    // loss
    std::string loss_g, loss_ms, loss_pan, loss_s, loss_out, loss_contrib;
    StatOptions loss_opts;
    auto* loss_cmd = app.add_subcommand("loss", "S3 loss breakdown for an output raster");
    loss_cmd->add_option("--g", loss_g, "sharpened output raster")->required();
    loss_cmd->add_option("--ms", loss_ms, "MS target raster")->required();
    loss_cmd->add_option("--pan", loss_pan, "PAN plane")->required();
    loss_cmd->add_option("--s", loss_s, "precomputed correlation map (raw plane)");
    loss_cmd->add_option("--out", loss_out, "also write the CSV here");
    loss_cmd->add_option("--contrib-prefix", loss_contrib,
                         "write per-pixel contribution planes/heatmaps with this prefix");
    loss_opts.add_flags(loss_cmd, true);

    // eval
    std::vector<std::string> eval_scenes;
    std::string eval_out, eval_scc = "grayed";
    int eval_shift = 6;
    auto* eval_cmd = app.add_subcommand("eval", "per-scene metric report (Table layout)");
    eval_cmd->add_option("scenes", eval_scenes, "scene directories or a root")->required();
    eval_cmd->add_option("--out", eval_out, "also write the CSV here");
    eval_cmd->add_option("--max-shift", eval_shift, "n-ERGAS translation bound")
        ->capture_default_str();
    eval_cmd->add_option("--scc-mode", eval_scc, "grayed or band-average")
        ->capture_default_str();

    // train-toy
    TrainArgs tr;
    auto* tr_cmd = app.add_subcommand("train-toy", "train the toy sharpener");
    tr_cmd->add_option("scenes", tr.scenes, "scene directories or a root")->required();
    tr_cmd->add_option("--config", tr.config, "JSON config file (flags override it)");
    tr_cmd->add_option("--mode", tr.mode, "spectral or s3")->capture_default_str();
    tr_cmd->add_option("--out", tr.out, "parameter file")->capture_default_str();
    tr_cmd->add_option("--curve", tr.curve, "loss curve CSV");
    tr_cmd->add_option("--iters", tr.iterations, "training iterations")->capture_default_str();
    tr_cmd->add_option("--lr", tr.lr, "learning rate")->capture_default_str();
    tr_cmd->add_option("--wd", tr.wd, "decoupled weight decay")->capture_default_str();
    tr_cmd->add_option("--drop-at", tr.drop_at, "iteration of the 10x schedule drop "
                                                "(default: half the iterations)");
    tr_cmd->add_option("--seed", tr.seed, "init seed")->capture_default_str();
    tr_cmd->add_option("--hidden", tr.hidden, "hidden channels")->capture_default_str();
    tr_cmd->add_option("--hp-window", tr.hp_window, "PAN high-pass window")
        ->capture_default_str();
    tr.stat.add_flags(tr_cmd, true);

    // compare
    std::string cmp_a, cmp_b, cmp_out;
    std::vector<std::string> cmp_scenes;
    int cmp_shift = 6;
    auto* cmp_cmd = app.add_subcommand("compare", "evaluate two parameter files side by side");
    cmp_cmd->add_option("--a", cmp_a, "first parameter file")->required();
    cmp_cmd->add_option("--b", cmp_b, "second parameter file")->required();
    cmp_cmd->add_option("scenes", cmp_scenes, "test scene directories or a root")->required();
    cmp_cmd->add_option("--out", cmp_out, "also write the CSV here");
    cmp_cmd->add_option("--max-shift", cmp_shift, "n-ERGAS translation bound")
        ->capture_default_str();

    // report
    std::string rep_in, rep_out;
    auto* rep_cmd = app.add_subcommand("report", "summarize a per-scene metric CSV");
    rep_cmd->add_option("--in", rep_in, "per-scene CSV (eval format)")->required();
    rep_cmd->add_option("--out", rep_out, "also write the summary here");

    try {
        app.parse(argc, argv);
        if (synth_cmd->parsed()) run_synth(synth);
        else if (deg_cmd->parsed()) run_degrade(deg_in, deg_out, deg_scale);
        else if (pair_cmd->parsed()) run_pair(pair_scenes);
        else if (cm_cmd->parsed()) run_corr_map(cm_ms, cm_pan, cm_out, cm_heat, cm_opts);
        else if (loss_cmd->parsed())
            run_loss(loss_g, loss_ms, loss_pan, loss_s, loss_out, loss_contrib, loss_opts);
        else if (eval_cmd->parsed()) run_eval(eval_scenes, eval_out, eval_shift, eval_scc);
        else if (tr_cmd->parsed()) {
            if (!tr.config.empty()) apply_train_config(tr, *tr_cmd);
            run_train(tr);
        }
        else if (cmp_cmd->parsed()) run_compare(cmp_a, cmp_b, cmp_scenes, cmp_out, cmp_shift);
        else if (rep_cmd->parsed()) run_report(rep_in, rep_out);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}

}  // namespace cli
}  // namespace s3ps
