// Acceptance suite: exact-formula oracles, gradient checks, and directional
// behavior of the loss on synthetic misaligned data. One line per criterion.

#include <chrono>
#include <functional>
#include <future>

#include "s3ps/cli.hpp"
#include "s3ps/corrmap.hpp"
#include "s3ps/metrics.hpp"
#include "s3ps/s3loss.hpp"
#include "s3ps/scalepipe.hpp"
#include "s3ps/toytrain.hpp"

#include "fd_check.hpp"
#include "oracles.hpp"

using namespace s3ps;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

#define REQUIRE_OR_FAIL(cond, ...)                     \
    do {                                               \
        if (!(cond)) return Outcome{false, strfmt(__VA_ARGS__)}; \
    } while (0)

// ---------------------------------------------------------------------------
// 1. integral-image stats match the naive oracle on 50 random planes

Outcome criterion_window_stats() {
    oracle::Rng rng(1001);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const int size = 32 + int(rng.u01() * 97.0);  // 32..128
        const int window = (trial % 2 == 0) ? 3 : 31;
        const StatConfig cfg{window, 1e-10};
        const Plane a = oracle::random_plane(size, size, rng);
        const Plane b = oracle::random_plane(size, size, rng);
        const double d1 =
            oracle::max_abs_diff(window_mean(a, cfg), oracle::naive_window_mean(a, window));
        const double d2 =
            oracle::max_abs_diff(window_cov(a, b, cfg), oracle::naive_window_cov(a, b, window));
        const double d3 = oracle::max_abs_diff(window_std(a, cfg),
                                               oracle::naive_window_std(a, window, cfg.e));
        worst = std::max({worst, d1, d2, d3});
        REQUIRE_OR_FAIL(worst < 1e-6, "trial %d size %d window %d: max |diff| %.3g", trial, size,
                        window, worst);
    }
    return Outcome{true, strfmt("50 planes, windows {3,31}, max |diff| %.2e", worst)};
}

// ---------------------------------------------------------------------------
// 2. correlation-map law: range always, S ~ 1 for affine matches of either sign

Outcome criterion_corr_law() {
    CorrParams params;  // gamma 4, window 31, e 1e-10
    double worst_mean = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        SynthConfig scfg;
        scfg.width1 = 128;
        scfg.height1 = 128;
        scfg.seed = 2000 + uint64_t(trial);
        const SynthScene sc = synth_scene(scfg);
        const Plane pan = degrade(sc.pair.p0, scfg.scale);

        oracle::Rng rng(3000 + uint64_t(trial));
        Raster ms(pan.width, pan.height, 3, 1);
        const bool affine = trial < 10;
        const double sign = (trial % 2 == 0) ? 1.0 : -1.0;
        for (int b = 0; b < 3; ++b) {
            const double a = sign * (0.4 + 0.2 * b);
            for (size_t i = 0; i < pan.v.size(); ++i)
                ms.bands[b].v[i] = affine ? a * pan.v[i] + 0.1 * b : rng.uniform(-1.0, 2.0);
        }
        const CorrMap s = corr_map(ms, pan, params);
        for (double v : s.s.v)
            REQUIRE_OR_FAIL(v >= 0.0 && v <= 1.0, "trial %d: S = %.17g outside [0,1]", trial, v);
        if (affine) {
            const Plane var = window_cov(pan, pan, params.stat);
            double acc = 0.0;
            int count = 0;
            for (size_t i = 0; i < s.s.v.size(); ++i)
                if (var.v[i] >= 1e-4) {
                    acc += std::fabs(s.s.v[i] - 1.0);
                    ++count;
                }
            REQUIRE_OR_FAIL(count > 0, "trial %d: no windows with variance >= 1e-4", trial);
            const double mean_err = acc / count;
            worst_mean = std::max(worst_mean, mean_err);
            REQUIRE_OR_FAIL(mean_err <= 1e-3, "trial %d: mean |S-1| = %.3g", trial, mean_err);
        }
    }
    return Outcome{true, strfmt("20 pairs, worst affine mean |S-1| %.2e", worst_mean)};
}

// ---------------------------------------------------------------------------
// 3. loss identities

Outcome criterion_loss_identities() {
    oracle::Rng rng(4000);
    const Plane pan = oracle::random_plane(40, 40, rng);
    Raster g(40, 40, 4);
    for (auto& band : g.bands) band = pan;  // gray(g) == pan bitwise

    LossConfig cfg;
    cfg.stat = StatConfig{9, 1e-10};
    cfg.corr.stat = cfg.stat;
    const CorrMap ones{Plane(40, 40, 1.0)};

    REQUIRE_OR_FAIL(spectral_loss(g, g, ones, cfg) == 0.0, "L_c(G=M) != 0");
    REQUIRE_OR_FAIL(spatial_loss(g, pan, ones, cfg) == 0.0, "L_a(gray(G)=PAN) != 0");

    const Raster gr = oracle::random_raster(40, 40, 3, rng);
    const Raster mr = oracle::random_raster(40, 40, 3, rng);
    CorrMap s{Plane(40, 40)};
    for (double& v : s.s.v) v = rng.u01();
    for (double wa : {0.0, 0.5, 1.0, 2.0}) {
        LossConfig c2 = cfg;
        c2.w_a = wa;
        const LossBreakdown b = s3_loss(gr, mr, pan, s, c2);
        REQUIRE_OR_FAIL(b.l_s3 == b.l_c + wa * b.l_a, "additive identity broken at w_a=%g", wa);
    }

    LossConfig off = cfg;
    off.use_corr_map = false;
    const LossBreakdown b_off = s3_loss(gr, mr, pan, s, off);
    const LossBreakdown b_ones = s3_loss(gr, mr, pan, ones, cfg);
    REQUIRE_OR_FAIL(b_off.l_c == b_ones.l_c && b_off.l_a == b_ones.l_a &&
                        b_off.l_s3 == b_ones.l_s3,
                    "ablation is not bit-identical to an explicit all-ones S");
    const LossGrad g_off = s3_loss_grad(gr, mr, pan, s, off);
    const LossGrad g_ones = s3_loss_grad(gr, mr, pan, ones, cfg);
    for (int b = 0; b < 3; ++b)
        for (size_t i = 0; i < g_off.d_g.bands[b].v.size(); ++i)
            REQUIRE_OR_FAIL(g_off.d_g.bands[b].v[i] == g_ones.d_g.bands[b].v[i],
                            "ablation gradient differs at band %d index %zu", b, i);
    return Outcome{true, "zero residual, additive and ablation identities hold exactly"};
}

// ---------------------------------------------------------------------------
// 4. analytic gradient vs central finite differences

Outcome criterion_gradient_check() {
    int total_checked = 0;
    double worst = 0.0;
    for (int inst = 0; inst < 10; ++inst) {
        oracle::Rng rng(5000 + uint64_t(inst));
        Raster g = oracle::random_raster(16, 16, 3, rng);
        Raster m = g;
        for (auto& band : m.bands)
            for (double& v : band.v)
                v -= (rng.u01() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.05, 0.4);
        const Plane pan = oracle::random_plane(16, 16, rng);
        CorrMap s{Plane(16, 16)};
        for (double& v : s.s.v) v = rng.u01();

        LossConfig cfg;
        cfg.stat = StatConfig{7, 1e-10};
        cfg.corr.stat = cfg.stat;
        const auto rep = fdcheck::fd_check_s3_grad(g, m, pan, s, cfg, 1e-4, 1e-6, 1e-4, 1e-6);
        total_checked += rep.checked;
        worst = std::max(worst, rep.max_rel_err);
        REQUIRE_OR_FAIL(rep.failures == 0,
                        "instance %d: %d coordinates above 1e-4 (max rel err %.3g)", inst,
                        rep.failures, rep.max_rel_err);
    }
    return Outcome{true,
                   strfmt("10 instances, %d coords, max rel err %.2e", total_checked, worst)};
}

// ---------------------------------------------------------------------------
// 5. metric identities on 20 random scenes

Outcome criterion_metric_identities() {
    oracle::Rng rng(6000);
    for (int trial = 0; trial < 20; ++trial) {
        Raster ps0(48, 48, 3, 0);
        for (auto& band : ps0.bands) band = oracle::random_plane(48, 48, rng, 0.2, 1.0);
        REQUIRE_OR_FAIL(ergas(ps0, ps0, 0.25) == 0.0, "trial %d: ERGAS(x,x) != 0", trial);
        REQUIRE_OR_FAIL(std::fabs(scc(ps0.bands[0], ps0.bands[0]) - 1.0) < 1e-12,
                        "trial %d: SCC(x,x) != 1", trial);

        Raster ms1(12, 12, 3, 1);
        for (auto& band : ms1.bands) band = oracle::random_plane(12, 12, rng, 0.2, 1.0);
        TranslationSearch only_zero;
        only_zero.offsets = {{0, 0}};
        const double at_zero = n_ergas(ps0, ms1, 4, only_zero).value;
        const double searched = n_ergas(ps0, ms1, 4, TranslationSearch::grid(6)).value;
        REQUIRE_OR_FAIL(searched <= at_zero, "trial %d: n-ERGAS %.6g > zero-offset %.6g", trial,
                        searched, at_zero);
    }
    return Outcome{true, "ERGAS/SCC identities and n-ERGAS <= ERGAS on 20 scenes"};
}

// ---------------------------------------------------------------------------
// 6. n-ERGAS recovers planted global shifts

Outcome criterion_offset_recovery() {
    const std::pair<double, double> shifts[] = {{2, 2},   {-2, -2}, {4, 4},
                                                {-4, -4}, {4, 0},   {0, 6}};
    int hits = 0;
    std::string misses;
    for (int trial = 0; trial < 40; ++trial) {
        const auto [sx, sy] = shifts[trial % 6];
        SynthConfig cfg;
        cfg.width1 = 40;
        cfg.height1 = 40;
        cfg.stat_window = 9;
        cfg.seed = 7000 + uint64_t(trial);
        cfg.shift_x = sx;
        cfg.shift_y = sy;
        const SynthScene sc = synth_scene(cfg);
        const NErgasResult res =
            n_ergas(sc.truth.ideal_g0, sc.pair.m1, cfg.scale, TranslationSearch::grid(6));
        if (res.dx == int(sx) && res.dy == int(sy))
            ++hits;
        else
            misses += strfmt(" trial %d planted (%g,%g) got (%d,%d);", trial, sx, sy, res.dx,
                             res.dy);
    }
    REQUIRE_OR_FAIL(hits >= 38, "only %d/40 exact recoveries:%s", hits, misses.c_str());
    return Outcome{true, strfmt("%d/40 planted offsets recovered exactly", hits)};
}

// ---------------------------------------------------------------------------
// 7 & 8: train the two objectives and compare at the original scale

struct BenchResult {
    double scc0_spectral = 0.0, scc0_s3 = 0.0;
    double gap_spectral = 0.0, gap_s3 = 0.0;  // mean (ERGAS1 - n-ERGAS1)
};

SynthConfig bench_scene_cfg(uint64_t seed, bool misaligned) {
    SynthConfig cfg;
    cfg.width1 = 40;
    cfg.height1 = 40;
    cfg.stat_window = 9;
    cfg.seed = seed;
    if (misaligned) {
        detail::SceneRng rng(seed * 7919 + 13);
        const double mag_x = rng.uniform(4.0, 6.0);
        const double mag_y = rng.uniform(4.0, 6.0);
        cfg.shift_x = std::round(rng.u01() < 0.5 ? -mag_x : mag_x);
        cfg.shift_y = std::round(rng.u01() < 0.5 ? -mag_y : mag_y);
        cfg.movers = {{20, 10, 6.0, 0.0}, {10, 20, 0.0, -6.0}};
    }
    return cfg;
}

BenchResult run_bench_seed(uint64_t seed, bool misaligned) {
    LossConfig loss_cfg;
    loss_cfg.stat = StatConfig{9, 1e-10};
    loss_cfg.corr.stat = loss_cfg.stat;

    std::vector<TrainScene> dataset;
    for (int i = 0; i < 6; ++i) {
        const SynthScene sc = synth_scene(bench_scene_cfg(seed * 100 + uint64_t(i), misaligned));
        const ScenePair sp = make_training_pair(sc.pair);
        TrainScene ts;
        ts.m1 = sp.m1;
        ts.p1 = *sp.p1;
        ts.m2 = *sp.m2;
        ts.s = corr_map(sp.m1, *sp.p1, loss_cfg.corr);
        dataset.push_back(std::move(ts));
    }

    TrainConfig base;
    base.iterations = 800;
    base.drop_at = 400;
    base.lr = 3e-3;
    base.seed = seed;
    base.hidden = 8;
    base.loss = loss_cfg;

    TrainConfig cfg_l2 = base;
    cfg_l2.loss_mode = LossMode::SpectralL2;
    TrainConfig cfg_s3 = base;
    cfg_s3.loss_mode = LossMode::S3;
    const TrainResult spectral = train(dataset, cfg_l2);
    const TrainResult s3 = train(dataset, cfg_s3);

    std::vector<ScenePair> testset;
    for (int i = 0; i < 3; ++i)
        testset.push_back(
            synth_scene(bench_scene_cfg(seed * 100 + 50 + uint64_t(i), misaligned)).pair);
    const CompareResult cr = compare_modes(testset, spectral.params, s3.params);

    BenchResult out;
    out.scc0_spectral = cr.spectral.scc0.mean;
    out.scc0_s3 = cr.s3.scc0.mean;
    out.gap_spectral = cr.spectral.ergas1.mean - cr.spectral.n_ergas1.mean;
    out.gap_s3 = cr.s3.ergas1.mean - cr.s3.n_ergas1.mean;
    return out;
}

BenchResult run_bench(bool misaligned, int seeds) {
    std::vector<std::future<BenchResult>> jobs;
    for (int s = 0; s < seeds; ++s)
        jobs.push_back(
            std::async(std::launch::async, run_bench_seed, uint64_t(s + 1), misaligned));
    BenchResult mean;
    for (auto& j : jobs) {
        const BenchResult r = j.get();
        mean.scc0_spectral += r.scc0_spectral / seeds;
        mean.scc0_s3 += r.scc0_s3 / seeds;
        mean.gap_spectral += r.gap_spectral / seeds;
        mean.gap_s3 += r.gap_s3 / seeds;
    }
    return mean;
}

Outcome criterion_directional(const BenchResult& r) {
    REQUIRE_OR_FAIL(r.scc0_s3 > r.scc0_spectral,
                    "mean SCC0: s3 %.4f vs spectral %.4f (expected s3 higher)", r.scc0_s3,
                    r.scc0_spectral);
    REQUIRE_OR_FAIL(r.gap_s3 > r.gap_spectral,
                    "ERGAS1 - n-ERGAS1 gap: s3 %.4f vs spectral %.4f (expected s3 larger)",
                    r.gap_s3, r.gap_spectral);
    return Outcome{true, strfmt("SCC0 %.4f vs %.4f, gap %.4f vs %.4f (s3 vs spectral)",
                                r.scc0_s3, r.scc0_spectral, r.gap_s3, r.gap_spectral)};
}

Outcome criterion_aligned_control(const BenchResult& r) {
    const double diff = std::fabs(r.scc0_s3 - r.scc0_spectral);
    REQUIRE_OR_FAIL(diff <= 0.05, "aligned SCC0 differs by %.4f (s3 %.4f, spectral %.4f)", diff,
                    r.scc0_s3, r.scc0_spectral);
    return Outcome{true, strfmt("aligned SCC0 differs by %.4f (s3 %.4f, spectral %.4f)", diff,
                                r.scc0_s3, r.scc0_spectral)};
}

// ---------------------------------------------------------------------------
// 9. CLI determinism: every subcommand, rerun, byte-identical outputs

int run_cli_args(const std::vector<std::string>& args) {
    std::vector<const char*> argv = {"s3ps"};
    for (const std::string& a : args) argv.push_back(a.c_str());
    return cli::run_cli(int(argv.size()), argv.data());
}

Outcome criterion_cli_determinism() {
    const fs::path root = fs::temp_directory_path() / "s3ps_acceptance_cli";
    fs::remove_all(root);
    fs::create_directories(root);
    auto p = [&](const std::string& name) { return (root / name).string(); };

    // two identical passes, each into its own tree
    for (const char* tag : {"a", "b"}) {
        const std::string t = std::string(tag);
        for (int i = 0; i < 2; ++i) {
            const std::string dir = p(t + "/scene_" + std::to_string(i));
            if (run_cli_args({"synth", "--out", dir, "--seed", std::to_string(40 + i), "--size",
                              "40", "--window", "9", "--shift-x", "4", "--mover",
                              "20,10,6,0"}) != 0)
                return Outcome{false, "synth failed"};
            if (run_cli_args({"pair", dir}) != 0) return Outcome{false, "pair failed"};
        }
        if (run_cli_args({"degrade", "--in", p(t + "/scene_0/p0.raw"), "--out",
                          p(t + "/deg.raw"), "--scale", "4"}) != 0)
            return Outcome{false, "degrade failed"};
        if (run_cli_args({"corr-map", "--ms", p(t + "/scene_0/m1.raw"), "--pan",
                          p(t + "/scene_0/p1.raw"), "--out", p(t + "/s.raw"), "--heatmap",
                          p(t + "/s.pgm"), "--window", "9"}) != 0)
            return Outcome{false, "corr-map failed"};
        if (run_cli_args({"loss", "--g", p(t + "/scene_1/m1.raw"), "--ms",
                          p(t + "/scene_0/m1.raw"), "--pan", p(t + "/scene_0/p1.raw"),
                          "--window", "9", "--out", p(t + "/loss.csv"), "--contrib-prefix",
                          p(t + "/contrib")}) != 0)
            return Outcome{false, "loss failed"};
        if (run_cli_args({"train-toy", p(t), "--mode", "s3", "--iters", "30", "--window", "9",
                          "--hidden", "4", "--out", p(t + "/params.bin"), "--curve",
                          p(t + "/curve.csv")}) != 0)
            return Outcome{false, "train-toy failed"};
        if (run_cli_args({"train-toy", p(t), "--mode", "spectral", "--iters", "30", "--window",
                          "9", "--hidden", "4", "--out", p(t + "/params2.bin")}) != 0)
            return Outcome{false, "train-toy (spectral) failed"};
        if (run_cli_args({"compare", "--a", p(t + "/params.bin"), "--b", p(t + "/params2.bin"),
                          p(t), "--out", p(t + "/cmp.csv")}) != 0)
            return Outcome{false, "compare failed"};
        for (int i = 0; i < 2; ++i) {
            const fs::path dir = root / t / ("scene_" + std::to_string(i));
            auto manifest = cli::load_manifest(dir);
            manifest["files"]["g0"] = "ideal_g0.raw";
            cli::save_manifest(dir, manifest);
        }
        if (run_cli_args({"eval", p(t), "--out", p(t + "/eval.csv")}) != 0)
            return Outcome{false, "eval failed"};
        if (run_cli_args({"report", "--in", p(t + "/eval.csv"), "--out",
                          p(t + "/summary.csv")}) != 0)
            return Outcome{false, "report failed"};
    }

    std::vector<std::string> rel = {"deg.raw",        "deg.raw.hdr", "s.raw",
                                    "s.raw.hdr",      "s.pgm",       "loss.csv",
                                    "contrib_c.pgm",  "contrib_a.pgm",
                                    "contrib_c.raw",  "contrib_a.raw",
                                    "params.bin",     "params.bin.hdr",
                                    "params2.bin",    "curve.csv",   "cmp.csv",
                                    "eval.csv",       "summary.csv"};
    for (int i = 0; i < 2; ++i) {
        const std::string d = "scene_" + std::to_string(i) + "/";
        for (const char* f : {"p0.raw", "m1.raw", "ideal_g0.raw", "p1.raw", "m2.raw", "s.raw",
                              "scene.json"})
            rel.push_back(d + f);
    }
    for (const std::string& f : rel) {
        const std::string ba = read_file_bytes((root / "a" / f).string());
        const std::string bb = read_file_bytes((root / "b" / f).string());
        if (ba != bb)
            return Outcome{false, strfmt("'%s' differs between identical runs", f.c_str())};
    }
    fs::remove_all(root);
    return Outcome{true, strfmt("%zu output files byte-identical across reruns", rel.size())};
}

// ---------------------------------------------------------------------------

int report(int id, const char* name, double seconds, double limit, const Outcome& oc) {
    const bool in_time = seconds < limit;
    const bool pass = oc.pass && in_time;
    std::printf("[%s] %d. %s: %s (%.1f s%s)\n", pass ? "PASS" : "FAIL", id, name,
                oc.detail.c_str(), seconds,
                in_time ? "" : strfmt(", over the %g s limit", limit).c_str());
    std::fflush(stdout);
    return pass ? 0 : 1;
}

template <class F>
int timed(int id, const char* name, double limit, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome oc;
    try {
        oc = f();
    } catch (const std::exception& e) {
        oc = Outcome{false, strfmt("exception: %s", e.what())};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report(id, name, seconds, limit, oc);
}

}  // namespace

int main() {
    int failures = 0;
    failures +=
        timed(1, "windowed statistics match the naive oracle", 10.0, criterion_window_stats);
    failures += timed(2, "correlation-map range and affine law", 5.0, criterion_corr_law);
    failures += timed(3, "loss identities", 5.0, criterion_loss_identities);
    failures +=
        timed(4, "analytic gradient vs finite differences", 60.0, criterion_gradient_check);
    failures += timed(5, "metric identities", 10.0, criterion_metric_identities);
    failures += timed(6, "n-ERGAS planted offset recovery", 120.0, criterion_offset_recovery);
    failures += timed(7, "S3 vs spectral training on misaligned scenes", 600.0,
                      [] { return criterion_directional(run_bench(true, 10)); });
    failures += timed(8, "aligned-control parity", 600.0,
                      [] { return criterion_aligned_control(run_bench(false, 10)); });
    failures += timed(9, "CLI determinism", 600.0, criterion_cli_determinism);

    if (failures == 0)
        std::printf("all 9 acceptance criteria passed\n");
    else
        std::printf("%d acceptance criteria FAILED\n", failures);
    return failures;
}
