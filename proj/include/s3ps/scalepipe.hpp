#pragma once

// Two-scale protocol: Gaussian degradation between resolution levels,
// bicubic upsampling, integer/sub-pixel translation, and a synthetic
// misaligned-scene generator that stands in for satellite tiles.

#include <optional>
#include <random>

#include "s3ps/raster.hpp"

namespace s3ps {

// ---------------------------------------------------------------------------
// degrade: Gaussian low-pass (sigma = scale/2, radius ceil(3*sigma),
// renormalized, reflect borders) then top-left-aligned decimation.

namespace detail {

inline std::vector<double> gaussian_kernel(double sigma) {
    const int radius = int(std::ceil(3.0 * sigma));
    std::vector<double> k(size_t(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[size_t(i + radius)] = std::exp(-0.5 * double(i) * double(i) / (sigma * sigma));
        sum += k[size_t(i + radius)];
    }
    for (double& w : k) w /= sum;
    return k;
}

inline Plane convolve_separable_reflect(const Plane& p, const std::vector<double>& k) {
    const int radius = int(k.size() / 2);
    Plane tmp(p.width, p.height);
    for (int y = 0; y < p.height; ++y)
        for (int x = 0; x < p.width; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += k[size_t(i + radius)] * p.at(reflect_index(x + i, p.width), y);
            tmp.at(x, y) = acc;
        }
    Plane out(p.width, p.height);
    for (int y = 0; y < p.height; ++y)
        for (int x = 0; x < p.width; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += k[size_t(i + radius)] * tmp.at(x, reflect_index(y + i, p.height));
            out.at(x, y) = acc;
        }
    return out;
}

}  // namespace detail

inline Plane degrade(const Plane& x, int scale) {
    if (scale < 2) fail(strfmt("degrade: scale must be >= 2, got %d", scale));
    if (x.width % scale != 0 || x.height % scale != 0)
        fail(strfmt("degrade: %dx%d not divisible by scale %d", x.width, x.height, scale));
    const Plane blurred =
        detail::convolve_separable_reflect(x, detail::gaussian_kernel(double(scale) / 2.0));
    Plane out(x.width / scale, x.height / scale);
    for (int y = 0; y < out.height; ++y)
        for (int px = 0; px < out.width; ++px) out.at(px, y) = blurred.at(px * scale, y * scale);
    return out;
}

inline Raster degrade(const Raster& x, int scale) {
    x.check_consistent();
    Raster out;
    out.level = x.level + 1;
    for (const Plane& p : x.bands) out.bands.push_back(degrade(p, scale));
    return out;
}

// ---------------------------------------------------------------------------
// bicubic (Catmull-Rom, a = -0.5) sampling and upsampling

namespace detail {

inline void catmull_rom_weights(double t, double w[4]) {
    const double t2 = t * t, t3 = t2 * t;
    w[0] = 0.5 * (-t3 + 2.0 * t2 - t);
    w[1] = 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0);
    w[2] = 0.5 * (-3.0 * t3 + 4.0 * t2 + t);
    w[3] = 0.5 * (t3 - t2);
}

}  // namespace detail

// Bicubic sample at a real-valued position, reflected at borders.
inline double sample_bicubic(const Plane& p, double sx, double sy) {
    const double fx = std::floor(sx), fy = std::floor(sy);
    const int ix = int(fx), iy = int(fy);
    double wx[4], wy[4];
    detail::catmull_rom_weights(sx - fx, wx);
    detail::catmull_rom_weights(sy - fy, wy);
    double acc = 0.0;
    for (int j = 0; j < 4; ++j) {
        const int yy = reflect_index(iy - 1 + j, p.height);
        double row = 0.0;
        for (int i = 0; i < 4; ++i)
            row += wx[i] * p.at(reflect_index(ix - 1 + i, p.width), yy);
        acc += wy[j] * row;
    }
    return acc;
}

inline Plane upsample(const Plane& x, int scale) {
    if (scale < 2) fail(strfmt("upsample: scale must be >= 2, got %d", scale));
    Plane out(x.width * scale, x.height * scale);
    const double inv = 1.0 / scale;
    for (int y = 0; y < out.height; ++y) {
        const double sy = (y + 0.5) * inv - 0.5;
        for (int px = 0; px < out.width; ++px)
            out.at(px, y) = sample_bicubic(x, (px + 0.5) * inv - 0.5, sy);
    }
    return out;
}

inline Raster upsample(const Raster& x, int scale) {
    x.check_consistent();
    Raster out;
    out.level = std::max(x.level - 1, 0);
    for (const Plane& p : x.bands) out.bands.push_back(upsample(p, scale));
    return out;
}

// Integer translation moving content by (+dx,+dy), reflect fill on the
// vacated strips.
inline Plane translate_reflect(const Plane& p, int dx, int dy) {
    Plane out(p.width, p.height);
    for (int y = 0; y < p.height; ++y) {
        const int sy = reflect_index(y - dy, p.height);
        for (int x = 0; x < p.width; ++x)
            out.at(x, y) = p.at(reflect_index(x - dx, p.width), sy);
    }
    return out;
}

inline Raster translate_reflect(const Raster& r, int dx, int dy) {
    Raster out;
    out.level = r.level;
    for (const Plane& p : r.bands) out.bands.push_back(translate_reflect(p, dx, dy));
    return out;
}

// Sub-pixel translation via bicubic resampling; exact for integer offsets.
inline Plane translate_subpixel(const Plane& p, double dx, double dy) {
    const double rx = std::round(dx), ry = std::round(dy);
    if (rx == dx && ry == dy) return translate_reflect(p, int(rx), int(ry));
    Plane out(p.width, p.height);
    for (int y = 0; y < p.height; ++y)
        for (int x = 0; x < p.width; ++x) out.at(x, y) = sample_bicubic(p, x - dx, y - dy);
    return out;
}

// ---------------------------------------------------------------------------
// ScenePair: a bundle of co-registered rasters across levels.

struct ScenePair {
    Plane p0;       // level-0 PAN
    Raster m1;      // level-1 MS
    int scale = 4;  // resolution ratio between adjacent levels
    std::optional<Plane> p1;
    std::optional<Raster> m2;
    std::optional<Raster> g1;  // level-1 result
    std::optional<Raster> g0;  // level-0 result

    void validate() const {
        m1.check_consistent();
        if (scale < 2) fail(strfmt("scene scale must be >= 2, got %d", scale));
        if (p0.width != m1.width() * scale || p0.height != m1.height() * scale)
            fail(strfmt("p0 is %dx%d but m1 is %dx%d at scale %d", p0.width, p0.height,
                        m1.width(), m1.height(), scale));
        if (p1 && (p1->width != m1.width() || p1->height != m1.height()))
            fail("p1 does not match m1 spatially");
        if (m2 && (m2->width() * scale != m1.width() || m2->height() * scale != m1.height()))
            fail("m2 does not match m1 at the scene scale");
        if (g1) require_same_shape(*g1, m1, "scene g1");
        if (g0 && (g0->width() != p0.width || g0->height() != p0.height ||
                   g0->nbands() != m1.nbands()))
            fail("g0 must be p0-sized with m1's band count");
    }
};

// Fill the lower-scale training inputs: p1 = degrade(p0), m2 = degrade(m1).
// The target stays m1. Deterministic, so calling twice is a no-op.
inline ScenePair make_training_pair(ScenePair sp) {
    sp.validate();
    sp.p1 = degrade(sp.p0, sp.scale);
    sp.m2 = degrade(sp.m1, sp.scale);
    return sp;
}

// ---------------------------------------------------------------------------
// Synthetic scenes: piecewise-smooth textured ground with sharp patches,
// flat road strips carrying rectangular movers, a global MS-vs-PAN shift,
// and per-mover displacements. All level-0 pixels, all seeded.

struct MoverSpec {
    int width = 16;   // level-0 pixels
    int height = 10;
    double dx = 0.0;  // displacement of the MS copy relative to the PAN copy
    double dy = 0.0;
};

struct SynthConfig {
    int width1 = 128;  // level-1 dimensions
    int height1 = 128;
    int scale = 4;
    double shift_x = 0.0;  // global MS-vs-PAN offset, level-0 pixels
    double shift_y = 0.0;
    std::vector<MoverSpec> movers;
    uint64_t seed = 0;
    std::vector<double> band_gains = {0.85, 1.0, 0.7};
    int stat_window = 31;  // window the scene is sized for

    void validate() const {
        if (scale < 2) fail(strfmt("synth: scale must be >= 2, got %d", scale));
        if (width1 < 4 || height1 < 4) fail("synth: level-1 size too small");
        if (width1 % scale != 0 || height1 % scale != 0)
            fail(strfmt("synth: level-1 size %dx%d must be divisible by scale %d for the "
                        "training pair",
                        width1, height1, scale));
        if (std::min(width1, height1) < 4 * stat_window)
            fail(strfmt("synth: level-1 size %dx%d must be at least 4x the %d window", width1,
                        height1, stat_window));
        if (std::fabs(shift_x) > 8.0 || std::fabs(shift_y) > 8.0)
            fail(strfmt("synth: global shift (%g,%g) exceeds 8 level-0 pixels", shift_x,
                        shift_y));
        for (const MoverSpec& m : movers) {
            if (m.width < 2 || m.height < 2) fail("synth: mover smaller than 2x2");
            if (std::fabs(m.dx) > 8.0 || std::fabs(m.dy) > 8.0)
                fail(strfmt("synth: mover displacement (%g,%g) exceeds 8 level-0 pixels", m.dx,
                            m.dy));
        }
        if (band_gains.empty()) fail("synth: need at least one band gain");
        for (double g : band_gains)
            if (!(g > 0.0 && g <= 1.0)) fail(strfmt("synth: band gain %g outside (0,1]", g));
    }
};

struct PlacedMover {
    int x = 0, y = 0;          // PAN-render top-left, level-0 pixels
    int width = 0, height = 0;
    int dx = 0, dy = 0;        // drawn MS displacement (rounded), level-0 pixels
    double value = 0.0;
};

struct SynthTruth {
    double shift_x = 0.0, shift_y = 0.0;
    std::vector<PlacedMover> movers;
    Raster ideal_g0;  // PAN-aligned scene colored into MS bands
};

struct SynthScene {
    ScenePair pair;
    SynthTruth truth;
};

namespace detail {

// mt19937_64 driven through fixed mappings so scenes are bit-reproducible.
class SceneRng {
public:
    explicit SceneRng(uint64_t seed) : g_(seed) {}
    double u01() { return double(g_() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * u01(); }
    int uniform_int(int a, int b) {  // inclusive
        return a + int(g_() % uint64_t(b - a + 1));
    }

private:
    std::mt19937_64 g_;
};

inline void draw_rect(Plane& p, int x0, int y0, int w, int h, double value) {
    for (int y = y0; y < y0 + h; ++y)
        for (int x = x0; x < x0 + w; ++x) p.at(x, y) = value;
}

inline bool rect_inside(int x0, int y0, int w, int h, int W, int H) {
    return x0 >= 0 && y0 >= 0 && x0 + w <= W && y0 + h <= H;
}

}  // namespace detail

inline SynthScene synth_scene(const SynthConfig& cfg) {
    cfg.validate();
    detail::SceneRng rng(cfg.seed);
    const int w0 = cfg.width1 * cfg.scale;
    const int h0 = cfg.height1 * cfg.scale;

    // Smooth background: a coarse seeded grid sampled bicubically.
    const int cell = 16;
    const int gw = w0 / cell + 3, gh = h0 / cell + 3;
    Plane grid(gw, gh);
    for (double& v : grid.v) v = rng.uniform(0.25, 0.75);
    Plane field(w0, h0);
    for (int y = 0; y < h0; ++y)
        for (int x = 0; x < w0; ++x)
            field.at(x, y) = sample_bicubic(grid, double(x) / cell + 1.0, double(y) / cell + 1.0);

    // Sharp-edged patches.
    const int npatch = std::max(4, (w0 / 48) * (h0 / 48) / 2);
    for (int i = 0; i < npatch; ++i) {
        const int pw = rng.uniform_int(w0 / 10, w0 / 4);
        const int ph = rng.uniform_int(h0 / 10, h0 / 4);
        const int px = rng.uniform_int(0, w0 - pw);
        const int py = rng.uniform_int(0, h0 - ph);
        detail::draw_rect(field, px, py, pw, ph, rng.uniform(0.15, 0.9));
    }

    // Flat road strips (movers live here).
    const int road_w = 14;
    const double road_value = 0.22;
    const int road_y = rng.uniform_int(h0 / 4, 3 * h0 / 4 - road_w);
    const int road_x = rng.uniform_int(w0 / 4, 3 * w0 / 4 - road_w);
    detail::draw_rect(field, 0, road_y, w0, road_w, road_value);
    detail::draw_rect(field, road_x, 0, road_w, h0, road_value);

    // Micro-texture so windowed statistics never degenerate.
    for (double& v : field.v) v = std::clamp(v + rng.uniform(-0.02, 0.02), 0.01, 0.99);

    // Place movers on the roads, alternating between the two strips.
    const int gx = int(std::round(cfg.shift_x));
    const int gy = int(std::round(cfg.shift_y));
    std::vector<PlacedMover> placed;
    for (size_t i = 0; i < cfg.movers.size(); ++i) {
        const MoverSpec& spec = cfg.movers[i];
        PlacedMover pm;
        pm.width = spec.width;
        pm.height = spec.height;
        pm.dx = int(std::round(spec.dx));
        pm.dy = int(std::round(spec.dy));
        pm.value = rng.uniform(0.8, 0.95);
        const int margin = 10;
        if (i % 2 == 0) {  // horizontal road
            pm.y = road_y + (road_w - spec.height) / 2;
            pm.x = rng.uniform_int(margin, std::max(margin, w0 - spec.width - margin));
        } else {  // vertical road
            pm.x = road_x + (road_w - spec.width) / 2;
            pm.y = rng.uniform_int(margin, std::max(margin, h0 - spec.height - margin));
        }
        if (!detail::rect_inside(pm.x, pm.y, pm.width, pm.height, w0, h0) ||
            !detail::rect_inside(pm.x + gx + pm.dx, pm.y + gy + pm.dy, pm.width, pm.height, w0,
                                 h0))
            fail(strfmt("synth: mover %zu (%dx%d at %d,%d) falls outside the %dx%d canvas", i,
                        pm.width, pm.height, pm.x, pm.y, w0, h0));
        placed.push_back(pm);
    }

    // PAN render: movers at their base positions.
    Plane pan_field = field;
    for (const PlacedMover& pm : placed)
        detail::draw_rect(pan_field, pm.x, pm.y, pm.width, pm.height, pm.value);

    // MS render: globally shifted ground, movers additionally displaced.
    Plane ms_field = translate_subpixel(field, cfg.shift_x, cfg.shift_y);
    for (const PlacedMover& pm : placed)
        detail::draw_rect(ms_field, pm.x + gx + pm.dx, pm.y + gy + pm.dy, pm.width, pm.height,
                          pm.value);

    const int nb = int(cfg.band_gains.size());
    Raster ms0(w0, h0, nb, 0);
    Raster ideal(w0, h0, nb, 0);
    for (int b = 0; b < nb; ++b)
        for (size_t i = 0; i < field.v.size(); ++i) {
            ms0.bands[b].v[i] = cfg.band_gains[b] * ms_field.v[i];
            ideal.bands[b].v[i] = cfg.band_gains[b] * pan_field.v[i];
        }

    SynthScene out;
    out.pair.p0 = std::move(pan_field);
    out.pair.m1 = degrade(ms0, cfg.scale);
    out.pair.scale = cfg.scale;
    out.truth.shift_x = cfg.shift_x;
    out.truth.shift_y = cfg.shift_y;
    out.truth.movers = std::move(placed);
    out.truth.ideal_g0 = std::move(ideal);
    out.pair.validate();
    return out;
}

}  // namespace s3ps
