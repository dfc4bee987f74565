#pragma once

// Evaluation metrics: ERGAS (band-normalized RMSE aggregate), SCC (Pearson
// correlation of Laplacian high-pass images), the n-ERGAS translation-search
// variant, and the per-scene level conventions ERGAS1 / SCC1 / SCC0.

#include <string>

#include "s3ps/scalepipe.hpp"

namespace s3ps {

// ERGAS = 100 * ratio * sqrt( (1/B) * sum_b (RMSE_b / mean_b)^2 ).
// ratio is h/l, i.e. 1/scale for a scale-x fusion task. Lower is better.
inline double ergas(const Raster& test, const Raster& reference, double resolution_ratio) {
    require_same_shape(test, reference, "ergas");
    if (!(resolution_ratio > 0.0))
        fail(strfmt("ergas: resolution ratio must be positive, got %g", resolution_ratio));
    const int nb = test.nbands();
    const double npix = double(test.bands[0].v.size());
    double acc = 0.0;
    for (int b = 0; b < nb; ++b) {
        const Plane& t = test.bands[b];
        const Plane& r = reference.bands[b];
        double mean = 0.0, sq = 0.0;
        for (size_t i = 0; i < r.v.size(); ++i) {
            mean += r.v[i];
            const double d = t.v[i] - r.v[i];
            sq += d * d;
        }
        mean /= npix;
        if (std::fabs(mean) < 1e-6)
            fail(strfmt("ergas: reference band %d mean %g too close to zero", b, mean));
        const double rmse = std::sqrt(sq / npix);
        acc += (rmse / mean) * (rmse / mean);
    }
    return 100.0 * resolution_ratio * std::sqrt(acc / nb);
}

// ---------------------------------------------------------------------------
// SCC

namespace detail {

// 3x3 Laplacian (center 8, neighbors -1, divided by 8) over the interior
// where the full stencil fits.
inline Plane laplacian_highpass(const Plane& p) {
    if (p.width < 3 || p.height < 3)
        fail(strfmt("scc: plane %dx%d too small for a 3x3 high-pass", p.width, p.height));
    Plane out(p.width - 2, p.height - 2);
    for (int y = 1; y < p.height - 1; ++y)
        for (int x = 1; x < p.width - 1; ++x) {
            const double c = p.at(x, y);
            const double nsum = p.at(x - 1, y - 1) + p.at(x, y - 1) + p.at(x + 1, y - 1) +
                                p.at(x - 1, y) + p.at(x + 1, y) + p.at(x - 1, y + 1) +
                                p.at(x, y + 1) + p.at(x + 1, y + 1);
            out.at(x - 1, y - 1) = (8.0 * c - nsum) / 8.0;
        }
    return out;
}

inline double pearson(const Plane& a, const Plane& b) {
    const double n = double(a.v.size());
    double ma = 0.0, mb = 0.0;
    for (size_t i = 0; i < a.v.size(); ++i) {
        ma += a.v[i];
        mb += b.v[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (size_t i = 0; i < a.v.size(); ++i) {
        const double da = a.v[i] - ma, db = b.v[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa <= 0.0 || sbb <= 0.0) fail("scc: zero-variance high-pass plane");
    return sab / std::sqrt(saa * sbb);
}

}  // namespace detail

enum class SccMode { Grayed, BandAverage };

inline double scc(const Plane& a, const Plane& b) {
    require_same_dims(a, b, "scc");
    return detail::pearson(detail::laplacian_highpass(a), detail::laplacian_highpass(b));
}

inline double scc(const Raster& a, const Plane& b, SccMode mode = SccMode::Grayed) {
    if (mode == SccMode::Grayed) return scc(gray(a), b);
    double acc = 0.0;
    for (const Plane& band : a.bands) acc += scc(band, b);
    return acc / a.nbands();
}

inline double scc(const Raster& a, const Raster& b, SccMode mode = SccMode::Grayed) {
    if (mode == SccMode::Grayed) return scc(gray(a), gray(b));
    if (a.nbands() != b.nbands())
        fail(strfmt("scc: band count mismatch %d vs %d", a.nbands(), b.nbands()));
    double acc = 0.0;
    for (int i = 0; i < a.nbands(); ++i) acc += scc(a.bands[i], b.bands[i]);
    return acc / a.nbands();
}

// ---------------------------------------------------------------------------
// n-ERGAS translation search

struct TranslationSearch {
    int max_shift = 6;
    std::vector<std::pair<int, int>> offsets;  // (dx, dy), must contain (0,0)

    // Full integer grid dx, dy in [-max_shift, +max_shift].
    static TranslationSearch grid(int max_shift = 6) {
        if (max_shift < 0) fail(strfmt("translation search: negative max shift %d", max_shift));
        TranslationSearch s;
        s.max_shift = max_shift;
        for (int dx = -max_shift; dx <= max_shift; ++dx)
            for (int dy = -max_shift; dy <= max_shift; ++dy) s.offsets.emplace_back(dx, dy);
        return s;
    }

    void validate() const {
        bool has_zero = false;
        for (auto [dx, dy] : offsets) {
            if (std::abs(dx) > max_shift || std::abs(dy) > max_shift)
                fail(strfmt("translation search: offset (%d,%d) exceeds max shift %d", dx, dy,
                            max_shift));
            has_zero = has_zero || (dx == 0 && dy == 0);
        }
        if (!has_zero) fail("translation search must include the zero offset");
    }
};

struct NErgasResult {
    double value = 0.0;
    int dx = 0;
    int dy = 0;
    double at_zero = 0.0;  // the zero-offset candidate on the same support
};

// For each candidate offset, the once-blurred ps0 is decimated on the grid
// shifted by (dx,dy) and scored with ERGAS against ms1 on a fixed central
// crop (margin ceil(max_shift/scale) level-1 pixels, identical support for
// every candidate). The zero-offset candidate is exactly degrade(ps0).
// Returns the smallest score; ties go to the lexicographically smallest
// (dx, dy).
inline NErgasResult n_ergas(const Raster& ps0, const Raster& ms1, int scale,
                            const TranslationSearch& search) {
    search.validate();
    ps0.check_consistent();
    ms1.check_consistent();
    if (scale < 2) fail(strfmt("n_ergas: scale must be >= 2, got %d", scale));
    if (ps0.nbands() != ms1.nbands())
        fail(strfmt("n_ergas: band count mismatch %d vs %d", ps0.nbands(), ms1.nbands()));
    if (ps0.width() != ms1.width() * scale || ps0.height() != ms1.height() * scale)
        fail(strfmt("n_ergas: ps0 %dx%d does not match ms1 %dx%d at scale %d", ps0.width(),
                    ps0.height(), ms1.width(), ms1.height(), scale));

    const int margin1 = (search.max_shift + scale - 1) / scale;
    const int cw = ms1.width() - 2 * margin1;
    const int ch = ms1.height() - 2 * margin1;
    if (cw < 1 || ch < 1)
        fail(strfmt("n_ergas: %dx%d at level 1 too small for a %d-pixel margin crop",
                    ms1.width(), ms1.height(), margin1));

    const int nb = ps0.nbands();
    std::vector<Plane> blurred;
    blurred.reserve(size_t(nb));
    const auto kernel = detail::gaussian_kernel(double(scale) / 2.0);
    for (const Plane& band : ps0.bands)
        blurred.push_back(detail::convolve_separable_reflect(band, kernel));

    Raster ref(cw, ch, nb, 1);
    for (int b = 0; b < nb; ++b)
        for (int y = 0; y < ch; ++y)
            for (int x = 0; x < cw; ++x)
                ref.bands[b].at(x, y) = ms1.bands[b].at(x + margin1, y + margin1);

    std::vector<std::pair<int, int>> order = search.offsets;
    std::sort(order.begin(), order.end());

    NErgasResult best;
    bool first = true;
    Raster cand(cw, ch, nb, 1);
    for (auto [dx, dy] : order) {
        for (int b = 0; b < nb; ++b)
            for (int y = 0; y < ch; ++y)
                for (int x = 0; x < cw; ++x)
                    cand.bands[b].at(x, y) =
                        blurred[size_t(b)].at((x + margin1) * scale - dx,
                                              (y + margin1) * scale - dy);
        const double score = ergas(cand, ref, 1.0 / scale);
        if (dx == 0 && dy == 0) best.at_zero = score;
        if (first || score < best.value) {
            const double keep = best.at_zero;
            best = {score, dx, dy, keep};
            first = false;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Per-scene evaluation (ERGAS1, SCC1, SCC0, n-ERGAS1) and aggregation.

struct MetricRow {
    std::string id;
    double ergas1 = 0.0;
    double scc1 = 0.0;
    double scc0 = 0.0;
    double n_ergas1 = 0.0;
    int best_dx = 0;
    int best_dy = 0;
};

struct Aggregate {
    double mean = 0.0;
    double se = 0.0;  // standard error of the mean
};

struct MetricReport {
    std::vector<MetricRow> rows;
    Aggregate ergas1, scc1, scc0, n_ergas1;
};

inline Aggregate aggregate(const std::vector<double>& xs) {
    Aggregate a;
    if (xs.empty()) return a;
    for (double x : xs) a.mean += x;
    a.mean /= double(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - a.mean) * (x - a.mean);
        a.se = std::sqrt(ss / double(xs.size() - 1)) / std::sqrt(double(xs.size()));
    }
    return a;
}

inline MetricReport make_report(std::vector<MetricRow> rows) {
    MetricReport rep;
    rep.rows = std::move(rows);
    std::vector<double> e1, s1, s0, n1;
    for (const MetricRow& r : rep.rows) {
        e1.push_back(r.ergas1);
        s1.push_back(r.scc1);
        s0.push_back(r.scc0);
        n1.push_back(r.n_ergas1);
    }
    rep.ergas1 = aggregate(e1);
    rep.scc1 = aggregate(s1);
    rep.scc0 = aggregate(s0);
    rep.n_ergas1 = aggregate(n1);
    return rep;
}

// The four Table-layout metrics for one scene with a level-0 result g0:
//   SCC0 between g0 and the PAN input, ERGAS1 between degraded g0 and the
//   MS input, SCC1 between degraded g0 and the degraded PAN, n-ERGAS1 from
//   the translation search of g0 against the MS input. ERGAS1 is the
//   zero-offset score of the search, so it shares the n-ERGAS crop and
//   n_ergas1 <= ergas1 holds by construction.
inline MetricRow evaluate_scene(const ScenePair& sp, const TranslationSearch& search,
                                SccMode scc_mode = SccMode::Grayed, std::string id = {}) {
    sp.validate();
    if (!sp.g0) fail("evaluate_scene: scene has no g0 result");
    MetricRow row;
    row.id = std::move(id);
    row.scc0 = scc(*sp.g0, sp.p0, scc_mode);
    const Raster dg0 = degrade(*sp.g0, sp.scale);
    const Plane p1 = sp.p1 ? *sp.p1 : degrade(sp.p0, sp.scale);
    row.scc1 = scc(dg0, p1, scc_mode);
    const NErgasResult ne = n_ergas(*sp.g0, sp.m1, sp.scale, search);
    row.ergas1 = ne.at_zero;
    row.n_ergas1 = ne.value;
    row.best_dx = ne.dx;
    row.best_dy = ne.dy;
    return row;
}

inline MetricRow evaluate_scene(const ScenePair& sp) {
    return evaluate_scene(sp, TranslationSearch::grid(6));
}

}  // namespace s3ps
