#pragma once

// Planar multi-band raster container and the windowed statistics
// (box mean, covariance, std) that everything else is built on.

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace s3ps {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// printf-style message builder for error paths.
inline std::string strfmt(const char* fmt, ...) {
    va_list ap;
    va_start(ap, fmt);
    char buf[512];
    std::vsnprintf(buf, sizeof(buf), fmt, ap);
    va_end(ap);
    return std::string(buf);
}

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

// Subgradient convention used throughout: sign(0) = 0.
inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Mirror an index into [0, n): ... 2 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
inline int reflect_index(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - i - 1;
    }
    return i;
}

// Single-band image plane, row-major doubles.
struct Plane {
    int width = 0;
    int height = 0;
    std::vector<double> v;

    Plane() = default;
    Plane(int w, int h, double fill = 0.0) : width(w), height(h), v(size_t(w) * h, fill) {
        if (w <= 0 || h <= 0) fail(strfmt("plane dimensions must be positive, got %dx%d", w, h));
    }

    size_t idx(int x, int y) const { return size_t(y) * width + x; }
    double at(int x, int y) const { return v[idx(x, y)]; }
    double& at(int x, int y) { return v[idx(x, y)]; }
    size_t size() const { return v.size(); }
    bool same_dims(const Plane& o) const { return width == o.width && height == o.height; }
};

inline void require_same_dims(const Plane& a, const Plane& b, const char* what) {
    if (!a.same_dims(b))
        fail(strfmt("%s: dimension mismatch %dx%d vs %dx%d", what, a.width, a.height, b.width,
                    b.height));
}

// Multi-band raster: per-band planes sharing one grid, plus a resolution
// level tag (0 = PAN grid, 1 = MS grid, 2 = doubly reduced).
struct Raster {
    std::vector<Plane> bands;
    int level = 0;

    Raster() = default;
    Raster(int w, int h, int nbands, int lvl = 0, double fill = 0.0) : level(lvl) {
        if (nbands < 1) fail(strfmt("raster needs at least one band, got %d", nbands));
        bands.assign(size_t(nbands), Plane(w, h, fill));
    }
    explicit Raster(Plane p, int lvl = 0) : level(lvl) { bands.push_back(std::move(p)); }

    int width() const { return bands.empty() ? 0 : bands[0].width; }
    int height() const { return bands.empty() ? 0 : bands[0].height; }
    int nbands() const { return int(bands.size()); }

    void check_consistent() const {
        if (bands.empty()) fail("raster has no bands");
        for (size_t b = 1; b < bands.size(); ++b)
            if (!bands[b].same_dims(bands[0]))
                fail(strfmt("band %zu is %dx%d but band 0 is %dx%d", b, bands[b].width,
                            bands[b].height, bands[0].width, bands[0].height));
    }
};

inline void require_same_shape(const Raster& a, const Raster& b, const char* what) {
    if (a.nbands() != b.nbands())
        fail(strfmt("%s: band count mismatch %d vs %d", what, a.nbands(), b.nbands()));
    for (int i = 0; i < a.nbands(); ++i) require_same_dims(a.bands[i], b.bands[i], what);
}

// Box-filter configuration: odd window side length and the stabilizer e
// added under the square root of the windowed std.
struct StatConfig {
    int window = 31;
    double e = 1e-10;

    void validate() const {
        if (window < 1 || window % 2 == 0)
            fail(strfmt("stat window must be odd and >= 1, got %d", window));
        if (!(e > 0.0)) fail(strfmt("stabilizer e must be > 0, got %g", e));
    }
};

// ---------------------------------------------------------------------------
// normalize / gray

// Divide integer imagery by (2^bit_depth - 1) so samples land in [0,1].
// Samples outside the declared range are a data error, not something to clip.
inline Raster normalize(const Raster& raster, int bit_depth) {
    if (bit_depth != 8 && bit_depth != 11 && bit_depth != 14 && bit_depth != 16)
        fail(strfmt("unsupported bit depth %d (expected 8, 11, 14 or 16)", bit_depth));
    raster.check_consistent();
    const double maxval = double((1u << bit_depth) - 1u);
    Raster out = raster;
    for (int b = 0; b < out.nbands(); ++b) {
        Plane& p = out.bands[b];
        for (int y = 0; y < p.height; ++y)
            for (int x = 0; x < p.width; ++x) {
                double s = p.at(x, y);
                if (!std::isfinite(s) || s < 0.0 || s > maxval)
                    fail(strfmt("band %d pixel (%d,%d): sample %g out of range [0,%g] "
                                "for %d-bit data",
                                b, x, y, s, maxval, bit_depth));
                p.at(x, y) = s / maxval;
            }
    }
    return out;
}

// Unweighted per-pixel mean across bands. Linear, so its adjoint is a
// uniform broadcast -- the loss gradients rely on that.
inline Plane gray(const Raster& ms) {
    ms.check_consistent();
    const int w = ms.width(), h = ms.height(), nb = ms.nbands();
    Plane out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int b = 0; b < nb; ++b) acc += ms.bands[b].at(x, y);
            out.at(x, y) = acc / nb;
        }
    return out;
}

// ---------------------------------------------------------------------------
// Windowed statistics via summed-area tables.
//
// Windows shrink to their intersection with the image at borders and the
// mean divides by the actual pixel count. Accumulation is in double.

struct IntegralImage {
    int width = 0;
    int height = 0;
    std::vector<double> s;  // (width+1) x (height+1)

    explicit IntegralImage(const Plane& p) : width(p.width), height(p.height) {
        s.assign(size_t(width + 1) * (height + 1), 0.0);
        for (int y = 0; y < height; ++y) {
            double row = 0.0;
            const double* src = &p.v[p.idx(0, y)];
            double* cur = &s[size_t(y + 1) * (width + 1)];
            const double* prev = &s[size_t(y) * (width + 1)];
            for (int x = 0; x < width; ++x) {
                row += src[x];
                cur[x + 1] = prev[x + 1] + row;
            }
        }
    }

    // Inclusive rectangle sum over [x0,x1] x [y0,y1], bounds already clipped.
    double rect(int x0, int y0, int x1, int y1) const {
        const size_t r0 = size_t(y0) * (width + 1);
        const size_t r1 = size_t(y1 + 1) * (width + 1);
        return s[r1 + x1 + 1] - s[r1 + x0] - s[r0 + x1 + 1] + s[r0 + x0];
    }
};

// Per-pixel count of in-bounds window pixels (separable product).
inline Plane window_counts(int width, int height, const StatConfig& cfg) {
    cfg.validate();
    const int r = cfg.window / 2;
    std::vector<double> cx(static_cast<size_t>(width));
    std::vector<double> cy(static_cast<size_t>(height));
    for (int x = 0; x < width; ++x)
        cx[x] = double(std::min(x + r, width - 1) - std::max(x - r, 0) + 1);
    for (int y = 0; y < height; ++y)
        cy[y] = double(std::min(y + r, height - 1) - std::max(y - r, 0) + 1);
    Plane out(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) out.at(x, y) = cx[x] * cy[y];
    return out;
}

// Unnormalized window sum (shrinking windows at borders).
inline Plane window_sum(const Plane& x, const StatConfig& cfg) {
    cfg.validate();
    if (x.size() == 0) fail("window_sum: empty plane");
    const int r = cfg.window / 2;
    IntegralImage ii(x);
    Plane out(x.width, x.height);
    for (int y = 0; y < x.height; ++y) {
        const int y0 = std::max(y - r, 0), y1 = std::min(y + r, x.height - 1);
        for (int px = 0; px < x.width; ++px) {
            const int x0 = std::max(px - r, 0), x1 = std::min(px + r, x.width - 1);
            out.at(px, y) = ii.rect(x0, y0, x1, y1);
        }
    }
    return out;
}

// m(x): box-filter mean with shrinking borders.
inline Plane window_mean(const Plane& x, const StatConfig& cfg) {
    Plane out = window_sum(x, cfg);
    const Plane cnt = window_counts(x.width, x.height, cfg);
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] /= cnt.v[i];
    return out;
}

// Adjoint of window_mean. With shrinking borders the box filter is only
// self-adjoint in the interior; the exact transpose divides by the count
// first and then box-sums.
inline Plane window_mean_adjoint(const Plane& upstream, const StatConfig& cfg) {
    const Plane cnt = window_counts(upstream.width, upstream.height, cfg);
    Plane scaled = upstream;
    for (size_t i = 0; i < scaled.v.size(); ++i) scaled.v[i] /= cnt.v[i];
    return window_sum(scaled, cfg);
}

// cov(a,b) = m(a.b) - m(a).m(b)
inline Plane window_cov(const Plane& a, const Plane& b, const StatConfig& cfg) {
    require_same_dims(a, b, "window_cov");
    Plane prod(a.width, a.height);
    for (size_t i = 0; i < prod.v.size(); ++i) prod.v[i] = a.v[i] * b.v[i];
    Plane out = window_mean(prod, cfg);
    const Plane ma = window_mean(a, cfg);
    const Plane mb = window_mean(b, cfg);
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] -= ma.v[i] * mb.v[i];
    return out;
}

// std(x) = sqrt(|cov(x,x)| + e); strictly positive everywhere.
inline Plane window_std(const Plane& x, const StatConfig& cfg) {
    Plane out = window_cov(x, x, cfg);
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = std::sqrt(std::fabs(out.v[i]) + cfg.e);
    return out;
}

}  // namespace s3ps
