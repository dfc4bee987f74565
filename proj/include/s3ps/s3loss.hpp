#pragma once

// The S3 loss: a correlation-weighted spectral L1 term, a spatial term on
// windowed-normalized gradient maps weighted by (2 - S), their weighted sum,
// and the exact analytic gradient with respect to the sharpened output.
//
// S is a constant input here; no gradient flows into it. Losses are plain
// sums over bands and pixels with a fixed band-major, row-major accumulation
// order. Subgradients use sign(0) = 0.

#include <optional>

#include "s3ps/corrmap.hpp"
#include "s3ps/raster.hpp"

namespace s3ps {

struct LossConfig {
    double w_a = 1.0;        // weight of the spatial term
    CorrParams corr;         // how S is computed when a caller asks us to
    bool use_corr_map = true;  // ablation switch: false substitutes S = 1
    StatConfig stat;         // window/e for the grad-map statistics

    void validate() const {
        if (!(w_a >= 0.0)) fail(strfmt("w_a must be >= 0, got %g", w_a));
        corr.validate();
        stat.validate();
    }
};

struct LossBreakdown {
    double l_c = 0.0;
    double l_a = 0.0;
    double l_s3 = 0.0;
    std::optional<Plane> contrib_c;  // per-pixel spectral contributions (summed over bands)
    std::optional<Plane> contrib_a;  // per-pixel spatial contributions
};

// Gradient of l_s3 with respect to every sample of g.
struct LossGrad {
    Raster d_g;
};

namespace detail {

inline const Plane& effective_s(const Plane& s, const LossConfig& cfg, Plane& ones_storage,
                                int width, int height) {
    if (cfg.use_corr_map) return s;
    ones_storage = Plane(width, height, 1.0);
    return ones_storage;
}

}  // namespace detail

// L_c: sum over bands and pixels of |g - m| * S, S broadcast across bands.
inline double spectral_loss(const Raster& g, const Raster& m_target, const CorrMap& s,
                            const LossConfig& cfg, Plane* contrib = nullptr) {
    cfg.validate();
    require_same_shape(g, m_target, "spectral_loss");
    require_same_dims(s.s, g.bands[0], "spectral_loss: corr map");
    Plane ones;
    const Plane& sw = detail::effective_s(s.s, cfg, ones, g.width(), g.height());
    if (contrib) *contrib = Plane(g.width(), g.height(), 0.0);
    double acc = 0.0;
    for (int b = 0; b < g.nbands(); ++b) {
        const Plane& gb = g.bands[b];
        const Plane& mb = m_target.bands[b];
        for (size_t i = 0; i < gb.v.size(); ++i) {
            const double term = std::fabs(gb.v[i] - mb.v[i]) * sw.v[i];
            acc += term;
            if (contrib) contrib->v[i] += term;
        }
    }
    return acc;
}

// grad(X) = (X - m(X)) / std(X), windowed and stabilized.
inline Plane grad_map(const Plane& x, const StatConfig& cfg) {
    const Plane mu = window_mean(x, cfg);
    const Plane sd = window_std(x, cfg);
    Plane out(x.width, x.height);
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = (x.v[i] - mu.v[i]) / sd.v[i];
    return out;
}

// Adjoint of grad_map: given dL/dgrad, return dL/dx. Chains through the
// shrinking-window box mean (count-weighted transpose), the |cov| inside the
// std (sign rule), and the quotient.
inline Plane grad_map_adjoint(const Plane& x, const Plane& upstream, const StatConfig& cfg) {
    require_same_dims(x, upstream, "grad_map_adjoint");
    const Plane mu = window_mean(x, cfg);
    const Plane cov = window_cov(x, x, cfg);
    const size_t count = x.v.size();

    Plane dn(x.width, x.height);   // dL/d(x - mu)
    Plane dc(x.width, x.height);   // dL/dcov
    Plane dmu(x.width, x.height);  // dL/dmu
    for (size_t i = 0; i < count; ++i) {
        const double d = std::sqrt(std::fabs(cov.v[i]) + cfg.e);
        const double n = x.v[i] - mu.v[i];
        dn.v[i] = upstream.v[i] / d;
        dc.v[i] = -upstream.v[i] * n * sgn(cov.v[i]) / (2.0 * d * d * d);
        dmu.v[i] = -dn.v[i] - 2.0 * mu.v[i] * dc.v[i];
    }
    Plane out = window_mean_adjoint(dmu, cfg);
    const Plane wdc = window_mean_adjoint(dc, cfg);
    for (size_t i = 0; i < count; ++i) out.v[i] += dn.v[i] + 2.0 * x.v[i] * wdc.v[i];
    return out;
}

// L_a: sum of |grad(gray(g)) - grad(pan)| * (2 - S).
inline double spatial_loss(const Raster& g, const Plane& pan, const CorrMap& s,
                           const LossConfig& cfg, Plane* contrib = nullptr) {
    cfg.validate();
    g.check_consistent();
    require_same_dims(g.bands[0], pan, "spatial_loss");
    require_same_dims(s.s, pan, "spatial_loss: corr map");
    Plane ones;
    const Plane& sw = detail::effective_s(s.s, cfg, ones, pan.width, pan.height);
    const Plane gg = grad_map(gray(g), cfg.stat);
    const Plane gp = grad_map(pan, cfg.stat);
    if (contrib) *contrib = Plane(pan.width, pan.height, 0.0);
    double acc = 0.0;
    for (size_t i = 0; i < gg.v.size(); ++i) {
        const double term = std::fabs(gg.v[i] - gp.v[i]) * (2.0 - sw.v[i]);
        acc += term;
        if (contrib) contrib->v[i] = term;
    }
    return acc;
}

// L_S3 = L_c + w_a * L_a, with the additive identity holding exactly.
inline LossBreakdown s3_loss(const Raster& g, const Raster& m_target, const Plane& pan,
                             const CorrMap& s, const LossConfig& cfg,
                             bool want_contributions = false) {
    LossBreakdown out;
    Plane cc, ca;
    out.l_c = spectral_loss(g, m_target, s, cfg, want_contributions ? &cc : nullptr);
    out.l_a = spatial_loss(g, pan, s, cfg, want_contributions ? &ca : nullptr);
    out.l_s3 = out.l_c + cfg.w_a * out.l_a;
    if (want_contributions) {
        out.contrib_c = std::move(cc);
        out.contrib_a = std::move(ca);
    }
    return out;
}

// Exact gradient of l_s3 with respect to g. The spectral term differentiates
// to sign(g - m) * S per band; the spatial term chains sign(r) * (2 - S)
// through the grad-map adjoint and the (linear) graying.
inline LossGrad s3_loss_grad(const Raster& g, const Raster& m_target, const Plane& pan,
                             const CorrMap& s, const LossConfig& cfg) {
    cfg.validate();
    require_same_shape(g, m_target, "s3_loss_grad");
    require_same_dims(g.bands[0], pan, "s3_loss_grad");
    require_same_dims(s.s, pan, "s3_loss_grad: corr map");
    Plane ones;
    const Plane& sw = detail::effective_s(s.s, cfg, ones, pan.width, pan.height);
    const int nb = g.nbands();

    LossGrad out;
    out.d_g = Raster(g.width(), g.height(), nb, g.level);
    for (int b = 0; b < nb; ++b) {
        const Plane& gb = g.bands[b];
        const Plane& mb = m_target.bands[b];
        Plane& db = out.d_g.bands[b];
        for (size_t i = 0; i < gb.v.size(); ++i) db.v[i] = sgn(gb.v[i] - mb.v[i]) * sw.v[i];
    }

    if (cfg.w_a != 0.0) {
        const Plane ghat = gray(g);
        const Plane gg = grad_map(ghat, cfg.stat);
        const Plane gp = grad_map(pan, cfg.stat);
        Plane up(pan.width, pan.height);
        for (size_t i = 0; i < up.v.size(); ++i)
            up.v[i] = sgn(gg.v[i] - gp.v[i]) * (2.0 - sw.v[i]);
        const Plane dghat = grad_map_adjoint(ghat, up, cfg.stat);
        const double scale = cfg.w_a / double(nb);
        for (int b = 0; b < nb; ++b) {
            Plane& db = out.d_g.bands[b];
            for (size_t i = 0; i < db.v.size(); ++i) db.v[i] += scale * dghat.v[i];
        }
    }
    return out;
}

}  // namespace s3ps
