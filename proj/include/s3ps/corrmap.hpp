#pragma once

// Windowed correlation between a grayed MS image and a PAN image, and the
// correlation map S = |corr|^gamma used to weight the losses. S counts
// strong negative correlation the same as strong positive correlation.

#include "s3ps/raster.hpp"

namespace s3ps {

struct CorrParams {
    double gamma = 4.0;
    StatConfig stat;

    void validate() const {
        if (!(gamma > 0.0)) fail(strfmt("gamma must be > 0, got %g", gamma));
        stat.validate();
    }
};

// Single-plane map with every sample in [0,1]. Not trainable: the losses
// treat it as a constant.
struct CorrMap {
    Plane s;
};

// Per-pixel windowed Pearson correlation, clamped to [-1,1]. The e
// stabilizer in the std can push raw values marginally past 1.
inline Plane correlation(const Plane& m_gray, const Plane& pan, const CorrParams& params) {
    params.validate();
    require_same_dims(m_gray, pan, "correlation");
    const Plane cov = window_cov(m_gray, pan, params.stat);
    const Plane sa = window_std(m_gray, params.stat);
    const Plane sb = window_std(pan, params.stat);
    Plane out(m_gray.width, m_gray.height);
    for (size_t i = 0; i < out.v.size(); ++i)
        out.v[i] = std::clamp(cov.v[i] / (sa.v[i] * sb.v[i]), -1.0, 1.0);
    return out;
}

inline CorrMap corr_map_from_gray(const Plane& m_gray, const Plane& pan,
                                  const CorrParams& params) {
    Plane c = correlation(m_gray, pan, params);
    for (double& v : c.v) v = std::pow(std::fabs(v), params.gamma);
    return CorrMap{std::move(c)};
}

// S = |corr(gray(ms), pan)|^gamma, in [0,1].
inline CorrMap corr_map(const Raster& ms, const Plane& pan, const CorrParams& params) {
    return corr_map_from_gray(gray(ms), pan, params);
}

}  // namespace s3ps
