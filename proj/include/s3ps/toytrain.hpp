#pragma once

// A small differentiable pan-sharpener: bicubic MS upsample plus a learned
// detail path (per-band gain on the PAN high-pass and a 3-layer 3x3 conv
// stack with tanh), trained with AdamW under either the plain spectral L2
// objective or the S3 loss. The detail path is zero-initialized so the
// untrained model reproduces the bicubic upsample exactly.

#include "s3ps/io.hpp"
#include "s3ps/metrics.hpp"
#include "s3ps/s3loss.hpp"
#include "s3ps/scalepipe.hpp"

namespace s3ps {

struct ConvLayer {
    int in_ch = 0, out_ch = 0;
    std::vector<double> w;  // [out][in][ky][kx], 3x3 taps
    std::vector<double> b;  // [out]

    void resize(int in, int out) {
        in_ch = in;
        out_ch = out;
        w.assign(size_t(out) * in * 9, 0.0);
        b.assign(size_t(out), 0.0);
    }
    size_t widx(int oc, int ic, int ky, int kx) const {
        return ((size_t(oc) * in_ch + ic) * 3 + ky) * 3 + kx;
    }
};

struct ToyModelParams {
    int bands = 3;
    int hidden = 8;
    int scale = 4;
    int hp_window = 5;  // box window for the PAN high-pass
    std::vector<double> alpha;  // per-band gain on the PAN high-pass
    ConvLayer conv1, conv2, conv3;

    size_t param_count() const {
        return alpha.size() + conv1.w.size() + conv1.b.size() + conv2.w.size() +
               conv2.b.size() + conv3.w.size() + conv3.b.size();
    }
};

// Zero detail path; conv1/conv2 get small seeded uniform weights.
inline ToyModelParams init_toy_model(int bands, int scale, uint64_t seed, int hidden = 8,
                                     int hp_window = 5) {
    if (bands < 1) fail("toy model needs at least one band");
    if (hidden < 1) fail("toy model needs at least one hidden channel");
    if (hp_window < 1 || hp_window % 2 == 0)
        fail(strfmt("high-pass window must be odd, got %d", hp_window));
    ToyModelParams p;
    p.bands = bands;
    p.hidden = hidden;
    p.scale = scale;
    p.hp_window = hp_window;
    p.alpha.assign(size_t(bands), 0.0);
    p.conv1.resize(bands + 1, hidden);
    p.conv2.resize(hidden, hidden);
    p.conv3.resize(hidden, bands);
    if (p.param_count() > 5000)
        fail(strfmt("toy model has %zu parameters, budget is 5000", p.param_count()));
    detail::SceneRng rng(seed);
    auto fill_uniform = [&](ConvLayer& l) {
        const double a = std::sqrt(1.0 / (9.0 * l.in_ch));
        for (double& v : l.w) v = rng.uniform(-a, a);
        // biases stay zero
    };
    fill_uniform(p.conv1);
    fill_uniform(p.conv2);
    return p;
}

// ---------------------------------------------------------------------------
// flattening for the optimizer and the parameter file

inline std::vector<double> pack_params(const ToyModelParams& p) {
    std::vector<double> v;
    v.reserve(p.param_count());
    auto push = [&](const std::vector<double>& xs) { v.insert(v.end(), xs.begin(), xs.end()); };
    push(p.alpha);
    push(p.conv1.w);
    push(p.conv1.b);
    push(p.conv2.w);
    push(p.conv2.b);
    push(p.conv3.w);
    push(p.conv3.b);
    return v;
}

inline void unpack_params(const std::vector<double>& v, ToyModelParams& p) {
    if (v.size() != p.param_count())
        fail(strfmt("parameter vector has %zu entries, topology expects %zu", v.size(),
                    p.param_count()));
    size_t pos = 0;
    auto pull = [&](std::vector<double>& xs) {
        std::copy(v.begin() + pos, v.begin() + pos + xs.size(), xs.begin());
        pos += xs.size();
    };
    pull(p.alpha);
    pull(p.conv1.w);
    pull(p.conv1.b);
    pull(p.conv2.w);
    pull(p.conv2.b);
    pull(p.conv3.w);
    pull(p.conv3.b);
}

// ---------------------------------------------------------------------------
// conv primitives (reflect padding, so constants stay constant)

namespace detail {

inline std::vector<Plane> conv3x3(const std::vector<Plane>& in, const ConvLayer& l) {
    const int w = in[0].width, h = in[0].height;
    std::vector<Plane> out(size_t(l.out_ch), Plane(w, h));
    for (int oc = 0; oc < l.out_ch; ++oc) {
        Plane& o = out[size_t(oc)];
        for (double& v : o.v) v = l.b[size_t(oc)];
        for (int ic = 0; ic < l.in_ch; ++ic) {
            const Plane& src = in[size_t(ic)];
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    const double wv = l.w[l.widx(oc, ic, ky, kx)];
                    if (wv == 0.0) continue;
                    for (int y = 0; y < h; ++y) {
                        const int sy = reflect_index(y + ky - 1, h);
                        const double* srow = &src.v[src.idx(0, sy)];
                        double* orow = &o.v[o.idx(0, y)];
                        if (kx == 1) {
                            for (int x = 0; x < w; ++x) orow[x] += wv * srow[x];
                        } else {
                            for (int x = 0; x < w; ++x)
                                orow[x] += wv * srow[reflect_index(x + kx - 1, w)];
                        }
                    }
                }
        }
    }
    return out;
}

struct ConvGrads {
    std::vector<double> dw;
    std::vector<double> db;
    std::vector<Plane> din;
};

inline ConvGrads conv3x3_backward(const std::vector<Plane>& in, const ConvLayer& l,
                                  const std::vector<Plane>& dout, bool want_din) {
    const int w = in[0].width, h = in[0].height;
    ConvGrads g;
    g.dw.assign(l.w.size(), 0.0);
    g.db.assign(l.b.size(), 0.0);
    if (want_din) g.din.assign(size_t(l.in_ch), Plane(w, h));
    for (int oc = 0; oc < l.out_ch; ++oc) {
        const Plane& do_ = dout[size_t(oc)];
        for (double v : do_.v) g.db[size_t(oc)] += v;
        for (int ic = 0; ic < l.in_ch; ++ic) {
            const Plane& src = in[size_t(ic)];
            Plane* di = want_din ? &g.din[size_t(ic)] : nullptr;
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    const double wv = l.w[l.widx(oc, ic, ky, kx)];
                    double dw_acc = 0.0;
                    for (int y = 0; y < h; ++y) {
                        const int sy = reflect_index(y + ky - 1, h);
                        const double* srow = &src.v[src.idx(0, sy)];
                        const double* drow = &do_.v[do_.idx(0, y)];
                        if (di) {
                            double* dirow = &di->v[di->idx(0, sy)];
                            for (int x = 0; x < w; ++x) {
                                const int sx = reflect_index(x + kx - 1, w);
                                dw_acc += drow[x] * srow[sx];
                                dirow[sx] += wv * drow[x];
                            }
                        } else {
                            for (int x = 0; x < w; ++x)
                                dw_acc += drow[x] * srow[reflect_index(x + kx - 1, w)];
                        }
                    }
                    g.dw[l.widx(oc, ic, ky, kx)] += dw_acc;
                }
        }
    }
    return g;
}

}  // namespace detail

// Per-call activations and the per-scene constants they were built from.
struct ToyForward {
    Raster mup;               // bicubic upsample of the MS input
    Plane hp;                 // pan - window_mean(pan)
    std::vector<Plane> x;     // conv input channels: mup bands then pan
    std::vector<Plane> h1;    // tanh(conv1(x))
    std::vector<Plane> h2;    // tanh(conv2(h1))
    std::vector<Plane> d;     // conv3(h2)
    Raster out;
};

inline void toy_check_inputs(const ToyModelParams& p, const Raster& ms, const Plane& pan) {
    ms.check_consistent();
    if (ms.nbands() != p.bands)
        fail(strfmt("model expects %d bands, input has %d", p.bands, ms.nbands()));
    if (pan.width != ms.width() * p.scale || pan.height != ms.height() * p.scale)
        fail(strfmt("pan %dx%d does not match ms %dx%d at scale %d", pan.width, pan.height,
                    ms.width(), ms.height(), p.scale));
}

inline ToyForward toy_forward_full(const ToyModelParams& p, const Raster& ms, const Plane& pan) {
    toy_check_inputs(p, ms, pan);
    ToyForward f;
    f.mup = upsample(ms, p.scale);
    const StatConfig hpcfg{p.hp_window, 1e-10};
    f.hp = window_mean(pan, hpcfg);
    for (size_t i = 0; i < f.hp.v.size(); ++i) f.hp.v[i] = pan.v[i] - f.hp.v[i];
    f.x = f.mup.bands;
    f.x.push_back(pan);

    f.h1 = detail::conv3x3(f.x, p.conv1);
    for (Plane& pl : f.h1)
        for (double& v : pl.v) v = std::tanh(v);
    f.h2 = detail::conv3x3(f.h1, p.conv2);
    for (Plane& pl : f.h2)
        for (double& v : pl.v) v = std::tanh(v);
    f.d = detail::conv3x3(f.h2, p.conv3);

    f.out = Raster(pan.width, pan.height, p.bands, std::max(ms.level - 1, 0));
    for (int b = 0; b < p.bands; ++b)
        for (size_t i = 0; i < f.out.bands[size_t(b)].v.size(); ++i)
            f.out.bands[size_t(b)].v[i] =
                f.mup.bands[size_t(b)].v[i] + p.alpha[size_t(b)] * f.hp.v[i] + f.d[size_t(b)].v[i];
    return f;
}

// G = g(ms, pan, theta) at pan's resolution with ms's band count.
inline Raster toy_forward(const ToyModelParams& p, const Raster& ms, const Plane& pan) {
    return toy_forward_full(p, ms, pan).out;
}

// Exact gradients of the scalar loss with respect to every parameter, given
// the loss gradient with respect to the output. Returns them in a
// ToyModelParams of the same topology.
inline ToyModelParams toy_backward(const ToyModelParams& p, const Raster& ms, const Plane& pan,
                                   const LossGrad& upstream) {
    const ToyForward f = toy_forward_full(p, ms, pan);
    require_same_shape(upstream.d_g, f.out, "toy_backward upstream");

    ToyModelParams g = p;  // same topology, zeroed
    g.alpha.assign(p.alpha.size(), 0.0);
    g.conv1.resize(p.conv1.in_ch, p.conv1.out_ch);
    g.conv2.resize(p.conv2.in_ch, p.conv2.out_ch);
    g.conv3.resize(p.conv3.in_ch, p.conv3.out_ch);

    for (int b = 0; b < p.bands; ++b) {
        const Plane& db = upstream.d_g.bands[size_t(b)];
        double acc = 0.0;
        for (size_t i = 0; i < db.v.size(); ++i) acc += db.v[i] * f.hp.v[i];
        g.alpha[size_t(b)] = acc;
    }

    const auto g3 = detail::conv3x3_backward(f.h2, p.conv3, upstream.d_g.bands, true);
    g.conv3.w = g3.dw;
    g.conv3.b = g3.db;

    std::vector<Plane> dz2 = g3.din;
    for (size_t c = 0; c < dz2.size(); ++c)
        for (size_t i = 0; i < dz2[c].v.size(); ++i)
            dz2[c].v[i] *= 1.0 - f.h2[c].v[i] * f.h2[c].v[i];
    const auto g2 = detail::conv3x3_backward(f.h1, p.conv2, dz2, true);
    g.conv2.w = g2.dw;
    g.conv2.b = g2.db;

    std::vector<Plane> dz1 = g2.din;
    for (size_t c = 0; c < dz1.size(); ++c)
        for (size_t i = 0; i < dz1[c].v.size(); ++i)
            dz1[c].v[i] *= 1.0 - f.h1[c].v[i] * f.h1[c].v[i];
    const auto g1 = detail::conv3x3_backward(f.x, p.conv1, dz1, false);
    g.conv1.w = g1.dw;
    g.conv1.b = g1.db;
    return g;
}

// ---------------------------------------------------------------------------
// training

enum class LossMode { SpectralL2, S3 };

struct TrainConfig {
    LossMode loss_mode = LossMode::S3;
    int iterations = 2000;
    double lr = 1e-3;             // desk-scale default
    double weight_decay = 1e-7;
    int drop_at = 1000;           // iteration where lr and decay drop
    double drop_factor = 10.0;
    uint64_t seed = 0;
    int hidden = 8;
    int hp_window = 5;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    LossConfig loss;  // S3-mode settings

    void validate() const {
        if (iterations < 1) fail(strfmt("iterations must be >= 1, got %d", iterations));
        if (!(lr >= 0.0)) fail(strfmt("learning rate must be >= 0, got %g", lr));
        if (!(weight_decay >= 0.0)) fail("weight decay must be >= 0");
        if (!(drop_factor >= 1.0)) fail("drop factor must be >= 1");
        loss.validate();
    }
};

// One training sample: lower-scale inputs, the MS target, and (for S3 mode)
// the precomputed correlation map of (m1, p1).
struct TrainScene {
    Raster m2;
    Plane p1;
    Raster m1;
    CorrMap s;
};

struct TrainResult {
    ToyModelParams params;
    std::vector<double> curve;  // loss per iteration
};

inline double spectral_l2_loss(const Raster& g, const Raster& target) {
    require_same_shape(g, target, "spectral_l2_loss");
    double acc = 0.0;
    for (int b = 0; b < g.nbands(); ++b)
        for (size_t i = 0; i < g.bands[size_t(b)].v.size(); ++i) {
            const double d = g.bands[size_t(b)].v[i] - target.bands[size_t(b)].v[i];
            acc += d * d;
        }
    return acc;
}

inline LossGrad spectral_l2_grad(const Raster& g, const Raster& target) {
    require_same_shape(g, target, "spectral_l2_grad");
    LossGrad out;
    out.d_g = Raster(g.width(), g.height(), g.nbands(), g.level);
    for (int b = 0; b < g.nbands(); ++b)
        for (size_t i = 0; i < g.bands[size_t(b)].v.size(); ++i)
            out.d_g.bands[size_t(b)].v[i] =
                2.0 * (g.bands[size_t(b)].v[i] - target.bands[size_t(b)].v[i]);
    return out;
}

inline TrainResult train(const std::vector<TrainScene>& dataset, const TrainConfig& cfg) {
    cfg.validate();
    if (dataset.empty()) fail("train: empty dataset");
    for (const TrainScene& sc : dataset) {
        sc.m1.check_consistent();
        sc.m2.check_consistent();
        require_same_dims(sc.p1, sc.m1.bands[0], "train: p1 vs m1");
        if (cfg.loss_mode == LossMode::S3)
            require_same_dims(sc.s.s, sc.p1, "train: corr map vs p1");
    }

    const int bands = dataset[0].m1.nbands();
    const int scale = dataset[0].m1.width() / dataset[0].m2.width();
    TrainResult res;
    res.params = init_toy_model(bands, scale, cfg.seed, cfg.hidden, cfg.hp_window);

    std::vector<double> theta = pack_params(res.params);
    std::vector<double> m(theta.size(), 0.0), v(theta.size(), 0.0);
    double b1t = 1.0, b2t = 1.0;

    for (int t = 0; t < cfg.iterations; ++t) {
        const TrainScene& sc = dataset[size_t(t) % dataset.size()];
        unpack_params(theta, res.params);
        const Raster g = toy_forward(res.params, sc.m2, sc.p1);

        double loss;
        LossGrad lg;
        if (cfg.loss_mode == LossMode::SpectralL2) {
            loss = spectral_l2_loss(g, sc.m1);
            lg = spectral_l2_grad(g, sc.m1);
        } else {
            loss = s3_loss(g, sc.m1, sc.p1, sc.s, cfg.loss).l_s3;
            lg = s3_loss_grad(g, sc.m1, sc.p1, sc.s, cfg.loss);
        }
        if (!std::isfinite(loss))
            fail(strfmt("training diverged: loss %g at iteration %d", loss, t));
        res.curve.push_back(loss);

        const ToyModelParams grads = toy_backward(res.params, sc.m2, sc.p1, lg);
        const std::vector<double> gvec = pack_params(grads);

        const bool dropped = t >= cfg.drop_at;
        const double lr_t = dropped ? cfg.lr / cfg.drop_factor : cfg.lr;
        const double wd_t = dropped ? cfg.weight_decay / cfg.drop_factor : cfg.weight_decay;
        b1t *= cfg.adam_beta1;
        b2t *= cfg.adam_beta2;
        for (size_t i = 0; i < theta.size(); ++i) {
            m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * gvec[i];
            v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * gvec[i] * gvec[i];
            const double mhat = m[i] / (1.0 - b1t);
            const double vhat = v[i] / (1.0 - b2t);
            theta[i] -= lr_t * (mhat / (std::sqrt(vhat) + cfg.adam_eps) + wd_t * theta[i]);
        }
    }
    unpack_params(theta, res.params);
    return res;
}

// ---------------------------------------------------------------------------
// original-scale evaluation of two trained models on the same test set

struct CompareResult {
    MetricReport spectral;
    MetricReport s3;
};

inline CompareResult compare_modes(const std::vector<ScenePair>& testset,
                                   const ToyModelParams& theta_spectral,
                                   const ToyModelParams& theta_s3,
                                   const TranslationSearch& search = TranslationSearch::grid(6)) {
    std::vector<MetricRow> rows_a, rows_b;
    for (size_t i = 0; i < testset.size(); ++i) {
        ScenePair sp = testset[i];
        const std::string id = strfmt("scene_%03zu", i);
        sp.g0 = toy_forward(theta_spectral, sp.m1, sp.p0);
        rows_a.push_back(evaluate_scene(sp, search, SccMode::Grayed, id));
        sp.g0 = toy_forward(theta_s3, sp.m1, sp.p0);
        rows_b.push_back(evaluate_scene(sp, search, SccMode::Grayed, id));
    }
    return CompareResult{make_report(std::move(rows_a)), make_report(std::move(rows_b))};
}

// ---------------------------------------------------------------------------
// parameter file: raw float32 vector plus a text manifest

inline void save_toy_params(const ToyModelParams& p, const std::string& path) {
    const std::vector<double> v = pack_params(p);
    std::string data;
    data.reserve(v.size() * 4);
    for (double d : v) {
        const float f = float(d);
        char b[4];
        std::memcpy(b, &f, 4);
        data.append(b, 4);
    }
    atomic_write_bytes(path, data);
    std::string hdr;
    hdr += strfmt("bands=%d\n", p.bands);
    hdr += strfmt("hidden=%d\n", p.hidden);
    hdr += strfmt("scale=%d\n", p.scale);
    hdr += strfmt("hp_window=%d\n", p.hp_window);
    hdr += strfmt("count=%zu\n", v.size());
    atomic_write_bytes(path + ".hdr", hdr);
}

inline ToyModelParams load_toy_params(const std::string& path) {
    std::ifstream hf(path + ".hdr");
    if (!hf) fail(strfmt("missing parameter manifest '%s.hdr'", path.c_str()));
    std::map<std::string, long> kv;
    std::string line;
    while (std::getline(hf, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            fail(strfmt("malformed manifest line '%s'", line.c_str()));
        kv[line.substr(0, eq)] = std::atol(line.c_str() + eq + 1);
    }
    for (const char* key : {"bands", "hidden", "scale", "hp_window", "count"})
        if (!kv.count(key)) fail(strfmt("parameter manifest lacks key '%s'", key));

    ToyModelParams p;
    p.bands = int(kv["bands"]);
    p.hidden = int(kv["hidden"]);
    p.scale = int(kv["scale"]);
    p.hp_window = int(kv["hp_window"]);
    p.alpha.assign(size_t(p.bands), 0.0);
    p.conv1.resize(p.bands + 1, p.hidden);
    p.conv2.resize(p.hidden, p.hidden);
    p.conv3.resize(p.hidden, p.bands);
    if (size_t(kv["count"]) != p.param_count())
        fail(strfmt("parameter manifest count %ld does not match topology (%zu)", kv["count"],
                    p.param_count()));

    const std::string data = read_file_bytes(path);
    if (data.size() != p.param_count() * 4)
        fail(strfmt("'%s' is %zu bytes, expected %zu", path.c_str(), data.size(),
                    p.param_count() * 4));
    std::vector<double> v(p.param_count());
    const char* src = data.data();
    for (double& d : v) {
        float f;
        std::memcpy(&f, src, 4);
        src += 4;
        if (!std::isfinite(f)) fail(strfmt("non-finite parameter in '%s'", path.c_str()));
        d = double(f);
    }
    unpack_params(v, p);
    return p;
}

}  // namespace s3ps
