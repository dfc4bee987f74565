#pragma once

// Raster file formats and small output helpers.
//
//  raw  band-planar little-endian float32 samples in <path>, plus a text
//       sidecar <path>.hdr with key=value lines:
//           width=..  height=..  bands=..  level=..  bit_depth=..
//       (bit_depth 0 marks unquantized / already normalized data)
//  pgm  binary P5, single band, maxval 255 or 65535 (16-bit is big-endian)
//  pam  binary P7, any band count, 16-bit big-endian, pixel-interleaved
//
// All writers go through an atomic temp-file + rename.

#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "s3ps/raster.hpp"

namespace s3ps {

enum class RasterFormat { Raw, Pnm, Pam };

inline RasterFormat format_from_path(const std::string& path) {
    auto ext = std::filesystem::path(path).extension().string();
    for (auto& c : ext) c = char(std::tolower(static_cast<unsigned char>(c)));
    if (ext == ".raw") return RasterFormat::Raw;
    if (ext == ".pgm" || ext == ".pnm" || ext == ".ppm") return RasterFormat::Pnm;
    if (ext == ".pam") return RasterFormat::Pam;
    fail(strfmt("unknown raster format for '%s' (expected .raw, .pgm or .pam)", path.c_str()));
}

// A loaded raster plus the quantization depth its file declared.
struct RasterFile {
    Raster raster;
    int bit_depth = 0;
};

inline void atomic_write_bytes(const std::string& path, const std::string& bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) fail(strfmt("cannot open '%s' for writing", tmp.c_str()));
        f.write(bytes.data(), std::streamsize(bytes.size()));
        if (!f) fail(strfmt("short write to '%s'", tmp.c_str()));
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) fail(strfmt("rename '%s' -> '%s' failed: %s", tmp.c_str(), path.c_str(),
                        ec.message().c_str()));
}

inline std::string read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(strfmt("cannot open '%s'", path.c_str()));
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// raw float32 + sidecar header

inline std::string raw_header_path(const std::string& data_path) { return data_path + ".hdr"; }

inline void save_raster_raw(const Raster& r, const std::string& path, int bit_depth = 0) {
    r.check_consistent();
    std::string hdr;
    hdr += strfmt("width=%d\n", r.width());
    hdr += strfmt("height=%d\n", r.height());
    hdr += strfmt("bands=%d\n", r.nbands());
    hdr += strfmt("level=%d\n", r.level);
    hdr += strfmt("bit_depth=%d\n", bit_depth);

    std::string data;
    data.reserve(size_t(r.width()) * r.height() * r.nbands() * 4);
    for (const Plane& p : r.bands)
        for (double d : p.v) {
            const float f = float(d);
            char b[4];
            std::memcpy(b, &f, 4);
            data.append(b, 4);
        }
    atomic_write_bytes(path, data);
    atomic_write_bytes(raw_header_path(path), hdr);
}

inline RasterFile load_raster_raw(const std::string& path) {
    const std::string hdr_path = raw_header_path(path);
    std::ifstream hf(hdr_path);
    if (!hf) fail(strfmt("missing raw header '%s'", hdr_path.c_str()));
    std::map<std::string, long> kv;
    std::string line;
    while (std::getline(hf, line)) {
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            fail(strfmt("malformed header line '%s' in '%s'", line.c_str(), hdr_path.c_str()));
        const std::string key = line.substr(0, eq);
        char* end = nullptr;
        const long val = std::strtol(line.c_str() + eq + 1, &end, 10);
        if (end == line.c_str() + eq + 1)
            fail(strfmt("malformed header value in '%s': '%s'", hdr_path.c_str(), line.c_str()));
        kv[key] = val;
    }
    for (const char* key : {"width", "height", "bands", "level", "bit_depth"})
        if (!kv.count(key)) fail(strfmt("header '%s' lacks key '%s'", hdr_path.c_str(), key));
    const long w = kv["width"], h = kv["height"], nb = kv["bands"];
    if (w <= 0 || h <= 0 || nb <= 0)
        fail(strfmt("header '%s' has invalid dimensions %ldx%ldx%ld", hdr_path.c_str(), w, h, nb));

    const std::string data = read_file_bytes(path);
    const size_t expect = size_t(w) * h * nb * 4;
    if (data.size() != expect)
        fail(strfmt("'%s' is %zu bytes, expected %zu from its header", path.c_str(), data.size(),
                    expect));
    RasterFile out;
    out.bit_depth = int(kv["bit_depth"]);
    out.raster = Raster(int(w), int(h), int(nb), int(kv["level"]));
    const char* src = data.data();
    for (Plane& p : out.raster.bands)
        for (double& d : p.v) {
            float f;
            std::memcpy(&f, src, 4);
            src += 4;
            if (!std::isfinite(f)) fail(strfmt("non-finite sample in '%s'", path.c_str()));
            d = double(f);
        }
    return out;
}

// ---------------------------------------------------------------------------
// Netpbm (P5 grayscale, P7 arbitrary-depth)

namespace detail {

inline int pnm_maxval(int bit_depth) {
    if (bit_depth < 1 || bit_depth > 16) fail(strfmt("bad bit depth %d for pnm", bit_depth));
    return int((1u << bit_depth) - 1u);
}

inline void append_sample(std::string& out, double v, int maxval, const char* path) {
    const double r = std::floor(v + 0.5);
    if (!(r >= 0.0 && r <= double(maxval)))
        fail(strfmt("sample %g out of [0,%d] while writing '%s'", v, maxval, path));
    const unsigned u = unsigned(r);
    if (maxval > 255) out.push_back(char((u >> 8) & 0xff));
    out.push_back(char(u & 0xff));
}

struct PnmParser {
    const std::string& bytes;
    size_t pos = 0;
    const std::string& path;

    int next_int() {
        // skip whitespace and '#' comments
        while (pos < bytes.size()) {
            const char c = bytes[pos];
            if (c == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos;
            } else {
                break;
            }
        }
        size_t start = pos;
        while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
        if (pos == start) fail(strfmt("malformed pnm header in '%s'", path.c_str()));
        return std::atoi(bytes.substr(start, pos - start).c_str());
    }
};

}  // namespace detail

inline void save_plane_pgm(const Plane& p, const std::string& path, int bit_depth = 16) {
    const int maxval = detail::pnm_maxval(bit_depth);
    std::string out = strfmt("P5\n%d %d\n%d\n", p.width, p.height, maxval);
    out.reserve(out.size() + p.v.size() * (maxval > 255 ? 2 : 1));
    for (double v : p.v) detail::append_sample(out, v, maxval, path.c_str());
    atomic_write_bytes(path, out);
}

inline void save_raster_pam(const Raster& r, const std::string& path, int bit_depth = 16) {
    r.check_consistent();
    const int maxval = detail::pnm_maxval(bit_depth);
    std::string out = strfmt("P7\nWIDTH %d\nHEIGHT %d\nDEPTH %d\nMAXVAL %d\nTUPLTYPE %s\nENDHDR\n",
                             r.width(), r.height(), r.nbands(), maxval,
                             r.nbands() == 1 ? "GRAYSCALE" : "MULTIBAND");
    for (int y = 0; y < r.height(); ++y)
        for (int x = 0; x < r.width(); ++x)
            for (int b = 0; b < r.nbands(); ++b)
                detail::append_sample(out, r.bands[b].at(x, y), maxval, path.c_str());
    atomic_write_bytes(path, out);
}

inline int depth_for_maxval(int maxval, const char* path) {
    for (int d : {8, 11, 14, 16})
        if (maxval == detail::pnm_maxval(d)) return d;
    fail(strfmt("'%s': maxval %d is not an 8/11/14/16-bit range", path, maxval));
}

inline RasterFile load_raster_pnm(const std::string& path) {
    const std::string bytes = read_file_bytes(path);
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
        fail(strfmt("'%s' is not a binary P5 pgm", path.c_str()));
    detail::PnmParser ps{bytes, 2, path};
    const int w = ps.next_int(), h = ps.next_int(), maxval = ps.next_int();
    if (w <= 0 || h <= 0) fail(strfmt("'%s': invalid pgm dimensions", path.c_str()));
    ++ps.pos;  // single whitespace after maxval
    const int bpp = maxval > 255 ? 2 : 1;
    if (bytes.size() - ps.pos < size_t(w) * h * bpp)
        fail(strfmt("'%s' truncated: %zu data bytes, expected %zu", path.c_str(),
                    bytes.size() - ps.pos, size_t(w) * h * bpp));
    RasterFile out;
    out.bit_depth = depth_for_maxval(maxval, path.c_str());
    out.raster = Raster(w, h, 1, 0);
    const unsigned char* src = reinterpret_cast<const unsigned char*>(bytes.data() + ps.pos);
    for (double& d : out.raster.bands[0].v) {
        unsigned u = *src++;
        if (bpp == 2) u = (u << 8) | *src++;
        if (u > unsigned(maxval))
            fail(strfmt("'%s': sample %u exceeds the declared maxval %d", path.c_str(), u,
                        maxval));
        d = double(u);
    }
    return out;
}

inline RasterFile load_raster_pam(const std::string& path) {
    const std::string bytes = read_file_bytes(path);
    if (bytes.compare(0, 3, "P7\n") != 0) fail(strfmt("'%s' is not a P7 pam", path.c_str()));
    size_t pos = 3;
    int w = -1, h = -1, depth = -1, maxval = -1;
    while (true) {
        const size_t eol = bytes.find('\n', pos);
        if (eol == std::string::npos) fail(strfmt("'%s': unterminated pam header", path.c_str()));
        const std::string line = bytes.substr(pos, eol - pos);
        pos = eol + 1;
        if (line == "ENDHDR") break;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "WIDTH") ls >> w;
        else if (key == "HEIGHT") ls >> h;
        else if (key == "DEPTH") ls >> depth;
        else if (key == "MAXVAL") ls >> maxval;
        else if (key == "TUPLTYPE" || key.empty() || key[0] == '#') continue;
        else fail(strfmt("'%s': unknown pam header key '%s'", path.c_str(), key.c_str()));
    }
    if (w <= 0 || h <= 0 || depth <= 0 || maxval <= 0)
        fail(strfmt("'%s': incomplete pam header", path.c_str()));
    const int bpp = maxval > 255 ? 2 : 1;
    if (bytes.size() - pos < size_t(w) * h * depth * bpp)
        fail(strfmt("'%s' truncated: %zu data bytes, expected %zu", path.c_str(),
                    bytes.size() - pos, size_t(w) * h * depth * bpp));
    RasterFile out;
    out.bit_depth = depth_for_maxval(maxval, path.c_str());
    out.raster = Raster(w, h, depth, 0);
    const unsigned char* src = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int b = 0; b < depth; ++b) {
                unsigned u = *src++;
                if (bpp == 2) u = (u << 8) | *src++;
                if (u > unsigned(maxval))
                    fail(strfmt("'%s': band %d sample %u exceeds the declared maxval %d",
                                path.c_str(), b, u, maxval));
                out.raster.bands[b].at(x, y) = double(u);
            }
    return out;
}

// ---------------------------------------------------------------------------
// dispatch by format

inline RasterFile load_raster(const std::string& path, RasterFormat fmt) {
    switch (fmt) {
        case RasterFormat::Raw: return load_raster_raw(path);
        case RasterFormat::Pnm: return load_raster_pnm(path);
        case RasterFormat::Pam: return load_raster_pam(path);
    }
    fail("unreachable raster format");
}

inline RasterFile load_raster(const std::string& path) {
    return load_raster(path, format_from_path(path));
}

inline void save_raster(const Raster& r, const std::string& path, RasterFormat fmt,
                        int bit_depth = 0) {
    switch (fmt) {
        case RasterFormat::Raw: save_raster_raw(r, path, bit_depth); return;
        case RasterFormat::Pnm:
            if (r.nbands() != 1) fail("pgm output supports a single band; use pam");
            save_plane_pgm(r.bands[0], path, bit_depth ? bit_depth : 16);
            return;
        case RasterFormat::Pam: save_raster_pam(r, path, bit_depth ? bit_depth : 16); return;
    }
}

inline void save_raster(const Raster& r, const std::string& path, int bit_depth = 0) {
    save_raster(r, path, format_from_path(path), bit_depth);
}

inline void save_plane_raw(const Plane& p, const std::string& path, int level = 0) {
    save_raster_raw(Raster(p, level), path, 0);
}

inline Plane load_plane(const std::string& path) {
    RasterFile rf = load_raster(path);
    if (rf.raster.nbands() != 1)
        fail(strfmt("'%s' has %d bands, expected a single plane", path.c_str(),
                    rf.raster.nbands()));
    return rf.raster.bands[0];
}

// Rescale [0,1] data to an 8-bit grayscale heatmap (clamping outliers).
inline void save_heatmap_pgm(const Plane& p, const std::string& path) {
    Plane scaled(p.width, p.height);
    for (size_t i = 0; i < p.v.size(); ++i)
        scaled.v[i] = std::clamp(p.v[i], 0.0, 1.0) * 255.0;
    save_plane_pgm(scaled, path, 8);
}

// ---------------------------------------------------------------------------
// CSV

inline std::string csv_num(double v) { return strfmt("%.9g", v); }

inline std::string csv_row(const std::vector<std::string>& cells) {
    std::string out;
    for (size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
    }
    out += '\n';
    return out;
}

}  // namespace s3ps
