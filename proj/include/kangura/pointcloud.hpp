#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kangura/error.hpp"
#include "kangura/matrix.hpp"
#include "kangura/rng.hpp"

namespace kangura {

// A point cloud is an N x C coordinate matrix (C = 3 spatial coordinates by
// default) with an optional class label. N >= 2 and all coordinates finite.
struct PointCloud {
    Matrix points;
    std::optional<int> label;

    PointCloud() = default;
    PointCloud(Matrix pts, std::optional<int> lbl = std::nullopt)
        : points(std::move(pts)), label(lbl) {
        if (points.rows() < 2) throw DomainError("PointCloud: needs at least 2 points");
        if (!all_finite(points)) throw DomainError("PointCloud: non-finite coordinate");
    }

    int size() const { return points.rows(); }
    int channels() const { return points.cols(); }
};

struct Dataset {
    std::vector<PointCloud> clouds;       // load order (stable)
    std::vector<std::string> class_names; // index = label

    int num_classes() const { return static_cast<int>(class_names.size()); }
    std::size_t size() const { return clouds.size(); }
};

namespace detail {

inline std::string loc(const std::string& file, int line) {
    return file + ":" + std::to_string(line) + ": ";
}

inline std::vector<std::string_view> split_fields(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

inline int parse_int(std::string_view f, const std::string& file, int line) {
    int v = 0;
    auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc{} || p != f.data() + f.size())
        throw ParseError(loc(file, line) + "expected integer, got '" + std::string(f) + "'");
    return v;
}

inline double parse_real(std::string_view f, const std::string& file, int line) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc{} || p != f.data() + f.size())
        throw ParseError(loc(file, line) + "expected real number, got '" + std::string(f) + "'");
    if (!std::isfinite(v)) throw ParseError(loc(file, line) + "non-finite coordinate");
    return v;
}

}  // namespace detail

// Parses one .pts file: header line "N C label", then N rows of C reals.
inline PointCloud read_point_cloud(const std::filesystem::path& path) {
    const std::string name = path.string();
    std::ifstream in(path);
    if (!in) throw ParseError(name + ": cannot open file");

    std::string line;
    int lineno = 0;
    auto next_line = [&](bool required) -> bool {
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!detail::split_fields(line).empty()) return true;
        }
        if (required) throw ParseError(detail::loc(name, lineno + 1) + "unexpected end of file");
        return false;
    };

    next_line(true);
    const auto header = detail::split_fields(line);
    if (header.size() != 3)
        throw ParseError(detail::loc(name, lineno) + "header must be 'N C label'");
    const int n = detail::parse_int(header[0], name, lineno);
    const int c = detail::parse_int(header[1], name, lineno);
    const int label = detail::parse_int(header[2], name, lineno);
    if (n < 2 || c < 1)
        throw ParseError(detail::loc(name, lineno) + "header requires N >= 2 and C >= 1");

    Matrix pts(n, c);
    for (int r = 0; r < n; ++r) {
        if (!next_line(false))
            throw ParseError(detail::loc(name, lineno) + "expected " + std::to_string(n) +
                             " point rows, found " + std::to_string(r));
        const auto fields = detail::split_fields(line);
        if (static_cast<int>(fields.size()) != c)
            throw ParseError(detail::loc(name, lineno) + "expected " + std::to_string(c) +
                             " coordinates, got " + std::to_string(fields.size()));
        for (int k = 0; k < c; ++k) pts(r, k) = detail::parse_real(fields[k], name, lineno);
    }
    if (next_line(false))
        throw ParseError(detail::loc(name, lineno) + "trailing data after " + std::to_string(n) +
                         " point rows");
    return PointCloud(std::move(pts), label);
}

inline void write_point_cloud(const PointCloud& cloud, const std::filesystem::path& path) {
    if (!cloud.label) throw DomainError("write_point_cloud: cloud has no label");
    std::ofstream out(path);
    if (!out) throw Error("write_point_cloud: cannot open " + path.string());
    char buf[64];
    out << cloud.size() << ' ' << cloud.channels() << ' ' << *cloud.label << '\n';
    for (int r = 0; r < cloud.size(); ++r) {
        for (int k = 0; k < cloud.channels(); ++k) {
            std::snprintf(buf, sizeof(buf), "%.15g", cloud.points(r, k));
            out << (k ? " " : "") << buf;
        }
        out << '\n';
    }
    if (!out) throw Error("write_point_cloud: write failed for " + path.string());
}

// Dataset directory layout: classes.txt (one class name per line, line index
// = label) plus *.pts files, loaded in lexicographic filename order.
inline Dataset read_dataset(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw ParseError(dir.string() + ": not a directory");

    Dataset ds;
    {
        const fs::path cpath = dir / "classes.txt";
        std::ifstream in(cpath);
        if (!in) throw ParseError(cpath.string() + ": cannot open class manifest");
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) ds.class_names.push_back(line);
        }
        if (ds.class_names.empty()) throw ParseError(cpath.string() + ": no classes listed");
    }

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".pts")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });

    for (const auto& f : files) {
        PointCloud cloud = read_point_cloud(f);
        if (!cloud.label || *cloud.label < 0 || *cloud.label >= ds.num_classes())
            throw SchemaError(f.string() + ": label " +
                              std::to_string(cloud.label.value_or(-1)) + " out of range [0, " +
                              std::to_string(ds.num_classes()) + ")");
        ds.clouds.push_back(std::move(cloud));
    }
    return ds;
}

inline void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "classes.txt");
        if (!out) throw Error("write_dataset: cannot open " + (dir / "classes.txt").string());
        for (const auto& name : ds.class_names) out << name << '\n';
    }
    char buf[64];
    for (std::size_t i = 0; i < ds.clouds.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%05zu.pts", i);
        write_point_cloud(ds.clouds[i], dir / buf);
    }
}

// Centers the cloud at the origin and scales the farthest point to norm 1.
inline PointCloud normalize_unit_sphere(const PointCloud& cloud) {
    const Matrix& p = cloud.points;
    const int n = p.rows(), c = p.cols();
    std::vector<double> centroid(c, 0.0);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < c; ++k) centroid[k] += p(i, k);
    for (double& v : centroid) v /= n;

    Matrix out(n, c);
    double max_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        double sq = 0.0;
        for (int k = 0; k < c; ++k) {
            const double v = p(i, k) - centroid[k];
            out(i, k) = v;
            sq += v * v;
        }
        max_sq = std::max(max_sq, sq);
    }
    if (max_sq <= 0.0)
        throw DomainError("normalize_unit_sphere: degenerate cloud (all points identical)");
    const double inv = 1.0 / std::sqrt(max_sq);
    out *= inv;
    return PointCloud(std::move(out), cloud.label);
}

// Draws n points: without replacement when the cloud has at least n points
// (partial Fisher-Yates), with replacement otherwise. Label preserved.
inline PointCloud sample_points(const PointCloud& cloud, int n, SeededRng& rng) {
    if (n < 2) throw DomainError("sample_points: needs n >= 2");
    const int total = cloud.size();
    std::vector<int> picks;
    picks.reserve(n);
    if (total >= n) {
        std::vector<int> idx(total);
        for (int i = 0; i < total; ++i) idx[i] = i;
        for (int i = 0; i < n; ++i) {
            const int j = i + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(total - i)));
            std::swap(idx[i], idx[j]);
            picks.push_back(idx[i]);
        }
    } else {
        for (int i = 0; i < n; ++i)
            picks.push_back(static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(total))));
    }
    Matrix out(n, cloud.channels());
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < cloud.channels(); ++k) out(i, k) = cloud.points(picks[i], k);
    return PointCloud(std::move(out), cloud.label);
}

struct AugmentConfig {
    bool rotate = false;         // uniform rotation about the vertical (z) axis
    double jitter_sigma = 0.0;   // Gaussian per-coordinate jitter, clipped to +-3 sigma
    double scale_lo = 1.0;       // isotropic scale drawn from [scale_lo, scale_hi]
    double scale_hi = 1.0;

    bool enabled() const {
        return rotate || jitter_sigma > 0.0 || scale_lo != 1.0 || scale_hi != 1.0;
    }
};

inline PointCloud augment(const PointCloud& cloud, bool rotate, double jitter_sigma,
                          double scale_lo, double scale_hi, SeededRng& rng) {
    if (jitter_sigma < 0.0) throw DomainError("augment: jitter_sigma must be >= 0");
    if (!(scale_lo > 0.0) || !(scale_lo <= scale_hi))
        throw DomainError("augment: invalid scale range");

    Matrix out = cloud.points;
    const int n = out.rows(), c = out.cols();

    if (rotate && c >= 2) {
        const double angle = rng.uniform(0.0, 6.283185307179586476925286766559);
        const double ca = std::cos(angle), sa = std::sin(angle);
        for (int i = 0; i < n; ++i) {
            const double x = out(i, 0), y = out(i, 1);
            out(i, 0) = ca * x - sa * y;
            out(i, 1) = sa * x + ca * y;
        }
    }
    if (jitter_sigma > 0.0) {
        const double clip = 3.0 * jitter_sigma;
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < c; ++k)
                out(i, k) += std::clamp(rng.normal(0.0, jitter_sigma), -clip, clip);
    }
    if (scale_lo != 1.0 || scale_hi != 1.0) {
        const double s = (scale_lo == scale_hi) ? scale_lo : rng.uniform(scale_lo, scale_hi);
        out *= s;
    }
    return PointCloud(std::move(out), cloud.label);
}

inline PointCloud augment(const PointCloud& cloud, const AugmentConfig& cfg, SeededRng& rng) {
    return augment(cloud, cfg.rotate, cfg.jitter_sigma, cfg.scale_lo, cfg.scale_hi, rng);
}

}  // namespace kangura
