#pragma once

// Plain-text formats.
//
//   matrix file:  "rows,cols" on the first line, then one comma-separated
//                 line per row, values printed with 17 significant digits.
//   labels file:  one integer per line.
//   tracks file:  "frames=F points=N", then N lines of 2F comma-separated
//                 values x1,y1,...,xF,yF.
//
// A sequence directory (the benchmark adapter layout) holds tracks.txt,
// truth.txt and optionally group.txt naming one of checker, traffic,
// articulated, synthetic.

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "datagen.hpp"
#include "errors.hpp"
#include "numerics.hpp"

namespace nls::io {

namespace fs = std::filesystem;

inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::string where(const fs::path& path, std::size_t line) {
    return path.string() + ":" + std::to_string(line) + ": ";
}

inline double parse_real(const std::string& tok, const fs::path& path, std::size_t line) {
    const std::string t = trim(tok);
    if (t.empty()) throw InputError(where(path, line) + "empty value");
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v))
        throw InputError(where(path, line) + "cannot parse '" + t + "' as a finite real");
    return v;
}

inline long parse_int(const std::string& tok, const fs::path& path, std::size_t line) {
    const std::string t = trim(tok);
    errno = 0;
    char* end = nullptr;
    const long v = std::strtol(t.c_str(), &end, 10);
    if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE)
        throw InputError(where(path, line) + "cannot parse '" + t + "' as an integer");
    return v;
}

inline std::vector<double> parse_row(const std::string& text, const fs::path& path, std::size_t line) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(parse_real(tok, path, line));
    return out;
}

inline std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    return in;
}

inline std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    return out;
}

// Next non-blank line; returns false at end of file.
inline bool next_line(std::istream& in, std::string& line, std::size_t& number) {
    while (std::getline(in, line)) {
        ++number;
        if (!trim(line).empty()) return true;
    }
    return false;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// matrices

inline void write_matrix(std::ostream& out, const Matrix& m) {
    out << m.rows() << ',' << m.cols() << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << format_real(m(i, j));
        }
        out << '\n';
    }
}

inline void save_matrix(const fs::path& path, const Matrix& m) {
    auto out = detail::open_out(path);
    write_matrix(out, m);
}

inline Matrix read_matrix(std::istream& in, const fs::path& path = "<stream>") {
    std::string line;
    std::size_t number = 0;
    if (!detail::next_line(in, line, number)) throw InputError(path.string() + ": empty matrix file");
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw InputError(detail::where(path, number) + "expected header 'rows,cols'");
    const long rows = detail::parse_int(line.substr(0, comma), path, number);
    const long cols = detail::parse_int(line.substr(comma + 1), path, number);
    if (rows < 1 || cols < 1) throw InputError(detail::where(path, number) + "matrix shape must be positive");

    Matrix m(rows, cols);
    for (long i = 0; i < rows; ++i) {
        if (!detail::next_line(in, line, number))
            throw InputError(path.string() + ": expected " + std::to_string(rows) + " rows, found " +
                             std::to_string(i));
        const auto vals = detail::parse_row(line, path, number);
        if (static_cast<long>(vals.size()) != cols)
            throw InputError(detail::where(path, number) + "expected " + std::to_string(cols) + " values, found " +
                             std::to_string(vals.size()));
        for (long j = 0; j < cols; ++j) m(i, j) = vals[static_cast<std::size_t>(j)];
    }
    if (detail::next_line(in, line, number))
        throw InputError(detail::where(path, number) + "more rows than the declared " + std::to_string(rows));
    return m;
}

inline Matrix load_matrix(const fs::path& path) {
    auto in = detail::open_in(path);
    return read_matrix(in, path);
}

// ---------------------------------------------------------------------------
// labels

inline void save_labels(const fs::path& path, const Labeling& labels) {
    auto out = detail::open_out(path);
    for (int l : labels) out << l << '\n';
}

inline Labeling load_labels(const fs::path& path) {
    auto in = detail::open_in(path);
    Labeling labels;
    std::string line;
    std::size_t number = 0;
    while (detail::next_line(in, line, number)) {
        const long v = detail::parse_int(line, path, number);
        if (v < 0 || v > std::numeric_limits<int>::max())
            throw InputError(detail::where(path, number) + "label must be a nonnegative integer");
        labels.push_back(static_cast<int>(v));
    }
    return labels;
}

// ---------------------------------------------------------------------------
// tracks

inline void write_tracks(std::ostream& out, const TrajectorySet& ts) {
    out << "frames=" << ts.frames << " points=" << ts.tracks.size() << '\n';
    for (const auto& track : ts.tracks) {
        for (std::size_t f = 0; f < track.size(); ++f) {
            if (f) out << ',';
            out << format_real(track[f].x) << ',' << format_real(track[f].y);
        }
        out << '\n';
    }
}

inline void save_tracks(const fs::path& path, const TrajectorySet& ts) {
    auto out = detail::open_out(path);
    write_tracks(out, ts);
}

inline TrajectorySet read_tracks(std::istream& in, const fs::path& path = "<stream>") {
    std::string line;
    std::size_t number = 0;
    if (!detail::next_line(in, line, number)) throw InputError(path.string() + ": empty tracks file");
    long frames = -1, points = -1;
    {
        std::stringstream ss(line);
        std::string tok;
        while (ss >> tok) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos) throw InputError(detail::where(path, number) + "bad header token '" + tok + "'");
            const std::string key = tok.substr(0, eq);
            const long v = detail::parse_int(tok.substr(eq + 1), path, number);
            if (key == "frames")
                frames = v;
            else if (key == "points")
                points = v;
            else
                throw InputError(detail::where(path, number) + "unknown header key '" + key + "'");
        }
    }
    if (frames < 1 || points < 0)
        throw InputError(detail::where(path, number) + "header must read 'frames=F points=N' with F >= 1");

    TrajectorySet ts;
    ts.frames = static_cast<int>(frames);
    for (long p = 0; p < points; ++p) {
        if (!detail::next_line(in, line, number))
            throw InputError(path.string() + ": expected " + std::to_string(points) + " tracks, found " +
                             std::to_string(p));
        const auto vals = detail::parse_row(line, path, number);
        if (static_cast<long>(vals.size()) != 2 * frames)
            throw InputError(detail::where(path, number) + "expected " + std::to_string(2 * frames) +
                             " values, found " + std::to_string(vals.size()));
        Track t(static_cast<std::size_t>(frames));
        for (long f = 0; f < frames; ++f) t[f] = {vals[2 * f], vals[2 * f + 1]};
        ts.tracks.push_back(std::move(t));
    }
    if (detail::next_line(in, line, number))
        throw InputError(detail::where(path, number) + "more tracks than the declared " + std::to_string(points));
    return ts;
}

/// Companion labels of a tracks file: <stem>.labels next to it, else truth.txt
/// in the same directory.
inline std::optional<fs::path> companion_labels(const fs::path& tracks_path) {
    fs::path own = tracks_path;
    own.replace_extension(".labels");
    if (fs::exists(own)) return own;
    fs::path truth = tracks_path.parent_path() / "truth.txt";
    if (fs::exists(truth)) return truth;
    return std::nullopt;
}

/// Loads tracks and attaches labels from `labels_path`, or from the companion file when present.
inline TrajectorySet load_tracks(const fs::path& path, std::optional<fs::path> labels_path = std::nullopt) {
    auto in = detail::open_in(path);
    TrajectorySet ts = read_tracks(in, path);
    if (!labels_path) labels_path = companion_labels(path);
    if (labels_path) {
        Labeling l = load_labels(*labels_path);
        if (l.size() != ts.tracks.size())
            throw InputError(labels_path->string() + ": " + std::to_string(l.size()) + " labels for " +
                             std::to_string(ts.tracks.size()) + " tracks");
        ts.labels = std::move(l);
    }
    return ts;
}

/// True when the first non-blank line looks like a tracks header.
inline bool is_tracks_file(const fs::path& path) {
    auto in = detail::open_in(path);
    std::string line;
    std::size_t number = 0;
    return detail::next_line(in, line, number) && detail::trim(line).rfind("frames=", 0) == 0;
}

// ---------------------------------------------------------------------------
// sequence directories

struct SequenceEntry {
    std::string name;
    std::string group;
    fs::path dir;
};

inline bool is_known_group(const std::string& g) {
    return g == "checker" || g == "traffic" || g == "articulated" || g == "synthetic";
}

/// Sequence directories under `root`, sorted by name. A directory qualifies
/// when it contains tracks.txt; without group.txt the group is "synthetic".
inline std::vector<SequenceEntry> list_sequences(const fs::path& root) {
    if (!fs::is_directory(root)) throw InputError(root.string() + " is not a directory");
    std::vector<SequenceEntry> out;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (!entry.is_directory() || !fs::exists(entry.path() / "tracks.txt")) continue;
        SequenceEntry s{entry.path().filename().string(), "synthetic", entry.path()};
        if (fs::exists(entry.path() / "group.txt")) {
            auto in = detail::open_in(entry.path() / "group.txt");
            std::string g;
            std::getline(in, g);
            g = detail::trim(g);
            if (!is_known_group(g)) throw InputError((entry.path() / "group.txt").string() + ": unknown group '" + g + "'");
            s.group = g;
        }
        out.push_back(std::move(s));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
    return out;
}

}  // namespace nls::io
