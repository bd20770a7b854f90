#pragma once

// Report serialization: JSON with 17 significant digits for every double,
// and CSV dumps of DiskMaps. Requires nlohmann/json (vendor/json.hpp).

#include "jdisk/diskgrid.hpp"
#include "jdisk/error.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace jdisk::io {

using Json = nlohmann::ordered_json;

inline std::string format_double(double x) {
    if (!std::isfinite(x)) return "null";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    std::string s(buf);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

namespace detail {

inline void dump(const Json& j, std::string& out, int indent, int depth) {
    const auto pad = [&](int d) {
        out += '\n';
        out.append(static_cast<std::size_t>(indent * d), ' ');
    };
    switch (j.type()) {
    case Json::value_t::object: {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += '{';
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!first) out += ',';
            first = false;
            pad(depth + 1);
            out += Json(it.key()).dump();
            out += ": ";
            dump(it.value(), out, indent, depth + 1);
        }
        pad(depth);
        out += '}';
        return;
    }
    case Json::value_t::array: {
        if (j.empty()) {
            out += "[]";
            return;
        }
        out += '[';
        bool first = true;
        for (const auto& v : j) {
            if (!first) out += ',';
            first = false;
            pad(depth + 1);
            dump(v, out, indent, depth + 1);
        }
        pad(depth);
        out += ']';
        return;
    }
    case Json::value_t::number_float: out += format_double(j.get<double>()); return;
    default: out += j.dump(); return;
    }
}

} // namespace detail

/// Pretty-printed JSON; doubles use %.17g so equal values print identically.
inline std::string dump_json(const Json& j, int indent = 2) {
    std::string out;
    detail::dump(j, out, indent, 0);
    out += '\n';
    return out;
}

inline Json to_json(const Vec& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

inline Json to_json(Complex z) { return Json::array({z.real(), z.imag()}); }

/// Grid metadata attached to every serialized DiskMap.
inline Json grid_json(const DiskMap& u) {
    return Json{{"radius", u.grid->radius()},
                {"N", u.grid->axis_count()},
                {"nodes", u.grid->node_count()},
                {"spacing", u.grid->spacing()},
                {"n", u.convention.n},
                {"interpolation", "bilinear"}};
}

/// One row per node: k, i, j, x, y, then the 2n real coordinates.
inline std::string diskmap_csv(const DiskMap& u) {
    std::ostringstream os;
    os << "k,i,j,x,y";
    for (int c = 0; c < u.dim(); ++c) os << ',' << (c % 2 == 0 ? "x" : "y") << (c / 2 + 1) << "_v";
    os << '\n';
    const DiskGrid& g = *u.grid;
    for (std::size_t k = 0; k < g.node_count(); ++k) {
        const Complex z = g.node(k);
        os << k << ',' << g.ix(k) << ',' << g.iy(k) << ',' << format_double(z.real()) << ','
           << format_double(z.imag());
        for (int c = 0; c < u.dim(); ++c) os << ',' << format_double(u.values(c, static_cast<Eigen::Index>(k)));
        os << '\n';
    }
    return os.str();
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::Config, "cannot write " + path);
    f << text;
    if (!f) throw Error(ErrorKind::Config, "write failed for " + path);
}

inline std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::Config, "cannot read " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

} // namespace jdisk::io
