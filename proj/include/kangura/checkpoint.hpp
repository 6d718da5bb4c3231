#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "kangura/error.hpp"
#include "kangura/model.hpp"

namespace kangura {

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

// Explicit little-endian packing so checkpoints are byte-identical across
// hosts.
inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;
    std::string context;

    void need(std::size_t n) const {
        if (pos + n > buf.size())
            throw LoadError(context + ": unexpected end of file at offset " + std::to_string(pos));
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

inline std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

// Canonical key=value lines, fixed key order; doubles printed with full
// round-trip precision.
inline std::string serialize_config(const ModelConfig& c) {
    std::ostringstream out;
    out << "channels=" << c.channels << '\n';
    out << "d_att=" << c.d_att << '\n';
    out << "graph.norm=" << (c.graph.norm == AdjacencyNorm::RandomWalk ? "rw" : "sym") << '\n';
    out << "graph.self_loops=" << (c.graph.self_loops ? 1 : 0) << '\n';
    out << "graph.sigma=" << detail::format_real(c.graph.sigma) << '\n';
    out << "graph.tau=" << detail::format_real(c.graph.tau) << '\n';
    out << "grid_extent=" << detail::format_real(c.grid_extent) << '\n';
    out << "grid_intervals=" << c.grid_intervals << '\n';
    out << "ka_width=" << (c.ka_width ? 1 : 0) << '\n';
    out << "kan_hidden=";
    for (std::size_t i = 0; i < c.kan_hidden.size(); ++i)
        out << (i ? "," : "") << c.kan_hidden[i];
    out << '\n';
    out << "num_classes=" << c.num_classes << '\n';
    out << "points=" << c.points << '\n';
    out << "seed=" << c.seed << '\n';
    out << "share_branches=" << (c.share_branches ? 1 : 0) << '\n';
    out << "spline_degree=" << c.spline_degree << '\n';
    out << "split_fraction=" << detail::format_real(c.split_fraction) << '\n';
    out << "ura_raw=" << (c.ura_raw ? 1 : 0) << '\n';
    return out.str();
}

inline ModelConfig parse_config(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw LoadError("config: malformed line '" + line + "'");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto get = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw LoadError("config: missing key '" + key + "'");
        return it->second;
    };

    ModelConfig c;
    c.channels = std::stoi(get("channels"));
    c.d_att = std::stoi(get("d_att"));
    const std::string norm = get("graph.norm");
    if (norm == "rw")
        c.graph.norm = AdjacencyNorm::RandomWalk;
    else if (norm == "sym")
        c.graph.norm = AdjacencyNorm::Symmetric;
    else
        throw LoadError("config: unknown graph.norm '" + norm + "'");
    c.graph.self_loops = get("graph.self_loops") == "1";
    c.graph.sigma = std::stod(get("graph.sigma"));
    c.graph.tau = std::stod(get("graph.tau"));
    c.grid_extent = std::stod(get("grid_extent"));
    c.grid_intervals = std::stoi(get("grid_intervals"));
    c.ka_width = get("ka_width") == "1";
    c.kan_hidden.clear();
    {
        const std::string& list = get("kan_hidden");
        std::size_t start = 0;
        while (start < list.size()) {
            std::size_t comma = list.find(',', start);
            if (comma == std::string::npos) comma = list.size();
            c.kan_hidden.push_back(std::stoi(list.substr(start, comma - start)));
            start = comma + 1;
        }
    }
    c.num_classes = std::stoi(get("num_classes"));
    c.points = std::stoi(get("points"));
    c.seed = std::stoull(get("seed"));
    c.share_branches = get("share_branches") == "1";
    c.spline_degree = std::stoi(get("spline_degree"));
    c.split_fraction = std::stod(get("split_fraction"));
    c.ura_raw = get("ura_raw") == "1";
    return c;
}

// Binary checkpoint: magic "KNGR", u32 version, length-prefixed config
// (canonical key=value lines), then one record per registry parameter:
// length-prefixed name, u32 rank, rank x u64 dims, raw float64 row-major.
// Everything little-endian; round-trips are bit-exact.
inline void save_checkpoint(const Model& model, const std::filesystem::path& path) {
    std::string out;
    out += "KNGR";
    detail::put_u32(out, kCheckpointVersion);
    const std::string config = serialize_config(model.config);
    detail::put_u64(out, config.size());
    out += config;

    std::vector<ParamView> views = parameter_views(const_cast<Model&>(model));
    detail::put_u32(out, static_cast<std::uint32_t>(views.size()));
    for (const ParamView& v : views) {
        detail::put_u32(out, static_cast<std::uint32_t>(v.name.size()));
        out += v.name;
        detail::put_u32(out, 1);  // rank
        detail::put_u64(out, v.size);
        for (std::size_t i = 0; i < v.size; ++i) detail::put_f64(out, v.data[i]);
    }

    std::ofstream file(path, std::ios::binary);
    if (!file) throw Error("save_checkpoint: cannot open " + path.string());
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) throw Error("save_checkpoint: write failed for " + path.string());
}

inline Model load_checkpoint(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw LoadError("load_checkpoint: cannot open " + path.string());
    std::ostringstream ss;
    ss << file.rdbuf();
    const std::string buf = ss.str();
    detail::Reader r{buf, 0, path.string()};

    if (r.bytes(4) != "KNGR") throw LoadError(path.string() + ": bad magic, not a checkpoint");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw LoadError(path.string() + ": version mismatch, found " + std::to_string(version) +
                        ", expected " + std::to_string(kCheckpointVersion));

    const std::uint64_t config_len = r.u64();
    Model model = make_model(parse_config(r.bytes(config_len)));

    const std::uint32_t record_count = r.u32();
    std::vector<ParamView> views = parameter_views(model);
    if (record_count != views.size())
        throw LoadError(path.string() + ": parameter record count " + std::to_string(record_count) +
                        " does not match model layout (" + std::to_string(views.size()) + ")");
    for (ParamView& v : views) {
        const std::uint32_t name_len = r.u32();
        const std::string name = r.bytes(name_len);
        if (name != v.name)
            throw LoadError(path.string() + ": parameter '" + name + "' where '" + v.name +
                            "' was expected");
        const std::uint32_t rank = r.u32();
        std::uint64_t count = 1;
        for (std::uint32_t d = 0; d < rank; ++d) count *= r.u64();
        if (count != v.size)
            throw LoadError(path.string() + ": parameter '" + name + "' has " +
                            std::to_string(count) + " values, expected " + std::to_string(v.size));
        for (std::size_t i = 0; i < v.size; ++i) v.data[i] = r.f64();
    }
    if (r.pos != buf.size())
        throw LoadError(path.string() + ": trailing bytes after last parameter record");
    return model;
}

}  // namespace kangura
