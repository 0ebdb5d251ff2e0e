#include "aikd/manifest.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace aikd {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

double parse_double(const std::string& s, const std::filesystem::path& file, int lineno,
                    const char* what) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
        throw ParseError(file.string() + ":" + std::to_string(lineno) + ": bad " + what +
                         " value '" + s + "'");
    return v;
}

std::ifstream open_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open file: " + path.string());
    return in;
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in = open_text(path);

    DatasetManifest manifest;
    manifest.root = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");

    std::string line;
    if (!std::getline(in, line))
        throw ParseError(path.string() + ":1: missing header row");

    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv(line);
        if (fields.size() != 12)
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected 12 fields, got " +
                             std::to_string(fields.size()));
        SampleRecord rec;
        rec.image_path = fields[0];
        if (rec.image_path.empty())
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": empty image path");
        for (int i = 0; i < kNumLandmarks; ++i) {
            rec.landmarks(i, 0) = parse_double(fields[1 + 2 * i], path, lineno, "landmark");
            rec.landmarks(i, 1) = parse_double(fields[2 + 2 * i], path, lineno, "landmark");
        }
        if (!fields[11].empty()) {
            const double q = parse_double(fields[11], path, lineno, "quality");
            if (q < 0.0 || q > 1.0)
                throw ParseError(path.string() + ":" + std::to_string(lineno) +
                                 ": quality outside [0,1]");
            rec.quality = q;
        }
        manifest.records.push_back(std::move(rec));
    }
    return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw IoError("cannot write file: " + path.string());
        out << "image_path,x1,y1,x2,y2,x3,y3,x4,y4,x5,y5,quality\n";
        for (const auto& rec : manifest.records) {
            out << rec.image_path;
            for (int i = 0; i < kNumLandmarks; ++i)
                out << "," << fmt_double(rec.landmarks(i, 0)) << ","
                    << fmt_double(rec.landmarks(i, 1));
            out << ",";
            if (rec.quality) out << fmt_double(*rec.quality);
            out << "\n";
        }
    }
    std::filesystem::rename(tmp, path);
}

PairProtocol load_pairs(const std::filesystem::path& path, const DatasetManifest& manifest) {
    std::ifstream in = open_text(path);

    PairProtocol protocol;
    std::string line;
    if (!std::getline(in, line))
        throw ValidationError(path.string() + ": protocol must contain >=1 mated and >=1 non-mated pair");

    std::size_t mated_count = 0, nonmated_count = 0;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv(line);
        if (fields.size() != 3)
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected 3 fields");

        auto parse_index = [&](const std::string& s) -> std::size_t {
            std::size_t v = 0;
            const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc() || ptr != s.data() + s.size())
                throw ParseError(path.string() + ":" + std::to_string(lineno) + ": bad index '" + s + "'");
            return v;
        };

        VerificationPair pair;
        pair.a = parse_index(fields[0]);
        pair.b = parse_index(fields[1]);
        if (fields[2] == "1") pair.mated = true;
        else if (fields[2] == "0") pair.mated = false;
        else throw ParseError(path.string() + ":" + std::to_string(lineno) + ": mated must be 0 or 1");

        if (pair.a >= manifest.records.size() || pair.b >= manifest.records.size())
            throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                                  ": pair index out of range for manifest of " +
                                  std::to_string(manifest.records.size()) + " records");
        if (!pair.mated && pair.a == pair.b)
            throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                                  ": non-mated pair references the same record twice");

        (pair.mated ? mated_count : nonmated_count)++;
        protocol.pairs.push_back(pair);
    }

    if (mated_count == 0 || nonmated_count == 0)
        throw ValidationError(path.string() + ": protocol must contain >=1 mated and >=1 non-mated pair");
    return protocol;
}

void save_pairs(const PairProtocol& protocol, const std::filesystem::path& path) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw IoError("cannot write file: " + path.string());
        out << "index_a,index_b,mated\n";
        for (const auto& p : protocol.pairs)
            out << p.a << "," << p.b << "," << (p.mated ? 1 : 0) << "\n";
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace aikd
