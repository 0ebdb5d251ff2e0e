#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "aikd/landmarks.hpp"

namespace aikd {

struct SampleRecord {
    std::string image_path;  // relative to the manifest root
    Landmarks5 landmarks;
    std::optional<double> quality;  // in [0,1] when present
};

struct DatasetManifest {
    std::filesystem::path root;  // directory image paths resolve against
    std::vector<SampleRecord> records;
};

struct VerificationPair {
    std::size_t a = 0;
    std::size_t b = 0;
    bool mated = false;
};

struct PairProtocol {
    std::vector<VerificationPair> pairs;
};

// Manifest CSV: header row, then
//   image_path,x1,y1,x2,y2,x3,y3,x4,y4,x5,y5,quality
// with quality optionally empty. Landmark order: left eye, right eye,
// nose tip, left lip corner, right lip corner. Row order is preserved.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// Pairs CSV: header row, then index_a,index_b,mated with mated in {0,1}.
// Indices are validated against the manifest; duplicates are accepted.
PairProtocol load_pairs(const std::filesystem::path& path, const DatasetManifest& manifest);
void save_pairs(const PairProtocol& protocol, const std::filesystem::path& path);

}  // namespace aikd
