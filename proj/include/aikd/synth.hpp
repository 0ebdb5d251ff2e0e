#pragma once

#include <cstdint>
#include <vector>

#include "aikd/image.hpp"
#include "aikd/manifest.hpp"

namespace aikd {

// Configuration for the procedural stand-in dataset. Each identity is a
// seeded blob constellation anchored at its landmark positions; per-image
// variation comes from a random similarity placement and a random blur
// level. The blur level defines the pseudo-quality label.
struct SynthConfig {
    int n_identities = 4;
    int images_per_identity = 8;
    int width = 64;
    int height = 64;
    double sigma_min = 0.4;
    double sigma_max = 2.2;
    std::size_t mated_pairs = 64;
    std::size_t nonmated_pairs = 64;

    void validate() const;
};

struct SynthResult {
    DatasetManifest manifest;  // root unset until written to disk
    PairProtocol pairs;
    std::vector<Image> images;      // quantized to the 8-bit grid
    std::vector<int> identity;      // per image
    std::vector<double> blur_sigma; // per image, ground truth
};

// q = 1 - (sigma - sigma_min) / (sigma_max - sigma_min)
double blur_quality(double sigma, double sigma_min, double sigma_max);

SynthResult generate_synthetic_dataset(const SynthConfig& config, std::uint64_t seed);

// Writes images/*.pgm, manifest.csv and pairs.csv under out_dir and points
// the manifest root there.
void write_synth_dataset(SynthResult& data, const std::filesystem::path& out_dir);

}  // namespace aikd
