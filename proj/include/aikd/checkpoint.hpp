#pragma once

#include <cstdint>
#include <filesystem>

#include "aikd/network.hpp"

namespace aikd {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Everything needed to resume or evaluate a run: the model, the plain-SGD
// optimizer state (empty), the SWA accumulator and the label-normalization
// decision applied to the training manifest.
struct Checkpoint {
    std::uint32_t format_version = kCheckpointVersion;
    std::uint64_t seed = 0;
    ModelParams model;
    std::vector<Eigen::VectorXd> optimizer_state;
    SwaState swa;
    double label_min = 0.0;
    double label_max = 1.0;
};

// Little-endian binary, magic "AIKD", u32 version, header (seed, architecture,
// frozen flag, label range), then length-prefixed 64-bit-real arrays in
// declared order: per layer W (row-major) and b, optimizer arrays, SWA
// arrays. save(load(f)) is byte-identical.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace aikd
