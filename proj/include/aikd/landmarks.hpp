#pragma once

#include <Eigen/Dense>
#include <filesystem>

#include "aikd/errors.hpp"

namespace aikd {

// Five facial keypoints in pixel coordinates, one row per point, columns
// (x, y). Row order is fixed: left eye, right eye, nose tip, left lip
// corner, right lip corner.
using Landmarks5 = Eigen::Matrix<double, 5, 2>;

inline constexpr int kNumLandmarks = 5;

// Target keypoint coordinates inside a W x H output crop.
struct AlignmentTemplate {
    Landmarks5 points;
    int width = 0;
    int height = 0;

    void validate() const;
};

// The canonical 112x112 five-point crop template used by ArcFace-style
// alignment pipelines. Configuration data, overridable via template files.
AlignmentTemplate arcface_template();

// Template file: one "W,H" header line, then five "x,y" rows.
AlignmentTemplate load_template(const std::filesystem::path& path);
void save_template(const AlignmentTemplate& tmpl, const std::filesystem::path& path);

}  // namespace aikd
