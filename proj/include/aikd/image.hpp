#pragma once

#include <Eigen/Dense>
#include <filesystem>

#include "aikd/errors.hpp"

namespace aikd {

// Dense raster with real intensities in [0, 1], row-major, channels
// interleaved. Grayscale (1 channel) or RGB (3 channels).
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    Eigen::ArrayXd pixels;  // size = width * height * channels

    Image() = default;
    Image(int w, int h, int c)
        : width(w), height(h), channels(c),
          pixels(Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(w) * h * c)) {}

    double& at(int x, int y, int c = 0) {
        return pixels[(static_cast<Eigen::Index>(y) * width + x) * channels + c];
    }
    double at(int x, int y, int c = 0) const {
        return pixels[(static_cast<Eigen::Index>(y) * width + x) * channels + c];
    }

    bool in_bounds(int x, int y) const {
        return x >= 0 && x < width && y >= 0 && y < height;
    }

    Eigen::Index size() const { return pixels.size(); }

    void validate() const;
};

// 8-bit binary PGM (P5), single channel. Values map as v/255 on load and
// round(v*255) on save, so save(load(f)) is byte-stable.
Image load_pgm(const std::filesystem::path& path);
void save_pgm(const Image& img, const std::filesystem::path& path);

// Snap intensities to the 8-bit grid an image would have after a PGM
// round-trip. Keeps in-memory pipelines bit-identical to on-disk ones.
Image quantize_8bit(const Image& img);

// Separable Gaussian blur, replicated border. sigma == 0 is the identity.
Image gaussian_blur(const Image& img, double sigma);

// Bilinear resample to (out_w, out_h) with corner-aligned coordinates.
Image resize_bilinear(const Image& img, int out_w, int out_h);

}  // namespace aikd
