#include "aikd/image.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <vector>

namespace aikd {

void Image::validate() const {
    if (width <= 0 || height <= 0) throw ValidationError("image: non-positive dimensions");
    if (channels != 1 && channels != 3) throw ValidationError("image: channels must be 1 or 3");
    if (pixels.size() != static_cast<Eigen::Index>(width) * height * channels)
        throw ValidationError("image: pixel buffer length mismatch");
    for (Eigen::Index i = 0; i < pixels.size(); ++i) {
        const double v = pixels[i];
        if (!std::isfinite(v) || v < 0.0 || v > 1.0)
            throw ValidationError("image: pixel value outside [0,1]");
    }
}

namespace {

// Reads one PGM header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

}  // namespace

Image load_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image file: " + path.string());

    const std::string magic = next_token(in);
    if (magic != "P5") throw ParseError("unsupported image format (expected P5 PGM): " + path.string());

    auto read_int = [&](const char* what) {
        const std::string tok = next_token(in);
        try {
            std::size_t pos = 0;
            const long v = std::stol(tok, &pos);
            if (pos != tok.size() || v <= 0) throw std::invalid_argument("bad");
            return static_cast<int>(v);
        } catch (const std::exception&) {
            throw ParseError(std::string("bad PGM ") + what + " in " + path.string());
        }
    };

    const int w = read_int("width");
    const int h = read_int("height");
    const int maxval = read_int("maxval");
    if (maxval != 255) throw ParseError("PGM maxval must be 255: " + path.string());

    std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
        throw ParseError("PGM pixel data truncated: " + path.string());

    Image img(w, h, 1);
    for (std::size_t i = 0; i < raw.size(); ++i)
        img.pixels[static_cast<Eigen::Index>(i)] = raw[i] / 255.0;
    return img;
}

void save_pgm(const Image& img, const std::filesystem::path& path) {
    if (img.channels != 1) throw ContractError("save_pgm: single-channel images only");
    img.validate();

    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write image file: " + path.string());
        out << "P5\n" << img.width << " " << img.height << "\n255\n";
        std::vector<std::uint8_t> raw(static_cast<std::size_t>(img.width) * img.height);
        for (std::size_t i = 0; i < raw.size(); ++i) {
            const double v = img.pixels[static_cast<Eigen::Index>(i)];
            raw[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
        out.write(reinterpret_cast<const char*>(raw.data()),
                  static_cast<std::streamsize>(raw.size()));
        if (!out) throw IoError("short write: " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

Image quantize_8bit(const Image& img) {
    Image out = img;
    for (Eigen::Index i = 0; i < out.pixels.size(); ++i)
        out.pixels[i] = std::lround(out.pixels[i] * 255.0) / 255.0;
    return out;
}

Image gaussian_blur(const Image& img, double sigma) {
    if (sigma < 0.0) throw ContractError("gaussian_blur: sigma must be >= 0");
    if (sigma == 0.0) return img;

    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    Eigen::ArrayXd kernel(2 * radius + 1);
    for (int i = -radius; i <= radius; ++i)
        kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    kernel /= kernel.sum();

    auto clampi = [](int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); };

    Image tmp(img.width, img.height, img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kernel[i + radius] * img.at(clampi(x + i, 0, img.width - 1), y, c);
                tmp.at(x, y, c) = acc;
            }

    Image out(img.width, img.height, img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kernel[i + radius] * tmp.at(x, clampi(y + i, 0, img.height - 1), c);
                out.at(x, y, c) = acc;
            }
    return out;
}

Image resize_bilinear(const Image& img, int out_w, int out_h) {
    if (out_w <= 0 || out_h <= 0) throw ContractError("resize_bilinear: non-positive output size");
    if (out_w == img.width && out_h == img.height) return img;

    const double sx = out_w > 1 ? static_cast<double>(img.width - 1) / (out_w - 1) : 0.0;
    const double sy = out_h > 1 ? static_cast<double>(img.height - 1) / (out_h - 1) : 0.0;

    Image out(out_w, out_h, img.channels);
    for (int y = 0; y < out_h; ++y) {
        const double fy = y * sy;
        const int y0 = static_cast<int>(std::floor(fy));
        const int y1 = std::min(y0 + 1, img.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            const double fx = x * sx;
            const int x0 = static_cast<int>(std::floor(fx));
            const int x1 = std::min(x0 + 1, img.width - 1);
            const double wx = fx - x0;
            for (int c = 0; c < img.channels; ++c) {
                const double top = (1.0 - wx) * img.at(x0, y0, c) + wx * img.at(x1, y0, c);
                const double bot = (1.0 - wx) * img.at(x0, y1, c) + wx * img.at(x1, y1, c);
                out.at(x, y, c) = (1.0 - wy) * top + wy * bot;
            }
        }
    }
    return out;
}

}  // namespace aikd
