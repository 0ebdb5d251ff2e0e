#include "aikd/align.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <fstream>
#include <sstream>

namespace aikd {

void AlignmentTemplate::validate() const {
    if (width <= 0 || height <= 0)
        throw ValidationError("alignment template: non-positive output size");
    for (int i = 0; i < kNumLandmarks; ++i) {
        const double x = points(i, 0), y = points(i, 1);
        if (!std::isfinite(x) || !std::isfinite(y))
            throw ValidationError("alignment template: non-finite point");
        if (x < 0.0 || x >= width || y < 0.0 || y >= height)
            throw ValidationError("alignment template: point outside output frame");
    }
}

AlignmentTemplate arcface_template() {
    AlignmentTemplate t;
    t.width = 112;
    t.height = 112;
    t.points << 38.2946, 51.6963,
                73.5318, 51.5014,
                56.0252, 71.7366,
                41.5493, 92.3655,
                70.7299, 92.2041;
    return t;
}

AlignmentTemplate load_template(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open template file: " + path.string());

    auto parse_pair = [&](const std::string& line, int lineno) {
        std::istringstream ss(line);
        double a, b;
        char comma;
        if (!(ss >> a >> comma >> b) || comma != ',')
            throw ParseError("template file " + path.string() + ": bad row at line " +
                             std::to_string(lineno));
        std::string rest;
        if (ss >> rest)
            throw ParseError("template file " + path.string() + ": trailing data at line " +
                             std::to_string(lineno));
        return std::pair<double, double>(a, b);
    };

    std::string line;
    if (!std::getline(in, line))
        throw ParseError("template file " + path.string() + ": empty file");
    const auto [w, h] = parse_pair(line, 1);

    AlignmentTemplate t;
    t.width = static_cast<int>(w);
    t.height = static_cast<int>(h);
    for (int i = 0; i < kNumLandmarks; ++i) {
        if (!std::getline(in, line))
            throw ParseError("template file " + path.string() + ": expected 5 point rows");
        const auto [x, y] = parse_pair(line, i + 2);
        t.points(i, 0) = x;
        t.points(i, 1) = y;
    }
    t.validate();
    return t;
}

void save_template(const AlignmentTemplate& tmpl, const std::filesystem::path& path) {
    tmpl.validate();
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write template file: " + path.string());
    out << tmpl.width << "," << tmpl.height << "\n";
    char buf[96];
    for (int i = 0; i < kNumLandmarks; ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", tmpl.points(i, 0), tmpl.points(i, 1));
        out << buf;
    }
}

SimilarityTransform estimate_similarity(const Landmarks5& src, const AlignmentTemplate& tmpl) {
    for (int i = 0; i < kNumLandmarks; ++i)
        if (!std::isfinite(src(i, 0)) || !std::isfinite(src(i, 1)))
            throw ValidationError("estimate_similarity: non-finite landmark coordinate");

    const Eigen::RowVector2d mu_src = src.colwise().mean();
    const Eigen::RowVector2d mu_dst = tmpl.points.colwise().mean();
    const Landmarks5 src_c = src.rowwise() - mu_src;
    const Landmarks5 dst_c = tmpl.points.rowwise() - mu_dst;

    // Collinearity gate on the source covariance.
    const Eigen::Matrix2d src_cov = src_c.transpose() * src_c / kNumLandmarks;
    {
        Eigen::JacobiSVD<Eigen::Matrix2d> sv(src_cov);
        const double smax = sv.singularValues()(0);
        const double smin = sv.singularValues()(1);
        if (smax <= 0.0 || smin < 1e-9 * smax)
            throw DegenerateGeometryError("estimate_similarity: source landmarks are degenerate");
    }

    const Eigen::Matrix2d cross_cov = dst_c.transpose() * src_c / kNumLandmarks;
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(cross_cov, Eigen::ComputeFullU | Eigen::ComputeFullV);

    Eigen::Vector2d d(1.0, 1.0);
    if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) d(1) = -1.0;

    const Eigen::Matrix2d rot = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
    const double src_var = src_c.squaredNorm() / kNumLandmarks;
    const double scale = svd.singularValues().dot(d) / src_var;
    if (!(scale > 0.0) || !std::isfinite(scale))
        throw DegenerateGeometryError("estimate_similarity: non-positive fitted scale");

    const double theta = std::atan2(rot(1, 0), rot(0, 0));
    const Eigen::Vector2d t =
        mu_dst.transpose() - scale * rot * mu_src.transpose();
    return {scale, theta, t};
}

Image warp_image(const Image& img, const SimilarityTransform& transform,
                 const AlignmentTemplate& tmpl) {
    img.validate();
    tmpl.validate();
    const SimilarityTransform inv = transform.inverse();

    Image out(tmpl.width, tmpl.height, img.channels);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            const Eigen::Vector2d s = inv.apply(Eigen::Vector2d(x, y));
            const double fx = std::floor(s.x());
            const double fy = std::floor(s.y());
            const int x0 = static_cast<int>(fx);
            const int y0 = static_cast<int>(fy);
            const double wx = s.x() - fx;
            const double wy = s.y() - fy;
            for (int c = 0; c < img.channels; ++c) {
                auto tap = [&](int tx, int ty) {
                    return img.in_bounds(tx, ty) ? img.at(tx, ty, c) : 0.0;
                };
                const double top = (1.0 - wx) * tap(x0, y0) + wx * tap(x0 + 1, y0);
                const double bot = (1.0 - wx) * tap(x0, y0 + 1) + wx * tap(x0 + 1, y0 + 1);
                out.at(x, y, c) = (1.0 - wy) * top + wy * bot;
            }
        }
    }
    return out;
}

Landmarks5 perturb_landmarks(const Landmarks5& pts, double p, Rng& rng, bool round_to_int) {
    if (p < 0.0) throw ContractError("perturb_landmarks: p must be >= 0");
    Landmarks5 out;
    for (int i = 0; i < kNumLandmarks; ++i) {
        for (int j = 0; j < 2; ++j) {
            double offset = rng.uniform(-p, p);
            if (round_to_int) offset = std::round(offset);
            out(i, j) = pts(i, j) + offset;
        }
    }
    return out;
}

Image align_sample(const Image& img, const Landmarks5& pts, const AlignmentTemplate& tmpl) {
    return warp_image(img, estimate_similarity(pts, tmpl), tmpl);
}

}  // namespace aikd
