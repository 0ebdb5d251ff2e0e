#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "aikd/errors.hpp"
#include "aikd/landmarks.hpp"

namespace aikd {

// 2-D similarity map p -> s * R(theta) * p + t with s > 0 (no reflection).
class SimilarityTransform {
  public:
    SimilarityTransform() = default;

    SimilarityTransform(double scale, double theta, const Eigen::Vector2d& translation)
        : scale_(scale), theta_(theta), translation_(translation) {
        if (!(scale > 0.0) || !std::isfinite(scale))
            throw ContractError("SimilarityTransform: scale must be finite and positive");
    }

    double scale() const { return scale_; }
    double rotation() const { return theta_; }
    const Eigen::Vector2d& translation() const { return translation_; }

    // [ s*R | t ] as a 2x3 matrix.
    Eigen::Matrix<double, 2, 3> matrix() const {
        const double c = std::cos(theta_), s = std::sin(theta_);
        Eigen::Matrix<double, 2, 3> m;
        m << scale_ * c, -scale_ * s, translation_.x(),
             scale_ * s,  scale_ * c, translation_.y();
        return m;
    }

    Eigen::Vector2d apply(const Eigen::Vector2d& p) const {
        const double c = std::cos(theta_), s = std::sin(theta_);
        return {scale_ * (c * p.x() - s * p.y()) + translation_.x(),
                scale_ * (s * p.x() + c * p.y()) + translation_.y()};
    }

    Landmarks5 apply(const Landmarks5& pts) const {
        Landmarks5 out;
        for (int i = 0; i < kNumLandmarks; ++i)
            out.row(i) = apply(Eigen::Vector2d(pts.row(i))).transpose();
        return out;
    }

    SimilarityTransform inverse() const {
        const double inv_s = 1.0 / scale_;
        const double c = std::cos(-theta_), s = std::sin(-theta_);
        const Eigen::Vector2d t(-inv_s * (c * translation_.x() - s * translation_.y()),
                                -inv_s * (s * translation_.x() + c * translation_.y()));
        return {inv_s, -theta_, t};
    }

    SimilarityTransform compose(const SimilarityTransform& inner) const {
        // this(inner(p))
        return {scale_ * inner.scale_, theta_ + inner.theta_,
                apply(inner.translation_)};
    }

  private:
    double scale_ = 1.0;
    double theta_ = 0.0;
    Eigen::Vector2d translation_{0.0, 0.0};
};

}  // namespace aikd
