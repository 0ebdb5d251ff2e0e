#pragma once

#include "aikd/image.hpp"
#include "aikd/landmarks.hpp"
#include "aikd/rng.hpp"
#include "aikd/transform.hpp"

namespace aikd {

// Closed-form least-squares similarity fit (Umeyama): the transform T
// minimizing sum_k ||T(src_k) - template_k||^2, reflection excluded.
// Throws DegenerateGeometryError when the source points are (nearly)
// collinear: smallest singular value of the source covariance below
// 1e-9 times the largest.
SimilarityTransform estimate_similarity(const Landmarks5& src, const AlignmentTemplate& tmpl);

// Inverse-mapped bilinear warp into the template frame. Each output pixel o
// samples the input at T^-1(o); samples outside the input contribute 0.
Image warp_image(const Image& img, const SimilarityTransform& transform,
                 const AlignmentTemplate& tmpl);

// Offsets every coordinate independently by a uniform draw on [-p, p].
// round_to_int snaps each offset to the nearest integer (ablation variant).
Landmarks5 perturb_landmarks(const Landmarks5& pts, double p, Rng& rng,
                             bool round_to_int = false);

// estimate_similarity followed by warp_image.
Image align_sample(const Image& img, const Landmarks5& pts, const AlignmentTemplate& tmpl);

}  // namespace aikd
