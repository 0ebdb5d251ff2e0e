#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aikd/distill.hpp"
#include "aikd/manifest.hpp"
#include "aikd/network.hpp"

namespace aikd {

struct ScoreSet {
    std::vector<double> mated;
    std::vector<double> nonmated;
};

// One scored verification pair; only pairs with valid embeddings appear.
struct PairScore {
    std::size_t a = 0;
    std::size_t b = 0;
    bool mated = false;
    double score = 0.0;  // cosine similarity in [-1, 1]
};

struct ScoredProtocol {
    std::vector<PairScore> pairs;
    std::size_t excluded = 0;  // pairs dropped for degenerate embeddings

    ScoreSet score_set() const;
};

struct EmbedOutputs {
    std::vector<Eigen::VectorXd> embeddings;  // one per manifest record
    std::vector<double> qualities;            // head outputs, one per record
};

// Embeds every image (align -> resample -> forward) and reads the quality
// head. Landmarks default to the manifest's; pass an override to evaluate
// alternative alignments.
EmbedOutputs embed_images(const ModelParams& model, std::span<const Image> images,
                          std::span<const Landmarks5> landmarks, const AlignmentTemplate& tmpl);

std::vector<Image> load_images(const DatasetManifest& manifest);

// Cosine-scores the protocol; pairs touching a zero-norm embedding are
// excluded and counted.
ScoredProtocol score_pairs(std::span<const Eigen::VectorXd> embeddings,
                           const PairProtocol& protocol);

struct EvaluationRun {
    EmbedOutputs outputs;
    ScoredProtocol scored;
};

// embed_images followed by score_pairs: per-image embeddings and qualities
// plus the cosine-scored protocol, all from one model.
EvaluationRun embed_and_score(const ModelParams& model, std::span<const Image> images,
                              std::span<const Landmarks5> landmarks,
                              const AlignmentTemplate& tmpl, const PairProtocol& protocol);

// Smallest observed score t with FMR(t) = |{s >= t}| / N <= fmr_target.
// k = floor(fmr_target * N) picks the k-th largest score; ties are resolved
// upward so the verified FMR never exceeds the target. If no score satisfies
// the target, the next representable value above the maximum is returned.
double fmr_threshold(std::vector<double> nonmated_scores, double fmr_target = 1e-3);

// |{s in mated : s < threshold}| / N
double fnmr_at(std::span<const double> mated_scores, double threshold);

struct EdcCurve {
    std::vector<double> discard_rates;  // ascending, starts at 0
    std::vector<double> fnmr_values;
    double threshold = 0.0;
    double fnmr0 = 0.0;  // FNMR at 0% discard
};

// Error-versus-discard: the threshold is fixed once from all non-mated
// scores; at each rate r the floor(r*N) lowest-quality images are discarded
// (ties by ascending image index) and the FNMR of surviving mated pairs is
// recomputed. An empty surviving set carries the previous value forward.
EdcCurve edc_curve(std::span<const double> image_qualities, const ScoredProtocol& scored,
                   double fmr_target = 1e-3, double grid_step = 0.01, double r_max = 0.3);

struct PaucReport {
    double raw = 0.0;                  // trapezoidal area under FNMR over [0, r_max]
    std::optional<double> normalized;  // raw / (r_max * fnmr0); absent when fnmr0 == 0
    double r_max = 0.0;
    double fmr_target = 0.0;
};

PaucReport pauc(const EdcCurve& curve, double fmr_target = 1e-3);

struct MethodResult {
    std::string name;
    double pauc_norm = 0.0;
    double pauc_raw = 0.0;
    int rank = 0;
};

// Ranks quality methods on a shared scored protocol by normalized pAUC
// (ascending, lower is better), ties broken alphabetically.
std::vector<MethodResult> compare_methods(
    const std::vector<std::pair<std::string, std::vector<double>>>& methods,
    const ScoredProtocol& scored, double fmr_target = 1e-3, double grid_step = 0.01,
    double r_max = 0.3);

}  // namespace aikd
