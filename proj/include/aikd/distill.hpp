#pragma once

#include <span>
#include <vector>

#include "aikd/align.hpp"
#include "aikd/image.hpp"
#include "aikd/manifest.hpp"
#include "aikd/network.hpp"
#include "aikd/rng.hpp"

namespace aikd {

struct TrainingSample {
    Image raw;
    Landmarks5 landmarks;
    double quality = 0.0;  // pseudo-quality label in [0,1]
};

struct DistillConfig {
    double perturbation = 3.0;       // p, in raw-image pixels
    bool round_perturbation = false;
    double lr = 0.05;
    int epochs = 1;
    int batch_size = 32;
    double swa_warmup = 0.5;         // fraction of epochs before snapshots start
    std::uint64_t seed = 0;
    AlignmentTemplate tmpl = arcface_template();

    void validate() const;
};

struct EpochStats {
    double mean_cos = 0.0;
    double mean_l1 = 0.0;
    double mean_objective = 0.0;
    std::size_t samples = 0;  // samples contributing to the means
    std::size_t skipped = 0;  // degenerate samples dropped this epoch
};

struct TrainResult {
    ModelParams student_final;
    ModelParams student_swa;
    std::vector<EpochStats> stats;
};

// 1 - cos(e, ehat); in [0, 2]. Throws DegenerateEmbeddingError on zero norm.
double cosine_loss(const Eigen::VectorXd& e, const Eigen::VectorXd& ehat);

// |q - qhat|
double quality_loss(double q, double qhat);

// (cosine_loss + quality_loss) / 2
double distill_objective(const Eigen::VectorXd& e, const Eigen::VectorXd& ehat, double q,
                         double qhat);

// Partials of distill_objective with respect to the student outputs; the
// teacher embedding is a constant target.
void objective_partials(const Eigen::VectorXd& e, const Eigen::VectorXd& ehat, double q,
                        double qhat, Eigen::VectorXd& dloss_dehat, double& dloss_dqhat);

// Align to the template, resample to the network input size, flatten.
Eigen::VectorXd prepare_input(const Image& raw, const Landmarks5& pts,
                              const AlignmentTemplate& tmpl, const ArchitectureSpec& arch);

struct StepOutcome {
    double cos = 0.0;
    double l1 = 0.0;
    double objective = 0.0;
    bool skipped = false;
};

// One sample, one SGD step: aligned view through the frozen teacher,
// freshly misaligned view through the student.
StepOutcome train_step(const ModelParams& teacher, ModelParams& student,
                       const TrainingSample& sample, const DistillConfig& config,
                       Rng& perturb_rng);

// Full procedure: epoch shuffling, mean-of-batch gradients, SWA snapshots
// after the warm-up fraction. Deterministic given config.seed.
TrainResult train(const ModelParams& teacher, const ModelParams& student_init,
                  std::span<const TrainingSample> samples, const DistillConfig& config);

// Loads every record's image; throws ConfigError if any record lacks a label
// or has landmarks outside its image.
std::vector<TrainingSample> make_training_set(const DatasetManifest& manifest);

// In-memory variant for already-materialized images.
std::vector<TrainingSample> make_training_set(const DatasetManifest& manifest,
                                              std::span<const Image> images);

// Min-max maps labels onto [0,1]; returns the (min, max) used so the decision
// can be recorded in checkpoints. Throws DegenerateLabelsError when all
// labels are equal and ConfigError when any label is absent.
std::pair<double, double> normalize_labels(DatasetManifest& manifest);

// Short softmax proxy task on identity clusters derived from the mated pairs
// (union-find over the protocol). Gives a random-init teacher identity-
// separating embeddings before distillation.
void prefit_identity(ModelParams& teacher, std::span<const TrainingSample> samples,
                     const PairProtocol& protocol, const AlignmentTemplate& tmpl, int epochs,
                     double lr, std::uint64_t seed);

}  // namespace aikd
