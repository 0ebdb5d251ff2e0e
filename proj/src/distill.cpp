#include "aikd/distill.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <limits>
#include <numeric>

namespace aikd {

void DistillConfig::validate() const {
    if (perturbation < 0.0) throw ConfigError("distill: perturbation must be >= 0");
    if (!(lr > 0.0)) throw ConfigError("distill: learning rate must be positive");
    if (epochs < 1) throw ConfigError("distill: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("distill: batch size must be >= 1");
    if (swa_warmup < 0.0 || swa_warmup > 1.0)
        throw ConfigError("distill: swa warm-up fraction must be in [0,1]");
    tmpl.validate();
}

double cosine_loss(const Eigen::VectorXd& e, const Eigen::VectorXd& ehat) {
    if (e.size() != ehat.size()) throw ContractError("cosine_loss: dimension mismatch");
    const double ne = e.norm();
    const double nh = ehat.norm();
    if (ne == 0.0 || nh == 0.0)
        throw DegenerateEmbeddingError("cosine_loss: zero-norm embedding");
    return 1.0 - e.dot(ehat) / (ne * nh);
}

double quality_loss(double q, double qhat) { return std::abs(q - qhat); }

double distill_objective(const Eigen::VectorXd& e, const Eigen::VectorXd& ehat, double q,
                         double qhat) {
    return (cosine_loss(e, ehat) + quality_loss(q, qhat)) / 2.0;
}

void objective_partials(const Eigen::VectorXd& e, const Eigen::VectorXd& ehat, double q,
                        double qhat, Eigen::VectorXd& dloss_dehat, double& dloss_dqhat) {
    const double ne = e.norm();
    const double nh = ehat.norm();
    if (ne == 0.0 || nh == 0.0)
        throw DegenerateEmbeddingError("objective_partials: zero-norm embedding");
    const double dot = e.dot(ehat);
    // d/dehat of (1 - e.ehat / (|e||ehat|)), halved for the two-term average.
    // Identical embeddings are an exact stationary point; short-circuit so the
    // two terms do not leave ~1e-18 cancellation residue.
    if (e.size() == ehat.size() && (e.array() == ehat.array()).all())
        dloss_dehat = Eigen::VectorXd::Zero(e.size());
    else
        dloss_dehat = 0.5 * (-e / (ne * nh) + (dot / (ne * nh * nh * nh)) * ehat);
    const double diff = qhat - q;
    dloss_dqhat = 0.5 * (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0));
}

Eigen::VectorXd prepare_input(const Image& raw, const Landmarks5& pts,
                              const AlignmentTemplate& tmpl, const ArchitectureSpec& arch) {
    if (raw.channels != arch.input_channels)
        throw ContractError("prepare_input: channel count mismatch");
    Image crop = align_sample(raw, pts, tmpl);
    crop = resize_bilinear(crop, arch.input_width, arch.input_height);
    return crop.pixels.matrix();
}

namespace {

struct SampleGrad {
    Gradients grads;
    StepOutcome outcome;
};

// Forward/backward for one sample against a precomputed teacher target.
SampleGrad sample_gradient(const ModelParams& student, const Eigen::VectorXd& teacher_embedding,
                           const Eigen::VectorXd& student_input, double label) {
    SampleGrad out;
    const ForwardResult fwd = forward(student, student_input);
    if (teacher_embedding.norm() == 0.0 || fwd.embedding.norm() == 0.0) {
        out.outcome.skipped = true;
        return out;
    }
    out.outcome.cos = cosine_loss(teacher_embedding, fwd.embedding);
    out.outcome.l1 = quality_loss(label, fwd.quality);
    out.outcome.objective = (out.outcome.cos + out.outcome.l1) / 2.0;

    Eigen::VectorXd d_ehat;
    double d_qhat = 0.0;
    objective_partials(teacher_embedding, fwd.embedding, label, fwd.quality, d_ehat, d_qhat);
    out.grads = backward(student, fwd.tape, d_ehat, d_qhat);
    return out;
}

}  // namespace

StepOutcome train_step(const ModelParams& teacher, ModelParams& student,
                       const TrainingSample& sample, const DistillConfig& config,
                       Rng& perturb_rng) {
    config.validate();
    if (!teacher.frozen) throw FrozenModelError("train_step: teacher must be frozen");
    if (student.frozen) throw FrozenModelError("train_step: student is frozen");

    const Eigen::VectorXd aligned =
        prepare_input(sample.raw, sample.landmarks, config.tmpl, student.arch);
    const Eigen::VectorXd teacher_embedding = embed(teacher, aligned);

    const Landmarks5 perturbed = perturb_landmarks(sample.landmarks, config.perturbation,
                                                   perturb_rng, config.round_perturbation);
    const Eigen::VectorXd misaligned =
        prepare_input(sample.raw, perturbed, config.tmpl, student.arch);

    SampleGrad sg = sample_gradient(student, teacher_embedding, misaligned, sample.quality);
    if (sg.outcome.skipped) {
        std::cerr << "[warn] train_step: degenerate embedding, sample skipped\n";
        return sg.outcome;
    }
    sgd_step(student, sg.grads, config.lr);
    return sg.outcome;
}

TrainResult train(const ModelParams& teacher, const ModelParams& student_init,
                  std::span<const TrainingSample> samples, const DistillConfig& config) {
    config.validate();
    if (!teacher.frozen) throw FrozenModelError("train: teacher must be frozen");
    if (!(teacher.arch == student_init.arch))
        throw ConfigError("train: teacher and student architectures differ");
    if (samples.empty()) throw ConfigError("train: no training samples");

    TrainResult result;
    result.student_final = student_init;
    result.student_final.frozen = false;
    ModelParams& student = result.student_final;

    // The aligned view and the teacher target are fixed per sample; only the
    // misaligned view is resampled on every visit.
    std::vector<Eigen::VectorXd> teacher_targets;
    teacher_targets.reserve(samples.size());
    for (const TrainingSample& s : samples)
        teacher_targets.push_back(
            embed(teacher, prepare_input(s.raw, s.landmarks, config.tmpl, student.arch)));

    Rng perturb_rng = Rng::stream(config.seed, "perturb");
    Rng shuffle_rng = Rng::stream(config.seed, "shuffle");

    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    SwaState swa;
    // First epoch (1-based) that contributes an SWA snapshot.
    const int swa_start =
        std::min(config.epochs, static_cast<int>(config.epochs * config.swa_warmup) + 1);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);

        EpochStats stats;
        double sum_cos = 0.0, sum_l1 = 0.0, sum_obj = 0.0;

        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            Gradients batch = zero_gradients(student);
            std::size_t contributing = 0;

            for (std::size_t i = start; i < end; ++i) {
                const TrainingSample& s = samples[order[i]];
                const Landmarks5 perturbed = perturb_landmarks(
                    s.landmarks, config.perturbation, perturb_rng, config.round_perturbation);
                const Eigen::VectorXd misaligned =
                    prepare_input(s.raw, perturbed, config.tmpl, student.arch);

                SampleGrad sg = sample_gradient(student, teacher_targets[order[i]], misaligned,
                                                s.quality);
                if (sg.outcome.skipped) {
                    ++stats.skipped;
                    std::cerr << "[warn] train: degenerate embedding, sample skipped (epoch "
                              << epoch << ")\n";
                    continue;
                }
                accumulate(batch, sg.grads);
                sum_cos += sg.outcome.cos;
                sum_l1 += sg.outcome.l1;
                sum_obj += sg.outcome.objective;
                ++contributing;
            }

            if (contributing > 0) {
                scale(batch, 1.0 / static_cast<double>(contributing));
                sgd_step(student, batch, config.lr);
                stats.samples += contributing;
            }
        }

        if (stats.samples > 0) {
            stats.mean_cos = sum_cos / static_cast<double>(stats.samples);
            stats.mean_l1 = sum_l1 / static_cast<double>(stats.samples);
            stats.mean_objective = sum_obj / static_cast<double>(stats.samples);
        }
        result.stats.push_back(stats);

        if (epoch >= swa_start) swa_update(swa, student);
    }

    result.student_swa = swa_finalize(swa);
    return result;
}

std::vector<TrainingSample> make_training_set(const DatasetManifest& manifest) {
    std::vector<Image> images;
    images.reserve(manifest.records.size());
    for (const auto& rec : manifest.records)
        images.push_back(load_pgm(manifest.root / rec.image_path));
    return make_training_set(manifest, images);
}

std::vector<TrainingSample> make_training_set(const DatasetManifest& manifest,
                                              std::span<const Image> images) {
    if (images.size() != manifest.records.size())
        throw ContractError("make_training_set: image count mismatch");

    std::vector<TrainingSample> samples;
    samples.reserve(manifest.records.size());
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        const SampleRecord& rec = manifest.records[i];
        if (!rec.quality)
            throw ConfigError("training requires labels: record '" + rec.image_path +
                              "' has no quality value");
        const Image& img = images[i];
        for (int k = 0; k < kNumLandmarks; ++k) {
            const double x = rec.landmarks(k, 0), y = rec.landmarks(k, 1);
            if (x < 0.0 || x > img.width - 1 || y < 0.0 || y > img.height - 1)
                throw ValidationError("record '" + rec.image_path +
                                      "': landmark outside image bounds");
        }
        samples.push_back({img, rec.landmarks, *rec.quality});
    }
    return samples;
}

std::pair<double, double> normalize_labels(DatasetManifest& manifest) {
    if (manifest.records.empty()) throw ConfigError("normalize_labels: empty manifest");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& rec : manifest.records) {
        if (!rec.quality)
            throw ConfigError("normalize_labels: record '" + rec.image_path + "' has no label");
        lo = std::min(lo, *rec.quality);
        hi = std::max(hi, *rec.quality);
    }
    if (!(hi > lo)) throw DegenerateLabelsError("normalize_labels: all labels are equal");
    for (auto& rec : manifest.records) rec.quality = (*rec.quality - lo) / (hi - lo);
    return {lo, hi};
}

void prefit_identity(ModelParams& teacher, std::span<const TrainingSample> samples,
                     const PairProtocol& protocol, const AlignmentTemplate& tmpl, int epochs,
                     double lr, std::uint64_t seed) {
    if (teacher.frozen) throw FrozenModelError("prefit_identity: teacher is frozen");
    if (epochs < 1) return;

    // Identity clusters = connected components of the mated-pair graph.
    std::vector<std::size_t> parent(samples.size());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& p : protocol.pairs) {
        if (!p.mated) continue;
        if (p.a >= samples.size() || p.b >= samples.size())
            throw ContractError("prefit_identity: pair index out of range");
        parent[find(p.a)] = find(p.b);
    }

    std::vector<int> label(samples.size(), -1);
    int n_classes = 0;
    {
        std::vector<std::size_t> roots;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const std::size_t r = find(i);
            auto it = std::find(roots.begin(), roots.end(), r);
            if (it == roots.end()) {
                roots.push_back(r);
                label[i] = n_classes++;
            } else {
                label[i] = static_cast<int>(it - roots.begin());
            }
        }
    }
    if (n_classes < 2) throw ConfigError("prefit_identity: need >= 2 identity clusters");

    // Precompute aligned inputs once; the proxy task trains on proper alignment.
    std::vector<Eigen::VectorXd> inputs;
    inputs.reserve(samples.size());
    for (const TrainingSample& s : samples)
        inputs.push_back(prepare_input(s.raw, s.landmarks, tmpl, teacher.arch));

    const int d = teacher.arch.embedding_dim();
    Rng rng = Rng::stream(seed, "prefit");
    Eigen::MatrixXd classifier(n_classes, d);
    const double bound = 1.0 / std::sqrt(static_cast<double>(d));
    for (Eigen::Index r = 0; r < classifier.rows(); ++r)
        for (Eigen::Index c = 0; c < classifier.cols(); ++c)
            classifier(r, c) = rng.uniform(-bound, bound);
    Eigen::VectorXd classifier_bias = Eigen::VectorXd::Zero(n_classes);

    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        for (const std::size_t i : order) {
            const ForwardResult fwd = forward(teacher, inputs[i]);
            const Eigen::VectorXd& e = fwd.embedding;

            Eigen::VectorXd logits = classifier * e + classifier_bias;
            const double zmax = logits.maxCoeff();
            Eigen::VectorXd probs = (logits.array() - zmax).exp();
            probs /= probs.sum();

            // Cross-entropy partials: (p - onehot) for the classifier,
            // C^T (p - onehot) into the embedding.
            Eigen::VectorXd dlogits = probs;
            dlogits(label[i]) -= 1.0;

            const Eigen::VectorXd d_e = classifier.transpose() * dlogits;
            const Gradients grads =
                backward(teacher, fwd.tape, d_e, /*dloss_dquality=*/0.0);

            classifier -= lr * (dlogits * e.transpose());
            classifier_bias -= lr * dlogits;
            sgd_step(teacher, grads, lr);
        }
    }
}

}  // namespace aikd
