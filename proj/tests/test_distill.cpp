#include <doctest.h>

#include <cmath>

#include "aikd/distill.hpp"
#include "aikd/synth.hpp"

using namespace aikd;

namespace {

// Small configuration shared by the training tests: 24x24 raw images aligned
// into a 28x28 template and fed to a 14x14 input net.
struct Fixture {
    SynthResult data;
    std::vector<TrainingSample> samples;
    ArchitectureSpec arch;
    DistillConfig config;

    explicit Fixture(std::uint64_t seed = 5, int n_identities = 2, int per_identity = 4) {
        SynthConfig sc;
        sc.n_identities = n_identities;
        sc.images_per_identity = per_identity;
        sc.width = 24;
        sc.height = 24;
        sc.mated_pairs = 4;
        sc.nonmated_pairs = 4;
        data = generate_synthetic_dataset(sc, seed);
        samples = make_training_set(data.manifest, data.images);

        arch.input_width = 14;
        arch.input_height = 14;
        arch.backbone_widths = {24, 8};
        arch.head_widths = {6, 1};

        config.tmpl.width = 28;
        config.tmpl.height = 28;
        config.tmpl.points = arcface_template().points * (28.0 / 112.0);
        config.epochs = 2;
        config.batch_size = 4;
        config.seed = seed;
    }
};

Eigen::VectorXd unit2(double a, double b) {
    Eigen::VectorXd v(2);
    v << a, b;
    return v;
}

}  // namespace

TEST_CASE("cosine_loss: parallel, orthogonal, antiparallel") {
    const Eigen::VectorXd e = unit2(2.0, 0.0);
    CHECK(std::abs(cosine_loss(e, unit2(5.0, 0.0)) - 0.0) < 1e-12);
    CHECK(std::abs(cosine_loss(unit2(1.0, 0.0), unit2(0.0, 1.0)) - 1.0) < 1e-12);
    CHECK(std::abs(cosine_loss(unit2(1.0, 0.0), unit2(-1.0, 0.0)) - 2.0) < 1e-12);
}

TEST_CASE("cosine_loss: zero-norm embedding raises") {
    CHECK_THROWS_AS(cosine_loss(unit2(0.0, 0.0), unit2(1.0, 0.0)), DegenerateEmbeddingError);
    CHECK_THROWS_AS(cosine_loss(unit2(1.0, 0.0), unit2(0.0, 0.0)), DegenerateEmbeddingError);
}

TEST_CASE("quality_loss: values and symmetry") {
    CHECK(quality_loss(0.4, 0.4) == 0.0);
    CHECK(std::abs(quality_loss(0.7, 0.5) - 0.2) < 1e-12);
    Rng rng(31);
    for (int i = 0; i < 100; ++i) {
        const double a = rng.uniform(), b = rng.uniform();
        CHECK(quality_loss(a, b) == quality_loss(b, a));
    }
}

TEST_CASE("distill_objective: arithmetic and range") {
    const Eigen::VectorXd e = unit2(1.0, 0.0);
    CHECK(distill_objective(e, e, 0.4, 0.4) == 0.0);

    // L_cos = 0.4 at cos = 0.6; with L_1 = 0.2 the average is 0.3.
    const double c = 0.6;
    const Eigen::VectorXd ehat = unit2(c, std::sqrt(1.0 - c * c));
    CHECK(std::abs(distill_objective(e, ehat, 0.7, 0.5) - 0.3) < 1e-12);

    Rng rng(32);
    for (int i = 0; i < 200; ++i) {
        const Eigen::VectorXd a = unit2(rng.uniform(-1, 1), rng.uniform(-1, 1));
        const Eigen::VectorXd b = unit2(rng.uniform(-1, 1), rng.uniform(-1, 1));
        if (a.norm() == 0.0 || b.norm() == 0.0) continue;
        const double q = rng.uniform(), qhat = rng.uniform();
        const double obj = distill_objective(a, b, q, qhat);
        CHECK(obj >= 0.0);
        CHECK(obj <= (2.0 + std::abs(q - qhat)) / 2.0);
    }
}

TEST_CASE("train_step: fixed point at p = 0 with student equal to teacher") {
    const Fixture f;
    ModelParams teacher = init_params(f.arch, 123);
    // Zero head weights pin the quality output at 0.5 exactly.
    const std::size_t head0 = f.arch.backbone_widths.size();
    for (std::size_t l = head0; l < teacher.weights.size(); ++l) teacher.weights[l].setZero();
    teacher.frozen = true;

    ModelParams student = teacher;
    student.frozen = false;
    const ModelParams before = student;

    TrainingSample sample = f.samples[0];
    sample.quality = 0.5;  // matches the pinned head output

    DistillConfig cfg = f.config;
    cfg.perturbation = 0.0;
    Rng rng(1);
    const StepOutcome out = train_step(teacher, student, sample, cfg, rng);

    CHECK_FALSE(out.skipped);
    CHECK(out.objective == 0.0);
    for (std::size_t l = 0; l < student.weights.size(); ++l) {
        CHECK((student.weights[l] - before.weights[l]).cwiseAbs().maxCoeff() == 0.0);
        CHECK((student.biases[l] - before.biases[l]).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("train_step: a real step moves the student and not the teacher") {
    const Fixture f;
    ModelParams teacher = init_params(f.arch, 321);
    teacher.frozen = true;
    const ModelParams teacher_before = teacher;
    ModelParams student = teacher;
    student.frozen = false;

    Rng rng(2);
    const StepOutcome out = train_step(teacher, student, f.samples[1], f.config, rng);
    REQUIRE_FALSE(out.skipped);

    bool moved = false;
    for (std::size_t l = 0; l < student.weights.size(); ++l)
        if ((student.weights[l] - teacher.weights[l]).cwiseAbs().maxCoeff() > 0.0) moved = true;
    CHECK(moved);
    for (std::size_t l = 0; l < teacher.weights.size(); ++l) {
        CHECK((teacher.weights[l] - teacher_before.weights[l]).cwiseAbs().maxCoeff() == 0.0);
        CHECK((teacher.biases[l] - teacher_before.biases[l]).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("train_step: unfrozen teacher rejected") {
    const Fixture f;
    ModelParams teacher = init_params(f.arch, 11);
    ModelParams student = teacher;
    Rng rng(3);
    CHECK_THROWS_AS(train_step(teacher, student, f.samples[0], f.config, rng), FrozenModelError);
}

TEST_CASE("train: deterministic given the seed") {
    const Fixture f;
    ModelParams teacher = init_params(f.arch, 77);
    teacher.frozen = true;
    ModelParams student = teacher;
    student.frozen = false;

    const TrainResult a = train(teacher, student, f.samples, f.config);
    const TrainResult b = train(teacher, student, f.samples, f.config);
    REQUIRE(a.stats.size() == b.stats.size());
    for (std::size_t e = 0; e < a.stats.size(); ++e) {
        CHECK(a.stats[e].mean_cos == b.stats[e].mean_cos);
        CHECK(a.stats[e].mean_l1 == b.stats[e].mean_l1);
        CHECK(a.stats[e].mean_objective == b.stats[e].mean_objective);
    }
    for (std::size_t l = 0; l < a.student_final.weights.size(); ++l) {
        CHECK((a.student_final.weights[l] - b.student_final.weights[l]).cwiseAbs().maxCoeff() == 0.0);
        CHECK((a.student_swa.weights[l] - b.student_swa.weights[l]).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("train: teacher bytes untouched across a run") {
    const Fixture f;
    ModelParams teacher = init_params(f.arch, 88);
    teacher.frozen = true;
    const ModelParams snapshot = teacher;
    ModelParams student = teacher;
    student.frozen = false;

    (void)train(teacher, student, f.samples, f.config);
    for (std::size_t l = 0; l < teacher.weights.size(); ++l) {
        CHECK((teacher.weights[l] - snapshot.weights[l]).cwiseAbs().maxCoeff() == 0.0);
        CHECK((teacher.biases[l] - snapshot.biases[l]).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("train: epoch stats keep the combined-objective identity") {
    const Fixture f(9, 2, 6);
    ModelParams teacher = init_params(f.arch, 99);
    teacher.frozen = true;
    ModelParams student = teacher;
    student.frozen = false;

    const TrainResult res = train(teacher, student, f.samples, f.config);
    for (const EpochStats& s : res.stats) {
        CHECK(s.skipped == 0);
        CHECK(std::abs(s.mean_objective - (s.mean_cos + s.mean_l1) / 2.0) < 1e-12);
    }
}

TEST_CASE("train: p = 0 misaligned views equal the aligned views bit-for-bit") {
    const Fixture f;
    DistillConfig cfg = f.config;
    cfg.perturbation = 0.0;

    ArchitectureSpec arch = f.arch;
    Rng rng(4);
    for (const TrainingSample& s : f.samples) {
        const Eigen::VectorXd aligned = prepare_input(s.raw, s.landmarks, cfg.tmpl, arch);
        const Landmarks5 perturbed = perturb_landmarks(s.landmarks, 0.0, rng);
        const Eigen::VectorXd misaligned = prepare_input(s.raw, perturbed, cfg.tmpl, arch);
        CHECK((aligned - misaligned).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("train: lr shrinking to zero is forbidden, epochs >= 1 enforced") {
    const Fixture f;
    ModelParams teacher = init_params(f.arch, 13);
    teacher.frozen = true;
    ModelParams student = teacher;
    student.frozen = false;

    DistillConfig cfg = f.config;
    cfg.epochs = 0;
    CHECK_THROWS_AS(train(teacher, student, f.samples, cfg), ConfigError);
    cfg = f.config;
    cfg.lr = 0.0;
    CHECK_THROWS_AS(train(teacher, student, f.samples, cfg), ConfigError);
}

TEST_CASE("make_training_set: unlabeled record is a config error") {
    Fixture f;
    DatasetManifest manifest = f.data.manifest;
    manifest.records[1].quality.reset();
    CHECK_THROWS_AS(make_training_set(manifest, f.data.images), ConfigError);
}

TEST_CASE("normalize_labels: affine map cases") {
    DatasetManifest m;
    auto rec = [&](double q) {
        SampleRecord r;
        r.image_path = "x.pgm";
        r.landmarks = arcface_template().points;
        r.quality = q;
        m.records.push_back(r);
    };

    SUBCASE("two labels map to the endpoints") {
        // raw scores outside [0,1] are fine pre-normalization
        rec(1.0);
        rec(0.0);
        m.records[0].quality = 2.0;
        m.records[1].quality = 4.0;
        const auto [lo, hi] = normalize_labels(m);
        CHECK(lo == 2.0);
        CHECK(hi == 4.0);
        CHECK(*m.records[0].quality == 0.0);
        CHECK(*m.records[1].quality == 1.0);
    }
    SUBCASE("already spanning [0,1] stays unchanged") {
        rec(0.0);
        rec(0.25);
        rec(1.0);
        normalize_labels(m);
        CHECK(*m.records[0].quality == 0.0);
        CHECK(*m.records[1].quality == 0.25);
        CHECK(*m.records[2].quality == 1.0);
    }
    SUBCASE("three evenly spaced labels") {
        rec(1.0);
        rec(0.0);
        rec(0.5);
        m.records[0].quality = 1.0;
        m.records[1].quality = 2.0;
        m.records[2].quality = 3.0;
        normalize_labels(m);
        CHECK(*m.records[0].quality == 0.0);
        CHECK(*m.records[1].quality == 0.5);
        CHECK(*m.records[2].quality == 1.0);
    }
    SUBCASE("equal labels are degenerate") {
        rec(0.5);
        rec(0.5);
        CHECK_THROWS_AS(normalize_labels(m), DegenerateLabelsError);
    }
    SUBCASE("order is preserved (rank correlation 1)") {
        Rng rng(41);
        for (int i = 0; i < 50; ++i) rec(rng.uniform());
        std::vector<double> before;
        for (const auto& r : m.records) before.push_back(*r.quality);
        normalize_labels(m);
        for (std::size_t i = 0; i < before.size(); ++i)
            for (std::size_t j = 0; j < before.size(); ++j)
                CHECK((before[i] < before[j]) == (*m.records[i].quality < *m.records[j].quality));
    }
}

TEST_CASE("prefit_identity: separates synthetic identities") {
    Fixture f(17, 3, 6);
    ModelParams teacher = init_params(f.arch, 1717);

    prefit_identity(teacher, f.samples, f.data.pairs, f.config.tmpl, 8, 0.05, 1717);

    // mean within-identity cosine should beat mean across-identity cosine
    std::vector<Eigen::VectorXd> emb;
    for (const auto& s : f.samples)
        emb.push_back(embed(teacher, prepare_input(s.raw, s.landmarks, f.config.tmpl, f.arch)));

    double within = 0.0, across = 0.0;
    int n_within = 0, n_across = 0;
    for (std::size_t i = 0; i < emb.size(); ++i)
        for (std::size_t j = i + 1; j < emb.size(); ++j) {
            const double c = emb[i].dot(emb[j]) / (emb[i].norm() * emb[j].norm());
            if (f.data.identity[i] == f.data.identity[j]) { within += c; ++n_within; }
            else { across += c; ++n_across; }
        }
    within /= n_within;
    across /= n_across;
    CHECK(within > across);
}
