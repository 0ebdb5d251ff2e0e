#include "aikd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "aikd/align.hpp"
#include "aikd/rng.hpp"
#include "aikd/transform.hpp"

namespace aikd {

void SynthConfig::validate() const {
    if (n_identities < 2) throw ConfigError("synth: n_identities must be >= 2");
    if (images_per_identity < 2) throw ConfigError("synth: images_per_identity must be >= 2");
    if (width < 16 || height < 16) throw ConfigError("synth: image size must be >= 16x16");
    if (!(sigma_max > sigma_min) || sigma_min < 0.0)
        throw ConfigError("synth: need 0 <= sigma_min < sigma_max");
    if (mated_pairs == 0 || nonmated_pairs == 0)
        throw ConfigError("synth: need >= 1 mated and >= 1 non-mated pair");
}

double blur_quality(double sigma, double sigma_min, double sigma_max) {
    return 1.0 - (sigma - sigma_min) / (sigma_max - sigma_min);
}

namespace {

struct Blob {
    Eigen::Vector2d offset;  // in identity layout space
    double amplitude = 0.0;
    double radius = 0.0;
};

struct IdentityPattern {
    Landmarks5 layout;  // centered at origin
    std::vector<Blob> blobs;
};

void render_blob(Image& img, const Eigen::Vector2d& center, double amplitude, double radius) {
    const int span = static_cast<int>(std::ceil(3.0 * radius));
    const int x0 = std::max(0, static_cast<int>(std::floor(center.x())) - span);
    const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(center.x())) + span);
    const int y0 = std::max(0, static_cast<int>(std::floor(center.y())) - span);
    const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(center.y())) + span);
    const double inv = 1.0 / (2.0 * radius * radius);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double dx = x - center.x();
            const double dy = y - center.y();
            img.at(x, y) += amplitude * std::exp(-(dx * dx + dy * dy) * inv);
        }
}

}  // namespace

SynthResult generate_synthetic_dataset(const SynthConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng = Rng::stream(seed, "data");

    const double unit = std::min(config.width, config.height);
    // The canonical template spans ~41 px; rescale it so the constellation
    // covers a little over half of the raw frame.
    const double layout_scale = 0.55 * unit / 41.0;
    const AlignmentTemplate canon = arcface_template();
    const Eigen::RowVector2d canon_mean = canon.points.colwise().mean();

    // All identities share one base constellation (a blob per keypoint plus
    // four free-floating ones); what makes an identity are its seeded offsets
    // from that base. Heavy blur and misalignment then genuinely confuse
    // identities the way hard face benchmarks do.
    Landmarks5 base_layout;
    for (int i = 0; i < kNumLandmarks; ++i)
        for (int j = 0; j < 2; ++j)
            base_layout(i, j) = (canon.points(i, j) - canon_mean(j)) * layout_scale;

    std::vector<Blob> base_blobs;
    for (int i = 0; i < kNumLandmarks; ++i) {
        Blob b;
        b.offset = base_layout.row(i).transpose();
        b.amplitude = rng.uniform(0.5, 0.9);
        b.radius = rng.uniform(0.03, 0.065) * unit;
        base_blobs.push_back(b);
    }
    for (int i = 0; i < 4; ++i) {
        Blob b;
        b.offset = Eigen::Vector2d(rng.uniform(-0.18, 0.18) * unit,
                                   rng.uniform(-0.18, 0.18) * unit);
        b.amplitude = rng.uniform(0.4, 0.8);
        b.radius = rng.uniform(0.03, 0.065) * unit;
        base_blobs.push_back(b);
    }

    std::vector<IdentityPattern> identities(static_cast<std::size_t>(config.n_identities));
    for (auto& ident : identities) {
        ident.layout = base_layout;
        for (int i = 0; i < kNumLandmarks; ++i)
            for (int j = 0; j < 2; ++j)
                ident.layout(i, j) += rng.uniform(-0.045, 0.045) * unit;
        for (const Blob& base : base_blobs) {
            Blob b = base;
            b.offset += Eigen::Vector2d(rng.uniform(-0.06, 0.06) * unit,
                                        rng.uniform(-0.06, 0.06) * unit);
            b.amplitude *= 1.0 + rng.uniform(-0.25, 0.25);
            b.radius *= 1.0 + rng.uniform(-0.3, 0.3);
            ident.blobs.push_back(b);
        }
    }

    SynthResult out;
    const Eigen::Vector2d center(config.width / 2.0, config.height / 2.0);

    for (int id = 0; id < config.n_identities; ++id) {
        const IdentityPattern& ident = identities[static_cast<std::size_t>(id)];
        for (int k = 0; k < config.images_per_identity; ++k) {
            // Placement: where this face instance sits in the raw frame.
            SimilarityTransform place;
            Landmarks5 pts;
            for (int attempt = 0;; ++attempt) {
                const double s = rng.uniform(0.9, 1.1);
                const double theta = rng.uniform(-0.15, 0.15);
                const Eigen::Vector2d t = center + Eigen::Vector2d(rng.uniform(-0.05, 0.05) * unit,
                                                                   rng.uniform(-0.05, 0.05) * unit);
                place = SimilarityTransform(s, theta, t);
                pts = place.apply(ident.layout);
                const bool ok = (pts.col(0).minCoeff() >= 1.0 &&
                                 pts.col(0).maxCoeff() <= config.width - 2.0 &&
                                 pts.col(1).minCoeff() >= 1.0 &&
                                 pts.col(1).maxCoeff() <= config.height - 2.0);
                if (ok) break;
                if (attempt > 64)
                    throw ConfigError("synth: image too small for the landmark layout");
            }

            Image img(config.width, config.height, 1);
            for (const Blob& b : ident.blobs)
                render_blob(img, place.apply(b.offset), b.amplitude, b.radius * place.scale());
            img.pixels = img.pixels.min(1.0).max(0.0);

            const double sigma = rng.uniform(config.sigma_min, config.sigma_max);
            img = quantize_8bit(gaussian_blur(img, sigma));

            char name[64];
            std::snprintf(name, sizeof(name), "images/id%03d_%04d.pgm", id, k);

            SampleRecord rec;
            rec.image_path = name;
            rec.landmarks = pts;
            rec.quality = blur_quality(sigma, config.sigma_min, config.sigma_max);
            out.manifest.records.push_back(std::move(rec));
            out.images.push_back(std::move(img));
            out.identity.push_back(id);
            out.blur_sigma.push_back(sigma);
        }
    }

    const auto per = static_cast<std::uint64_t>(config.images_per_identity);
    for (std::size_t n = 0; n < config.mated_pairs; ++n) {
        const std::uint64_t id = rng.below(static_cast<std::uint64_t>(config.n_identities));
        const std::uint64_t i = rng.below(per);
        std::uint64_t j = rng.below(per - 1);
        if (j >= i) ++j;
        out.pairs.pairs.push_back({id * per + i, id * per + j, true});
    }
    for (std::size_t n = 0; n < config.nonmated_pairs; ++n) {
        const std::uint64_t id_a = rng.below(static_cast<std::uint64_t>(config.n_identities));
        std::uint64_t id_b = rng.below(static_cast<std::uint64_t>(config.n_identities) - 1);
        if (id_b >= id_a) ++id_b;
        out.pairs.pairs.push_back({id_a * per + rng.below(per), id_b * per + rng.below(per), false});
    }

    return out;
}

void write_synth_dataset(SynthResult& data, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir / "images");
    for (std::size_t i = 0; i < data.images.size(); ++i)
        save_pgm(data.images[i], out_dir / data.manifest.records[i].image_path);
    data.manifest.root = out_dir;
    save_manifest(data.manifest, out_dir / "manifest.csv");
    save_pairs(data.pairs, out_dir / "pairs.csv");
}

}  // namespace aikd
