#include "aikd/eval.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <limits>
#include <numeric>

namespace aikd {

ScoreSet ScoredProtocol::score_set() const {
    ScoreSet set;
    for (const PairScore& p : pairs)
        (p.mated ? set.mated : set.nonmated).push_back(p.score);
    return set;
}

EmbedOutputs embed_images(const ModelParams& model, std::span<const Image> images,
                          std::span<const Landmarks5> landmarks, const AlignmentTemplate& tmpl) {
    if (images.size() != landmarks.size())
        throw ContractError("embed_images: image/landmark count mismatch");

    EmbedOutputs out;
    out.embeddings.reserve(images.size());
    out.qualities.reserve(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
        const Eigen::VectorXd input = prepare_input(images[i], landmarks[i], tmpl, model.arch);
        ForwardResult fwd = forward(model, input);
        out.embeddings.push_back(std::move(fwd.embedding));
        out.qualities.push_back(fwd.quality);
    }
    return out;
}

std::vector<Image> load_images(const DatasetManifest& manifest) {
    std::vector<Image> images;
    images.reserve(manifest.records.size());
    for (const auto& rec : manifest.records)
        images.push_back(load_pgm(manifest.root / rec.image_path));
    return images;
}

ScoredProtocol score_pairs(std::span<const Eigen::VectorXd> embeddings,
                           const PairProtocol& protocol) {
    ScoredProtocol out;
    for (const VerificationPair& p : protocol.pairs) {
        if (p.a >= embeddings.size() || p.b >= embeddings.size())
            throw ContractError("score_pairs: pair index out of range");
        const Eigen::VectorXd& ea = embeddings[p.a];
        const Eigen::VectorXd& eb = embeddings[p.b];
        const double na = ea.norm(), nb = eb.norm();
        if (na == 0.0 || nb == 0.0) {
            ++out.excluded;
            std::cerr << "[warn] score_pairs: degenerate embedding, pair (" << p.a << "," << p.b
                      << ") excluded\n";
            continue;
        }
        out.pairs.push_back({p.a, p.b, p.mated, ea.dot(eb) / (na * nb)});
    }
    return out;
}

EvaluationRun embed_and_score(const ModelParams& model, std::span<const Image> images,
                              std::span<const Landmarks5> landmarks,
                              const AlignmentTemplate& tmpl, const PairProtocol& protocol) {
    EvaluationRun run;
    run.outputs = embed_images(model, images, landmarks, tmpl);
    run.scored = score_pairs(run.outputs.embeddings, protocol);
    return run;
}

double fmr_threshold(std::vector<double> nonmated_scores, double fmr_target) {
    if (nonmated_scores.empty()) throw ContractError("fmr_threshold: empty score list");
    if (!(fmr_target > 0.0) || fmr_target > 1.0)
        throw ContractError("fmr_threshold: fmr_target must be in (0, 1]");

    std::sort(nonmated_scores.begin(), nonmated_scores.end(), std::greater<>());
    const std::size_t n = nonmated_scores.size();
    // Small epsilon so exact multiples like (1/3) * 3 do not floor down; the
    // verification loop below corrects any overshoot.
    const auto allowed =
        static_cast<std::size_t>(std::floor(fmr_target * static_cast<double>(n) + 1e-9));

    if (allowed >= n) {
        std::cerr << "[warn] fmr_threshold: target admits every score; using the minimum\n";
        return nonmated_scores.back();
    }

    auto fmr_of = [&](double t) {
        // scores are sorted descending; count of s >= t
        std::size_t c = 0;
        while (c < n && nonmated_scores[c] >= t) ++c;
        return static_cast<double>(c) / static_cast<double>(n);
    };

    if (allowed == 0) {
        // No false match may survive a >= comparison; step just above the max.
        double t = std::nextafter(nonmated_scores.front(), std::numeric_limits<double>::infinity());
        std::cerr << "[warn] fmr_threshold: target below 1/N, threshold set above max score\n";
        return t;
    }

    // k-th largest admits at most k scores; ties can push the verified FMR
    // over the target, in which case move up to the next distinct value.
    std::size_t idx = allowed - 1;
    double t = nonmated_scores[idx];
    while (fmr_of(t) > fmr_target) {
        // find next distinct larger value
        std::size_t j = idx;
        while (j > 0 && nonmated_scores[j - 1] == t) --j;
        if (j == 0) {
            t = std::nextafter(nonmated_scores.front(),
                               std::numeric_limits<double>::infinity());
            break;
        }
        idx = j - 1;
        t = nonmated_scores[idx];
    }
    return t;
}

double fnmr_at(std::span<const double> mated_scores, double threshold) {
    if (mated_scores.empty()) throw ContractError("fnmr_at: empty score list");
    std::size_t below = 0;
    for (const double s : mated_scores)
        if (s < threshold) ++below;
    return static_cast<double>(below) / static_cast<double>(mated_scores.size());
}

EdcCurve edc_curve(std::span<const double> image_qualities, const ScoredProtocol& scored,
                   double fmr_target, double grid_step, double r_max) {
    if (!(grid_step > 0.0) || !(r_max > 0.0) || r_max > 1.0)
        throw ContractError("edc_curve: bad grid parameters");

    std::vector<double> nonmated;
    std::vector<const PairScore*> mated;
    for (const PairScore& p : scored.pairs) {
        if (p.mated) mated.push_back(&p);
        else nonmated.push_back(p.score);
    }
    if (mated.empty())
        throw ValidationError("edc_curve: no mated pairs at 0% discard");
    if (nonmated.empty())
        throw ValidationError("edc_curve: no non-mated pairs to derive a threshold");
    for (const PairScore* p : mated)
        if (p->a >= image_qualities.size() || p->b >= image_qualities.size())
            throw ContractError("edc_curve: pair index outside quality list");

    EdcCurve curve;
    curve.threshold = fmr_threshold(std::move(nonmated), fmr_target);

    // Discard order: quality ascending, index ascending on ties.
    const std::size_t n_images = image_qualities.size();
    std::vector<std::size_t> by_quality(n_images);
    std::iota(by_quality.begin(), by_quality.end(), std::size_t{0});
    std::stable_sort(by_quality.begin(), by_quality.end(), [&](std::size_t a, std::size_t b) {
        return image_qualities[a] < image_qualities[b];
    });

    // discarded_at[i] = position at which image i disappears
    std::vector<std::size_t> discarded_at(n_images);
    for (std::size_t pos = 0; pos < n_images; ++pos) discarded_at[by_quality[pos]] = pos;

    const int n_steps = static_cast<int>(std::floor(r_max / grid_step + 1e-9));
    double last_fnmr = 0.0;

    auto eval_at = [&](double rate) {
        const auto cut = static_cast<std::size_t>(
            std::floor(rate * static_cast<double>(n_images) + 1e-9));
        std::size_t surviving = 0, failing = 0;
        for (const PairScore* p : mated) {
            if (discarded_at[p->a] < cut || discarded_at[p->b] < cut) continue;
            ++surviving;
            if (p->score < curve.threshold) ++failing;
        }
        if (surviving == 0) {
            std::cerr << "[warn] edc_curve: no mated pairs survive at rate " << rate
                      << "; carrying last FNMR forward\n";
            return last_fnmr;
        }
        return static_cast<double>(failing) / static_cast<double>(surviving);
    };

    for (int i = 0; i <= n_steps; ++i) {
        double rate = i * grid_step;
        if (i == n_steps && std::abs(rate - r_max) < 1e-9) rate = r_max;
        curve.discard_rates.push_back(rate);
        const double fnmr = eval_at(rate);
        curve.fnmr_values.push_back(fnmr);
        last_fnmr = fnmr;
    }
    if (curve.discard_rates.back() < r_max) {
        curve.discard_rates.push_back(r_max);
        curve.fnmr_values.push_back(eval_at(r_max));
    }

    curve.fnmr0 = curve.fnmr_values.front();
    return curve;
}

namespace {

double trapezoid(std::span<const double> xs, std::span<const double> ys) {
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i)
        area += 0.5 * (ys[i] + ys[i + 1]) * (xs[i + 1] - xs[i]);
    return area;
}

}  // namespace

PaucReport pauc(const EdcCurve& curve, double fmr_target) {
    if (curve.discard_rates.size() != curve.fnmr_values.size() || curve.discard_rates.size() < 2)
        throw ContractError("pauc: malformed curve");
    if (curve.discard_rates.front() != 0.0)
        throw ContractError("pauc: curve must start at 0% discard");

    PaucReport report;
    report.r_max = curve.discard_rates.back();
    report.fmr_target = fmr_target;
    report.raw = trapezoid(curve.discard_rates, curve.fnmr_values);

    if (curve.fnmr0 > 0.0) {
        // Denominator computed by the same quadrature over the constant
        // fnmr0 curve, so a constant input normalizes to exactly 1.0.
        const std::vector<double> flat(curve.discard_rates.size(), curve.fnmr0);
        report.normalized = report.raw / trapezoid(curve.discard_rates, flat);
    } else {
        std::cerr << "[warn] pauc: FNMR at 0% discard is zero; normalization undefined\n";
    }
    return report;
}

std::vector<MethodResult> compare_methods(
    const std::vector<std::pair<std::string, std::vector<double>>>& methods,
    const ScoredProtocol& scored, double fmr_target, double grid_step, double r_max) {
    std::vector<MethodResult> results;
    for (const auto& [name, qualities] : methods) {
        const EdcCurve curve = edc_curve(qualities, scored, fmr_target, grid_step, r_max);
        const PaucReport report = pauc(curve, fmr_target);
        if (!report.normalized)
            throw ValidationError("compare_methods: normalization undefined (FNMR at 0% is zero)");
        results.push_back({name, *report.normalized, report.raw, 0});
    }
    std::sort(results.begin(), results.end(), [](const MethodResult& a, const MethodResult& b) {
        if (a.pauc_norm != b.pauc_norm) return a.pauc_norm < b.pauc_norm;
        return a.name < b.name;
    });
    for (std::size_t i = 0; i < results.size(); ++i) results[i].rank = static_cast<int>(i + 1);
    return results;
}

}  // namespace aikd
