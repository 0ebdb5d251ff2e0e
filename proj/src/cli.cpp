#include "aikd/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "aikd/checkpoint.hpp"
#include "aikd/distill.hpp"
#include "aikd/eval.hpp"
#include "aikd/synth.hpp"

namespace aikd {

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_short(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write file: " + path.string());
        out << content;
        if (!out) throw IoError("short write: " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

// All knobs of every subcommand. Configuration file values fill this struct
// first; command-line flags are parsed on top and therefore win.
struct RunConfig {
    std::string manifest;
    std::string pairs;
    std::string template_file;
    std::string out_dir = "out";
    std::uint64_t seed = 42;

    // distillation
    double p = 3.0;
    bool round_perturb = false;
    double lr = 0.05;
    int epochs = 10;
    int batch_size = 32;
    double swa_warmup = 0.5;
    int teacher_prefit_epochs = 0;
    double prefit_lr = 0.05;

    // architecture
    int input_size = 32;
    std::string backbone = "256,128,64";
    std::string head = "32,1";

    // evaluation
    double fmr = 1e-3;
    double r_max = 0.3;
    double grid_step = 0.01;

    // synthetic data
    int n_identities = 4;
    int images_per_identity = 8;
    int width = 64;
    int height = 64;
    double sigma_min = 0.4;
    double sigma_max = 2.2;
    std::uint64_t mated_pairs = 64;
    std::uint64_t nonmated_pairs = 64;
};

template <typename T>
void parse_value(const std::string& raw, T& out, const std::string& key) {
    std::istringstream ss(raw);
    ss >> out;
    std::string rest;
    if (ss.fail() || (ss >> rest))
        throw ConfigError("config: bad value '" + raw + "' for key '" + key + "'");
}

void parse_value(const std::string& raw, std::string& out, const std::string&) { out = raw; }

void parse_value(const std::string& raw, bool& out, const std::string& key) {
    if (raw == "true" || raw == "1") out = true;
    else if (raw == "false" || raw == "0") out = false;
    else throw ConfigError("config: bad boolean '" + raw + "' for key '" + key + "'");
}

void load_config_file(const std::filesystem::path& path, RunConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());

    std::map<std::string, std::function<void(const std::string&)>> setters;
    auto bind = [&](const std::string& key, auto& field) {
        setters[key] = [&field, key](const std::string& raw) { parse_value(raw, field, key); };
    };
    bind("manifest", cfg.manifest);
    bind("pairs", cfg.pairs);
    bind("template", cfg.template_file);
    bind("out_dir", cfg.out_dir);
    bind("seed", cfg.seed);
    bind("p", cfg.p);
    bind("round_perturb", cfg.round_perturb);
    bind("lr", cfg.lr);
    bind("epochs", cfg.epochs);
    bind("batch_size", cfg.batch_size);
    bind("swa_warmup", cfg.swa_warmup);
    bind("teacher_prefit_epochs", cfg.teacher_prefit_epochs);
    bind("prefit_lr", cfg.prefit_lr);
    bind("input_size", cfg.input_size);
    bind("backbone", cfg.backbone);
    bind("head", cfg.head);
    bind("fmr", cfg.fmr);
    bind("r_max", cfg.r_max);
    bind("grid_step", cfg.grid_step);
    bind("n_identities", cfg.n_identities);
    bind("images_per_identity", cfg.images_per_identity);
    bind("width", cfg.width);
    bind("height", cfg.height);
    bind("sigma_min", cfg.sigma_min);
    bind("sigma_max", cfg.sigma_max);
    bind("mated_pairs", cfg.mated_pairs);
    bind("nonmated_pairs", cfg.nonmated_pairs);

    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string();
            const auto b = s.find_last_not_of(" \t\r");
            return s.substr(a, b - a + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                              ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = setters.find(key);
        if (it == setters.end())
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": unknown key '" +
                              key + "'");
        it->second(value);
    }
}

std::vector<int> parse_width_list(const std::string& s, const char* what) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        int v = 0;
        parse_value(tok, v, what);
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError(std::string("empty width list for ") + what);
    return out;
}

ArchitectureSpec arch_from(const RunConfig& cfg) {
    ArchitectureSpec arch;
    arch.input_width = cfg.input_size;
    arch.input_height = cfg.input_size;
    arch.input_channels = 1;
    arch.backbone_widths = parse_width_list(cfg.backbone, "backbone");
    arch.head_widths = parse_width_list(cfg.head, "head");
    arch.validate();
    return arch;
}

AlignmentTemplate template_from(const RunConfig& cfg) {
    return cfg.template_file.empty() ? arcface_template() : load_template(cfg.template_file);
}

std::filesystem::path resolve_out_dir(const RunConfig& cfg) {
    if (const char* env = std::getenv("AIKD_OUT_DIR"); env && *env) return env;
    return cfg.out_dir;
}

DatasetManifest require_manifest(const RunConfig& cfg) {
    if (cfg.manifest.empty()) throw ConfigError("missing required setting: manifest");
    return load_manifest(cfg.manifest);
}

std::string edc_csv_text(const EdcCurve& curve) {
    std::string text = "discard_rate,fnmr\n";
    for (std::size_t i = 0; i < curve.discard_rates.size(); ++i)
        text += fmt(curve.discard_rates[i]) + "," + fmt(curve.fnmr_values[i]) + "\n";
    return text;
}

std::string summary_csv_text(const EdcCurve& curve, const PaucReport& report) {
    std::string text = "pAUC_raw,pAUC_norm,threshold,fnmr0\n";
    text += fmt(report.raw) + ",";
    if (report.normalized) text += fmt(*report.normalized);
    text += "," + fmt(curve.threshold) + "," + fmt(curve.fnmr0) + "\n";
    return text;
}

std::string svg_text(const EdcCurve& curve) {
    const double width = 480, height = 360, ml = 56, mr = 16, mt = 16, mb = 44;
    const double plot_w = width - ml - mr, plot_h = height - mt - mb;
    const double x_max = curve.discard_rates.back();
    double y_max = 0.0;
    for (double v : curve.fnmr_values) y_max = std::max(y_max, v);
    if (y_max <= 0.0) y_max = 1.0;
    y_max *= 1.05;

    auto px = [&](double r) { return ml + plot_w * (r / x_max); };
    auto py = [&](double f) { return mt + plot_h * (1.0 - f / y_max); };

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " + fmt_short(width) + " " +
         fmt_short(height) + "\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<line x1=\"" + fmt_short(ml) + "\" y1=\"" + fmt_short(mt + plot_h) + "\" x2=\"" +
         fmt_short(ml + plot_w) + "\" y2=\"" + fmt_short(mt + plot_h) +
         "\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + fmt_short(ml) + "\" y1=\"" + fmt_short(mt) + "\" x2=\"" + fmt_short(ml) +
         "\" y2=\"" + fmt_short(mt + plot_h) + "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double r = x_max * i / 4.0;
        s += "<text x=\"" + fmt_short(px(r)) + "\" y=\"" + fmt_short(mt + plot_h + 18) +
             "\" font-size=\"11\" text-anchor=\"middle\">" + fmt_short(r) + "</text>\n";
        const double f = y_max * i / 4.0;
        s += "<text x=\"" + fmt_short(ml - 6) + "\" y=\"" + fmt_short(py(f) + 4) +
             "\" font-size=\"11\" text-anchor=\"end\">" + fmt_short(f) + "</text>\n";
    }
    s += "<text x=\"" + fmt_short(ml + plot_w / 2) + "\" y=\"" + fmt_short(height - 8) +
         "\" font-size=\"12\" text-anchor=\"middle\">discard rate</text>\n";
    s += "<text x=\"14\" y=\"" + fmt_short(mt + plot_h / 2) +
         "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
         fmt_short(mt + plot_h / 2) + ")\">FNMR</text>\n";
    s += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < curve.discard_rates.size(); ++i) {
        if (i) s += " ";
        s += fmt_short(px(curve.discard_rates[i])) + "," + fmt_short(py(curve.fnmr_values[i]));
    }
    s += "\"/>\n</svg>\n";
    return s;
}

std::map<std::string, double> load_quality_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open quality file: " + path.string());
    std::map<std::string, double> scores;
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path.string() + ": empty quality file");
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto comma = line.rfind(',');
        if (comma == std::string::npos)
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected path,score");
        double v = 0.0;
        parse_value(line.substr(comma + 1), v, "score");
        scores[line.substr(0, comma)] = v;
    }
    return scores;
}

std::map<std::string, Landmarks5> load_landmarks_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open landmarks file: " + path.string());
    std::map<std::string, Landmarks5> out;
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path.string() + ": empty landmarks file");
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        std::vector<std::string> fields;
        std::string cur;
        for (char c : line) {
            if (c == ',') { fields.push_back(cur); cur.clear(); }
            else if (c != '\r') cur.push_back(c);
        }
        fields.push_back(cur);
        if (fields.size() != 11)
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected 11 fields");
        Landmarks5 pts;
        for (int i = 0; i < kNumLandmarks; ++i) {
            parse_value(fields[1 + 2 * i], pts(i, 0), "x");
            parse_value(fields[2 + 2 * i], pts(i, 1), "y");
        }
        out[fields[0]] = pts;
    }
    return out;
}

// ---- subcommands ----

int cmd_synth(const RunConfig& cfg) {
    SynthConfig sc;
    sc.n_identities = cfg.n_identities;
    sc.images_per_identity = cfg.images_per_identity;
    sc.width = cfg.width;
    sc.height = cfg.height;
    sc.sigma_min = cfg.sigma_min;
    sc.sigma_max = cfg.sigma_max;
    sc.mated_pairs = cfg.mated_pairs;
    sc.nonmated_pairs = cfg.nonmated_pairs;

    SynthResult data = generate_synthetic_dataset(sc, cfg.seed);
    const std::filesystem::path out = resolve_out_dir(cfg);
    write_synth_dataset(data, out);
    std::cout << "wrote " << data.images.size() << " images, " << data.pairs.pairs.size()
              << " pairs under " << out.string() << "\n";
    return 0;
}

int cmd_distill(const RunConfig& cfg) {
    DatasetManifest manifest = require_manifest(cfg);
    const auto [label_min, label_max] = normalize_labels(manifest);
    const std::vector<TrainingSample> samples = make_training_set(manifest);

    const ArchitectureSpec arch = arch_from(cfg);
    DistillConfig dc;
    dc.perturbation = cfg.p;
    dc.round_perturbation = cfg.round_perturb;
    dc.lr = cfg.lr;
    dc.epochs = cfg.epochs;
    dc.batch_size = cfg.batch_size;
    dc.swa_warmup = cfg.swa_warmup;
    dc.seed = cfg.seed;
    dc.tmpl = template_from(cfg);
    dc.validate();

    ModelParams teacher = init_params(arch, Rng::stream(cfg.seed, "init").next_u64());
    if (cfg.teacher_prefit_epochs > 0) {
        if (cfg.pairs.empty())
            throw ConfigError("teacher_prefit_epochs > 0 requires a pairs file");
        const PairProtocol protocol = load_pairs(cfg.pairs, manifest);
        prefit_identity(teacher, samples, protocol, dc.tmpl, cfg.teacher_prefit_epochs,
                        cfg.prefit_lr, cfg.seed);
    }
    teacher.frozen = true;

    ModelParams student = teacher;
    student.frozen = false;

    const TrainResult result = train(teacher, student, samples, dc);

    const std::filesystem::path out = resolve_out_dir(cfg);
    std::filesystem::create_directories(out);

    Checkpoint ck;
    ck.seed = cfg.seed;
    ck.label_min = label_min;
    ck.label_max = label_max;

    ck.model = teacher;
    save_checkpoint(ck, out / "teacher.ckpt");
    ck.model = result.student_final;
    save_checkpoint(ck, out / "student_final.ckpt");
    ck.model = result.student_swa;
    save_checkpoint(ck, out / "student_swa.ckpt");

    std::string stats = "epoch,mean_cos,mean_l1,mean_obj,skipped\n";
    for (std::size_t i = 0; i < result.stats.size(); ++i) {
        const EpochStats& s = result.stats[i];
        stats += std::to_string(i + 1) + "," + fmt(s.mean_cos) + "," + fmt(s.mean_l1) + "," +
                 fmt(s.mean_objective) + "," + std::to_string(s.skipped) + "\n";
    }
    write_text_atomic(out / "stats.csv", stats);

    std::cout << "trained " << cfg.epochs << " epochs on " << samples.size() << " samples; "
              << "final mean objective " << fmt_short(result.stats.back().mean_objective) << "\n"
              << "checkpoints and stats.csv written under " << out.string() << "\n";
    return 0;
}

struct AlignmentMode {
    enum Kind { kProper, kPerturbed, kFile } kind = kProper;
    std::filesystem::path file;
    std::string tag;
};

AlignmentMode parse_alignment(const std::string& spec, double p) {
    AlignmentMode mode;
    if (spec == "proper") {
        mode.kind = AlignmentMode::kProper;
        mode.tag = "proper";
    } else if (spec == "perturbed") {
        mode.kind = AlignmentMode::kPerturbed;
        mode.tag = "perturbed" + fmt_short(p);
    } else {
        mode.kind = AlignmentMode::kFile;
        mode.file = spec;
        mode.tag = "landmarks-" + mode.file.stem().string();
    }
    return mode;
}

// Landmarks per the chosen alignment mode: the manifest's own, freshly
// perturbed ones, or an external detector's file.
std::vector<Landmarks5> resolve_landmarks(const DatasetManifest& manifest,
                                          const AlignmentMode& mode, const RunConfig& cfg) {
    std::vector<Landmarks5> landmarks;
    landmarks.reserve(manifest.records.size());
    switch (mode.kind) {
        case AlignmentMode::kProper:
            for (const auto& rec : manifest.records) landmarks.push_back(rec.landmarks);
            break;
        case AlignmentMode::kPerturbed: {
            Rng rng = Rng::stream(cfg.seed, "eval-perturb");
            for (const auto& rec : manifest.records)
                landmarks.push_back(
                    perturb_landmarks(rec.landmarks, cfg.p, rng, cfg.round_perturb));
            break;
        }
        case AlignmentMode::kFile: {
            const auto table = load_landmarks_csv(mode.file);
            for (const auto& rec : manifest.records) {
                const auto it = table.find(rec.image_path);
                if (it == table.end())
                    throw ValidationError("landmarks file " + mode.file.string() +
                                          " is missing image '" + rec.image_path + "'");
                landmarks.push_back(it->second);
            }
            break;
        }
    }
    return landmarks;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& checkpoint_path,
                 const std::string& quality_source, const std::string& alignment_spec,
                 bool emit_svg) {
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    const DatasetManifest manifest = require_manifest(cfg);
    if (cfg.pairs.empty()) throw ConfigError("missing required setting: pairs");
    const PairProtocol protocol = load_pairs(cfg.pairs, manifest);
    const AlignmentTemplate tmpl = template_from(cfg);
    const std::vector<Image> images = load_images(manifest);

    const AlignmentMode mode = parse_alignment(alignment_spec, cfg.p);
    const std::vector<Landmarks5> landmarks = resolve_landmarks(manifest, mode, cfg);

    const EvaluationRun run = embed_and_score(ck.model, images, landmarks, tmpl, protocol);

    std::vector<double> qualities;
    std::string quality_tag;
    if (quality_source == "model") {
        qualities = run.outputs.qualities;
        quality_tag = "model";
    } else {
        const auto table = load_quality_csv(quality_source);
        for (const auto& rec : manifest.records) {
            const auto it = table.find(rec.image_path);
            if (it == table.end())
                throw ValidationError("quality file " + quality_source +
                                      " is missing image '" + rec.image_path + "'");
            qualities.push_back(it->second);
        }
        quality_tag = std::filesystem::path(quality_source).stem().string();
    }

    const EdcCurve curve = edc_curve(qualities, run.scored, cfg.fmr, cfg.grid_step, cfg.r_max);
    const PaucReport report = pauc(curve, cfg.fmr);

    const std::filesystem::path out = resolve_out_dir(cfg);
    std::filesystem::create_directories(out);
    const std::string suffix = quality_tag + "_" + mode.tag;
    write_text_atomic(out / ("edc_" + suffix + ".csv"), edc_csv_text(curve));
    write_text_atomic(out / ("summary_" + suffix + ".csv"), summary_csv_text(curve, report));
    if (emit_svg) write_text_atomic(out / ("edc_" + suffix + ".svg"), svg_text(curve));

    std::cout << "fnmr0 " << fmt_short(curve.fnmr0) << " threshold " << fmt_short(curve.threshold)
              << " pAUC_raw " << fmt_short(report.raw) << " pAUC_norm "
              << (report.normalized ? fmt_short(*report.normalized) : std::string("undefined"))
              << "\nartifacts edc_" << suffix << ".csv, summary_" << suffix << ".csv under "
              << out.string() << "\n";
    return 0;
}

int cmd_grad_check(const RunConfig& cfg, int draws, double eps, double tolerance,
                   bool inject_bug) {
    Rng rng = Rng::stream(cfg.seed, "grad-check");
    double worst = 0.0;
    bool failed = false;

    for (int draw = 0; draw < draws; ++draw) {
        ArchitectureSpec arch;
        arch.input_width = 3 + static_cast<int>(rng.below(3));
        arch.input_height = 3 + static_cast<int>(rng.below(3));
        arch.input_channels = 1;
        arch.backbone_widths = {5 + static_cast<int>(rng.below(6)),
                                3 + static_cast<int>(rng.below(4))};
        arch.head_widths = {3 + static_cast<int>(rng.below(3)), 1};

        ModelParams student = init_params(arch, rng.next_u64());
        Eigen::VectorXd input(arch.input_size());
        for (Eigen::Index i = 0; i < input.size(); ++i) input(i) = rng.uniform();
        // Resample draws with a dead first layer (the training skip path) or
        // a rectifier kink inside the finite-difference window.
        while (embed(student, input).norm() == 0.0 ||
               !finite_difference_safe(student, forward(student, input).tape)) {
            student = init_params(arch, rng.next_u64());
            for (Eigen::Index i = 0; i < input.size(); ++i) input(i) = rng.uniform();
        }
        Eigen::VectorXd target(arch.embedding_dim());
        for (Eigen::Index i = 0; i < target.size(); ++i) target(i) = rng.uniform(-1.0, 1.0);
        if (target.norm() == 0.0) target(0) = 1.0;
        const double label = rng.uniform();

        const ForwardResult fwd = forward(student, input);
        Eigen::VectorXd d_ehat;
        double d_qhat = 0.0;
        objective_partials(target, fwd.embedding, label, fwd.quality, d_ehat, d_qhat);
        Gradients analytic = backward(student, fwd.tape, d_ehat, d_qhat);
        if (inject_bug) analytic.weights[0](0, 0) *= 2.0;

        const auto loss = [&](const ModelParams& m) {
            const ForwardResult f = forward(m, input);
            return distill_objective(target, f.embedding, label, f.quality);
        };
        const double err = grad_check(student, loss, analytic, eps);
        worst = std::max(worst, err);
        const bool ok = err < tolerance;
        failed = failed || !ok;
        std::cout << "draw " << draw << " max_rel_err " << fmt_short(err)
                  << (ok ? "" : "  FAIL") << "\n";
    }
    std::cout << (failed ? "FAIL" : "PASS") << " worst " << fmt_short(worst) << " tolerance "
              << fmt_short(tolerance) << "\n";
    return failed ? 1 : 0;
}

int cmd_compare(const RunConfig& cfg, const std::string& checkpoint_path,
                const std::vector<std::string>& quality_csvs, const std::string& alignment_spec) {
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    const DatasetManifest manifest = require_manifest(cfg);
    if (cfg.pairs.empty()) throw ConfigError("missing required setting: pairs");
    const PairProtocol protocol = load_pairs(cfg.pairs, manifest);
    const AlignmentTemplate tmpl = template_from(cfg);
    const std::vector<Image> images = load_images(manifest);

    const AlignmentMode mode = parse_alignment(alignment_spec, cfg.p);
    const std::vector<Landmarks5> landmarks = resolve_landmarks(manifest, mode, cfg);

    const EvaluationRun run = embed_and_score(ck.model, images, landmarks, tmpl, protocol);

    std::vector<std::pair<std::string, std::vector<double>>> methods;
    for (const std::string& csv : quality_csvs) {
        const auto table = load_quality_csv(csv);
        std::vector<double> qualities;
        for (const auto& rec : manifest.records) {
            const auto it = table.find(rec.image_path);
            if (it == table.end())
                throw ValidationError("quality file " + csv + " is missing image '" +
                                      rec.image_path + "'");
            qualities.push_back(it->second);
        }
        methods.emplace_back(std::filesystem::path(csv).stem().string(), std::move(qualities));
    }

    const std::vector<MethodResult> ranked =
        compare_methods(methods, run.scored, cfg.fmr, cfg.grid_step, cfg.r_max);

    std::string csv = "rank,method,pauc_norm,pauc_raw\n";
    for (const MethodResult& r : ranked) {
        csv += std::to_string(r.rank) + "," + r.name + "," + fmt(r.pauc_norm) + "," +
               fmt(r.pauc_raw) + "\n";
        std::cout << r.rank << "  " << r.name << "  pAUC_norm " << fmt_short(r.pauc_norm) << "\n";
    }
    const std::filesystem::path out = resolve_out_dir(cfg);
    std::filesystem::create_directories(out);
    write_text_atomic(out / "compare.csv", csv);
    return 0;
}

int cmd_plot(const std::string& input, const std::string& output) {
    std::ifstream in(input);
    if (!in) throw IoError("cannot open EDC file: " + input);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(input + ": empty EDC file");

    EdcCurve curve;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ParseError(input + ":" + std::to_string(lineno) + ": expected rate,fnmr");
        double r = 0.0, f = 0.0;
        parse_value(line.substr(0, comma), r, "discard_rate");
        std::string rest = line.substr(comma + 1);
        if (!rest.empty() && rest.back() == '\r') rest.pop_back();
        parse_value(rest, f, "fnmr");
        curve.discard_rates.push_back(r);
        curve.fnmr_values.push_back(f);
    }
    if (curve.discard_rates.size() < 2) throw ParseError(input + ": need at least 2 curve points");
    curve.fnmr0 = curve.fnmr_values.front();

    write_text_atomic(output, svg_text(curve));
    std::cout << "wrote " << output << "\n";
    return 0;
}

std::string find_config_arg(const std::vector<std::string>& args) {
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
        if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
    }
    return {};
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    try {
        RunConfig cfg;
        const std::string config_path = find_config_arg(args);
        if (!config_path.empty()) load_config_file(config_path, cfg);

        CLI::App app{"alignment-invariant quality-distillation pipeline", "aikd"};
        app.require_subcommand(1);
        std::string config_dummy;
        app.add_option("--config", config_dummy, "key = value configuration file");

        auto add_common = [&](CLI::App* sub) {
            sub->add_option("--config", config_dummy, "key = value configuration file");
            sub->add_option("--seed", cfg.seed, "root RNG seed");
            sub->add_option("--out-dir", cfg.out_dir, "output directory");
        };
        auto add_data = [&](CLI::App* sub) {
            sub->add_option("--manifest", cfg.manifest, "dataset manifest CSV");
            sub->add_option("--pairs", cfg.pairs, "verification pairs CSV");
            sub->add_option("--template", cfg.template_file, "alignment template file");
        };
        auto add_eval = [&](CLI::App* sub) {
            sub->add_option("--fmr", cfg.fmr, "false match rate target");
            sub->add_option("--r-max", cfg.r_max, "maximum discard rate");
            sub->add_option("--grid-step", cfg.grid_step, "discard grid step");
        };

        CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
        add_common(synth);
        synth->add_option("--n-identities", cfg.n_identities);
        synth->add_option("--images-per-identity", cfg.images_per_identity);
        synth->add_option("--width", cfg.width);
        synth->add_option("--height", cfg.height);
        synth->add_option("--sigma-min", cfg.sigma_min);
        synth->add_option("--sigma-max", cfg.sigma_max);
        synth->add_option("--mated-pairs", cfg.mated_pairs);
        synth->add_option("--nonmated-pairs", cfg.nonmated_pairs);

        CLI::App* distill = app.add_subcommand("distill", "run the distillation training loop");
        add_common(distill);
        add_data(distill);
        distill->add_option("--p", cfg.p, "landmark perturbation radius (px)");
        distill->add_flag("--round-perturb", cfg.round_perturb, "integer-rounded perturbation");
        distill->add_option("--lr", cfg.lr);
        distill->add_option("--epochs", cfg.epochs);
        distill->add_option("--batch-size", cfg.batch_size);
        distill->add_option("--swa-warmup", cfg.swa_warmup);
        distill->add_option("--teacher-prefit-epochs", cfg.teacher_prefit_epochs,
                            "identity-proxy pre-fit epochs for the teacher (0 = off)");
        distill->add_option("--prefit-lr", cfg.prefit_lr);
        distill->add_option("--input-size", cfg.input_size);
        distill->add_option("--backbone", cfg.backbone, "comma-separated backbone widths");
        distill->add_option("--head", cfg.head, "comma-separated head widths");

        CLI::App* evaluate = app.add_subcommand("evaluate", "EDC/pAUC evaluation of a checkpoint");
        add_common(evaluate);
        add_data(evaluate);
        add_eval(evaluate);
        std::string checkpoint, quality_source = "model", alignment = "proper";
        bool emit_svg = false;
        evaluate->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
        evaluate->add_option("--quality-source", quality_source,
                             "'model' or a quality CSV (image_path,score)");
        evaluate->add_option("--alignment", alignment,
                             "'proper', 'perturbed' or a landmarks CSV path");
        evaluate->add_option("--p", cfg.p, "perturbation radius for --alignment perturbed");
        evaluate->add_flag("--svg", emit_svg, "also emit an SVG plot");

        CLI::App* gradcheck = app.add_subcommand("grad-check", "finite-difference gradient audit");
        add_common(gradcheck);
        int draws = 50;
        double eps = 1e-5, tolerance = 1e-4;
        bool inject_bug = false;
        gradcheck->add_option("--draws", draws);
        gradcheck->add_option("--eps", eps);
        gradcheck->add_option("--tolerance", tolerance);
        gradcheck->add_flag("--inject-bug", inject_bug)->group("");  // hidden; test hook

        CLI::App* compare = app.add_subcommand("compare", "rank quality methods by pAUC");
        add_common(compare);
        add_data(compare);
        add_eval(compare);
        std::string cmp_checkpoint, cmp_alignment = "proper";
        std::vector<std::string> quality_csvs;
        compare->add_option("--checkpoint", cmp_checkpoint, "embedding model checkpoint")
            ->required();
        compare->add_option("--alignment", cmp_alignment,
                            "'proper', 'perturbed' or a landmarks CSV path");
        compare->add_option("--p", cfg.p, "perturbation radius for --alignment perturbed");
        compare->add_option("csvs", quality_csvs, "quality CSVs, one method each")->required();

        CLI::App* plot = app.add_subcommand("plot", "render an EDC CSV as SVG");
        std::string plot_in, plot_out = "edc.svg";
        plot->add_option("--input", plot_in, "EDC CSV")->required();
        plot->add_option("--output", plot_out, "SVG path");

        std::vector<std::string> reversed(args.rbegin(), args.rend());
        try {
            app.parse(reversed);
        } catch (const CLI::ParseError& e) {
            const int code = app.exit(e);
            return code == 0 ? 0 : 2;
        }

        if (synth->parsed()) return cmd_synth(cfg);
        if (distill->parsed()) return cmd_distill(cfg);
        if (evaluate->parsed())
            return cmd_evaluate(cfg, checkpoint, quality_source, alignment, emit_svg);
        if (gradcheck->parsed()) return cmd_grad_check(cfg, draws, eps, tolerance, inject_bug);
        if (compare->parsed()) return cmd_compare(cfg, cmp_checkpoint, quality_csvs, cmp_alignment);
        if (plot->parsed()) return cmd_plot(plot_in, plot_out);
        return 2;
    } catch (const UserError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace aikd
