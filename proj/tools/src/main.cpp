// veritas: trustworthy-segmentation numerics CLI.
//
// Subcommands: fuse, fallback-fuse, tune-margins, fit-gmm, procrustes,
// atlas-average, losses, dro-demo, metrics. Tabular output is CSV with a
// header row on stdout, structured output is JSON, logs go to stderr.
// Exit codes: 0 success, 1 validation error, 2 numerical failure.

#include "veritas/atlas.hpp"
#include "veritas/condition.hpp"
#include "veritas/contracts.hpp"
#include "veritas/dempster.hpp"
#include "veritas/dro.hpp"
#include "veritas/errors.hpp"
#include "veritas/fallback.hpp"
#include "veritas/fusion.hpp"
#include "veritas/labelset.hpp"
#include "veritas/metrics.hpp"
#include "veritas/parallel.hpp"
#include "veritas/volume_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>

namespace {

using nlohmann::json;

std::uint64_t resolve_seed(std::uint64_t flag_seed, bool seed_given) {
    if (seed_given) return flag_seed;
    if (const char* env = std::getenv("VERITAS_SEED")) {
        char* end = nullptr;
        const auto v = std::strtoull(env, &end, 10);
        if (end && *end == '\0') return v;
        throw std::invalid_argument("VERITAS_SEED is not an integer");
    }
    return 0;
}

void require_file(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
        throw std::invalid_argument("file does not exist: " + path.string());
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

// ---- fuse ----

int run_fuse(const std::string& ai_path, const std::string& fb_path,
             const std::string& image_path, const std::string& config_path,
             const std::string& out_path, const std::string& conflict_path, double epsilon_flag,
             bool epsilon_given) {
    require_file(ai_path);
    require_file(fb_path);
    require_file(image_path);
    require_file(config_path);

    veritas::FusionConfig cfg = veritas::FusionConfig::from_json_file(config_path);
    if (epsilon_given) cfg.epsilon = epsilon_flag;
    cfg.validate();

    const auto p_ai = veritas::read_probability_volume(ai_path);
    const auto p_fb = veritas::read_probability_volume(fb_path);
    const auto image = veritas::read_scalar_volume(image_path);
    if (!(p_ai.meta == p_fb.meta) || !(p_ai.meta == image.meta))
        throw std::invalid_argument("fuse: grid mismatch between inputs");
    if (p_ai.channels != cfg.space.size() || p_fb.channels != cfg.space.size())
        throw std::invalid_argument("fuse: channel count does not match the configured classes");

    const auto aw = veritas::build_contracts_from_fallback(cfg.space, p_fb, cfg.margins_mm, cfg.phi);
    const auto fused = veritas::trustworthy_fuse(p_ai, p_fb, aw, image, cfg);
    veritas::write_volume(fused, out_path);
    std::cerr << "fuse: wrote " << out_path << "\n";

    if (!conflict_path.empty()) {
        const auto conflict = veritas::failsafe_map(p_ai, aw);
        veritas::write_volume(conflict, conflict_path);
        std::cerr << "fuse: wrote " << conflict_path << "\n";
    }
    return 0;
}

// ---- fallback-fuse ----

int run_fallback_fuse(const std::string& manifest_path, const std::string& out_path) {
    require_file(manifest_path);
    const veritas::AtlasManifest manifest = veritas::load_atlas_manifest(manifest_path);
    const auto selected = veritas::select_atlases(manifest.entries, manifest.ga_weeks,
                                                  manifest.condition, manifest.params);
    std::vector<veritas::AtlasEntry> picked;
    for (auto idx : selected) picked.push_back(manifest.entries[idx]);
    std::cerr << "fallback-fuse: " << picked.size() << " of " << manifest.entries.size()
              << " atlases inside the GA window\n";
    const veritas::MaskVolume* mask =
        manifest.brain_mask ? &*manifest.brain_mask : nullptr;
    const auto fused = veritas::fuse_atlases(picked, manifest.subject, manifest.params, mask);
    veritas::write_volume(fused, out_path);
    std::cerr << "fallback-fuse: wrote " << out_path << "\n";
    return 0;
}

// ---- tune-margins ----

// Manifest: {"entries": [{"class": c, "condition": s,
//                         "pairs": [{"pred": path, "gt": path}, ...]}]}
int run_tune_margins(const std::string& manifest_path, const std::string& out_path) {
    require_file(manifest_path);
    std::ifstream in(manifest_path);
    json j;
    in >> j;
    const auto dir = std::filesystem::path(manifest_path).parent_path();

    veritas::MarginTable table;
    for (const auto& entry : j.at("entries")) {
        const std::string cls = entry.at("class").get<std::string>();
        const veritas::Condition cond =
            veritas::condition_from_string(entry.at("condition").get<std::string>());
        std::vector<std::pair<veritas::MaskVolume, veritas::MaskVolume>> pairs;
        for (const auto& pair : entry.at("pairs")) {
            const auto pred_path = dir / pair.at("pred").get<std::string>();
            const auto gt_path = dir / pair.at("gt").get<std::string>();
            require_file(pred_path);
            require_file(gt_path);
            pairs.emplace_back(veritas::read_mask_volume(pred_path),
                               veritas::read_mask_volume(gt_path));
        }
        table.set(cls, cond, veritas::tune_margin(pairs));
    }

    json out;
    for (const auto& [key, eta] : table.entries())
        out["margins_mm"][key.first][veritas::to_string(key.second)] = eta;
    // Fill the other-pathologies rule wherever both conditions are present.
    for (const auto& [key, eta] : table.entries()) {
        const auto& cls = key.first;
        if (table.has(cls, veritas::Condition::neurotypical) &&
            table.has(cls, veritas::Condition::spina_bifida))
            out["margins_mm"][cls]["other_pathologies"] =
                veritas::margin_for_other_pathologies(table, cls);
    }

    std::ofstream os(out_path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + out_path);
    os << out.dump(2) << '\n';
    std::cerr << "tune-margins: wrote " << out_path << "\n";
    return 0;
}

// ---- fit-gmm ----

int run_fit_gmm(const std::string& image_path, const std::string& mask_path,
                const std::string& out_path) {
    require_file(image_path);
    const auto image = veritas::read_scalar_volume(image_path);
    std::vector<double> samples;
    if (!mask_path.empty()) {
        require_file(mask_path);
        samples = veritas::masked_intensities(image, veritas::read_mask_volume(mask_path));
    } else {
        samples = image.data;
    }
    const auto fit = veritas::fit_gmm2(samples);

    json out;
    out["mu_low"] = fit.model.mu_low;
    out["sigma_low"] = fit.model.sigma_low;
    out["mu_high"] = fit.model.mu_high;
    out["sigma_high"] = fit.model.sigma_high;
    out["pi_low"] = fit.model.pi_low;
    out["pi_high"] = fit.model.pi_high;
    out["iterations"] = fit.iterations;
    out["log_likelihood"] = fit.log_likelihood.back();
    if (out_path.empty()) {
        std::cout << out.dump(2) << '\n';
    } else {
        std::ofstream os(out_path, std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write " + out_path);
        os << out.dump(2) << '\n';
        std::cerr << "fit-gmm: wrote " << out_path << "\n";
    }
    return 0;
}

// ---- procrustes ----

int run_procrustes(const std::string& csv_path, double ga_target_days, double sigma_days,
                   const std::string& out_path) {
    require_file(csv_path);
    const auto configs = veritas::read_landmarks_csv(csv_path);
    const auto sol = veritas::procrustes_solve(configs, ga_target_days, sigma_days);

    json out;
    out["objective"] = sol.objective;
    out["iterations"] = sol.iterations;
    out["barycenter_residual"] = sol.barycenter_residual;
    out["size_residual"] = sol.size_residual;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        json t;
        t["sample_id"] = configs[i].sample_id;
        t["scale"] = sol.transforms[i].scale;
        t["translation_mm"] = sol.transforms[i].translation;
        out["transforms"].push_back(t);
    }
    for (const auto& g : sol.consensus) out["consensus_mm"].push_back(g);

    if (out_path.empty()) {
        std::cout << out.dump(2) << '\n';
    } else {
        std::ofstream os(out_path, std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write " + out_path);
        os << out.dump(2) << '\n';
        std::cerr << "procrustes: wrote " << out_path << "\n";
    }
    return 0;
}

// ---- atlas-average ----

// Manifest: {"ga_target_days": d, "sigma_days"?: s, "flip_axis"?: a,
//            "mask"?: path, "volumes": [{"path": p, "ga_days": d}, ...]}
int run_atlas_average(const std::string& manifest_path, const std::string& out_path) {
    require_file(manifest_path);
    std::ifstream in(manifest_path);
    json j;
    in >> j;
    const auto dir = std::filesystem::path(manifest_path).parent_path();

    std::vector<veritas::ScalarVolume> volumes;
    std::vector<double> ga_days;
    for (const auto& v : j.at("volumes")) {
        const auto path = dir / v.at("path").get<std::string>();
        require_file(path);
        volumes.push_back(veritas::read_scalar_volume(path));
        ga_days.push_back(v.at("ga_days").get<double>());
    }
    std::optional<veritas::MaskVolume> mask;
    if (j.contains("mask")) {
        const auto path = dir / j.at("mask").get<std::string>();
        require_file(path);
        mask = veritas::read_mask_volume(path);
    }
    const auto averaged = veritas::weighted_average(
        volumes, ga_days, j.at("ga_target_days").get<double>(), j.value("flip_axis", 0),
        j.value("sigma_days", 3.0), mask ? &*mask : nullptr);
    veritas::write_volume(averaged, out_path);
    std::cerr << "atlas-average: wrote " << out_path << "\n";
    return 0;
}

// ---- losses ----

int run_losses(const std::string& probs_path, const std::string& labels_path, int alpha,
               double eps) {
    require_file(probs_path);
    require_file(labels_path);
    const auto pv = veritas::read_probability_volume(probs_path);
    const auto lv = veritas::read_labelset_volume(labels_path);
    if (!(pv.meta == lv.meta)) throw std::invalid_argument("losses: grid mismatch");

    veritas::SoftPrediction p;
    p.voxels = pv.meta.voxel_count();
    p.classes = pv.channels;
    p.p = pv.data;
    veritas::PartialAnnotation g;
    g.classes = pv.channels;
    g.g = lv.data;

    std::cout << "loss,value\n";
    std::cout << "leaf_dice," << format_double(veritas::leaf_dice(p, g, alpha, eps)) << "\n";
    std::cout << "marginal_dice," << format_double(veritas::marginal_dice(p, g, alpha, eps))
              << "\n";
    std::cout << "soft_target_dice," << format_double(veritas::soft_target_dice(p, g, alpha, eps))
              << "\n";
    std::cout << "marginal_cross_entropy," << format_double(veritas::marginal_cross_entropy(p, g))
              << "\n";
    return 0;
}

// ---- dro-demo ----

int run_dro_demo(const std::string& mode, double beta, std::uint64_t seed, int steps, double lr,
                 int batch_size, bool no_importance) {
    // 3-class blobs with a 1% minority class, the desk-scale class-imbalance
    // analogue; the eval set is balanced.
    const std::vector<std::array<double, 2>> centers{{-2.0, 0.0}, {2.0, 0.0}, {0.0, 1.8}};
    const veritas::ToyDataset train =
        veritas::make_blobs(centers, {1500, 1500, 15}, 1.0, seed * 7919 + 1);
    const veritas::ToyDataset eval_set =
        veritas::make_blobs(centers, {500, 500, 500}, 1.0, seed * 7919 + 2);

    veritas::ToyTrainConfig cfg;
    cfg.mode = mode == "dro" ? veritas::TrainMode::dro : veritas::TrainMode::erm;
    cfg.beta = beta;
    cfg.lr = lr;
    cfg.steps = steps;
    cfg.batch_size = batch_size;
    cfg.importance_sampling = !no_importance;
    cfg.seed = seed;
    const auto result = veritas::toy_train(train, eval_set, cfg);

    std::cout << "step,mean_train_loss,sampler_entropy";
    for (int c = 0; c < train.classes; ++c) std::cout << ",acc_class" << c;
    std::cout << "\n";
    for (const auto& s : result.stats) {
        std::cout << s.step << "," << format_double(s.mean_train_loss) << ","
                  << format_double(s.sampler_entropy);
        for (double a : s.per_class_accuracy) std::cout << "," << format_double(a);
        std::cout << "\n";
    }
    return 0;
}

// ---- metrics ----

int run_metrics(const std::string& pred_path, const std::string& gt_path,
                const std::string& classes_path, const std::string& case_id) {
    require_file(pred_path);
    require_file(gt_path);

    auto load_labels = [](const std::string& path) -> veritas::LabelSetVolume {
        auto any = veritas::read_volume(path);
        if (auto* ls = std::get_if<veritas::LabelSetVolume>(&any)) return std::move(*ls);
        if (auto* pv = std::get_if<veritas::ProbabilityVolume>(&any))
            return veritas::argmax_labels(*pv);
        throw std::invalid_argument(path + ": metrics needs a labelset or probability volume");
    };
    const auto pred = load_labels(pred_path);
    const auto gt = load_labels(gt_path);
    if (!(pred.meta == gt.meta)) throw std::invalid_argument("metrics: grid mismatch");

    int num_classes = 0;
    std::vector<std::string> names;
    if (!classes_path.empty()) {
        require_file(classes_path);
        std::ifstream in(classes_path);
        json j;
        in >> j;
        names = j.at("classes").get<std::vector<std::string>>();
        num_classes = static_cast<int>(names.size());
    } else {
        for (const auto m : pred.data)
            for (int c = 0; c < veritas::kMaxClasses; ++c)
                if (m.contains(c)) num_classes = std::max(num_classes, c + 1);
        for (const auto m : gt.data)
            for (int c = 0; c < veritas::kMaxClasses; ++c)
                if (m.contains(c)) num_classes = std::max(num_classes, c + 1);
        for (int c = 0; c < num_classes; ++c) names.push_back("class" + std::to_string(c));
    }

    std::cout << "case_id,class,dice,hd95,hd95_fn\n";
    for (int c = 0; c < num_classes; ++c) {
        veritas::MaskVolume mp, mg;
        mp.meta = mg.meta = pred.meta;
        mp.data.resize(pred.data.size());
        mg.data.resize(gt.data.size());
        for (std::size_t v = 0; v < pred.data.size(); ++v) {
            mp.data[v] = pred.data[v].contains(c) ? 1 : 0;
            mg.data[v] = gt.data[v].contains(c) ? 1 : 0;
        }
        const double d = veritas::dice(mp, mg);
        std::string hd = "nan", hdfn = "nan";
        if (!mp.empty_mask() && !mg.empty_mask()) hd = format_double(veritas::hd95(mp, mg));
        if (!mp.empty_mask()) hdfn = format_double(veritas::hd95_fn(mp, mg));
        std::cout << case_id << "," << names[c] << "," << format_double(d) << "," << hd << ","
                  << hdfn << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"veritas: contract-based trustworthy segmentation numerics"};
    app.require_subcommand(1);

    int threads = 0;
    app.add_option("--threads", threads, "Cap on worker threads (default: all cores)");

    std::uint64_t seed = 0;
    bool seed_given = false;

    // fuse
    auto* fuse = app.add_subcommand("fuse", "Trustworthy fusion of backbone + fallback maps");
    std::string ai_path, fb_path, image_path, config_path, out_path, conflict_path;
    double epsilon = 1e-3;
    bool epsilon_given = false;
    fuse->add_option("--ai", ai_path, "Backbone probability volume")->required();
    fuse->add_option("--fallback", fb_path, "Fallback probability volume")->required();
    fuse->add_option("--image", image_path, "Subject intensity volume")->required();
    fuse->add_option("--config", config_path, "Contract config JSON")->required();
    fuse->add_option("--out", out_path, "Output probability volume")->required();
    fuse->add_option("--conflict", conflict_path, "Optional conflict-map output");
    fuse->add_option("--epsilon", epsilon, "Fallback blend weight (overrides config)")
        ->check(CLI::Range(1e-12, 1.0))
        ->each([&](const std::string&) { epsilon_given = true; });

    // fallback-fuse
    auto* ffuse = app.add_subcommand("fallback-fuse", "Heat-kernel fusion of warped atlases");
    std::string manifest_path;
    std::string ffuse_out;
    ffuse->add_option("--manifest", manifest_path, "Atlas manifest JSON")->required();
    ffuse->add_option("--out", ffuse_out, "Output probability volume")->required();

    // tune-margins
    auto* tune = app.add_subcommand("tune-margins", "95th-percentile margin tuning");
    std::string tune_manifest, tune_out;
    tune->add_option("--pairs", tune_manifest, "Manifest of (pred, gt) mask pairs")->required();
    tune->add_option("--out", tune_out, "Output margin table JSON")->required();

    // fit-gmm
    auto* gmm = app.add_subcommand("fit-gmm", "Two-component GMM fit of image intensities");
    std::string gmm_image, gmm_mask, gmm_out;
    gmm->add_option("--image", gmm_image, "Scalar volume")->required();
    gmm->add_option("--mask", gmm_mask, "Optional mask volume");
    gmm->add_option("--out", gmm_out, "Output JSON (stdout when omitted)");

    // procrustes
    auto* proc = app.add_subcommand("procrustes", "Weighted generalized Procrustes alignment");
    std::string proc_csv, proc_out;
    double proc_ga = 0.0, proc_sigma = 3.0;
    proc->add_option("--landmarks", proc_csv, "Landmark CSV")->required();
    proc->add_option("--ga-target", proc_ga, "Target gestational age in days")->required();
    proc->add_option("--sigma-days", proc_sigma, "Temporal kernel width in days");
    proc->add_option("--out", proc_out, "Output JSON (stdout when omitted)");

    // atlas-average
    auto* avg = app.add_subcommand("atlas-average", "Time-weighted symmetrized averaging");
    std::string avg_manifest, avg_out;
    avg->add_option("--manifest", avg_manifest, "Volume manifest JSON")->required();
    avg->add_option("--out", avg_out, "Output scalar volume")->required();

    // losses
    auto* losses = app.add_subcommand("losses", "Label-set losses of a prediction/annotation pair");
    std::string losses_probs, losses_labels;
    int losses_alpha = 2;
    double losses_eps = 1e-5;
    losses->add_option("--probs", losses_probs, "Probability volume")->required();
    losses->add_option("--labels", losses_labels, "Label-set volume")->required();
    losses->add_option("--alpha", losses_alpha, "Dice exponent (1 or 2)")->check(CLI::Range(1, 2));
    losses->add_option("--eps", losses_eps, "Dice smoothing constant");

    // dro-demo
    auto* dro = app.add_subcommand("dro-demo", "ERM vs DRO on synthetic imbalanced blobs");
    std::string dro_mode = "erm";
    double dro_beta = 10.0, dro_lr = 0.2;
    int dro_steps = 4000, dro_batch = 8;
    bool dro_no_importance = false;
    dro->add_option("--mode", dro_mode, "erm or dro")
        ->check(CLI::IsMember({"erm", "dro"}))
        ->required();
    dro->add_option("--beta", dro_beta, "Robustness parameter");
    dro->add_option("--lr", dro_lr, "Learning rate");
    dro->add_option("--steps", dro_steps, "Gradient steps");
    dro->add_option("--batch", dro_batch, "Batch size");
    dro->add_flag("--no-importance", dro_no_importance, "Disable importance weighting");
    dro->add_option("--seed", seed, "RNG seed (default: VERITAS_SEED or 0)")
        ->each([&](const std::string&) { seed_given = true; });

    // metrics
    auto* metrics = app.add_subcommand("metrics", "Per-class dice / hd95 / hd95_fn CSV");
    std::string met_pred, met_gt, met_classes, met_case = "case";
    metrics->add_option("--pred", met_pred, "Predicted labelset/probability volume")->required();
    metrics->add_option("--gt", met_gt, "Ground-truth labelset/probability volume")->required();
    metrics->add_option("--classes", met_classes, "Label space JSON ({\"classes\": [...]})");
    metrics->add_option("--case-id", met_case, "Case identifier for the CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        veritas::set_thread_cap(threads);
        if (fuse->parsed())
            return run_fuse(ai_path, fb_path, image_path, config_path, out_path, conflict_path,
                            epsilon, epsilon_given);
        if (ffuse->parsed()) return run_fallback_fuse(manifest_path, ffuse_out);
        if (tune->parsed()) return run_tune_margins(tune_manifest, tune_out);
        if (gmm->parsed()) return run_fit_gmm(gmm_image, gmm_mask, gmm_out);
        if (proc->parsed()) return run_procrustes(proc_csv, proc_ga, proc_sigma, proc_out);
        if (avg->parsed()) return run_atlas_average(avg_manifest, avg_out);
        if (losses->parsed()) return run_losses(losses_probs, losses_labels, losses_alpha, losses_eps);
        if (dro->parsed())
            return run_dro_demo(dro_mode, dro_beta, resolve_seed(seed, seed_given), dro_steps,
                                dro_lr, dro_batch, dro_no_importance);
        if (metrics->parsed()) return run_metrics(met_pred, met_gt, met_classes, met_case);
        std::cerr << "no subcommand given\n";
        return 1;
    } catch (const veritas::numerical_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: malformed JSON input: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
