#include "ccgm/cli/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ccgm/core/errors.hpp"
#include "ccgm/data/dataset.hpp"
#include "ccgm/eval/eval.hpp"
#include "ccgm/negatives/negatives.hpp"
#include "ccgm/niqe/niqe.hpp"
#include "ccgm/persistence/persistence.hpp"
#include "ccgm/trainer/trainer.hpp"
#include "ccgm/vicinal/vicinal.hpp"

namespace ccgm::cli {

namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Config resolution

std::uint64_t seed_of(const Config& cfg, const std::string& key) {
    return static_cast<std::uint64_t>(cfg.get_int(key, cfg.get_int("run.seed", 0)));
}

vicinal::VicinityParams resolve_vicinity(const Config& cfg) {
    vicinal::VicinityParams p;
    if (cfg.has("vicinity.preset")) p = vicinal::vicinity_preset(cfg.require_string("vicinity.preset"));
    if (cfg.has("vicinity.sigma")) p.sigma = cfg.get_double("vicinity.sigma", p.sigma);
    if (cfg.has("vicinity.nu")) p.nu = cfg.get_double("vicinity.nu", p.nu);
    if (cfg.has("vicinity.kappa")) p.kappa = cfg.get_double("vicinity.kappa", p.kappa);
    p.weight_floor = cfg.get_double("vicinity.weight_floor", 1e-3);
    if (!cfg.has("vicinity.preset") &&
        (!cfg.has("vicinity.sigma") || !cfg.has("vicinity.nu") || !cfg.has("vicinity.kappa")))
        throw ConfigError("vicinity requires a preset or explicit sigma/nu/kappa values");
    return p;
}

niqe::NiqeSettings resolve_niqe(const Config& cfg) {
    niqe::NiqeSettings s;
    s.patch_size = static_cast<int>(cfg.get_int("niqe.patch_size", 16));
    s.sharpness_quantile = cfg.get_double("niqe.sharpness_quantile", 0.75);
    return s;
}

trainer::TrainConfig resolve_train(const Config& cfg, const data::Dataset& ds, bool dual) {
    trainer::TrainConfig t;
    t.steps = static_cast<std::size_t>(cfg.get_int("train.steps", 1000));
    t.disc_batch = static_cast<std::size_t>(cfg.get_int("train.disc_batch", 64));
    t.gen_batch = static_cast<std::size_t>(cfg.get_int("train.gen_batch", 64));
    t.disc_updates_per_step = static_cast<int>(cfg.get_int("train.disc_updates_per_step", 2));
    t.lr = cfg.get_double("train.lr", 1e-4);
    t.beta1 = cfg.get_double("train.beta1", 0.5);
    t.beta2 = cfg.get_double("train.beta2", 0.999);
    t.vicinity = resolve_vicinity(cfg);
    t.dual_nda.variant = losses::loss_variant_from_string(
        cfg.get_string("train.loss_variant", "vanilla"));
    if (dual) {
        t.dual_nda.lambda1 = cfg.get_double("train.lambda1", 0.0);
        t.dual_nda.lambda2 = cfg.get_double("train.lambda2", 0.0);
        t.dual_nda.lambda_nda = cfg.get_double("train.lambda_nda", 0.0);
    }
    t.type1.q1 = cfg.get_double("train.q1", 0.9);
    t.nda_start_step = static_cast<std::size_t>(cfg.get_int("train.nda_start_step", 0));
    t.augment = cfg.get_bool("train.augment", false);
    t.jigsaw_grid = static_cast<int>(cfg.get_int("train.jigsaw_grid", 2));
    t.checkpoint_every = static_cast<std::size_t>(cfg.get_int("train.checkpoint_every", 0));
    t.seed = seed_of(cfg, "train.seed");

    t.gen_spec.z_dim = static_cast<std::size_t>(cfg.get_int("model.z_dim", 128));
    t.gen_spec.label_embed_dim = static_cast<std::size_t>(cfg.get_int("model.label_embed_dim", 128));
    t.gen_spec.base_channels = static_cast<std::size_t>(cfg.get_int("model.g_channels", 64));
    t.gen_spec.out_channels = ds.channels();
    t.gen_spec.resolution = ds.height();
    t.disc_spec.base_channels = static_cast<std::size_t>(cfg.get_int("model.d_channels", 32));
    t.disc_spec.label_embed_dim = t.gen_spec.label_embed_dim;
    t.disc_spec.in_channels = ds.channels();
    t.disc_spec.resolution = ds.height();
    t.disc_spec.spectral_norm = cfg.get_bool("model.spectral_norm", true);
    return t;
}

eval::EvalConfig resolve_eval(const Config& cfg) {
    eval::EvalConfig e;
    const auto n_centers = static_cast<std::size_t>(cfg.get_int("eval.centers", 40));
    const double lo = cfg.get_double("eval.center_min", 0.05);
    const double hi = cfg.get_double("eval.center_max", 0.95);
    if (n_centers < 1 || lo > hi) throw ConfigError("invalid eval center grid");
    for (std::size_t i = 0; i < n_centers; ++i) {
        const double f = n_centers == 1 ? 0.5
                                        : static_cast<double>(i) / static_cast<double>(n_centers - 1);
        e.centers.push_back(lo + f * (hi - lo));
    }
    e.radius = cfg.get_double("eval.radius", 0.0125);
    e.min_per_window = static_cast<std::size_t>(cfg.get_int("eval.min_per_window", 50));
    e.bins = static_cast<std::size_t>(cfg.get_int("eval.bins", 8));
    return e;
}

// ---------------------------------------------------------------------------
// Artifact access

void write_snapshot(const Config& cfg, const fs::path& run_dir, const std::string& command) {
    fs::create_directories(run_dir);
    persist::write_text_file(run_dir / ("config." + command + ".resolved.txt"), cfg.dump());
}

data::Dataset load_run_dataset(const fs::path& run_dir) {
    const fs::path dir = run_dir / "dataset";
    if (!fs::exists(dir / "manifest.json"))
        throw ConfigError("no dataset in " + dir.string() + " (run make-data first)");
    return data::Dataset::load_cache(dir);
}

niqe::NiqeModel load_run_niqe(const fs::path& run_dir) {
    const fs::path path = run_dir / "niqe_model.bin";
    if (!fs::exists(path))
        throw ConfigError("no NIQE model at " + path.string() + " (run fit-niqe first)");
    return niqe::NiqeModel::load(path);
}

fs::path checkpoint_path(const fs::path& run_dir, const std::string& model) {
    if (model != "baseline" && model != "dualnda")
        throw ConfigError("model must be 'baseline' or 'dualnda', got '" + model + "'");
    return run_dir / model / "checkpoints" / "checkpoint_final.bin";
}

struct LoadedGenerator {
    trainer::TrainConfig config;
    std::unique_ptr<models::GeneratorF> gen;
};

LoadedGenerator load_generator(const fs::path& ckpt) {
    if (!fs::exists(ckpt))
        throw ConfigError("no checkpoint at " + ckpt.string() +
                          " (run train-baseline / train-dualnda first)");
    auto r = persist::ArtifactReader::open(ckpt, persist::kCheckpointMagic);
    LoadedGenerator out;
    out.config = trainer::TrainConfig::from_json(r.manifest().at("config").dump());
    out.gen = std::make_unique<models::GeneratorF>(out.config.gen_spec, 0);
    out.gen->load_state(r, "G.");
    return out;
}

negatives::GeneratorFn generator_fn(models::GeneratorF& gen) {
    return [&gen](double label, Rng& rng) {
        Tensor z({1, gen.spec().z_dim});
        for (std::size_t d = 0; d < gen.spec().z_dim; ++d)
            z[d] = static_cast<float>(rng.normal());
        Tensor y({1, 1});
        y[0] = static_cast<float>(label);
        Tensor batch = gen.forward(z, y, /*training=*/false);
        Tensor img({batch.dim(1), batch.dim(2), batch.dim(3)});
        std::copy(batch.flat().begin(), batch.flat().end(), img.flat().begin());
        return img;
    };
}

eval::EvalModels load_or_train_eval_models(const Config& cfg, const fs::path& run_dir,
                                           const data::Dataset& ds) {
    const fs::path path = run_dir / "eval_models.bin";
    if (fs::exists(path)) return eval::EvalModels::load(path);
    eval::EvalTrainSettings s;
    s.epochs = static_cast<std::size_t>(cfg.get_int("eval.epochs", 8));
    s.bins = static_cast<std::size_t>(cfg.get_int("eval.bins", 8));
    auto m = eval::train_eval_models(ds, s, seed_of(cfg, "eval.seed"));
    m.save(path);
    return m;
}

std::vector<data::LabeledImage> sample_from_checkpoint(const Config& cfg, const fs::path& run_dir,
                                                       const std::string& model,
                                                       const data::Dataset& ds) {
    auto loaded = load_generator(checkpoint_path(run_dir, model));
    const auto ec = resolve_eval(cfg);
    const auto n_per = static_cast<std::size_t>(
        cfg.get_int("sample.n_per_label", cfg.get_int("eval.n_per_center", 50)));
    return trainer::Trainer::sample(*loaded.gen, ds.label_space(), ec.centers, n_per,
                                    seed_of(cfg, "sample.seed"));
}

// ---------------------------------------------------------------------------
// Metric bundle used by eval and ablate

struct MetricRow {
    double sfid_mean, sfid_std;
    double niqe_mean, niqe_std;
    double diversity_mean, diversity_std;
    double label_mean, label_std;
};

MetricRow evaluate_fakes(const Config& cfg, const data::Dataset& ds,
                         const std::vector<data::LabeledImage>& fakes, eval::EvalModels& models,
                         const niqe::NiqeModel& niqe_model, eval::MetricsReport* report_out) {
    const auto ec = resolve_eval(cfg);
    auto sfid_series = eval::sfid(models.extractor, ds.images(), fakes, ec);
    auto niqe_agg = eval::niqe_aggregate(niqe_model, fakes, ec);
    auto ls = eval::label_score(models.regressor, fakes, ds.label_space(), ec);
    auto div = eval::diversity(models.classifier, fakes, ec);
    MetricRow row{sfid_series.mean, sfid_series.stddev, niqe_agg.per_center.mean,
                  niqe_agg.per_center.stddev, div.mean, div.stddev, ls.per_center.mean,
                  ls.per_center.stddev};
    if (report_out)
        *report_out = eval::MetricsReport{std::move(sfid_series), std::move(niqe_agg),
                                          std::move(ls), std::move(div), ds.label_space()};
    return row;
}

nlohmann::json row_json(const MetricRow& r) {
    return {{"sfid", r.sfid_mean},           {"sfid_std", r.sfid_std},
            {"niqe", r.niqe_mean},           {"niqe_std", r.niqe_std},
            {"diversity", r.diversity_mean}, {"diversity_std", r.diversity_std},
            {"label_score", r.label_mean},   {"label_score_std", r.label_std}};
}

std::string fmt9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::string ablate_csv_from_json(const nlohmann::json& table) {
    std::string csv =
        "setting,sfid,sfid_std,niqe,niqe_std,diversity,diversity_std,label_score,label_score_std\n";
    for (const auto& row : table.at("rows")) {
        csv += row.at("setting").get<std::string>();
        for (const char* k : {"sfid", "sfid_std", "niqe", "niqe_std", "diversity",
                              "diversity_std", "label_score", "label_score_std"})
            csv += "," + fmt9(row.at(k).get<double>());
        csv += "\n";
    }
    return csv;
}

std::string report_csv_from_json(const nlohmann::json& table) {
    // Figure-shaped view: per setting, NIQE and Label Score next to the
    // baseline reference values.
    const auto& base = table.at("baseline");
    std::string csv = "setting,niqe,label_score,baseline_niqe,baseline_label_score\n";
    for (const auto& row : table.at("rows")) {
        csv += row.at("setting").get<std::string>() + "," + fmt9(row.at("niqe").get<double>()) +
               "," + fmt9(row.at("label_score").get<double>()) + "," +
               fmt9(base.at("niqe").get<double>()) + "," +
               fmt9(base.at("label_score").get<double>()) + "\n";
    }
    return csv;
}

void write_series_csv_from_json(const fs::path& path, const nlohmann::json& series) {
    std::string text = "center_raw,value\n";
    for (const auto& row : series.at("per_center"))
        text += fmt9(row[0].get<double>()) + "," + fmt9(row[1].get<double>()) + "\n";
    persist::write_text_file(path, text);
}

void reexport_metrics_json(const fs::path& dir, const nlohmann::json& j) {
    write_series_csv_from_json(dir / "sfid.csv", j.at("sfid"));
    write_series_csv_from_json(dir / "niqe.csv", j.at("niqe"));
    write_series_csv_from_json(dir / "label_score.csv", j.at("label_score"));
    write_series_csv_from_json(dir / "diversity.csv", j.at("diversity"));
    std::string summary =
        "sfid,sfid_std,niqe,niqe_std,diversity,diversity_std,label_score,label_score_std\n";
    summary += fmt9(j.at("sfid").at("mean").get<double>()) + "," +
               fmt9(j.at("sfid").at("std").get<double>()) + "," +
               fmt9(j.at("niqe").at("mean").get<double>()) + "," +
               fmt9(j.at("niqe").at("std").get<double>()) + "," +
               fmt9(j.at("diversity").at("mean").get<double>()) + "," +
               fmt9(j.at("diversity").at("std").get<double>()) + "," +
               fmt9(j.at("label_score").at("mean").get<double>()) + "," +
               fmt9(j.at("label_score").at("std").get<double>()) + "\n";
    persist::write_text_file(dir / "summary.csv", summary);
}

// ---------------------------------------------------------------------------
// Commands

void cmd_make_data(const Config& cfg, const fs::path& run_dir) {
    const std::string kind = cfg.get_string("data.kind", "rotated_bar");
    data::Dataset ds = [&] {
        if (kind == "folder") {
            data::FolderOptions opt;
            opt.resolution = static_cast<int>(cfg.get_int("data.resolution", 32));
            opt.channels = static_cast<int>(cfg.get_int("data.channels", 1));
            data::FolderLoadReport rep;
            auto d = data::load_folder(cfg.require_string("data.folder"),
                                       cfg.require_string("data.labels_file"), opt, &rep);
            for (const auto& wmsg : rep.warnings) std::cerr << "make-data: " << wmsg << "\n";
            std::cerr << "make-data: loaded " << rep.loaded << " images, skipped "
                      << rep.skipped_missing + rep.skipped_bad_label << " rows\n";
            return d;
        }
        return data::make_synthetic(data::synthetic_kind_from_string(kind),
                                    static_cast<std::size_t>(cfg.get_int("data.n", 5000)),
                                    static_cast<int>(cfg.get_int("data.resolution", 32)),
                                    cfg.get_double("data.imbalance", 0.0),
                                    seed_of(cfg, "run.seed"),
                                    static_cast<int>(cfg.get_int("data.distinct", 0)));
    }();
    ds.save_cache(run_dir / "dataset");
    std::cout << "dataset: " << ds.size() << " images, " << ds.channels() << "x" << ds.height()
              << "x" << ds.width() << ", " << ds.label_space().distinct_labels().size()
              << " distinct labels (" << data::to_string(ds.label_space().kind()) << ")\n";
}

void cmd_train(const Config& cfg, const fs::path& run_dir, bool dual) {
    const auto ds = load_run_dataset(run_dir);
    auto tc = resolve_train(cfg, ds, dual);
    std::optional<negatives::NegativePool> pool;
    if (dual && tc.dual_nda.lambda2 > 0.0) {
        const fs::path pool_path = run_dir / "pool.bin";
        if (!fs::exists(pool_path))
            throw ConfigError("train-dualnda needs a Type II pool at " + pool_path.string() +
                              "; run build-negatives first");
        pool = negatives::NegativePool::load(pool_path);
    }
    const fs::path phase_dir = run_dir / (dual ? "dualnda" : "baseline");
    fs::create_directories(phase_dir);
    trainer::Trainer t(tc, ds, pool ? &*pool : nullptr);
    t.run(tc.steps, phase_dir / "log.csv", phase_dir / "checkpoints");
    std::cout << (dual ? "train-dualnda" : "train-baseline") << ": " << tc.steps
              << " steps done, final checkpoint at "
              << (phase_dir / "checkpoints" / "checkpoint_final.bin").string() << "\n";
}

void cmd_fit_niqe(const Config& cfg, const fs::path& run_dir) {
    const auto ds = load_run_dataset(run_dir);
    const auto model = niqe::fit_niqe_model(ds, resolve_niqe(cfg));
    model.save(run_dir / "niqe_model.bin");
    std::cout << "fit-niqe: model written to " << (run_dir / "niqe_model.bin").string() << "\n";
}

void cmd_build_negatives(const Config& cfg, const fs::path& run_dir) {
    const auto ds = load_run_dataset(run_dir);
    const auto niqe_model = load_run_niqe(run_dir);
    auto loaded = load_generator(checkpoint_path(run_dir, "baseline"));

    std::string mode = cfg.get_string("negatives.mode", "auto");
    if (mode == "auto")
        mode = ds.label_space().kind() == data::LabelKind::integer_valued ? "integer"
                                                                          : "continuous";
    const double q2 = cfg.get_double("negatives.q2", 0.9);
    const auto seed = seed_of(cfg, "negatives.seed");
    const std::string gen_id = "baseline@" + std::to_string(loaded.config.hash());

    negatives::BuildReport rep;
    auto fn = generator_fn(*loaded.gen);
    negatives::NegativePool pool = [&] {
        if (mode == "integer") {
            return negatives::build_type2_integer(
                fn, ds.label_space(),
                static_cast<std::size_t>(cfg.get_int("negatives.per_label", 200)), q2, niqe_model,
                seed, gen_id, &rep);
        }
        if (mode != "continuous") throw ConfigError("negatives.mode must be integer|continuous|auto");
        const auto& labels = ds.labels_norm();
        negatives::LabelSamplerFn sampler = [&labels](Rng& rng) {
            return labels[rng.uniform_index(labels.size())];
        };
        return negatives::build_type2_continuous(
            fn, sampler, static_cast<std::size_t>(cfg.get_int("negatives.m_total", 2000)), q2,
            niqe_model, seed, gen_id, &rep);
    }();
    pool.save(run_dir / "pool.bin");
    std::cout << "build-negatives: generated " << rep.generated << ", kept " << pool.size()
              << " (degenerate " << rep.degenerate << "), pool at "
              << (run_dir / "pool.bin").string() << "\n";
}

void cmd_sample(const Config& cfg, const fs::path& run_dir, const std::string& model) {
    const auto ds = load_run_dataset(run_dir);
    const auto fakes = sample_from_checkpoint(cfg, run_dir, model, ds);
    trainer::save_fake_set(run_dir / "samples" / model, fakes, ds.label_space());
    std::cout << "sample: wrote " << fakes.size() << " fake images to "
              << (run_dir / "samples" / model).string() << "\n";
}

void cmd_eval(const Config& cfg, const fs::path& run_dir, const std::string& model) {
    const auto ds = load_run_dataset(run_dir);
    const auto niqe_model = load_run_niqe(run_dir);
    auto eval_models = load_or_train_eval_models(cfg, run_dir, ds);

    const fs::path sample_dir = run_dir / "samples" / model;
    std::vector<data::LabeledImage> fakes;
    if (fs::exists(sample_dir / "manifest.json")) {
        fakes = data::Dataset::load_cache(sample_dir).images();
    } else {
        fakes = sample_from_checkpoint(cfg, run_dir, model, ds);
    }

    eval::MetricsReport report{{}, {}, {}, {}, ds.label_space()};
    evaluate_fakes(cfg, ds, fakes, eval_models, niqe_model, &report);
    eval::export_line_graphs(report, run_dir / "eval" / model);
    std::cout << "eval(" << model << "): sfid=" << report.sfid.mean
              << " niqe=" << report.niqe.per_center.mean
              << " diversity=" << report.diversity.mean
              << " label_score=" << report.label_score.per_center.mean << " -> "
              << (run_dir / "eval" / model).string() << "\n";
}

void cmd_ablate(const Config& cfg, const fs::path& run_dir) {
    const std::string axis = cfg.get_string("ablate.axis", "q1");
    const auto ds = load_run_dataset(run_dir);
    const auto niqe_model = load_run_niqe(run_dir);
    auto eval_models = load_or_train_eval_models(cfg, run_dir, ds);

    struct Setting {
        std::string name;
        Config cfg;
        bool reuse_baseline = false;
    };
    std::vector<Setting> settings;

    if (axis == "q1") {
        for (double q1 : cfg.get_double_list("ablate.q1_grid", {0.3, 0.5, 0.7, 0.9})) {
            Setting s{fmt9(q1), cfg, false};
            s.cfg.set("train.q1", fmt9(q1));
            settings.push_back(std::move(s));
        }
    } else if (axis == "q2") {
        for (double q2 : cfg.get_double_list("ablate.q2_grid", {0.5, 0.6, 0.7, 0.8, 0.9})) {
            Setting s{fmt9(q2), cfg, false};
            s.cfg.set("negatives.q2", fmt9(q2));
            settings.push_back(std::move(s));
        }
    } else if (axis == "lambda") {
        // lambda1 + lambda2 grid at the preset 1:2 split
        for (double lb : cfg.get_double_list("ablate.lambda_grid", {0.2, 0.3, 0.4, 0.5, 0.6, 0.7})) {
            Setting s{fmt9(lb), cfg, false};
            s.cfg.set("train.lambda1", fmt9(lb / 3.0));
            s.cfg.set("train.lambda2", fmt9(2.0 * lb / 3.0));
            settings.push_back(std::move(s));
        }
    } else if (axis == "combo") {
        const auto combos = cfg.get_string_list(
            "ablate.combo_grid",
            {"none", "nda", "nda+type1", "nda+type2", "nda+both", "type1", "type2", "both"});
        const std::string l1 = fmt9(cfg.get_double("train.lambda1", 0.1));
        const std::string l2 = fmt9(cfg.get_double("train.lambda2", 0.2));
        const std::string ln = fmt9(cfg.get_double("train.lambda_nda", 0.25));
        for (const auto& combo : combos) {
            Setting s{combo, cfg, combo == "none"};
            s.cfg.set("train.lambda1", "0");
            s.cfg.set("train.lambda2", "0");
            s.cfg.set("train.lambda_nda", "0");
            const bool nda = combo.find("nda") != std::string::npos;
            const bool t1 = combo.find("type1") != std::string::npos ||
                            combo.find("both") != std::string::npos;
            const bool t2 = combo.find("type2") != std::string::npos ||
                            combo.find("both") != std::string::npos;
            if (nda) s.cfg.set("train.lambda_nda", ln);
            if (t1) s.cfg.set("train.lambda1", l1);
            if (t2) s.cfg.set("train.lambda2", l2);
            settings.push_back(std::move(s));
        }
    } else {
        throw ConfigError("ablate.axis must be one of q1|q2|lambda|combo, got '" + axis + "'");
    }

    // Shared phase: baseline metrics as the reference row.
    const auto baseline_fakes = sample_from_checkpoint(cfg, run_dir, "baseline", ds);
    const MetricRow baseline_row =
        evaluate_fakes(cfg, ds, baseline_fakes, eval_models, niqe_model, nullptr);

    nlohmann::json table;
    table["axis"] = axis;
    table["baseline"] = row_json(baseline_row);
    table["rows"] = nlohmann::json::array();

    for (const auto& s : settings) {
        const fs::path sub = run_dir / "ablate" / axis / s.name;
        fs::create_directories(sub);
        MetricRow row{};
        if (s.reuse_baseline) {
            row = baseline_row;
        } else {
            // Per-setting pool (q2 may differ), then a dual-NDA phase.
            Config scfg = s.cfg;
            const double l2v = scfg.get_double("train.lambda2", 0.0);
            std::optional<negatives::NegativePool> pool;
            if (l2v > 0.0) {
                auto loaded = load_generator(checkpoint_path(run_dir, "baseline"));
                auto fn = generator_fn(*loaded.gen);
                const double q2 = scfg.get_double("negatives.q2", 0.9);
                const auto pseed = seed_of(scfg, "negatives.seed");
                const std::string gen_id = "baseline@" + std::to_string(loaded.config.hash());
                if (ds.label_space().kind() == data::LabelKind::integer_valued) {
                    pool = negatives::build_type2_integer(
                        fn, ds.label_space(),
                        static_cast<std::size_t>(scfg.get_int("negatives.per_label", 200)), q2,
                        niqe_model, pseed, gen_id);
                } else {
                    const auto& labels = ds.labels_norm();
                    negatives::LabelSamplerFn sampler = [&labels](Rng& rng) {
                        return labels[rng.uniform_index(labels.size())];
                    };
                    pool = negatives::build_type2_continuous(
                        fn, sampler,
                        static_cast<std::size_t>(scfg.get_int("negatives.m_total", 2000)), q2,
                        niqe_model, pseed, gen_id);
                }
            }
            auto tc = resolve_train(scfg, ds, /*dual=*/true);
            trainer::Trainer t(tc, ds, pool ? &*pool : nullptr);
            t.run(tc.steps, sub / "log.csv", std::nullopt);
            auto fakes = trainer::Trainer::sample(t.generator(), ds.label_space(),
                                                  resolve_eval(scfg).centers,
                                                  static_cast<std::size_t>(scfg.get_int(
                                                      "eval.n_per_center", 50)),
                                                  seed_of(scfg, "sample.seed"));
            row = evaluate_fakes(scfg, ds, fakes, eval_models, niqe_model, nullptr);
        }
        auto rj = row_json(row);
        rj["setting"] = s.name;
        table["rows"].push_back(rj);
        std::cout << "ablate[" << axis << "] " << s.name << ": sfid=" << row.sfid_mean
                  << " niqe=" << row.niqe_mean << " label_score=" << row.label_mean << "\n";
    }

    fs::create_directories(run_dir / "ablate");
    persist::write_text_file(run_dir / "ablate" / ("table_" + axis + ".json"), table.dump(2) + "\n");
    persist::write_text_file(run_dir / "ablate" / ("table_" + axis + ".csv"),
                             ablate_csv_from_json(table));
    persist::write_text_file(run_dir / "ablate" / ("report_" + axis + ".csv"),
                             report_csv_from_json(table));
}

void cmd_report(const fs::path& run_dir) {
    bool found = false;
    for (const char* model : {"baseline", "dualnda"}) {
        const fs::path dir = run_dir / "eval" / model;
        if (fs::exists(dir / "metrics.json")) {
            reexport_metrics_json(dir, nlohmann::json::parse(
                                           persist::read_text_file(dir / "metrics.json")));
            std::cout << "report: re-exported " << dir.string() << "\n";
            found = true;
        }
    }
    const fs::path ablate_dir = run_dir / "ablate";
    if (fs::exists(ablate_dir)) {
        for (const auto& entry : fs::directory_iterator(ablate_dir)) {
            const auto name = entry.path().filename().string();
            if (name.rfind("table_", 0) == 0 && entry.path().extension() == ".json") {
                const auto table = nlohmann::json::parse(persist::read_text_file(entry.path()));
                const std::string axis = table.at("axis").get<std::string>();
                persist::write_text_file(ablate_dir / ("table_" + axis + ".csv"),
                                         ablate_csv_from_json(table));
                persist::write_text_file(ablate_dir / ("report_" + axis + ".csv"),
                                         report_csv_from_json(table));
                std::cout << "report: re-exported ablate axis " << axis << "\n";
                found = true;
            }
        }
    }
    if (!found)
        throw ConfigError("nothing to report in " + run_dir.string() +
                          " (run eval or ablate first)");
}

}  // namespace

void run_command(const std::string& command, Config config, const fs::path& run_dir,
                 const std::string& model_arg) {
    config.validate_keys();
    write_snapshot(config, run_dir, command);
    if (command == "make-data") {
        cmd_make_data(config, run_dir);
    } else if (command == "train-baseline") {
        cmd_train(config, run_dir, /*dual=*/false);
    } else if (command == "fit-niqe") {
        cmd_fit_niqe(config, run_dir);
    } else if (command == "build-negatives") {
        cmd_build_negatives(config, run_dir);
    } else if (command == "train-dualnda") {
        cmd_train(config, run_dir, /*dual=*/true);
    } else if (command == "sample") {
        cmd_sample(config, run_dir, model_arg);
    } else if (command == "eval") {
        cmd_eval(config, run_dir, model_arg);
    } else if (command == "ablate") {
        cmd_ablate(config, run_dir);
    } else if (command == "report") {
        cmd_report(run_dir);
    } else {
        throw ConfigError("unknown command: " + command);
    }
}

int main_with_args(int argc, char** argv) {
    CLI::App app{"Desk-scale laboratory for continuous conditional GANs with dual negative data "
                 "augmentation"};
    app.require_subcommand(1);

    std::string config_path;
    std::string run_dir = "runs/default";
    std::vector<std::string> overrides;
    std::string model_arg = "dualnda";

    const std::vector<std::string> commands = {"make-data",      "train-baseline", "fit-niqe",
                                               "build-negatives", "train-dualnda",  "sample",
                                               "eval",            "ablate",         "report"};
    for (const auto& name : commands) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "config file (dotted key = value lines)");
        sub->add_option("--run-dir", run_dir, "run directory for artifacts");
        sub->add_option("--set", overrides, "override: key=value (repeatable)");
        if (name == "sample" || name == "eval")
            sub->add_option("--model", model_arg, "checkpoint to use: baseline|dualnda");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        Config cfg;
        if (!config_path.empty()) cfg = Config::parse_file(config_path);
        for (const auto& o : overrides) cfg.apply_override(o);
        const std::string command = app.get_subcommands().front()->get_name();
        run_command(command, std::move(cfg), run_dir, model_arg);
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace ccgm::cli
