#include "stainbench/cli_ops.hpp"

#include <chrono>
#include <fstream>
#include <iostream>

#include "stainbench/checkpoint.hpp"
#include "stainbench/corpus.hpp"
#include "stainbench/image_io.hpp"
#include "stainbench/metrics.hpp"
#include "stainbench/train.hpp"

namespace stainbench {

namespace {

using nlohmann::json;

TeacherParams teacher_from_config(const CliConfig& cfg) {
    TeacherParams p = TeacherParams::defaults();
    if (cfg.has("teacher.stain_matrix")) {
        const auto m = cfg.require<std::vector<double>>("teacher.stain_matrix");
        if (m.size() != 9) throw ConfigError("teacher.stain_matrix must have 9 entries");
        std::copy(m.begin(), m.end(), p.stain_matrix.begin());
    }
    if (cfg.has("teacher.gain")) {
        const auto g = cfg.require<std::vector<double>>("teacher.gain");
        if (g.size() != 3) throw ConfigError("teacher.gain must have 3 entries");
        std::copy(g.begin(), g.end(), p.gain.begin());
    }
    p.validate();
    return p;
}

ModelSpec model_spec_from_config(const RunContext& ctx) {
    ModelSpec spec;
    spec.kind = model_kind_from_string(ctx.config.get<std::string>("model.kind", "unet"));
    spec.base_channels = ctx.config.get<int>("model.base_channels", 64);
    spec.pm_widths = ctx.config.get<std::vector<int>>("model.pm_widths", {3, 32, 32, 3});
    spec.validate();
    return spec;
}

TrainConfig train_config_from_cli(const RunContext& ctx) {
    TrainConfig cfg;
    cfg.lr0 = ctx.config.get<double>("train.lr0", 0.01);
    cfg.epochs = ctx.config.get<int>("train.epochs", 300);
    cfg.momentum = ctx.config.get<double>("train.momentum", 0.9);
    cfg.weight_decay = ctx.config.get<double>("train.weight_decay", 0.0);
    cfg.batch_size = ctx.config.get<int>("train.batch_size", 4);
    cfg.seed = ctx.seed;
    cfg.validate();
    return cfg;
}

Model<float> load_model_checkpoint(const RunContext& ctx, const std::string& key) {
    const auto path = ctx.config.require<std::string>(key);
    return load_checkpoint(path).model;
}

}  // namespace

CliConfig CliConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file: " + path.string());
    CliConfig cfg;
    try {
        in >> cfg.values;
    } catch (const json::exception& e) {
        throw ConfigError("config parse error in " + path.string() + ": " + e.what());
    }
    if (!cfg.values.is_object()) {
        throw ConfigError("config file must be a JSON object of flat dotted keys");
    }
    return cfg;
}

DirLock::DirLock(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    lock_path_ = dir / ".stainbench.lock";
    if (std::filesystem::exists(lock_path_)) {
        throw IoError("output directory is locked by another run: " + lock_path_.string());
    }
    std::ofstream lock(lock_path_);
    if (!lock) throw IoError("cannot create lockfile: " + lock_path_.string());
    lock << "stainbench\n";
}

DirLock::~DirLock() {
    std::error_code ec;
    std::filesystem::remove(lock_path_, ec);
}

void echo_effective_config(const RunContext& ctx) {
    json echo{{"subcommand", ctx.subcommand},
              {"out", ctx.out_dir.string()},
              {"seed", ctx.seed},
              {"config", ctx.config.values}};
    std::ofstream out(ctx.out_dir / "effective_config.json");
    if (!out) throw IoError("cannot write effective_config.json under " + ctx.out_dir.string());
    out << echo.dump(2) << "\n";
}

int cmd_gen_data(const RunContext& ctx) {
    CorpusConfig cfg;
    cfg.n_train = ctx.config.get<int>("corpus.n_train", 500);
    cfg.n_eval = ctx.config.get<int>("corpus.n_eval", 100);
    cfg.tile = ctx.config.get<int>("corpus.tile", 64);
    cfg.seed = ctx.seed;
    const TeacherParams teacher = teacher_from_config(ctx.config);

    std::cerr << "gen-data: " << cfg.n_train << " train + " << cfg.n_eval << " eval tiles of "
              << cfg.tile << "x" << cfg.tile << " into " << ctx.out_dir << "\n";
    const Manifest m = gen_synthetic_corpus(cfg, teacher, ctx.out_dir);
    std::cerr << "gen-data: wrote " << m.files.size() << " files\n";
    return 0;
}

int cmd_train(const RunContext& ctx) {
    TrainOptions opts;
    opts.model_spec = model_spec_from_config(ctx);
    opts.config = train_config_from_cli(ctx);
    opts.corpus_dir = ctx.config.require<std::string>("data.corpus");
    opts.out_dir = ctx.out_dir;
    const std::string direction = ctx.config.get<std::string>("train.direction", "ab");
    if (direction != "ab" && direction != "ba") {
        throw ConfigError("train.direction must be 'ab' or 'ba'");
    }
    opts.direction = direction == "ab" ? TeacherDirection::kForward : TeacherDirection::kInverse;
    opts.checkpoint_every = ctx.config.get<int>("train.checkpoint_every", 1);
    if (ctx.config.has("checkpoint")) {
        opts.resume = std::filesystem::path(ctx.config.require<std::string>("checkpoint"));
    }

    const TrainResult r = train_model(opts, &std::cerr);
    std::cerr << "train: " << r.epochs_completed << " epochs, final train_l1 "
              << r.final_train_l1 << ", val_l1 " << r.final_val_l1 << "\n";
    return 0;
}

int cmd_infer(const RunContext& ctx) {
    const Model<float> model = load_model_checkpoint(ctx, "checkpoint");
    const std::filesystem::path input_dir = ctx.config.require<std::string>("infer.input");
    const auto files = list_pngs(input_dir);
    if (files.empty()) throw IoError("no PNG inputs in " + input_dir.string());
    for (const auto& f : files) {
        const Tensor img = load_image(f);
        const Tensor out = infer(model, img);
        save_image(out, ctx.out_dir / f.filename());
        std::cerr << "infer: " << f.filename().string() << "\n";
    }
    return 0;
}

int cmd_tile_infer(const RunContext& ctx) {
    const Model<float> model = load_model_checkpoint(ctx, "checkpoint");
    const std::filesystem::path input_dir = ctx.config.require<std::string>("infer.input");
    const int tile = ctx.config.get<int>("tile.size", 256);
    const int overlap = ctx.config.get<int>("tile.overlap", 0);
    const std::string blend_name = ctx.config.get<std::string>("tile.blend", "center-crop");
    if (blend_name != "center-crop" && blend_name != "average") {
        throw ConfigError("tile.blend must be 'center-crop' or 'average'");
    }
    const Blend blend = blend_name == "center-crop" ? Blend::kCenterCrop : Blend::kAverage;
    if (model.spec.kind == ModelKind::kUnet && tile % 4 != 0) {
        throw ConfigError("tile size " + std::to_string(tile) +
                          " must be divisible by 4 for the unet");
    }

    const auto files = list_pngs(input_dir);
    if (files.empty()) throw IoError("no PNG inputs in " + input_dir.string());

    json seam_entries = json::array();
    for (const auto& f : files) {
        const Tensor img = load_image(f);
        const TileGrid grid = TileGrid::make(img.h, img.w, tile, overlap);
        std::vector<Tensor> tiles = tile_image(img, grid);
        for (auto& t : tiles) t = infer(model, t);
        const Tensor stitched = stitch(tiles, grid, blend);
        save_image(stitched, ctx.out_dir / f.filename());

        const int divisor = model.spec.kind == ModelKind::kUnet ? 4 : 1;
        if (img.h % divisor == 0 && img.w % divisor == 0) {
            const Tensor full = infer(model, img);
            const SeamScore s = seam_discrepancy(full, stitched, grid);
            seam_entries.push_back(json{{"file", f.filename().string()},
                                        {"seam_term", s.seam_term},
                                        {"global_term", s.global_term},
                                        {"total", s.total()},
                                        {"tile", tile},
                                        {"overlap", overlap},
                                        {"blend", blend_name}});
        }
        std::cerr << "tile-infer: " << f.filename().string() << " (" << grid.count()
                  << " tiles)\n";
    }
    std::ofstream seam_out(ctx.out_dir / "seam_report.json");
    if (!seam_out) throw IoError("cannot write seam_report.json under " + ctx.out_dir.string());
    seam_out << json{{"schema_version", 1}, {"entries", seam_entries}}.dump(2) << "\n";
    return 0;
}

int cmd_eval(const RunContext& ctx) {
    const std::filesystem::path generated_dir = ctx.config.require<std::string>("eval.generated");
    const std::filesystem::path reference_dir = ctx.config.require<std::string>("eval.reference");
    const std::vector<Tensor> generated = load_image_dir(generated_dir);
    const std::vector<Tensor> reference = load_image_dir(reference_dir);
    if (generated.empty() || reference.empty()) {
        throw IoError("eval: empty image directory (" + generated_dir.string() + " or " +
                      reference_dir.string() + ")");
    }

    std::vector<MetricReport> reports;
    const FeatureExtractor extractor = default_features();
    const double fid = frechet_distance(extract_features(extractor, generated),
                                        extract_features(extractor, reference));
    reports.push_back(make_report(
        "fid", {fid},
        {{"generated", generated_dir.string()},
         {"reference", reference_dir.string()},
         {"generated_count", std::to_string(generated.size())},
         {"reference_count", std::to_string(reference.size())},
         {"extractor", extractor.name}}));
    std::cerr << "eval: fid " << fid << "\n";

    if (generated.size() == reference.size()) {
        std::vector<double> ssim_vals, psnr_vals;
        for (std::size_t i = 0; i < generated.size(); ++i) {
            ssim_vals.push_back(ssim(generated[i], reference[i]));
            psnr_vals.push_back(psnr(generated[i], reference[i], 1.0));
        }
        std::map<std::string, std::string> prov{
            {"generated", generated_dir.string()},
            {"reference", reference_dir.string()},
            {"pairing", "sorted filename order"},
            {"ssim_window", "uniform 8x8, population stats"},
            {"psnr_max_val", "1.0 (theoretical range)"}};
        reports.push_back(make_report("ssim", std::move(ssim_vals), prov));
        reports.push_back(make_report("psnr", std::move(psnr_vals), prov));
        std::cerr << "eval: ssim mean " << reports[1].mean << ", psnr mean " << reports[2].mean
                  << " (" << reports[2].infinite_count << " infinite)\n";
    } else {
        std::cerr << "eval: skipping pairwise ssim/psnr, image counts differ\n";
    }

    if (ctx.config.has("checkpoint") && ctx.config.has("checkpoint_ba")) {
        const Model<float> ab = load_model_checkpoint(ctx, "checkpoint");
        const Model<float> ba = load_model_checkpoint(ctx, "checkpoint_ba");
        const std::filesystem::path cycle_dir = ctx.config.require<std::string>("eval.cycle_input");
        const std::vector<Tensor> images_a = load_image_dir(cycle_dir);
        if (images_a.empty()) throw IoError("eval: no cycle inputs in " + cycle_dir.string());
        CycleReport cycle = cycle_consistency(ab, ba, images_a);
        cycle.ssim.provenance["inputs"] = cycle_dir.string();
        cycle.psnr.provenance["inputs"] = cycle_dir.string();
        std::cerr << "eval: cycle ssim mean " << cycle.ssim.mean << ", cycle psnr mean "
                  << cycle.psnr.mean << "\n";
        reports.push_back(std::move(cycle.ssim));
        reports.push_back(std::move(cycle.psnr));
    }

    save_reports_json(reports, ctx.out_dir / "metrics.json");
    save_reports_csv(reports, ctx.out_dir / "metrics.csv");
    return 0;
}

int cmd_bench(const RunContext& ctx) {
    const int tile = ctx.config.get<int>("tile.size", 256);
    const int images = ctx.config.get<int>("bench.images", 8);
    const int warmup = ctx.config.get<int>("bench.warmup", 2);
    if (images < 1 || warmup < 0) throw ConfigError("bench: need images >= 1, warmup >= 0");

    std::vector<ModelKind> kinds{ModelKind::kUnet, ModelKind::kPixelMapper};
    if (ctx.config.has("model.kind")) {
        kinds = {model_kind_from_string(ctx.config.require<std::string>("model.kind"))};
    }

    json results = json::array();
    for (const ModelKind kind : kinds) {
        ModelSpec spec;
        spec.kind = kind;
        spec.base_channels = ctx.config.get<int>("model.base_channels", 64);
        spec.pm_widths = ctx.config.get<std::vector<int>>("model.pm_widths", {3, 32, 32, 3});
        if (kind == ModelKind::kUnet && tile % 4 != 0) {
            throw ConfigError("bench: tile size must be divisible by 4 for the unet");
        }
        const Model<float> model = init_model<float>(spec, InitSpec{ctx.seed});

        Rng rng(mix_seed(ctx.seed, 0xbe9cULL));
        Tensor input(1, 3, tile, tile);
        for (auto& v : input.data) v = static_cast<float>(rng.uniform());

        for (int i = 0; i < warmup; ++i) (void)infer(model, input);
        const auto t0 = std::chrono::steady_clock::now();
        for (int i = 0; i < images; ++i) (void)infer(model, input);
        const auto t1 = std::chrono::steady_clock::now();
        const double seconds = std::chrono::duration<double>(t1 - t0).count();
        const double rate = images / seconds;
        results.push_back(json{{"model", to_string(kind)},
                               {"tile", tile},
                               {"images", images},
                               {"warmup_excluded", warmup},
                               {"wall_seconds", seconds},
                               {"images_per_sec", rate}});
        std::cerr << "bench: " << to_string(kind) << " " << rate << " images/sec (" << images
                  << " images, " << seconds << " s)\n";
    }
    std::ofstream out(ctx.out_dir / "bench.json");
    if (!out) throw IoError("cannot write bench.json under " + ctx.out_dir.string());
    out << json{{"schema_version", 1}, {"results", results}}.dump(2) << "\n";
    return 0;
}

int run_subcommand(const RunContext& ctx) {
    try {
        DirLock lock(ctx.out_dir);
        echo_effective_config(ctx);
        if (ctx.subcommand == "gen-data") return cmd_gen_data(ctx);
        if (ctx.subcommand == "train") return cmd_train(ctx);
        if (ctx.subcommand == "infer") return cmd_infer(ctx);
        if (ctx.subcommand == "tile-infer") return cmd_tile_infer(ctx);
        if (ctx.subcommand == "eval") return cmd_eval(ctx);
        if (ctx.subcommand == "bench") return cmd_bench(ctx);
        throw ConfigError("unknown subcommand: " + ctx.subcommand);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ShapeError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace stainbench
