// Acceptance suite: one pass/fail line per criterion, exit code = number of
// failures. Criteria 4-7 share one pipeline run (corpus, two trainings,
// evaluations); criterion 9 repeats that run and byte-compares every
// checkpoint and metric report it produced.

#include <malloc.h>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <vector>

#include "stainbench/checkpoint.hpp"
#include "stainbench/cli_ops.hpp"
#include "stainbench/image_io.hpp"
#include "stainbench/metrics.hpp"
#include "stainbench/train.hpp"
#include "support/gradcheck.hpp"

using namespace stainbench;
using testsupport::max_grad_rel_err;
using testsupport::random_tensor;
using testsupport::rel_err;
using testsupport::ScalarProbe;

namespace {

namespace fs = std::filesystem;

int g_failures = 0;

void report(int criterion, bool pass, const std::string& name, const std::string& details) {
    std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", criterion, name.c_str(),
                details.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return buf;
}

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return "<missing:" + p.string() + ">";
    return std::string(std::istreambuf_iterator<char>(in), {});
}

// ---------------------------------------------------------------- criterion 1

template <class MakeParams, class Forward, class Backward>
double kernel_fd_worst(MakeParams&& make, Forward&& fwd, Backward&& bwd, int trials,
                       std::uint64_t seed0) {
    double worst = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
        Rng rng(seed0 + trial);
        auto [input, params] = make(rng);
        const TensorD out = fwd(input, params);
        ScalarProbe probe(out, rng);
        const auto grads = bwd(probe.weights, input, params);
        worst = std::max(
            worst, max_grad_rel_err(
                       [&](const TensorD& x) { return probe.loss(fwd(x, params)); },
                       input, grads.input));
        auto loss_of_w = [&](const TensorD& w) {
            auto q = params;
            q.weights = w;
            return probe.loss(fwd(input, q));
        };
        worst = std::max(worst, max_grad_rel_err(loss_of_w, params.weights, grads.weights));
    }
    return worst;
}

ConvParamsD random_conv_d(int oc, int ic, int k, int pad, int stride, Rng& rng) {
    ConvParamsD p;
    p.weights = TensorD(oc, ic, k, k);
    for (auto& v : p.weights.data) v = rng.uniform(-1.0, 1.0);
    p.bias.resize(oc);
    for (auto& v : p.bias) v = rng.uniform(-0.5, 0.5);
    p.padding = pad;
    p.stride = stride;
    return p;
}

void criterion1_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    const int trials = 20;

    worst = std::max(worst, kernel_fd_worst(
        [](Rng& rng) {
            return std::pair(random_tensor(1, 2, 5, 5, rng), random_conv_d(3, 2, 3, 1, 1, rng));
        },
        [](const TensorD& x, const ConvParamsD& p) { return conv2d_forward(x, p); },
        [](const TensorD& go, const TensorD& x, const ConvParamsD& p) {
            return conv2d_backward(go, x, p);
        },
        trials, 1000));

    worst = std::max(worst, kernel_fd_worst(
        [](Rng& rng) {
            return std::pair(random_tensor(1, 3, 4, 4, rng), random_conv_d(2, 3, 1, 0, 1, rng));
        },
        [](const TensorD& x, const ConvParamsD& p) { return conv2d_forward(x, p); },
        [](const TensorD& go, const TensorD& x, const ConvParamsD& p) {
            return conv2d_backward(go, x, p);
        },
        trials, 2000));

    worst = std::max(worst, kernel_fd_worst(
        [](Rng& rng) {
            return std::pair(random_tensor(1, 4, 3, 3, rng), random_conv_d(2, 4, 2, 0, 2, rng));
        },
        [](const TensorD& x, const ConvParamsD& p) { return upconv2x2_forward(x, p); },
        [](const TensorD& go, const TensorD& x, const ConvParamsD& p) {
            return upconv2x2_backward(go, x, p);
        },
        trials, 3000));

    for (int trial = 0; trial < trials; ++trial) {
        Rng rng(4000 + trial);
        const TensorD in = random_tensor(1, 1, 4, 4, rng);
        const auto fwd = maxpool2x2_forward(in);
        ScalarProbe probe(fwd.output, rng);
        const TensorD gin = maxpool2x2_backward(probe.weights, fwd.mask);
        worst = std::max(
            worst, max_grad_rel_err(
                       [&](const TensorD& x) { return probe.loss(maxpool2x2_forward(x).output); },
                       in, gin, 1e-7));
    }

    for (int trial = 0; trial < trials; ++trial) {
        Rng rng(5000 + trial);
        TensorD in = random_tensor(1, 2, 4, 4, rng);
        for (auto& v : in.data) {
            if (std::abs(v) < 1e-3) v = 0.1;
        }
        const TensorD out = relu_forward(in);
        ScalarProbe probe(out, rng);
        const TensorD gin = relu_backward(probe.weights, in);
        worst = std::max(worst,
                         max_grad_rel_err(
                             [&](const TensorD& x) { return probe.loss(relu_forward(x)); }, in,
                             gin, 1e-6));
    }

    // end-to-end toy U-Net at 1x3x16x16, paper-width channels, 64-bit; 100
    // parameter coordinates sampled across seeded trials
    for (int trial = 0; trial < 5; ++trial) {
        Rng rng(6000 + trial);
        ModelSpec spec;  // base 64
        auto model = build_unet<double>(spec);
        init_params(InitSpec{6000u + trial}, model.stack);
        const TensorD in = random_tensor(1, 3, 16, 16, rng, 0.0, 1.0);
        const TensorD tgt = random_tensor(1, 3, 16, 16, rng, 0.0, 1.0);
        const auto step = forward_backward(model.stack, in, tgt);
        const double eps = 1e-6;
        for (int sample = 0; sample < 20; ++sample) {
            const auto pi = static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<int>(model.stack.params.size()) - 1));
            auto& w = model.stack.params[pi].value.weights.data;
            const auto k =
                static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(w.size()) - 1));
            const double orig = w[k];
            w[k] = orig + eps;
            const double fp = l1_loss(model.stack.forward(in), tgt).loss;
            w[k] = orig - eps;
            const double fm = l1_loss(model.stack.forward(in), tgt).loss;
            w[k] = orig;
            worst = std::max(worst,
                             rel_err(step.grads[pi].weights.data[k], (fp - fm) / (2.0 * eps)));
        }
    }

    const double elapsed = seconds_since(t0);
    report(1, worst < 1e-4 && elapsed < 60.0, "gradient correctness",
           fmt("max rel err %.2e, %.1f s", worst, elapsed));
}

// ---------------------------------------------------------------- criterion 2

void criterion2_schedule() {
    TrainConfig cfg;
    cfg.lr0 = 0.01;
    cfg.epochs = 300;
    bool pass = cosine_lr(0, cfg) == 0.01 && cosine_lr(300, cfg) == 0.0 &&
                cosine_lr(150, cfg) == 0.005;
    double prev = cosine_lr(0, cfg);
    for (int e = 1; e <= 300 && pass; ++e) {
        const double lr = cosine_lr(e, cfg);
        pass = lr <= prev;
        prev = lr;
    }
    report(2, pass, "cosine schedule fidelity",
           fmt("lr(0)=%.6g lr(150)=%.6g lr(300)=%.6g, monotone", cosine_lr(0, cfg),
               cosine_lr(150, cfg), cosine_lr(300, cfg)));
}

// ---------------------------------------------------------------- criterion 3

void criterion3_metric_oracles() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(42);

    FeatureMatrix x;
    x.rows = 64;
    x.dim = 6;
    x.data.resize(static_cast<std::size_t>(x.rows) * x.dim);
    for (auto& v : x.data) v = rng.uniform(-1.0, 1.0);
    const double fid_self = frechet_distance(x, x);

    FeatureMatrix ga, gb;
    ga.rows = gb.rows = 10000;
    ga.dim = gb.dim = 1;
    for (int i = 0; i < 10000; ++i) {
        ga.data.push_back(rng.normal(0.0, 1.0));
        gb.data.push_back(rng.normal(1.0, 2.0));
    }
    const double fid_1d = frechet_distance(ga, gb);

    const Tensor img = random_tensor(1, 3, 32, 32, rng, 0.0, 1.0).cast<float>();
    const Tensor img2 = random_tensor(1, 3, 32, 32, rng, 0.0, 1.0).cast<float>();
    const double ssim_self = ssim(img, img);
    const double ssim_sym = std::abs(ssim(img, img2) - ssim(img2, img));

    Tensor pa(1, 1, 8, 8), pb(1, 1, 8, 8);
    std::fill(pa.data.begin(), pa.data.end(), 0.25f);
    std::fill(pb.data.begin(), pb.data.end(), 0.35f);  // MSE = 0.01
    const double psnr_val = psnr(pa, pb, 1.0);

    const double elapsed = seconds_since(t0);
    const bool pass = fid_self <= 1e-6 && std::abs(fid_1d - 2.0) <= 0.2 &&
                      std::abs(ssim_self - 1.0) <= 1e-9 && ssim_sym <= 1e-12 &&
                      std::abs(psnr_val - 20.0) <= 1e-9 && elapsed < 60.0;
    report(3, pass, "metric oracles",
           fmt("fid(X,X)=%.2e, fid1d=%.3f, ssim(x,x)-1=%.1e, psnr=%.12g dB, %.1f s", fid_self,
               fid_1d, ssim_self - 1.0, psnr_val, elapsed));
}

// ------------------------------------------------------- shared pipeline 4-7

struct PipelineResult {
    double model_l1 = 0.0, identity_l1 = 0.0;
    double cycle_ssim = 0.0, analytic_ssim = 0.0;
    double fid_model = 0.0, fid_identity = 0.0;
    int seam_better = 0, seam_trials = 0;
    double pm_seam_total = 0.0;
    bool pm_bit_identical = false;
    double train_seconds = 0.0;
    std::vector<fs::path> artifacts;  // checkpoints and reports for criterion 9
};

constexpr int kAcceptBase = 8;           // desk-scale U-Net width for the trainings
constexpr std::uint64_t kSeed = 20240607;

PipelineResult run_pipeline(const fs::path& root) {
    PipelineResult r;
    fs::remove_all(root);
    fs::create_directories(root);

    CorpusConfig ccfg;
    ccfg.n_train = 500;
    ccfg.n_eval = 100;
    ccfg.tile = 64;
    ccfg.seed = kSeed;
    const TeacherParams teacher = TeacherParams::defaults();
    gen_synthetic_corpus(ccfg, teacher, root / "corpus");
    r.artifacts.push_back(root / "corpus/manifest.json");

    auto train_opts = [&](const char* dir, TeacherDirection d) {
        TrainOptions o;
        o.model_spec.kind = ModelKind::kUnet;
        o.model_spec.base_channels = kAcceptBase;
        o.config.epochs = 50;
        o.config.batch_size = 4;
        o.config.seed = kSeed;
        o.corpus_dir = root / "corpus";
        o.out_dir = root / dir;
        o.direction = d;
        return o;
    };
    const auto t0 = std::chrono::steady_clock::now();
    train_model(train_opts("ab", TeacherDirection::kForward), nullptr);
    train_model(train_opts("ba", TeacherDirection::kInverse), nullptr);
    r.train_seconds = seconds_since(t0);
    for (const char* dir : {"ab", "ba"}) {
        for (const auto& e : fs::directory_iterator(root / dir)) {
            if (e.path().extension() == ".ckpt" || e.path().extension() == ".csv") {
                r.artifacts.push_back(e.path());
            }
        }
    }

    const Manifest manifest = load_manifest(root / "corpus/manifest.json");
    std::vector<Tensor> a_eval, b_eval;
    for (const auto& f : manifest_files(manifest, root / "corpus", "a", "eval")) {
        a_eval.push_back(load_image(f));
    }
    for (const auto& f : manifest_files(manifest, root / "corpus", "b", "eval")) {
        b_eval.push_back(load_image(f));
    }

    const Model<float> ab = load_checkpoint(root / "ab/final.ckpt").model;
    const Model<float> ba = load_checkpoint(root / "ba/final.ckpt").model;

    // criterion 4 quantities: held-out L1 vs the identity baseline
    std::vector<Tensor> outputs;
    double model_sum = 0.0, ident_sum = 0.0;
    std::size_t elements = 0;
    for (std::size_t i = 0; i < a_eval.size(); ++i) {
        outputs.push_back(infer(ab, a_eval[i]));
        for (std::size_t j = 0; j < outputs[i].data.size(); ++j) {
            model_sum += std::abs(outputs[i].data[j] - b_eval[i].data[j]);
            ident_sum += std::abs(a_eval[i].data[j] - b_eval[i].data[j]);
        }
        elements += outputs[i].data.size();
    }
    r.model_l1 = model_sum / static_cast<double>(elements);
    r.identity_l1 = ident_sum / static_cast<double>(elements);

    // criterion 5 quantities: trained cycle plus the analytic teacher loop.
    // The analytic round trip mirrors the protocol: forward then inverse on
    // in-memory float images, exactly as the two trained models hand tensors
    // to each other (only the 8-bit source tiles are quantized).
    const CycleReport cycle = cycle_consistency(ab, ba, a_eval);
    r.cycle_ssim = cycle.ssim.mean;
    std::vector<double> analytic;
    for (std::size_t i = 0; i < a_eval.size(); ++i) {
        const Tensor there =
            teacher_transform(a_eval[i], manifest.teacher, TeacherDirection::kForward);
        const Tensor back = teacher_transform(there, manifest.teacher, TeacherDirection::kInverse);
        analytic.push_back(ssim(a_eval[i], back));
    }
    const MetricReport analytic_report = make_report(
        "analytic_roundtrip_ssim", analytic,
        {{"images", std::to_string(a_eval.size())}, {"teacher", "manifest params"}});
    r.analytic_ssim = analytic_report.mean;

    // criterion 6 quantities: FID of model outputs vs the identity gap
    const FeatureExtractor extractor = default_features();
    const FeatureMatrix feat_out = extract_features(extractor, outputs);
    const FeatureMatrix feat_a = extract_features(extractor, a_eval);
    const FeatureMatrix feat_b = extract_features(extractor, b_eval);
    r.fid_model = frechet_distance(feat_out, feat_b);
    r.fid_identity = frechet_distance(feat_a, feat_b);

    std::vector<MetricReport> reports;
    reports.push_back(make_report("eval_l1_model", {r.model_l1},
                                  {{"split", "eval"}, {"images", std::to_string(a_eval.size())}}));
    reports.push_back(make_report("eval_l1_identity", {r.identity_l1}, {{"split", "eval"}}));
    reports.push_back(cycle.ssim);
    reports.push_back(cycle.psnr);
    reports.push_back(analytic_report);
    reports.push_back(make_report("fid_model", {r.fid_model}, {{"extractor", extractor.name}}));
    reports.push_back(
        make_report("fid_identity", {r.fid_identity}, {{"extractor", extractor.name}}));
    fs::create_directories(root / "reports");
    save_reports_json(reports, root / "reports/metrics.json");
    save_reports_csv(reports, root / "reports/metrics.csv");
    r.artifacts.push_back(root / "reports/metrics.json");
    r.artifacts.push_back(root / "reports/metrics.csv");

    // criterion 7 quantities: seam scores on 20 synthesized 512x512 images
    ModelSpec pm_spec;
    pm_spec.kind = ModelKind::kPixelMapper;
    const Model<float> pm = init_model<float>(pm_spec, InitSpec{kSeed});

    nlohmann::json seam_entries = nlohmann::json::array();
    r.pm_bit_identical = true;
    for (int trial = 0; trial < 20; ++trial) {
        Rng rng(mix_seed(kSeed, 0x51e0 + trial));
        const Tensor big = render_tissue_tile(512, rng);

        // pixel-mapper: zero-overlap tiling must be bit-identical
        {
            const Tensor whole = infer(pm, big);
            auto [tiles, grid] = tile_image(big, 128, 0);
            for (auto& t : tiles) t = infer(pm, t);
            const Tensor stitched = stitch(tiles, grid, Blend::kCenterCrop);
            r.pm_bit_identical = r.pm_bit_identical && stitched.data == whole.data;
            r.pm_seam_total += seam_discrepancy(whole, stitched, grid).total();
        }

        // U-Net: 32-px overlap with center-crop stitching vs zero overlap
        const Tensor full = infer(ab, big);
        auto run_tiled = [&](int overlap) {
            auto [tiles, grid] = tile_image(big, 128, overlap);
            for (auto& t : tiles) t = infer(ab, t);
            return std::pair(stitch(tiles, grid, Blend::kCenterCrop), grid);
        };
        const auto [flat, grid0] = run_tiled(0);
        const auto [lapped, grid32] = run_tiled(32);
        const double seam0 = seam_discrepancy(full, flat, grid0).total();
        const double seam32 = seam_discrepancy(full, lapped, grid32).total();
        r.seam_better += seam32 < seam0;
        ++r.seam_trials;
        seam_entries.push_back(nlohmann::json{{"trial", trial},
                                              {"seam_zero_overlap", seam0},
                                              {"seam_32_overlap", seam32}});
    }
    {
        std::ofstream out(root / "reports/seam_report.json");
        out << nlohmann::json{{"schema_version", 1}, {"entries", seam_entries}}.dump(2) << "\n";
    }
    r.artifacts.push_back(root / "reports/seam_report.json");
    return r;
}

void criterion8_bench(const fs::path& root) {
    RunContext ctx;
    ctx.subcommand = "bench";
    ctx.out_dir = root / "bench";
    ctx.seed = kSeed;
    ctx.config.set("tile.size", 256);
    ctx.config.set("bench.images", 3);
    ctx.config.set("bench.warmup", 1);
    fs::remove_all(ctx.out_dir);
    const int rc = run_subcommand(ctx);
    double unet_rate = 0.0, pm_rate = 0.0;
    if (rc == 0) {
        std::ifstream in(ctx.out_dir / "bench.json");
        nlohmann::json j;
        in >> j;
        for (const auto& res : j.at("results")) {
            if (res.at("model") == "unet") unet_rate = res.at("images_per_sec").get<double>();
            if (res.at("model") == "pixelmapper") pm_rate = res.at("images_per_sec").get<double>();
        }
    }
    report(8, rc == 0 && pm_rate > unet_rate, "speed ordering at 256x256",
           fmt("pixelmapper %.2f img/s > unet %.2f img/s", pm_rate, unet_rate));
}

void criterion9_reproducibility(const PipelineResult& first, const fs::path& root1,
                                const fs::path& root2) {
    const PipelineResult second = run_pipeline(root2);
    std::size_t compared = 0, mismatched = 0;
    for (const auto& artifact : first.artifacts) {
        const fs::path rel = fs::relative(artifact, root1);
        ++compared;
        if (file_bytes(artifact) != file_bytes(root2 / rel)) {
            ++mismatched;
            std::fprintf(stderr, "  reproducibility mismatch: %s\n", rel.string().c_str());
        }
    }
    const bool metrics_match = first.model_l1 == second.model_l1 &&
                               first.cycle_ssim == second.cycle_ssim &&
                               first.fid_model == second.fid_model &&
                               first.seam_better == second.seam_better;
    report(9, mismatched == 0 && metrics_match && compared > 100, "seeded reruns byte-identical",
           fmt("%zu artifacts compared, %zu mismatched", compared, mismatched));
}

}  // namespace

int main() {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);

    std::printf("stainbench acceptance suite\n");
    const auto t0 = std::chrono::steady_clock::now();

    criterion1_gradients();
    criterion2_schedule();
    criterion3_metric_oracles();

    const fs::path work = fs::current_path() / "acceptance_work";
    const fs::path run1 = work / "run1";
    const fs::path run2 = work / "run2";

    const PipelineResult pipe = run_pipeline(run1);

    report(4, pipe.model_l1 < 0.5 * pipe.identity_l1 && pipe.model_l1 < 0.03,
           "held-out learning analogue",
           fmt("model L1 %.4f vs identity %.4f (ratio %.2f, abs < 0.03); 2x50 epochs in %.0f s "
               "(target < 15 min per training)",
               pipe.model_l1, pipe.identity_l1, pipe.model_l1 / pipe.identity_l1,
               pipe.train_seconds));

    report(5, pipe.cycle_ssim >= 0.9 && pipe.analytic_ssim >= 0.999, "cycle consistency analogue",
           fmt("trained SSIM %.4f >= 0.9; analytic teacher round trip %.5f >= 0.999",
               pipe.cycle_ssim, pipe.analytic_ssim));

    report(6, pipe.fid_identity >= 2.0 * pipe.fid_model && pipe.fid_model >= 0.0,
           "distribution distance analogue",
           fmt("FID model %.4f vs identity %.4f (factor %.1f >= 2)", pipe.fid_model,
               pipe.fid_identity, pipe.fid_identity / std::max(pipe.fid_model, 1e-12)));

    report(7,
           pipe.pm_bit_identical && pipe.pm_seam_total == 0.0 &&
               pipe.seam_better >= (pipe.seam_trials * 19 + 19) / 20 && pipe.seam_trials == 20,
           "patch-seam consistency",
           fmt("pixel-mapper tiled == whole (seam 0); unet overlap beats zero overlap on %d/%d",
               pipe.seam_better, pipe.seam_trials));

    criterion8_bench(work);
    criterion9_reproducibility(pipe, run1, run2);

    std::printf("%s: %d criterion(s) failed, total %.0f s\n", g_failures == 0 ? "OK" : "FAILED",
                g_failures, seconds_since(t0));
    return g_failures;
}
