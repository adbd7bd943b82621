#include "stainbench/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "stainbench/errors.hpp"
#include "stainbench/image_io.hpp"

namespace stainbench {

namespace {

using nlohmann::json;

// Smooth value noise: bilinear interpolation of a coarse random lattice.
void add_value_noise(Tensor& img, Rng& rng, int cells, double amplitude) {
    const int size = img.h;
    const int lattice = cells + 1;
    std::vector<double> grid(static_cast<std::size_t>(lattice) * lattice);
    for (auto& v : grid) v = rng.uniform(-1.0, 1.0);

    for (int y = 0; y < size; ++y) {
        const double fy = static_cast<double>(y) / size * cells;
        const int cy = static_cast<int>(fy);
        const double ty = fy - cy;
        for (int x = 0; x < size; ++x) {
            const double fx = static_cast<double>(x) / size * cells;
            const int cx = static_cast<int>(fx);
            const double tx = fx - cx;
            const double v00 = grid[cy * lattice + cx];
            const double v01 = grid[cy * lattice + cx + 1];
            const double v10 = grid[(cy + 1) * lattice + cx];
            const double v11 = grid[(cy + 1) * lattice + cx + 1];
            const double v = (1 - ty) * ((1 - tx) * v00 + tx * v01) +
                             ty * ((1 - tx) * v10 + tx * v11);
            for (int ch = 0; ch < 3; ++ch) {
                img.plane(0, ch)[y * size + x] += static_cast<float>(amplitude * v);
            }
        }
    }
}

void add_nucleus(Tensor& img, Rng& rng) {
    const int size = img.h;
    const double cx = rng.uniform(0.0, size);
    const double cy = rng.uniform(0.0, size);
    const double rx = rng.uniform(0.045, 0.11) * size;
    const double ry = rng.uniform(0.045, 0.11) * size;
    const double angle = rng.uniform(0.0, 3.14159265358979323846);
    const double ca = std::cos(angle), sa = std::sin(angle);
    const double color[3] = {0.36 + rng.uniform(-0.06, 0.06), 0.22 + rng.uniform(-0.05, 0.05),
                             0.52 + rng.uniform(-0.06, 0.06)};
    const double edge = 1.5;  // soft rim in pixels

    const int y0 = std::max(0, static_cast<int>(cy - ry - rx - 2));
    const int y1 = std::min(size, static_cast<int>(cy + ry + rx + 3));
    const int x0 = std::max(0, static_cast<int>(cx - ry - rx - 2));
    const int x1 = std::min(size, static_cast<int>(cx + ry + rx + 3));
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            const double dx = x + 0.5 - cx;
            const double dy = y + 0.5 - cy;
            const double u = (ca * dx + sa * dy) / rx;
            const double v = (-sa * dx + ca * dy) / ry;
            // signed distance proxy in pixels
            const double d = (std::sqrt(u * u + v * v) - 1.0) * std::min(rx, ry);
            double alpha = d <= -edge ? 1.0 : (d >= edge ? 0.0 : (edge - d) / (2.0 * edge));
            if (alpha <= 0.0) continue;
            alpha *= 0.92;
            for (int ch = 0; ch < 3; ++ch) {
                float& px = img.plane(0, ch)[y * size + x];
                px = static_cast<float>((1.0 - alpha) * px + alpha * color[ch]);
            }
        }
    }
}

void clamp01(Tensor& img) {
    for (auto& v : img.data) v = std::min(1.0f, std::max(0.0f, v));
}

std::array<double, 3> mean_rgb(const std::vector<Tensor>& images) {
    std::array<double, 3> mean{0, 0, 0};
    std::size_t count = 0;
    for (const auto& img : images) {
        const int plane = img.h * img.w;
        for (int ch = 0; ch < 3; ++ch) {
            const float* p = img.plane(0, ch);
            for (int i = 0; i < plane; ++i) mean[ch] += p[i];
        }
        count += static_cast<std::size_t>(plane);
    }
    for (auto& m : mean) m /= static_cast<double>(count);
    return mean;
}

json teacher_to_json(const TeacherParams& p) {
    return json{{"stain_matrix", p.stain_matrix}, {"gain", p.gain}, {"seed", p.seed}};
}

TeacherParams teacher_from_json(const json& j) {
    TeacherParams p;
    const auto m = j.at("stain_matrix").get<std::vector<double>>();
    const auto g = j.at("gain").get<std::vector<double>>();
    if (m.size() != 9 || g.size() != 3) {
        throw ConfigError("teacher params: expected 9 matrix entries and 3 gains");
    }
    std::copy(m.begin(), m.end(), p.stain_matrix.begin());
    std::copy(g.begin(), g.end(), p.gain.begin());
    p.seed = j.value("seed", std::uint64_t{0});
    return p;
}

}  // namespace

Tensor render_tissue_tile(int size, Rng& rng) {
    Tensor img(1, 3, size, size);

    // stroma background around H&E pink, jittered per tile
    const double base[3] = {0.80 + rng.uniform(-0.05, 0.05), 0.62 + rng.uniform(-0.06, 0.06),
                            0.72 + rng.uniform(-0.05, 0.05)};
    for (int ch = 0; ch < 3; ++ch) {
        std::fill(img.plane(0, ch), img.plane(0, ch) + static_cast<std::size_t>(size) * size,
                  static_cast<float>(base[ch]));
    }

    add_value_noise(img, rng, 4, 0.05);
    add_value_noise(img, rng, 9, 0.025);

    const int nuclei = rng.uniform_int(5, 14) * std::max(1, (size * size) / (64 * 64));
    for (int i = 0; i < nuclei; ++i) add_nucleus(img, rng);

    clamp01(img);
    return img;
}

Manifest gen_synthetic_corpus(const CorpusConfig& cfg, const TeacherParams& teacher,
                              const std::filesystem::path& out_dir) {
    if (cfg.n_train < 1 || cfg.n_eval < 0) {
        throw ConfigError("gen_synthetic_corpus: need n_train >= 1, n_eval >= 0");
    }
    if (cfg.tile < 16) throw ConfigError("gen_synthetic_corpus: tile must be >= 16");
    teacher.validate();

    std::error_code ec;
    for (const char* domain : {"a", "b"}) {
        for (const char* split : {"train", "eval"}) {
            std::filesystem::create_directories(out_dir / domain / split, ec);
            if (ec) throw IoError("cannot create corpus directory under " + out_dir.string());
        }
    }

    const int total = cfg.n_train + cfg.n_eval;
    constexpr int kMaxAttempts = 8;
    constexpr double kMinSeparation = 0.05;

    std::vector<Tensor> tiles_a, tiles_b;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        tiles_a.clear();
        tiles_b.clear();
        const std::uint64_t attempt_seed = attempt == 0 ? cfg.seed : mix_seed(cfg.seed, attempt);
        for (int i = 0; i < total; ++i) {
            Rng rng(mix_seed(attempt_seed, static_cast<std::uint64_t>(i)));
            tiles_a.push_back(render_tissue_tile(cfg.tile, rng));
            tiles_b.push_back(teacher_transform(tiles_a.back(), teacher,
                                                TeacherDirection::kForward));
        }
        const auto ma = mean_rgb(tiles_a);
        const auto mb = mean_rgb(tiles_b);
        const double sep = std::sqrt((ma[0] - mb[0]) * (ma[0] - mb[0]) +
                                     (ma[1] - mb[1]) * (ma[1] - mb[1]) +
                                     (ma[2] - mb[2]) * (ma[2] - mb[2]));
        if (sep >= kMinSeparation) break;
        if (attempt + 1 == kMaxAttempts) {
            throw ConfigError("gen_synthetic_corpus: domain separation " + std::to_string(sep) +
                              " < " + std::to_string(kMinSeparation) +
                              " after retries; teacher params too close to identity");
        }
    }

    Manifest manifest;
    manifest.seed = cfg.seed;
    manifest.tile = cfg.tile;
    manifest.teacher = teacher;

    char name[32];
    for (int i = 0; i < total; ++i) {
        const std::string split = i < cfg.n_train ? "train" : "eval";
        const int ordinal = i < cfg.n_train ? i : i - cfg.n_train;
        std::snprintf(name, sizeof(name), "%04d.png", ordinal);
        const std::string rel_a = "a/" + split + "/" + name;
        const std::string rel_b = "b/" + split + "/" + name;
        save_image(tiles_a[i], out_dir / rel_a);
        save_image(tiles_b[i], out_dir / rel_b);
        manifest.files.push_back(ManifestEntry{rel_a, "a", split});
        manifest.files.push_back(ManifestEntry{rel_b, "b", split});
    }

    save_manifest(manifest, out_dir / "manifest.json");
    return manifest;
}

void save_manifest(const Manifest& m, const std::filesystem::path& path) {
    json files = json::array();
    for (const auto& f : m.files) {
        files.push_back(json{{"path", f.path}, {"domain", f.domain}, {"split", f.split}});
    }
    const json j{{"version", m.version},
                 {"seed", m.seed},
                 {"tile", m.tile},
                 {"teacher", teacher_to_json(m.teacher)},
                 {"files", files}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest: " + path.string());
    out << j.dump(2) << "\n";
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read manifest: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("manifest parse error in " + path.string() + ": " + e.what());
    }
    Manifest m;
    try {
        m.version = j.at("version").get<int>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.tile = j.at("tile").get<int>();
        m.teacher = teacher_from_json(j.at("teacher"));
        for (const auto& f : j.at("files")) {
            m.files.push_back(ManifestEntry{f.at("path").get<std::string>(),
                                            f.at("domain").get<std::string>(),
                                            f.at("split").get<std::string>()});
        }
    } catch (const json::exception& e) {
        throw ConfigError("manifest schema error in " + path.string() + ": " + e.what());
    }
    return m;
}

std::vector<std::filesystem::path> manifest_files(const Manifest& m,
                                                  const std::filesystem::path& manifest_dir,
                                                  const std::string& domain,
                                                  const std::string& split) {
    std::vector<std::filesystem::path> out;
    for (const auto& f : m.files) {
        if (f.domain == domain && f.split == split) out.push_back(manifest_dir / f.path);
    }
    std::sort(out.begin(), out.end());
    return out;
}

PairedDataset assemble_pairs(const std::vector<Tensor>& real_src,
                             const std::vector<Tensor>& real_tgt, const TeacherParams& teacher,
                             TeacherDirection direction, std::uint64_t seed,
                             const std::string& split) {
    if (real_src.empty() || real_tgt.empty()) {
        throw ConfigError("assemble_pairs: both domains must be non-empty");
    }
    const TeacherDirection fwd = direction;
    const TeacherDirection inv = direction == TeacherDirection::kForward
                                     ? TeacherDirection::kInverse
                                     : TeacherDirection::kForward;

    PairedDataset ds;
    ds.split = split;
    ds.pairs.reserve(real_src.size() + real_tgt.size());
    for (const auto& a : real_src) {
        ds.pairs.push_back(
            PairedSample{a, teacher_transform(a, teacher, fwd), "real_src+fake_tgt"});
    }
    for (const auto& b : real_tgt) {
        ds.pairs.push_back(
            PairedSample{teacher_transform(b, teacher, inv), b, "fake_src+real_tgt"});
    }

    // Fisher-Yates with the corpus rng keeps the order a pure function of seed
    Rng rng(mix_seed(seed, 0x70615253ULL));
    for (std::size_t i = ds.pairs.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1));
        std::swap(ds.pairs[i - 1], ds.pairs[j]);
    }
    return ds;
}

}  // namespace stainbench
