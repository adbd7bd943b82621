#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <set>

#include "stainbench/corpus.hpp"
#include "stainbench/image_io.hpp"
#include "stainbench/teacher.hpp"
#include "stainbench/tiling.hpp"
#include "support/gradcheck.hpp"
#include "support/tmpdir.hpp"

using namespace stainbench;
using testsupport::random_tensor;
using testsupport::TempDir;

namespace {

Tensor quantize(const Tensor& img) {
    Tensor out = img;
    for (auto& v : out.data) {
        v = std::round(std::min(1.0f, std::max(0.0f, v)) * 255.0f) / 255.0f;
    }
    return out;
}

std::string file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("png save/load round trip is exact up to quantization") {
    TempDir tmp("png");
    Rng rng(1);
    const Tensor img = random_tensor(1, 3, 21, 17, rng, 0.0, 1.0).cast<float>();
    save_image(img, tmp / "x.png");
    const Tensor back = load_image(tmp / "x.png");
    REQUIRE(back.same_shape(img));
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        CHECK(std::abs(img.data[i] - back.data[i]) <= 1.0f / 255.0f);
    }
    // already-quantized values survive exactly
    const Tensor q = quantize(img);
    save_image(q, tmp / "q.png");
    const Tensor qback = load_image(tmp / "q.png");
    CHECK(qback.data == q.data);
}

TEST_CASE("png full-scale red pixel maps to (1, 0, 0)") {
    TempDir tmp("red");
    Tensor img(1, 3, 2, 2);
    for (int i = 0; i < 4; ++i) img.plane(0, 0)[i] = 1.0f;
    save_image(img, tmp / "red.png");
    const Tensor back = load_image(tmp / "red.png");
    for (int i = 0; i < 4; ++i) {
        CHECK(back.plane(0, 0)[i] == 1.0f);
        CHECK(back.plane(0, 1)[i] == 0.0f);
        CHECK(back.plane(0, 2)[i] == 0.0f);
    }
}

TEST_CASE("png loader rejects non-image files with the path in the message") {
    TempDir tmp("bad");
    std::ofstream(tmp / "fake.png") << "this is not a png";
    CHECK_THROWS_WITH_AS(load_image(tmp / "fake.png"), doctest::Contains("fake.png"), IoError);
    CHECK_THROWS_AS(load_image(tmp / "missing.png"), IoError);
}

TEST_CASE("tile grid geometry: plain and shifted counts") {
    CHECK(TileGrid::make(512, 512, 256, 0).count() == 4);
    // large Fig-3 style input: ceil(3120/512) * ceil(3168/512) = 7 * 7
    const TileGrid big = TileGrid::make(3120, 3168, 512, 0);
    CHECK(big.count() == 49);
    CHECK(big.ys.back() == 3120 - 512);  // last row shifted inward
    CHECK(big.xs.back() == 3168 - 512);

    CHECK_THROWS_AS(TileGrid::make(100, 100, 128, 0), ConfigError);
    CHECK_THROWS_AS(TileGrid::make(100, 100, 32, 32), ConfigError);
}

TEST_CASE("tile then stitch is the identity, bit-exact, for awkward geometries") {
    Rng rng(2);
    const struct {
        int h, w, t, o;
    } cases[] = {{64, 64, 32, 0}, {97, 113, 32, 8}, {64, 96, 32, 16}, {50, 70, 33, 5}};
    for (const auto& c : cases) {
        const Tensor img = random_tensor(1, 3, c.h, c.w, rng, 0.0, 1.0).cast<float>();
        auto [tiles, grid] = tile_image(img, c.t, c.o);
        const Tensor back = stitch(tiles, grid, Blend::kCenterCrop);
        REQUIRE(back.same_shape(img));
        CHECK(back.data == img.data);
    }
}

TEST_CASE("average blend: identity on self-tiles, midpoint on constants") {
    Rng rng(3);
    const Tensor img = random_tensor(1, 3, 64, 64, rng, 0.0, 1.0).cast<float>();
    auto [tiles, grid] = tile_image(img, 32, 16);  // each pixel covered by up to 4 tiles
    const Tensor back = stitch(tiles, grid, Blend::kAverage);
    CHECK(back.data == img.data);  // (k * a) / k is exact for k in {1, 2, 4}

    // two constant overlapping tiles average in the overlap
    const TileGrid two = TileGrid::make(8, 12, 8, 4);
    REQUIRE(two.count() == 2);
    Tensor ta(1, 1, 8, 8), tb(1, 1, 8, 8);
    std::fill(ta.data.begin(), ta.data.end(), 0.2f);
    std::fill(tb.data.begin(), tb.data.end(), 0.6f);
    const Tensor merged = stitch({ta, tb}, two, Blend::kAverage);
    CHECK(merged.at(0, 0, 0, 0) == 0.2f);
    CHECK(merged.at(0, 0, 0, 5) == doctest::Approx(0.4));  // overlap column
    CHECK(merged.at(0, 0, 0, 11) == 0.6f);

    // uniform tiles give a uniform result under either blend
    const Tensor uniform = stitch({ta, ta}, two, Blend::kCenterCrop);
    for (const float v : uniform.data) CHECK(v == 0.2f);
}

TEST_CASE("stitch validates tile count and shape") {
    const TileGrid grid = TileGrid::make(32, 32, 16, 0);
    std::vector<Tensor> tiles(3, Tensor(1, 3, 16, 16));
    CHECK_THROWS_AS(stitch(tiles, grid, Blend::kCenterCrop), ShapeError);
    tiles.emplace_back(1, 3, 8, 8);
    CHECK_THROWS_AS(stitch(tiles, grid, Blend::kCenterCrop), ShapeError);
}

TEST_CASE("teacher with identity params is the identity up to rounding") {
    TeacherParams id;  // identity matrix, unit gains
    Rng rng(4);
    const Tensor img = random_tensor(1, 3, 16, 16, rng, 0.0, 1.0).cast<float>();
    const Tensor out = teacher_transform(img, id, TeacherDirection::kForward);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        CHECK(std::abs(out.data[i] - img.data[i]) < 1e-6f);
    }
}

TEST_CASE("teacher forward then inverse recovers the input within 2/255") {
    const TeacherParams p = TeacherParams::defaults();
    Rng rng(5);
    const Tensor img = render_tissue_tile(64, rng);
    const Tensor fwd = teacher_transform(img, p, TeacherDirection::kForward);

    // count clipped pixels before quantization so they can be excluded
    int clipped = 0;
    std::vector<bool> mask(img.h * img.w, false);
    for (int i = 0; i < img.h * img.w; ++i) {
        for (int ch = 0; ch < 3; ++ch) {
            const float v = fwd.plane(0, ch)[i];
            if (v <= 0.0f || v >= 1.0f) {
                mask[i] = true;
                break;
            }
        }
        if (mask[i]) ++clipped;
    }
    CHECK(clipped < img.h * img.w / 5);

    const Tensor back = teacher_transform(quantize(fwd), p, TeacherDirection::kInverse);
    float worst = 0.0f;
    for (int ch = 0; ch < 3; ++ch) {
        for (int i = 0; i < img.h * img.w; ++i) {
            if (mask[i]) continue;
            worst = std::max(worst, std::abs(back.plane(0, ch)[i] - img.plane(0, ch)[i]));
        }
    }
    CHECK(worst <= 2.0f / 255.0f);
}

TEST_CASE("teacher keeps white white for any valid params") {
    Tensor white(1, 3, 4, 4);
    std::fill(white.data.begin(), white.data.end(), 1.0f);
    for (const auto& p : {TeacherParams{}, TeacherParams::defaults()}) {
        const Tensor out = teacher_transform(white, p, TeacherDirection::kForward);
        for (const float v : out.data) CHECK(v >= 0.995f);
    }
}

TEST_CASE("teacher rejects singular and badly conditioned matrices") {
    TeacherParams p;
    p.stain_matrix = {1, 2, 3, 2, 4, 6, 0, 0, 1};  // rank 2
    CHECK_THROWS_AS(p.validate(), ConfigError);

    TeacherParams skew;
    skew.stain_matrix = {1000, 0, 0, 0, 1, 0, 0, 0, 1};  // condition number 1000
    CHECK_THROWS_AS(skew.validate(), ConfigError);

    TeacherParams neg = TeacherParams::defaults();
    neg.gain[1] = 0.0;
    CHECK_THROWS_AS(neg.validate(), ConfigError);
}

TEST_CASE("synthetic corpus: counts, layout, separation, determinism") {
    TempDir tmp_a("corpus_a");
    TempDir tmp_b("corpus_b");
    CorpusConfig cfg;
    cfg.n_train = 8;
    cfg.n_eval = 3;
    cfg.tile = 32;
    cfg.seed = 99;
    const TeacherParams teacher = TeacherParams::defaults();

    const Manifest m1 = gen_synthetic_corpus(cfg, teacher, tmp_a.path());
    const Manifest m2 = gen_synthetic_corpus(cfg, teacher, tmp_b.path());

    CHECK(m1.files.size() == 2u * (cfg.n_train + cfg.n_eval));
    int per_domain_a = 0;
    for (const auto& f : m1.files) per_domain_a += f.domain == "a";
    CHECK(per_domain_a == cfg.n_train + cfg.n_eval);

    // same seed, bit-identical artifacts
    CHECK(file_bytes(tmp_a / "manifest.json") == file_bytes(tmp_b / "manifest.json"));
    for (const auto& f : m1.files) {
        CHECK(file_bytes(tmp_a.path() / f.path) == file_bytes(tmp_b.path() / f.path));
    }

    // train and eval splits are disjoint path sets
    std::set<std::string> train_paths, eval_paths;
    for (const auto& f : m1.files) {
        (f.split == "train" ? train_paths : eval_paths).insert(f.path);
    }
    CHECK(train_paths.size() + eval_paths.size() == m1.files.size());

    // learnable separation between the domains
    const auto a_files = manifest_files(m1, tmp_a.path(), "a", "train");
    const auto b_files = manifest_files(m1, tmp_a.path(), "b", "train");
    REQUIRE(a_files.size() == b_files.size());
    double sep[3] = {0, 0, 0};
    std::size_t count = 0;
    for (std::size_t i = 0; i < a_files.size(); ++i) {
        const Tensor a = load_image(a_files[i]);
        const Tensor b = load_image(b_files[i]);
        for (int ch = 0; ch < 3; ++ch) {
            for (int px = 0; px < a.h * a.w; ++px) {
                sep[ch] += a.plane(0, ch)[px] - b.plane(0, ch)[px];
            }
        }
        count += static_cast<std::size_t>(a.h) * a.w;
    }
    double norm = 0.0;
    for (const double s : sep) norm += (s / count) * (s / count);
    CHECK(std::sqrt(norm) >= 0.05);
}

TEST_CASE("corpus generation rejects near-identity teachers and bad directories") {
    TempDir tmp("corpus_err");
    CorpusConfig cfg;
    cfg.n_train = 4;
    cfg.n_eval = 0;
    cfg.tile = 16;
    // identity teacher: zero separation no matter how often we retry
    CHECK_THROWS_WITH_AS(gen_synthetic_corpus(cfg, TeacherParams{}, tmp.path()),
                         doctest::Contains("separation"), ConfigError);
    CHECK_THROWS_AS(
        gen_synthetic_corpus(cfg, TeacherParams::defaults(), "/proc/nonexistent/corpus"),
        IoError);
}

TEST_CASE("manifest round trip preserves teacher params and files") {
    TempDir tmp("manifest");
    Manifest m;
    m.seed = 42;
    m.tile = 64;
    m.teacher = TeacherParams::defaults();
    m.files = {{"a/train/0000.png", "a", "train"}, {"b/eval/0000.png", "b", "eval"}};
    save_manifest(m, tmp / "manifest.json");
    const Manifest back = load_manifest(tmp / "manifest.json");
    CHECK(back.seed == 42);
    CHECK(back.tile == 64);
    CHECK(back.teacher.stain_matrix == m.teacher.stain_matrix);
    CHECK(back.teacher.gain == m.teacher.gain);
    REQUIRE(back.files.size() == 2);
    CHECK(back.files[1].split == "eval");

    std::ofstream(tmp / "broken.json") << "{not json";
    CHECK_THROWS_AS(load_manifest(tmp / "broken.json"), ConfigError);
    CHECK_THROWS_AS(load_manifest(tmp / "absent.json"), IoError);
}

TEST_CASE("assemble_pairs: count, consistency across both constructions, shuffling") {
    Rng rng(6);
    std::vector<Tensor> real_a, real_b;
    const TeacherParams teacher = TeacherParams::defaults();
    for (int i = 0; i < 4; ++i) {
        real_a.push_back(render_tissue_tile(32, rng));
        real_b.push_back(
            quantize(teacher_transform(render_tissue_tile(32, rng), teacher,
                                       TeacherDirection::kForward)));
    }

    const PairedDataset ds =
        assemble_pairs(real_a, real_b, teacher, TeacherDirection::kForward, 7, "train");
    CHECK(ds.pairs.size() == real_a.size() + real_b.size());
    CHECK(ds.split == "train");

    // every pair's target is the teacher-forward of its input, up to
    // quantization effects on the fake-source construction
    for (const auto& pair : ds.pairs) {
        const Tensor expect = teacher_transform(pair.input, teacher, TeacherDirection::kForward);
        double mean = 0.0;
        for (std::size_t i = 0; i < expect.data.size(); ++i) {
            mean += std::abs(expect.data[i] - pair.target.data[i]);
        }
        mean /= static_cast<double>(expect.data.size());
        CHECK(mean < 0.02);
    }

    // seeded shuffle: same seed same order, different seed different order
    const PairedDataset same =
        assemble_pairs(real_a, real_b, teacher, TeacherDirection::kForward, 7, "train");
    const PairedDataset other =
        assemble_pairs(real_a, real_b, teacher, TeacherDirection::kForward, 8, "train");
    bool same_order = true, other_order = true;
    for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
        same_order = same_order && same.pairs[i].input.data == ds.pairs[i].input.data;
        other_order = other_order && other.pairs[i].input.data == ds.pairs[i].input.data;
    }
    CHECK(same_order);
    CHECK_FALSE(other_order);

    CHECK_THROWS_AS(
        assemble_pairs({}, real_b, teacher, TeacherDirection::kForward, 1, "train"),
        ConfigError);
}

TEST_CASE("tissue tiles look like tissue: in range, textured, nucleus-dark spots") {
    Rng rng(12);
    const Tensor tile = render_tissue_tile(64, rng);
    CHECK(tile.all_finite());
    float lo = 1.0f, hi = 0.0f;
    for (const float v : tile.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(lo >= 0.0f);
    CHECK(hi <= 1.0f);
    CHECK(hi - lo > 0.1f);  // not a constant tile
}
