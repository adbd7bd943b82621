#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "stainbench/checkpoint.hpp"
#include "stainbench/train.hpp"
#include "support/gradcheck.hpp"
#include "support/tmpdir.hpp"

using namespace stainbench;
using testsupport::random_tensor;
using testsupport::TempDir;

namespace {

std::string file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::vector<std::string> read_lines(const std::filesystem::path& p) {
    std::ifstream in(p);
    REQUIRE(in);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

// tiny corpus + config shared by the loop tests
struct Fixture {
    TempDir corpus{"train_corpus"};
    TeacherParams teacher = TeacherParams::defaults();

    Fixture() {
        CorpusConfig cfg;
        cfg.n_train = 8;
        cfg.n_eval = 2;
        cfg.tile = 16;
        cfg.seed = 5;
        gen_synthetic_corpus(cfg, teacher, corpus.path());
    }

    TrainOptions options(const std::filesystem::path& out, int epochs) const {
        TrainOptions opts;
        opts.model_spec.kind = ModelKind::kUnet;
        opts.model_spec.base_channels = 4;
        opts.config.epochs = epochs;
        opts.config.batch_size = 4;
        opts.config.seed = 123;
        opts.corpus_dir = corpus.path();
        opts.out_dir = out;
        return opts;
    }
};

}  // namespace

TEST_CASE("checkpoint round trip: forward is bit-identical after save/load") {
    TempDir tmp("ckpt");
    ModelSpec spec;
    spec.base_channels = 4;
    Model<float> m = init_model<float>(spec, InitSpec{17});
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.seed = 17;

    SgdState<float> vel = SgdState<float>::zeros_like(m.stack);
    vel.velocity[0].weights.data[0] = 0.25f;

    save_checkpoint(tmp / "m.ckpt", m, cfg, 7, &vel);
    const Checkpoint back = load_checkpoint(tmp / "m.ckpt");
    CHECK(back.epoch == 7);
    CHECK(back.config.epochs == 50);
    CHECK(back.config.lr0 == cfg.lr0);
    CHECK(back.spec.base_channels == 4);
    REQUIRE(back.velocity.has_value());
    CHECK(back.velocity->velocity[0].weights.data[0] == 0.25f);

    Rng rng(17);
    const Tensor in = random_tensor(1, 3, 16, 16, rng, 0.0, 1.0).cast<float>();
    const Tensor a = m.stack.forward(in);
    const Tensor b = back.model.stack.forward(in);
    CHECK(a.data == b.data);
}

TEST_CASE("checkpoint rejects corrupt and truncated files") {
    TempDir tmp("ckpt_bad");
    std::ofstream(tmp / "x.ckpt") << "garbage";
    CHECK_THROWS_AS(load_checkpoint(tmp / "x.ckpt"), IoError);

    ModelSpec spec;
    spec.base_channels = 4;
    const Model<float> m = init_model<float>(spec, InitSpec{1});
    save_checkpoint(tmp / "m.ckpt", m, TrainConfig{}, 1);
    const std::string bytes = file_bytes(tmp / "m.ckpt");
    std::ofstream(tmp / "trunc.ckpt", std::ios::binary)
        << bytes.substr(0, bytes.size() / 2);
    CHECK_THROWS_AS(load_checkpoint(tmp / "trunc.ckpt"), IoError);
    CHECK_THROWS_AS(load_checkpoint(tmp / "missing.ckpt"), IoError);
}

TEST_CASE("training writes a checkpoint per epoch and the loss CSV") {
    Fixture fx;
    TempDir out("train_out");
    const TrainResult r = train_model(fx.options(out.path(), 2), nullptr);
    CHECK(r.epochs_completed == 2);
    CHECK(std::filesystem::exists(out / "ckpt-0001.ckpt"));
    CHECK(std::filesystem::exists(out / "ckpt-0002.ckpt"));
    CHECK(std::filesystem::exists(out / "final.ckpt"));

    const auto lines = read_lines(out / "loss.csv");
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "epoch,lr,train_l1,val_l1");
    CHECK(lines[1].substr(0, 2) == "1,");
    CHECK(lines[2].substr(0, 2) == "2,");

    const Checkpoint final = load_checkpoint(out / "final.ckpt");
    CHECK(final.epoch == 2);
    CHECK(std::isfinite(r.final_train_l1));
    CHECK(std::isfinite(r.final_val_l1));
}

TEST_CASE("training is byte-identical across runs with the same seed") {
    Fixture fx;
    TempDir out_a("train_a"), out_b("train_b");
    train_model(fx.options(out_a.path(), 2), nullptr);
    train_model(fx.options(out_b.path(), 2), nullptr);
    CHECK(file_bytes(out_a / "final.ckpt") == file_bytes(out_b / "final.ckpt"));
    CHECK(file_bytes(out_a / "loss.csv") == file_bytes(out_b / "loss.csv"));
}

TEST_CASE("resume continues the schedule and reproduces the straight-through run") {
    Fixture fx;
    TempDir straight("train_full"), resumed("train_resume"), scratch("train_scratch");
    train_model(fx.options(straight.path(), 2), nullptr);
    // harvest the epoch-1 checkpoint of an identical run, then resume from it
    train_model(fx.options(scratch.path(), 2), nullptr);

    TrainOptions rest = fx.options(resumed.path(), 2);
    rest.resume = scratch / "ckpt-0001.ckpt";
    const TrainResult r = train_model(rest, nullptr);
    CHECK(r.epochs_completed == 2);

    CHECK(file_bytes(resumed / "final.ckpt") == file_bytes(straight / "final.ckpt"));

    // the resumed loss CSV holds exactly the continued epoch
    const auto lines = read_lines(resumed / "loss.csv");
    REQUIRE(lines.size() == 1);
    CHECK(lines[0].substr(0, 2) == "2,");

    // resuming a finished run is a config error
    TrainOptions done = fx.options(resumed.path(), 2);
    done.resume = resumed / "final.ckpt";
    CHECK_THROWS_AS(train_model(done, nullptr), ConfigError);
}

TEST_CASE("training loss decreases on the oracle-teacher task") {
    Fixture fx;
    TempDir out("train_learn");
    TrainOptions opts = fx.options(out.path(), 6);
    const TrainResult r = train_model(opts, nullptr);
    const auto lines = read_lines(out / "loss.csv");
    const double first = std::stod(lines[1].substr(lines[1].find(',', 2) + 1));
    CHECK(r.final_train_l1 < first);
}

TEST_CASE("ba-direction training maps domain B toward domain A") {
    Fixture fx;
    TempDir out("train_ba");
    TrainOptions opts = fx.options(out.path(), 2);
    opts.direction = TeacherDirection::kInverse;
    const TrainResult r = train_model(opts, nullptr);
    CHECK(r.epochs_completed == 2);
    CHECK(std::filesystem::exists(r.final_checkpoint));
}

TEST_CASE("dataset_l1 matches a by-hand mean absolute difference") {
    ModelSpec spec;
    spec.kind = ModelKind::kPixelMapper;
    spec.pm_widths = {3, 3};
    Model<float> id = build_pixelmapper<float>(spec);
    for (int i = 0; i < 3; ++i) id.stack.params[0].value.weights.at(i, i, 0, 0) = 1.0f;

    Rng rng(9);
    PairedDataset ds;
    ds.pairs.push_back(PairedSample{random_tensor(1, 3, 8, 8, rng, 0.0, 1.0).cast<float>(),
                                    random_tensor(1, 3, 8, 8, rng, 0.0, 1.0).cast<float>(), ""});
    double expect = 0.0;
    for (std::size_t i = 0; i < ds.pairs[0].input.data.size(); ++i) {
        expect += std::abs(ds.pairs[0].input.data[i] - ds.pairs[0].target.data[i]);
    }
    expect /= static_cast<double>(ds.pairs[0].input.data.size());
    CHECK(dataset_l1(id, ds, 4) == doctest::Approx(expect).epsilon(1e-6));
}
