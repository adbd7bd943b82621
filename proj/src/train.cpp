#include "stainbench/train.hpp"

#include <malloc.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numeric>

#include "stainbench/errors.hpp"
#include "stainbench/image_io.hpp"

namespace stainbench {

namespace {

// The step loop allocates and frees multi-megabyte activation buffers at a
// high rate; keeping them in the arena instead of mmap avoids re-faulting
// the pages every step.
void tune_allocator_once() {
    static std::once_flag flag;
    std::call_once(flag, [] {
        mallopt(M_MMAP_THRESHOLD, 1 << 30);
        mallopt(M_TRIM_THRESHOLD, 1 << 30);
    });
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

Tensor stack_pairs(const PairedDataset& ds, const std::vector<std::size_t>& order,
                   std::size_t first, std::size_t count, bool targets) {
    const Tensor& proto = targets ? ds.pairs[order[first]].target : ds.pairs[order[first]].input;
    Tensor batch(static_cast<int>(count), proto.c, proto.h, proto.w);
    const std::size_t sample = proto.size();
    for (std::size_t i = 0; i < count; ++i) {
        const Tensor& src =
            targets ? ds.pairs[order[first + i]].target : ds.pairs[order[first + i]].input;
        if (src.size() != sample) {
            throw ShapeError("train: paired tiles disagree on shape, " + src.shape() + " vs " +
                             proto.shape());
        }
        std::memcpy(batch.data.data() + i * sample, src.data.data(), sample * sizeof(float));
    }
    return batch;
}

}  // namespace

Tensor stack_batch(const std::vector<Tensor>& tiles, std::size_t first, std::size_t count) {
    const Tensor& proto = tiles[first];
    Tensor batch(static_cast<int>(count), proto.c, proto.h, proto.w);
    for (std::size_t i = 0; i < count; ++i) {
        std::memcpy(batch.data.data() + i * proto.size(), tiles[first + i].data.data(),
                    proto.size() * sizeof(float));
    }
    return batch;
}

double dataset_l1(const Model<float>& model, const PairedDataset& ds, int batch_size) {
    if (ds.pairs.empty()) return 0.0;
    std::vector<std::size_t> order(ds.pairs.size());
    std::iota(order.begin(), order.end(), 0);
    double total = 0.0;
    std::size_t elements = 0;
    for (std::size_t first = 0; first < ds.pairs.size(); first += batch_size) {
        const std::size_t count = std::min<std::size_t>(batch_size, ds.pairs.size() - first);
        const Tensor in = stack_pairs(ds, order, first, count, false);
        const Tensor tgt = stack_pairs(ds, order, first, count, true);
        const Tensor pred = model.stack.forward(in);
        double s = 0.0;
        for (std::size_t i = 0; i < pred.data.size(); ++i) {
            s += std::abs(static_cast<double>(pred.data[i]) - tgt.data[i]);
        }
        total += s;
        elements += pred.data.size();
    }
    return total / static_cast<double>(elements);
}

TrainResult train_model(const TrainOptions& opts, std::ostream* progress) {
    tune_allocator_once();
    opts.model_spec.validate();
    opts.config.validate();
    if (opts.checkpoint_every < 1) throw ConfigError("train: checkpoint_every must be >= 1");

    const Manifest manifest = load_manifest(opts.corpus_dir / "manifest.json");
    const bool ab = opts.direction == TeacherDirection::kForward;
    const std::string src_domain = ab ? "a" : "b";
    const std::string tgt_domain = ab ? "b" : "a";

    auto load_split = [&](const std::string& domain, const std::string& split) {
        std::vector<Tensor> tiles;
        for (const auto& f : manifest_files(manifest, opts.corpus_dir, domain, split)) {
            tiles.push_back(load_image(f));
        }
        return tiles;
    };

    const std::vector<Tensor> src_train = load_split(src_domain, "train");
    const std::vector<Tensor> tgt_train = load_split(tgt_domain, "train");
    const PairedDataset train_set = assemble_pairs(src_train, tgt_train, manifest.teacher,
                                                   opts.direction, opts.config.seed, "train");

    PairedDataset val_set;
    {
        const std::vector<Tensor> src_eval = load_split(src_domain, "eval");
        const std::vector<Tensor> tgt_eval = load_split(tgt_domain, "eval");
        if (!src_eval.empty() && !tgt_eval.empty()) {
            val_set = assemble_pairs(src_eval, tgt_eval, manifest.teacher, opts.direction,
                                     opts.config.seed, "eval");
        }
    }

    Model<float> model;
    SgdState<float> momentum;
    int start_epoch = 0;
    if (opts.resume) {
        Checkpoint ckpt = load_checkpoint(*opts.resume);
        model = std::move(ckpt.model);
        start_epoch = ckpt.epoch;
        if (start_epoch >= opts.config.epochs) {
            throw ConfigError("train: checkpoint already at epoch " + std::to_string(start_epoch) +
                              " of " + std::to_string(opts.config.epochs));
        }
        momentum = ckpt.velocity ? std::move(*ckpt.velocity)
                                 : SgdState<float>::zeros_like(model.stack);
    } else {
        model = init_model<float>(opts.model_spec, InitSpec{opts.config.seed});
        momentum = SgdState<float>::zeros_like(model.stack);
    }

    std::filesystem::create_directories(opts.out_dir);
    const auto csv_path = opts.out_dir / "loss.csv";
    std::ofstream csv(csv_path, start_epoch > 0 ? std::ios::app : std::ios::trunc);
    if (!csv) throw IoError("cannot write loss CSV: " + csv_path.string());
    if (start_epoch == 0) csv << "epoch,lr,train_l1,val_l1\n";

    TrainResult result;
    std::vector<std::size_t> order(train_set.pairs.size());

    for (int epoch = start_epoch; epoch < opts.config.epochs; ++epoch) {
        const double lr = cosine_lr(epoch, opts.config);

        // batch order is a pure function of (seed, epoch) so resumed runs
        // replay the same trajectory
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng(mix_seed(opts.config.seed, 0x45504f43ULL + epoch));
        for (std::size_t i = order.size(); i > 1; --i) {
            const auto j =
                static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<int>(i) - 1));
            std::swap(order[i - 1], order[j]);
        }

        double loss_sum = 0.0;
        std::size_t loss_samples = 0;
        for (std::size_t first = 0; first < order.size(); first += opts.config.batch_size) {
            const std::size_t count =
                std::min<std::size_t>(opts.config.batch_size, order.size() - first);
            const Tensor in = stack_pairs(train_set, order, first, count, false);
            const Tensor tgt = stack_pairs(train_set, order, first, count, true);
            TrainStep<float> step;
            try {
                step = forward_backward(model.stack, in, tgt);
            } catch (const NumericError& e) {
                throw NumericError("train: epoch " + std::to_string(epoch + 1) + ", batch at " +
                                   std::to_string(first) + ": " + e.what());
            }
            sgd_step(model.stack, step.grads, lr, opts.config, momentum);
            loss_sum += static_cast<double>(step.loss) * static_cast<double>(count);
            loss_samples += count;
        }
        const double train_l1 = loss_sum / static_cast<double>(loss_samples);
        const double val_l1 =
            val_set.pairs.empty() ? 0.0 : dataset_l1(model, val_set, opts.config.batch_size);

        csv << (epoch + 1) << "," << fmt(lr) << "," << fmt(train_l1) << "," << fmt(val_l1)
            << "\n";
        csv.flush();

        if (progress) {
            (*progress) << "epoch " << (epoch + 1) << "/" << opts.config.epochs << " lr " << lr
                        << " train_l1 " << train_l1 << " val_l1 " << val_l1 << "\n";
        }

        const bool last = epoch + 1 == opts.config.epochs;
        if ((epoch + 1 - start_epoch) % opts.checkpoint_every == 0 || last) {
            char name[32];
            std::snprintf(name, sizeof(name), "ckpt-%04d.ckpt", epoch + 1);
            save_checkpoint(opts.out_dir / name, model, opts.config, epoch + 1, &momentum);
        }
        result.epochs_completed = epoch + 1;
        result.final_train_l1 = train_l1;
        result.final_val_l1 = val_l1;
    }

    result.final_checkpoint = opts.out_dir / "final.ckpt";
    save_checkpoint(result.final_checkpoint, model, opts.config, result.epochs_completed,
                    &momentum);
    return result;
}

}  // namespace stainbench
