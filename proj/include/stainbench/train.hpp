#pragma once

#include <filesystem>
#include <optional>
#include <ostream>

#include "stainbench/checkpoint.hpp"
#include "stainbench/corpus.hpp"
#include "stainbench/models.hpp"
#include "stainbench/optim.hpp"

namespace stainbench {

struct TrainOptions {
    ModelSpec model_spec;
    TrainConfig config;
    std::filesystem::path corpus_dir;  // must contain manifest.json
    std::filesystem::path out_dir;
    TeacherDirection direction = TeacherDirection::kForward;  // forward = A to B
    std::optional<std::filesystem::path> resume;
    int checkpoint_every = 1;
};

struct TrainResult {
    std::filesystem::path final_checkpoint;
    int epochs_completed = 0;
    double final_train_l1 = 0.0;
    double final_val_l1 = 0.0;
};

/// Epoch loop: per-epoch cosine learning rate, seeded shuffling, SGD with
/// momentum, a checkpoint per epoch (plus final.ckpt) and a loss CSV with
/// header `epoch,lr,train_l1,val_l1`. val_l1 is measured on the corpus eval
/// split, which the optimizer never sees. Resuming continues the schedule at
/// the stored epoch. Byte-identical across runs for a fixed seed.
TrainResult train_model(const TrainOptions& opts, std::ostream* progress);

/// Mean L1 between model predictions (unclamped) and targets over a
/// paired dataset, batched; used for the val column and by evaluations.
double dataset_l1(const Model<float>& model, const PairedDataset& ds, int batch_size);

/// Stacks (1, c, h, w) samples into one (k, c, h, w) batch.
Tensor stack_batch(const std::vector<Tensor>& tiles, std::size_t first, std::size_t count);

}  // namespace stainbench
