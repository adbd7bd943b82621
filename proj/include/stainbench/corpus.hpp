#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "stainbench/rng.hpp"
#include "stainbench/teacher.hpp"
#include "stainbench/tensor.hpp"

namespace stainbench {

/// Procedural tissue-like tile: a pink stroma background with smooth value
/// noise and soft-edged dark nuclei blobs. Pure function of the rng stream.
Tensor render_tissue_tile(int size, Rng& rng);

struct CorpusConfig {
    int n_train = 500;
    int n_eval = 100;
    int tile = 64;
    std::uint64_t seed = 0;
};

struct ManifestEntry {
    std::string path;  // relative to the manifest directory
    std::string domain;  // "a" or "b"
    std::string split;   // "train" or "eval"
};

struct Manifest {
    int version = 1;
    std::uint64_t seed = 0;
    int tile = 0;
    TeacherParams teacher;
    std::vector<ManifestEntry> files;
};

/// Writes domain-A tiles and their teacher-transformed domain-B counterparts
/// under out_dir/{a,b}/{train,eval}/NNNN.png plus manifest.json. Regenerates
/// with a derived seed (up to a retry cap) until the mean-RGB separation
/// between the domains is at least 0.05, so the pair is learnable.
Manifest gen_synthetic_corpus(const CorpusConfig& cfg, const TeacherParams& teacher,
                              const std::filesystem::path& out_dir);

void save_manifest(const Manifest& m, const std::filesystem::path& path);
Manifest load_manifest(const std::filesystem::path& path);

/// Manifest-relative paths of one domain/split, sorted.
std::vector<std::filesystem::path> manifest_files(const Manifest& m,
                                                  const std::filesystem::path& manifest_dir,
                                                  const std::string& domain,
                                                  const std::string& split);

struct PairedSample {
    Tensor input;
    Tensor target;
    std::string provenance;  // e.g. "real_a+fake_b"
};

struct PairedDataset {
    std::vector<PairedSample> pairs;
    std::string split;
};

/// Pairing used to train the student: every real source tile is paired with
/// its teacher-generated target, and every real target tile with its
/// teacher-inverted source, then the union is shuffled by seed. `direction`
/// is the teacher direction that maps source to target, so the A-to-B
/// student passes (A tiles, B tiles, forward) and the B-to-A student
/// (B tiles, A tiles, inverse).
PairedDataset assemble_pairs(const std::vector<Tensor>& real_src,
                             const std::vector<Tensor>& real_tgt, const TeacherParams& teacher,
                             TeacherDirection direction, std::uint64_t seed,
                             const std::string& split);

}  // namespace stainbench
