#pragma once

#include <functional>
#include <string>
#include <vector>

#include "stainbench/models.hpp"
#include "stainbench/report.hpp"
#include "stainbench/tensor.hpp"
#include "stainbench/tiling.hpp"

namespace stainbench {

struct FeatureMatrix {
    int rows = 0;
    int dim = 0;
    std::vector<double> data;  // row-major

    const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * dim; }
};

/// Pluggable image embedding for the Fréchet distance; `extract` fills one
/// row of length `dim` per image and must be deterministic.
struct FeatureExtractor {
    std::string name;
    int dim = 0;
    std::function<void(const Tensor& image, double* row)> extract;
};

/// Desk-scale default embedding: exact area-average downsample of each RGB
/// image to 8x8 per channel, flattened to 192 values.
FeatureExtractor default_features();

FeatureMatrix extract_features(const FeatureExtractor& extractor,
                               const std::vector<Tensor>& images);

/// Squared 2-Wasserstein distance between Gaussian fits of the two feature
/// sets. Covariance square roots use a symmetric eigendecomposition with
/// negative eigenvalues clipped to zero, so rank-deficient inputs degrade
/// gracefully instead of crashing.
double frechet_distance(const FeatureMatrix& a, const FeatureMatrix& b);

/// Mean windowed structural similarity: 8x8 uniform windows, stride 1,
/// population statistics, c1 = (0.01 L)^2, c2 = (0.03 L)^2 with L = 1 for
/// [0,1] images. Channels are averaged.
double ssim(const Tensor& x, const Tensor& y);

/// 20 log10(max_val / sqrt(MSE)); identical inputs return +infinity.
double psnr(const Tensor& x, const Tensor& y, double max_val = 1.0);

struct CycleReport {
    MetricReport ssim;
    MetricReport psnr;
};

/// Maps each image A -> B -> A and scores the reconstruction against the
/// original.
CycleReport cycle_consistency(const Model<float>& model_ab, const Model<float>& model_ba,
                              const std::vector<Tensor>& images_a);

/// Seam component: mean over pixel pairs straddling interior tile boundaries
/// of |cross-pair jump in stitched - cross-pair jump in full|. Global
/// component: mean |full - stitched| over all pixels.
struct SeamScore {
    double seam_term = 0.0;
    double global_term = 0.0;
    double total() const { return seam_term + global_term; }
};

SeamScore seam_discrepancy(const Tensor& full, const Tensor& stitched, const TileGrid& grid);

}  // namespace stainbench
