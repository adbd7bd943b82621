#pragma once

#include <array>
#include <cstdint>

#include "stainbench/tensor.hpp"

namespace stainbench {

/// Deterministic stand-in for the trained style-transfer teacher: an affine
/// map in optical-density space. Stain variation is multiplicative in OD
/// (Beer-Lambert), so an invertible OD transform gives exact cycle-consistency
/// ground truth.
struct TeacherParams {
    std::array<double, 9> stain_matrix{1, 0, 0, 0, 1, 0, 0, 0, 1};  // row-major 3x3
    std::array<double, 3> gain{1, 1, 1};
    std::uint64_t seed = 0;

    /// Rejects singular or badly conditioned matrices (condition number
    /// >= 100) and non-positive gains.
    void validate() const;

    /// Mild channel mixing with an over-stain OD gain; roughly "stained too
    /// long" relative to the identity.
    static TeacherParams defaults();
};

enum class TeacherDirection { kForward, kInverse };

/// OD = -log((255*I + 1) / 256); OD' = gain .* (M * OD); back-transform and
/// clip to [0, 1]. The inverse direction applies the exact algebraic inverse.
Tensor teacher_transform(const Tensor& image, const TeacherParams& params,
                         TeacherDirection direction);

}  // namespace stainbench
