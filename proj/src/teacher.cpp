#include "stainbench/teacher.hpp"

#include <algorithm>
#include <cmath>

#include "stainbench/errors.hpp"
#include "stainbench/linalg.hpp"

namespace stainbench {

void TeacherParams::validate() const {
    if (det3(stain_matrix) == 0.0) {
        throw ConfigError("TeacherParams: stain matrix is singular");
    }
    const double cond = cond3(stain_matrix);
    if (!(cond < 100.0)) {
        throw ConfigError("TeacherParams: stain matrix condition number " + std::to_string(cond) +
                          " >= 100");
    }
    for (const double g : gain) {
        if (!(g > 0.0)) throw ConfigError("TeacherParams: gains must be positive");
    }
}

TeacherParams TeacherParams::defaults() {
    TeacherParams p;
    p.stain_matrix = {0.95, 0.03, 0.02,   //
                      0.04, 0.93, 0.03,   //
                      0.02, 0.05, 0.93};
    p.gain = {1.28, 1.36, 1.14};
    return p;
}

Tensor teacher_transform(const Tensor& image, const TeacherParams& params,
                         TeacherDirection direction) {
    if (image.c != 3) {
        throw ShapeError("teacher_transform: expected 3-channel image, got " + image.shape());
    }
    params.validate();

    std::array<double, 9> m = params.stain_matrix;
    std::array<double, 3> g = params.gain;
    if (direction == TeacherDirection::kInverse) {
        m = inverse3(params.stain_matrix);
        g = {1.0 / params.gain[0], 1.0 / params.gain[1], 1.0 / params.gain[2]};
    }

    Tensor out(image.n, 3, image.h, image.w);
    const int plane = image.h * image.w;
    for (int n = 0; n < image.n; ++n) {
        const float* r = image.plane(n, 0);
        const float* gr = image.plane(n, 1);
        const float* b = image.plane(n, 2);
        float* ro = out.plane(n, 0);
        float* go = out.plane(n, 1);
        float* bo = out.plane(n, 2);
#pragma omp parallel for schedule(static)
        for (int i = 0; i < plane; ++i) {
            const double od[3] = {
                -std::log((255.0 * r[i] + 1.0) / 256.0),
                -std::log((255.0 * gr[i] + 1.0) / 256.0),
                -std::log((255.0 * b[i] + 1.0) / 256.0),
            };
            double od2[3];
            if (direction == TeacherDirection::kForward) {
                for (int ch = 0; ch < 3; ++ch) {
                    od2[ch] = g[ch] * (m[ch * 3] * od[0] + m[ch * 3 + 1] * od[1] +
                                       m[ch * 3 + 2] * od[2]);
                }
            } else {
                // exact inverse: undo the gain, then apply M^-1
                const double scaled[3] = {od[0] * g[0], od[1] * g[1], od[2] * g[2]};
                for (int ch = 0; ch < 3; ++ch) {
                    od2[ch] = m[ch * 3] * scaled[0] + m[ch * 3 + 1] * scaled[1] +
                              m[ch * 3 + 2] * scaled[2];
                }
            }
            float* dst[3] = {ro, go, bo};
            for (int ch = 0; ch < 3; ++ch) {
                const double v = (std::exp(-od2[ch]) * 256.0 - 1.0) / 255.0;
                dst[ch][i] = static_cast<float>(std::min(1.0, std::max(0.0, v)));
            }
        }
    }
    return out;
}

}  // namespace stainbench
