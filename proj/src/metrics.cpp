#include "stainbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stainbench/errors.hpp"
#include "stainbench/linalg.hpp"

namespace stainbench {

namespace {

// Exact area average of one channel plane onto an out x out grid; pixels
// straddling cell borders contribute fractionally.
void area_downsample(const float* plane, int h, int w, int out, double* dst) {
    std::vector<double> acc(static_cast<std::size_t>(out) * out, 0.0);
    const double sy = static_cast<double>(out) / h;
    const double sx = static_cast<double>(out) / w;
    for (int y = 0; y < h; ++y) {
        const double y0 = y * sy, y1 = (y + 1) * sy;
        const int cy0 = std::min(out - 1, static_cast<int>(y0));
        const int cy1 = std::min(out - 1, static_cast<int>(y1 - 1e-12));
        for (int x = 0; x < w; ++x) {
            const double x0 = x * sx, x1 = (x + 1) * sx;
            const int cx0 = std::min(out - 1, static_cast<int>(x0));
            const int cx1 = std::min(out - 1, static_cast<int>(x1 - 1e-12));
            const double v = plane[y * w + x];
            for (int cy = cy0; cy <= cy1; ++cy) {
                const double wy = std::min(y1, static_cast<double>(cy + 1)) -
                                  std::max(y0, static_cast<double>(cy));
                for (int cx = cx0; cx <= cx1; ++cx) {
                    const double wx = std::min(x1, static_cast<double>(cx + 1)) -
                                      std::max(x0, static_cast<double>(cx));
                    acc[cy * out + cx] += v * wy * wx;
                }
            }
        }
    }
    for (int i = 0; i < out * out; ++i) dst[i] = acc[i];  // each cell has unit area in grid units
}

struct Gaussian {
    std::vector<double> mean;
    std::vector<double> cov;  // sample covariance, row-major
};

Gaussian fit_gaussian(const FeatureMatrix& f) {
    Gaussian g;
    g.mean.assign(f.dim, 0.0);
    for (int r = 0; r < f.rows; ++r) {
        const double* row = f.row(r);
        for (int d = 0; d < f.dim; ++d) g.mean[d] += row[d];
    }
    for (double& m : g.mean) m /= f.rows;

    g.cov.assign(static_cast<std::size_t>(f.dim) * f.dim, 0.0);
    for (int r = 0; r < f.rows; ++r) {
        const double* row = f.row(r);
        for (int i = 0; i < f.dim; ++i) {
            const double di = row[i] - g.mean[i];
            for (int j = i; j < f.dim; ++j) {
                g.cov[i * f.dim + j] += di * (row[j] - g.mean[j]);
            }
        }
    }
    const double norm = 1.0 / (f.rows - 1);
    for (int i = 0; i < f.dim; ++i) {
        for (int j = i; j < f.dim; ++j) {
            g.cov[i * f.dim + j] *= norm;
            g.cov[j * f.dim + i] = g.cov[i * f.dim + j];
        }
    }
    return g;
}

}  // namespace

FeatureExtractor default_features() {
    FeatureExtractor e;
    e.name = "areapool8";
    e.dim = 8 * 8 * 3;
    e.extract = [](const Tensor& image, double* row) {
        if (image.n != 1 || image.c != 3) {
            throw ShapeError("default_features: expected (1,3,h,w) image, got " + image.shape());
        }
        for (int ch = 0; ch < 3; ++ch) {
            area_downsample(image.plane(0, ch), image.h, image.w, 8, row + ch * 64);
        }
    };
    return e;
}

FeatureMatrix extract_features(const FeatureExtractor& extractor,
                               const std::vector<Tensor>& images) {
    FeatureMatrix f;
    f.rows = static_cast<int>(images.size());
    f.dim = extractor.dim;
    f.data.assign(static_cast<std::size_t>(f.rows) * f.dim, 0.0);
    for (int r = 0; r < f.rows; ++r) {
        extractor.extract(images[r], f.data.data() + static_cast<std::size_t>(r) * f.dim);
        for (int d = 0; d < f.dim; ++d) {
            if (!std::isfinite(f.row(r)[d])) {
                throw NumericError("extract_features: non-finite feature row " +
                                   std::to_string(r));
            }
        }
    }
    return f;
}

double frechet_distance(const FeatureMatrix& a, const FeatureMatrix& b) {
    if (a.dim != b.dim) {
        throw ShapeError("frechet_distance: feature dims differ, " + std::to_string(a.dim) +
                         " vs " + std::to_string(b.dim));
    }
    if (a.rows < 2 || b.rows < 2) {
        throw ShapeError("frechet_distance: need at least 2 rows per side to fit a covariance");
    }
    const int d = a.dim;
    const Gaussian ga = fit_gaussian(a);
    const Gaussian gb = fit_gaussian(b);

    double mean_term = 0.0;
    for (int i = 0; i < d; ++i) {
        const double diff = ga.mean[i] - gb.mean[i];
        mean_term += diff * diff;
    }

    // tr(Sa + Sb - 2 (Sa^1/2 Sb Sa^1/2)^1/2)
    const std::vector<double> sqrt_a = spd_sqrt(ga.cov, d);
    const std::vector<double> inner = mat_mul(mat_mul(sqrt_a, gb.cov, d), sqrt_a, d);
    const std::vector<double> cross = spd_sqrt(inner, d);

    const double fid = mean_term + trace(ga.cov, d) + trace(gb.cov, d) - 2.0 * trace(cross, d);
    return std::max(0.0, fid);
}

double ssim(const Tensor& x, const Tensor& y) {
    if (!x.same_shape(y)) {
        throw ShapeError("ssim: shapes differ, " + x.shape() + " vs " + y.shape());
    }
    constexpr int kWin = 8;
    if (x.h < kWin || x.w < kWin) {
        throw ShapeError("ssim: image smaller than the 8x8 window, got " + x.shape());
    }
    constexpr double kC1 = 0.01 * 0.01;  // (0.01 L)^2, L = 1
    constexpr double kC2 = 0.03 * 0.03;
    constexpr double kN = kWin * kWin;

    const int iw = x.w + 1;
    const int ih = x.h + 1;
    std::vector<double> sx(static_cast<std::size_t>(ih) * iw), sy_(sx.size()), sxx(sx.size()),
        syy(sx.size()), sxy(sx.size());

    double total = 0.0;
    std::size_t windows = 0;
    for (int n = 0; n < x.n; ++n) {
        for (int ch = 0; ch < x.c; ++ch) {
            const float* px = x.plane(n, ch);
            const float* py = y.plane(n, ch);
            // summed-area tables with a zero top row / left column
            for (int i = 0; i < iw; ++i) sx[i] = sy_[i] = sxx[i] = syy[i] = sxy[i] = 0.0;
            for (int yy = 1; yy < ih; ++yy) {
                double rx = 0.0, ry = 0.0, rxx = 0.0, ryy = 0.0, rxy = 0.0;
                for (int xx = 1; xx < iw; ++xx) {
                    const double a = px[(yy - 1) * x.w + (xx - 1)];
                    const double b = py[(yy - 1) * x.w + (xx - 1)];
                    rx += a;
                    ry += b;
                    rxx += a * a;
                    ryy += b * b;
                    rxy += a * b;
                    const std::size_t up = static_cast<std::size_t>(yy - 1) * iw + xx;
                    const std::size_t cur = static_cast<std::size_t>(yy) * iw + xx;
                    sx[cur] = sx[up] + rx;
                    sy_[cur] = sy_[up] + ry;
                    sxx[cur] = sxx[up] + rxx;
                    syy[cur] = syy[up] + ryy;
                    sxy[cur] = sxy[up] + rxy;
                }
            }
            auto window_sum = [&](const std::vector<double>& s, int y0, int x0) {
                const std::size_t r0 = static_cast<std::size_t>(y0) * iw;
                const std::size_t r1 = static_cast<std::size_t>(y0 + kWin) * iw;
                return s[r1 + x0 + kWin] - s[r1 + x0] - s[r0 + x0 + kWin] + s[r0 + x0];
            };
            for (int y0 = 0; y0 + kWin <= x.h; ++y0) {
                for (int x0 = 0; x0 + kWin <= x.w; ++x0) {
                    const double mx = window_sum(sx, y0, x0) / kN;
                    const double my = window_sum(sy_, y0, x0) / kN;
                    const double vx = window_sum(sxx, y0, x0) / kN - mx * mx;
                    const double vy = window_sum(syy, y0, x0) / kN - my * my;
                    const double cxy = window_sum(sxy, y0, x0) / kN - mx * my;
                    const double num = (2.0 * mx * my + kC1) * (2.0 * cxy + kC2);
                    const double den = (mx * mx + my * my + kC1) * (vx + vy + kC2);
                    total += num / den;
                    ++windows;
                }
            }
        }
    }
    return total / static_cast<double>(windows);
}

double psnr(const Tensor& x, const Tensor& y, double max_val) {
    if (!x.same_shape(y)) {
        throw ShapeError("psnr: shapes differ, " + x.shape() + " vs " + y.shape());
    }
    double se = 0.0;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double d = static_cast<double>(x.data[i]) - static_cast<double>(y.data[i]);
        se += d * d;
    }
    const double mse = se / static_cast<double>(x.data.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 20.0 * std::log10(max_val / std::sqrt(mse));
}

CycleReport cycle_consistency(const Model<float>& model_ab, const Model<float>& model_ba,
                              const std::vector<Tensor>& images_a) {
    std::vector<double> ssim_vals, psnr_vals;
    ssim_vals.reserve(images_a.size());
    psnr_vals.reserve(images_a.size());
    for (const auto& img : images_a) {
        const Tensor cycled = infer(model_ba, infer(model_ab, img));
        ssim_vals.push_back(ssim(img, cycled));
        psnr_vals.push_back(psnr(img, cycled, 1.0));
    }
    std::map<std::string, std::string> prov{
        {"images", std::to_string(images_a.size())},
        {"protocol", "a->b->a reconstruction vs original"},
        {"ssim_window", "uniform 8x8, population stats"},
        {"psnr_max_val", "1.0 (theoretical range)"},
    };
    CycleReport r{make_report("cycle_ssim", std::move(ssim_vals), prov),
                  make_report("cycle_psnr", std::move(psnr_vals), prov)};
    return r;
}

SeamScore seam_discrepancy(const Tensor& full, const Tensor& stitched, const TileGrid& grid) {
    if (!full.same_shape(stitched)) {
        throw ShapeError("seam_discrepancy: full " + full.shape() + " != stitched " +
                         stitched.shape());
    }
    if (full.n != 1 || full.h != grid.src_h || full.w != grid.src_w) {
        throw ShapeError("seam_discrepancy: image " + full.shape() + " does not match grid " +
                         std::to_string(grid.src_h) + "x" + std::to_string(grid.src_w));
    }

    SeamScore score;

    // interior seam coordinates: where adjacent center-crop ownership regions
    // meet (for zero overlap these are the tile borders)
    double seam_sum = 0.0;
    std::size_t seam_pairs = 0;
    auto jump_error = [&](int y0, int x0, int y1, int x1) {
        for (int ch = 0; ch < full.c; ++ch) {
            const double js = stitched.at(0, ch, y0, x0) - stitched.at(0, ch, y1, x1);
            const double jf = full.at(0, ch, y0, x0) - full.at(0, ch, y1, x1);
            seam_sum += std::abs(js - jf);
            ++seam_pairs;
        }
    };
    for (std::size_t i = 1; i < grid.ys.size(); ++i) {
        // boundary row between tile rows i-1 and i under center-crop ownership
        const int b = (grid.ys[i] + grid.ys[i - 1] + grid.tile + 1) / 2;
        if (b <= 0 || b >= grid.src_h) continue;
        for (int x = 0; x < grid.src_w; ++x) jump_error(b - 1, x, b, x);
    }
    for (std::size_t i = 1; i < grid.xs.size(); ++i) {
        const int b = (grid.xs[i] + grid.xs[i - 1] + grid.tile + 1) / 2;
        if (b <= 0 || b >= grid.src_w) continue;
        for (int y = 0; y < grid.src_h; ++y) jump_error(y, b - 1, y, b);
    }
    score.seam_term = seam_pairs > 0 ? seam_sum / static_cast<double>(seam_pairs) : 0.0;

    double global_sum = 0.0;
    for (std::size_t i = 0; i < full.data.size(); ++i) {
        global_sum += std::abs(static_cast<double>(full.data[i]) - stitched.data[i]);
    }
    score.global_term = global_sum / static_cast<double>(full.data.size());
    return score;
}

}  // namespace stainbench
