#include "stainbench/tiling.hpp"

#include <algorithm>
#include <cstring>
#include <string>

#include "stainbench/errors.hpp"

namespace stainbench {

namespace {

std::vector<int> axis_origins(int dim, int tile, int overlap) {
    const int stride = tile - overlap;
    std::vector<int> origins;
    for (int o = 0; o + tile <= dim; o += stride) origins.push_back(o);
    if (origins.empty() || origins.back() + tile < dim) {
        origins.push_back(dim - tile);  // shift the last tile inward to fit
    }
    return origins;
}

// Ownership intervals for center-crop stitching: the boundary between two
// adjacent tiles falls at the midpoint of their overlap.
std::vector<std::pair<int, int>> ownership(const std::vector<int>& origins, int tile, int dim) {
    std::vector<std::pair<int, int>> spans(origins.size());
    for (std::size_t i = 0; i < origins.size(); ++i) {
        const int lo = i == 0 ? 0 : (origins[i] + origins[i - 1] + tile + 1) / 2;
        const int hi = i + 1 == origins.size() ? dim : (origins[i + 1] + origins[i] + tile + 1) / 2;
        spans[i] = {lo, hi};
    }
    return spans;
}

}  // namespace

TileGrid TileGrid::make(int src_h, int src_w, int tile, int overlap) {
    if (tile < 1 || overlap < 0 || tile <= overlap) {
        throw ConfigError("TileGrid: need tile > overlap >= 0, got tile " + std::to_string(tile) +
                          " overlap " + std::to_string(overlap));
    }
    if (tile > src_h || tile > src_w) {
        throw ConfigError("TileGrid: tile " + std::to_string(tile) + " exceeds image dims " +
                          std::to_string(src_h) + "x" + std::to_string(src_w));
    }
    TileGrid g;
    g.src_h = src_h;
    g.src_w = src_w;
    g.tile = tile;
    g.overlap = overlap;
    g.ys = axis_origins(src_h, tile, overlap);
    g.xs = axis_origins(src_w, tile, overlap);
    return g;
}

std::vector<Tensor> tile_image(const Tensor& image, const TileGrid& grid) {
    if (image.n != 1) throw ShapeError("tile_image: expected batch 1, got " + image.shape());
    if (image.h != grid.src_h || image.w != grid.src_w) {
        throw ShapeError("tile_image: image " + image.shape() + " does not match grid source " +
                         std::to_string(grid.src_h) + "x" + std::to_string(grid.src_w));
    }
    std::vector<Tensor> tiles;
    tiles.reserve(grid.count());
    for (int idx = 0; idx < grid.count(); ++idx) {
        const auto [oy, ox] = grid.origin(idx);
        Tensor t(1, image.c, grid.tile, grid.tile);
        for (int ch = 0; ch < image.c; ++ch) {
            for (int y = 0; y < grid.tile; ++y) {
                std::memcpy(t.row(0, ch, y), image.row(0, ch, oy + y) + ox,
                            sizeof(float) * grid.tile);
            }
        }
        tiles.push_back(std::move(t));
    }
    return tiles;
}

std::pair<std::vector<Tensor>, TileGrid> tile_image(const Tensor& image, int tile, int overlap) {
    TileGrid grid = TileGrid::make(image.h, image.w, tile, overlap);
    return {tile_image(image, grid), grid};
}

Tensor stitch(const std::vector<Tensor>& tiles, const TileGrid& grid, Blend blend) {
    if (static_cast<int>(tiles.size()) != grid.count()) {
        throw ShapeError("stitch: got " + std::to_string(tiles.size()) + " tiles, grid expects " +
                         std::to_string(grid.count()));
    }
    const int channels = tiles.empty() ? 0 : tiles[0].c;
    for (const auto& t : tiles) {
        if (t.n != 1 || t.c != channels || t.h != grid.tile || t.w != grid.tile) {
            throw ShapeError("stitch: tile shape " + t.shape() + " does not match grid tile " +
                             std::to_string(grid.tile));
        }
    }

    Tensor out(1, channels, grid.src_h, grid.src_w);

    if (blend == Blend::kCenterCrop) {
        const auto yspan = ownership(grid.ys, grid.tile, grid.src_h);
        const auto xspan = ownership(grid.xs, grid.tile, grid.src_w);
        for (int idx = 0; idx < grid.count(); ++idx) {
            const int row = idx / static_cast<int>(grid.xs.size());
            const int col = idx % static_cast<int>(grid.xs.size());
            const auto [y0, y1] = yspan[row];
            const auto [x0, x1] = xspan[col];
            const auto [oy, ox] = grid.origin(idx);
            for (int ch = 0; ch < channels; ++ch) {
                for (int y = y0; y < y1; ++y) {
                    std::memcpy(out.row(0, ch, y) + x0,
                                tiles[idx].row(0, ch, y - oy) + (x0 - ox),
                                sizeof(float) * (x1 - x0));
                }
            }
        }
        return out;
    }

    std::vector<float> counts(static_cast<std::size_t>(grid.src_h) * grid.src_w, 0.0f);
    for (int idx = 0; idx < grid.count(); ++idx) {
        const auto [oy, ox] = grid.origin(idx);
        for (int ch = 0; ch < channels; ++ch) {
            for (int y = 0; y < grid.tile; ++y) {
                float* dst = out.row(0, ch, oy + y) + ox;
                const float* src = tiles[idx].row(0, ch, y);
                for (int x = 0; x < grid.tile; ++x) dst[x] += src[x];
            }
        }
        for (int y = 0; y < grid.tile; ++y) {
            float* cnt = counts.data() + static_cast<std::size_t>(oy + y) * grid.src_w + ox;
            for (int x = 0; x < grid.tile; ++x) cnt[x] += 1.0f;
        }
    }
    for (int ch = 0; ch < channels; ++ch) {
        float* plane = out.plane(0, ch);
        for (std::size_t i = 0; i < counts.size(); ++i) plane[i] /= counts[i];
    }
    return out;
}

}  // namespace stainbench
