#pragma once

#include <utility>
#include <vector>

#include "stainbench/tensor.hpp"

namespace stainbench {

/// Geometry of an image partitioned into t x t tiles with overlap o.
/// Origins are row-major and cover every pixel; when a dimension is not an
/// exact multiple of the stride, the last row/column of tiles is shifted
/// inward ("shift" edge policy), so stitching reconstructs the source dims
/// exactly.
struct TileGrid {
    int src_h = 0, src_w = 0;
    int tile = 0, overlap = 0;
    std::vector<int> ys, xs;  // tile origins per axis, ascending

    static TileGrid make(int src_h, int src_w, int tile, int overlap);

    int count() const { return static_cast<int>(ys.size() * xs.size()); }

    /// Origin (y, x) of tile `idx` in row-major order.
    std::pair<int, int> origin(int idx) const {
        const int cols = static_cast<int>(xs.size());
        return {ys[idx / cols], xs[idx % cols]};
    }
};

enum class Blend { kCenterCrop, kAverage };

/// Cuts row-major t x t tiles from a (1, c, h, w) image.
std::vector<Tensor> tile_image(const Tensor& image, const TileGrid& grid);

/// Convenience overload building the grid first.
std::pair<std::vector<Tensor>, TileGrid> tile_image(const Tensor& image, int tile, int overlap);

/// Reassembles tiles into the source geometry. Overlaps are resolved either
/// by assigning each pixel to the tile it is most interior to (center-crop)
/// or by averaging all covering tiles.
Tensor stitch(const std::vector<Tensor>& tiles, const TileGrid& grid, Blend blend);

}  // namespace stainbench
