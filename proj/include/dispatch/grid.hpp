#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dispatch/errors.hpp"
#include "dispatch/geo.hpp"

namespace dispatch {

struct GridCell {
  int id = -1;
  LatLon centroid;
  std::vector<int> neighbor_ids;  // 8-neighborhood, symmetric
};

// Axis-aligned square decomposition of the service region.  Cell ids are
// row-major from the south-west corner.  Every point of the region maps to
// exactly one cell; a point exactly on an interior boundary belongs to the
// lower-id adjacent cell.
class Grid {
 public:
  Grid() = default;

  [[nodiscard]] static Grid build(const BoundingBox& region, double cell_size_m) {
    if (cell_size_m <= 0.0) throw InvalidRegion("cell size must be positive");
    if (!(region.max_lat > region.min_lat) || !(region.max_lon > region.min_lon))
      throw InvalidRegion("degenerate bounding box");

    Grid g;
    g.region_ = region;
    g.cell_m_ = cell_size_m;
    g.proj_ = LocalProjection(region);
    const double width = g.proj_.x(LatLon{region.min_lat, region.max_lon});
    const double height = g.proj_.y(LatLon{region.max_lat, region.min_lon});
    // Tolerant ceil: an extent of k * cell_size (up to float noise) gives k
    // columns, not k+1.
    g.cols_ = std::max(1, static_cast<int>(std::ceil(width / cell_size_m - 1e-6)));
    g.rows_ = std::max(1, static_cast<int>(std::ceil(height / cell_size_m - 1e-6)));

    g.cells_.resize(static_cast<size_t>(g.rows_) * g.cols_);
    for (int r = 0; r < g.rows_; ++r) {
      for (int c = 0; c < g.cols_; ++c) {
        const int id = r * g.cols_ + c;
        GridCell& cell = g.cells_[id];
        cell.id = id;
        cell.centroid = g.proj_.from_xy((c + 0.5) * cell_size_m,
                                        (r + 0.5) * cell_size_m);
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            const int nr = r + dr, nc = c + dc;
            if (nr < 0 || nr >= g.rows_ || nc < 0 || nc >= g.cols_) continue;
            cell.neighbor_ids.push_back(nr * g.cols_ + nc);
          }
        }
      }
    }
    return g;
  }

  // Total on the region: every in-region point gets exactly one cell.
  int cell_of(const LatLon& p) const {
    const double x = proj_.x(p);
    const double y = proj_.y(p);
    const double w = cols_ * cell_m_;
    const double h = rows_ * cell_m_;
    const double tol = 1e-6;  // meters; absorbs projection round-off only
    if (x < -tol || y < -tol || x > w + tol || y > h + tol)
      throw OutOfRegion("point (" + std::to_string(p.lat) + ", " +
                        std::to_string(p.lon) + ") outside the region");
    return row_col_id(index_for(y, rows_), index_for(x, cols_));
  }

  const GridCell& cell(int id) const { return cells_.at(static_cast<size_t>(id)); }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int size() const { return static_cast<int>(cells_.size()); }
  const std::vector<GridCell>& cells() const { return cells_; }
  double cell_size_m() const { return cell_m_; }
  const BoundingBox& region() const { return region_; }

 private:
  int row_col_id(int r, int c) const { return r * cols_ + c; }

  // Index along one axis with the boundary rule: an exact multiple of the
  // cell size belongs to the lower cell.
  int index_for(double v, int n) const {
    const double u = v / cell_m_;
    int i = static_cast<int>(std::floor(u));
    if (u == std::floor(u) && i > 0) --i;
    if (i < 0) i = 0;
    if (i >= n) i = n - 1;
    return i;
  }

  BoundingBox region_;
  LocalProjection proj_;
  double cell_m_ = 0.0;
  int rows_ = 0, cols_ = 0;
  std::vector<GridCell> cells_;
};

}  // namespace dispatch
