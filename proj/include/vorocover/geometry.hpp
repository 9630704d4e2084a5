#pragma once

// Convex-domain geometry: Voronoi partitions by half-plane clipping,
// scalar fields on a uniform midpoint lattice, and grid quadrature for
// masses, centroids and argmax queries over cells.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace vorocover {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }
inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double squared_norm(Point2 p) { return p.x * p.x + p.y * p.y; }
inline double norm(Point2 p) { return std::sqrt(squared_norm(p)); }
inline double distance(Point2 a, Point2 b) { return norm(a - b); }

inline double polygon_area(const std::vector<Point2>& poly) {
  double twice = 0.0;
  for (std::size_t k = 0; k < poly.size(); ++k) {
    const Point2& a = poly[k];
    const Point2& b = poly[(k + 1) % poly.size()];
    twice += cross(a, b);
  }
  return 0.5 * twice;
}

// Counterclockwise convex polygon containment with an absolute tolerance on
// the edge cross products (tol >= 0 makes the boundary inclusive).
inline bool polygon_contains(const std::vector<Point2>& poly, Point2 p, double tol) {
  for (std::size_t k = 0; k < poly.size(); ++k) {
    const Point2& a = poly[k];
    const Point2& b = poly[(k + 1) % poly.size()];
    if (cross(b - a, p - a) < -tol) return false;
  }
  return true;
}

inline Point2 closest_point_on_segment(Point2 a, Point2 b, Point2 p) {
  const Point2 ab = b - a;
  const double len2 = squared_norm(ab);
  if (len2 == 0.0) return a;
  const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return a + t * ab;
}

// Closed convex polygonal domain with a uniform midpoint lattice over its
// bounding box. All quadrature in the library is the midpoint rule over the
// lattice points that fall inside the polygon.
class ConvexDomain {
 public:
  ConvexDomain(std::vector<Point2> vertices, int grid_resolution)
      : vertices_(std::move(vertices)), resolution_(grid_resolution) {
    validate();
    build_lattice();
  }

  static ConvexDomain unit_square(int grid_resolution = 100) {
    return ConvexDomain({{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}}, grid_resolution);
  }

  const std::vector<Point2>& vertices() const { return vertices_; }
  int grid_resolution() const { return resolution_; }
  double area() const { return area_; }
  double diameter() const { return diameter_; }

  int nx() const { return resolution_; }
  int ny() const { return resolution_; }
  double hx() const { return hx_; }
  double hy() const { return hy_; }
  Point2 bbox_min() const { return bbox_min_; }
  Point2 bbox_max() const { return bbox_max_; }
  double cell_area() const { return hx_ * hy_; }
  int lattice_size() const { return resolution_ * resolution_; }

  Point2 lattice_point(int id) const {
    const int iy = id / nx();
    const int ix = id % nx();
    return {bbox_min_.x + (ix + 0.5) * hx_, bbox_min_.y + (iy + 0.5) * hy_};
  }

  // Lattice ids whose midpoints lie inside the polygon, ascending.
  const std::vector<int>& interior_ids() const { return interior_ids_; }

  bool contains(Point2 p, double tol = 0.0) const { return polygon_contains(vertices_, p, tol); }

  Point2 project_inside(Point2 p) const {
    if (contains(p)) return p;
    Point2 best = vertices_.front();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < vertices_.size(); ++k) {
      const Point2 q = closest_point_on_segment(vertices_[k], vertices_[(k + 1) % vertices_.size()], p);
      const double d = distance(p, q);
      if (d < best_d) {
        best_d = d;
        best = q;
      }
    }
    return best;
  }

  bool same_grid(const ConvexDomain& other) const {
    return this == &other ||
           (resolution_ == other.resolution_ && bbox_min_.x == other.bbox_min_.x &&
            bbox_min_.y == other.bbox_min_.y && bbox_max_.x == other.bbox_max_.x &&
            bbox_max_.y == other.bbox_max_.y);
  }

 private:
  void validate() const {
    if (resolution_ < 1) throw std::invalid_argument("domain: grid_resolution must be positive");
    if (vertices_.size() < 3) throw std::invalid_argument("domain: polygon needs at least 3 vertices");
    const double a = polygon_area(vertices_);
    if (a <= 0.0)
      throw std::invalid_argument("domain: polygon must be counterclockwise with positive area");
    const std::size_t m = vertices_.size();
    for (std::size_t k = 0; k < m; ++k) {
      const Point2 e0 = vertices_[(k + 1) % m] - vertices_[k];
      const Point2 e1 = vertices_[(k + 2) % m] - vertices_[(k + 1) % m];
      if (norm(e0) == 0.0) throw std::invalid_argument("domain: repeated vertex");
      if (cross(e0, e1) < 0.0) throw std::invalid_argument("domain: polygon is not convex");
    }
    for (const Point2& v : vertices_)
      if (!std::isfinite(v.x) || !std::isfinite(v.y))
        throw std::invalid_argument("domain: non-finite vertex");
  }

  void build_lattice() {
    area_ = polygon_area(vertices_);
    bbox_min_ = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    bbox_max_ = {-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const Point2& v : vertices_) {
      bbox_min_.x = std::min(bbox_min_.x, v.x);
      bbox_min_.y = std::min(bbox_min_.y, v.y);
      bbox_max_.x = std::max(bbox_max_.x, v.x);
      bbox_max_.y = std::max(bbox_max_.y, v.y);
    }
    diameter_ = 0.0;
    for (std::size_t i = 0; i < vertices_.size(); ++i)
      for (std::size_t j = i + 1; j < vertices_.size(); ++j)
        diameter_ = std::max(diameter_, distance(vertices_[i], vertices_[j]));
    hx_ = (bbox_max_.x - bbox_min_.x) / resolution_;
    hy_ = (bbox_max_.y - bbox_min_.y) / resolution_;
    interior_ids_.reserve(static_cast<std::size_t>(lattice_size()));
    for (int id = 0; id < lattice_size(); ++id)
      if (contains(lattice_point(id))) interior_ids_.push_back(id);
    if (interior_ids_.empty()) throw std::invalid_argument("domain: grid too coarse, no interior points");
  }

  std::vector<Point2> vertices_;
  int resolution_;
  double area_ = 0.0;
  double diameter_ = 0.0;
  Point2 bbox_min_, bbox_max_;
  double hx_ = 0.0, hy_ = 0.0;
  std::vector<int> interior_ids_;
};

// Scalar function discretized on the domain lattice. Values are stored for
// every lattice point (fields such as GP posteriors are defined on all of
// R^2); integrals only ever touch the interior ids.
struct ScalarField2D {
  const ConvexDomain* domain = nullptr;
  Eigen::VectorXd values;

  ScalarField2D() = default;
  ScalarField2D(const ConvexDomain& d, double fill = 0.0)
      : domain(&d), values(Eigen::VectorXd::Constant(d.lattice_size(), fill)) {}

  template <typename F>
  static ScalarField2D from_function(const ConvexDomain& d, F&& f) {
    ScalarField2D field(d);
    for (int id = 0; id < d.lattice_size(); ++id) field.values[id] = f(d.lattice_point(id));
    return field;
  }

  double operator[](int id) const { return values[id]; }
  double& operator[](int id) { return values[id]; }

  // Bilinear interpolation between lattice midpoints, clamped at the rim.
  double interpolate(Point2 p) const {
    const ConvexDomain& d = *domain;
    double gx = (p.x - d.bbox_min().x) / d.hx() - 0.5;
    double gy = (p.y - d.bbox_min().y) / d.hy() - 0.5;
    gx = std::clamp(gx, 0.0, static_cast<double>(d.nx() - 1));
    gy = std::clamp(gy, 0.0, static_cast<double>(d.ny() - 1));
    const int ix = std::min(static_cast<int>(gx), d.nx() - 2);
    const int iy = std::min(static_cast<int>(gy), d.ny() - 2);
    const double fx = gx - ix;
    const double fy = gy - iy;
    const double v00 = values[iy * d.nx() + ix];
    const double v10 = values[iy * d.nx() + ix + 1];
    const double v01 = values[(iy + 1) * d.nx() + ix];
    const double v11 = values[(iy + 1) * d.nx() + ix + 1];
    return (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) + fy * ((1.0 - fx) * v01 + fx * v11);
  }
};

inline void require_same_grid(const ScalarField2D& a, const ScalarField2D& b) {
  if (a.domain == nullptr || b.domain == nullptr || !a.domain->same_grid(*b.domain))
    throw std::invalid_argument("scalar fields live on different grids");
}

inline double integrate(const ScalarField2D& f) {
  double sum = 0.0;
  for (int id : f.domain->interior_ids()) sum += f.values[id];
  return sum * f.domain->cell_area();
}

inline double integrate_abs_difference(const ScalarField2D& a, const ScalarField2D& b) {
  require_same_grid(a, b);
  double sum = 0.0;
  for (int id : a.domain->interior_ids()) sum += std::abs(a.values[id] - b.values[id]);
  return sum * a.domain->cell_area();
}

inline ScalarField2D clamped_below(const ScalarField2D& f, double floor) {
  ScalarField2D out = f;
  out.values = out.values.cwiseMax(floor);
  return out;
}

struct VoronoiCell {
  int generator_id = -1;
  std::vector<Point2> polygon;      // counterclockwise
  std::vector<int> edge_labels;     // per edge k (polygon[k] -> polygon[k+1]): neighbor id, or -1 for a domain edge
  std::vector<int> grid_point_ids;  // interior lattice ids owned by this cell, ascending

  double polygon_area() const { return vorocover::polygon_area(polygon); }
  bool contains(Point2 p, double tol = 0.0) const { return polygon_contains(polygon, p, tol); }
};

class VoronoiPartition {
 public:
  VoronoiPartition() = default;
  VoronoiPartition(std::vector<VoronoiCell> cells, std::vector<std::vector<bool>> adjacency)
      : cells_(std::move(cells)), adjacency_(std::move(adjacency)) {
    neighbor_lists_.resize(cells_.size());
    for (std::size_t i = 0; i < cells_.size(); ++i)
      for (std::size_t j = 0; j < cells_.size(); ++j)
        if (adjacency_[i][j]) neighbor_lists_[i].push_back(static_cast<int>(j));
  }

  int size() const { return static_cast<int>(cells_.size()); }
  const VoronoiCell& cell(int i) const { return cells_[static_cast<std::size_t>(i)]; }
  const std::vector<VoronoiCell>& cells() const { return cells_; }
  bool adjacent(int i, int j) const { return adjacency_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]; }
  // Neighbor ids of robot i, ascending.
  const std::vector<int>& neighbors(int i) const { return neighbor_lists_[static_cast<std::size_t>(i)]; }

 private:
  std::vector<VoronoiCell> cells_;
  std::vector<std::vector<bool>> adjacency_;
  std::vector<std::vector<int>> neighbor_lists_;
};

namespace detail {

// Clips a labeled convex polygon by the half-plane {q : dot(n, q) <= c}.
// Edges created by the cut are labeled `cut_label`.
inline void clip_halfplane(std::vector<Point2>& poly, std::vector<int>& labels, Point2 n, double c,
                           int cut_label) {
  const std::size_t m = poly.size();
  if (m == 0) return;
  std::vector<Point2> out_poly;
  std::vector<int> out_labels;
  out_poly.reserve(m + 2);
  out_labels.reserve(m + 2);
  for (std::size_t k = 0; k < m; ++k) {
    const Point2 a = poly[k];
    const Point2 b = poly[(k + 1) % m];
    const double da = c - dot(n, a);  // >= 0 means inside
    const double db = c - dot(n, b);
    const bool a_in = da >= 0.0;
    const bool b_in = db >= 0.0;
    if (a_in) {
      out_poly.push_back(a);
      out_labels.push_back(labels[k]);
      if (!b_in) {
        const double t = da / (da - db);
        out_poly.push_back(a + t * (b - a));
        out_labels.push_back(cut_label);
      }
    } else if (b_in) {
      const double t = da / (da - db);
      out_poly.push_back(a + t * (b - a));
      out_labels.push_back(labels[k]);
    }
  }
  poly = std::move(out_poly);
  labels = std::move(out_labels);
}

// Drops zero-length edges left behind by clips through a vertex.
inline void drop_degenerate_edges(std::vector<Point2>& poly, std::vector<int>& labels, double eps) {
  std::vector<Point2> out_poly;
  std::vector<int> out_labels;
  const std::size_t m = poly.size();
  for (std::size_t k = 0; k < m; ++k) {
    if (distance(poly[k], poly[(k + 1) % m]) < eps) continue;  // edge starting at k is degenerate
    out_poly.push_back(poly[k]);
    out_labels.push_back(labels[k]);
  }
  poly = std::move(out_poly);
  labels = std::move(out_labels);
}

}  // namespace detail

// Voronoi partition of the domain: each cell is the domain polygon clipped by
// the perpendicular-bisector half-planes against every other generator.
// Adjacency comes from which bisectors survive as cell edges of positive
// length (symmetrized); grid ownership comes from cell containment with ties
// to the lowest robot index.
inline VoronoiPartition compute_partition(const std::vector<Point2>& positions,
                                          const ConvexDomain& domain) {
  const int m = static_cast<int>(positions.size());
  if (m < 1) throw std::invalid_argument("compute_partition: no generators");
  const double diam = domain.diameter();
  const double min_sep = 1e-9 * diam;
  for (int i = 0; i < m; ++i) {
    if (!domain.contains(positions[i]))
      throw std::invalid_argument("compute_partition: generator " + std::to_string(i) +
                                  " outside domain");
    for (int j = i + 1; j < m; ++j)
      if (distance(positions[i], positions[j]) < min_sep)
        throw std::invalid_argument("compute_partition: coincident generators " + std::to_string(i) +
                                    "," + std::to_string(j));
  }

  std::vector<VoronoiCell> cells(static_cast<std::size_t>(m));
  std::vector<std::vector<bool>> adjacency(static_cast<std::size_t>(m),
                                           std::vector<bool>(static_cast<std::size_t>(m), false));
  const double edge_eps = 1e-9 * diam;

  for (int i = 0; i < m; ++i) {
    VoronoiCell& cell = cells[static_cast<std::size_t>(i)];
    cell.generator_id = i;
    cell.polygon = domain.vertices();
    cell.edge_labels.assign(cell.polygon.size(), -1);
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      // keep ||q - x_i|| <= ||q - x_j||  <=>  dot(x_j - x_i, q) <= dot(x_j - x_i, midpoint)
      const Point2 n = positions[j] - positions[i];
      const double c = dot(n, 0.5 * (positions[i] + positions[j]));
      detail::clip_halfplane(cell.polygon, cell.edge_labels, n, c, j);
    }
    detail::drop_degenerate_edges(cell.polygon, cell.edge_labels, 1e-14 * diam);
    if (cell.polygon.size() < 3)
      throw std::runtime_error("compute_partition: degenerate cell for generator " + std::to_string(i));
    for (std::size_t k = 0; k < cell.polygon.size(); ++k) {
      const int label = cell.edge_labels[k];
      if (label < 0) continue;
      const double len = distance(cell.polygon[k], cell.polygon[(k + 1) % cell.polygon.size()]);
      if (len > edge_eps) adjacency[static_cast<std::size_t>(i)][static_cast<std::size_t>(label)] = true;
    }
  }

  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      const bool shared = adjacency[i][j] || adjacency[j][i];
      adjacency[i][j] = shared;
      adjacency[j][i] = shared;
    }

  // Assign interior lattice points: first containing cell wins, which breaks
  // bisector ties toward the lowest robot index.
  struct Bbox {
    double x0, y0, x1, y1;
  };
  std::vector<Bbox> boxes(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    Bbox b{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
           -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const Point2& v : cells[static_cast<std::size_t>(i)].polygon) {
      b.x0 = std::min(b.x0, v.x);
      b.y0 = std::min(b.y0, v.y);
      b.x1 = std::max(b.x1, v.x);
      b.y1 = std::max(b.y1, v.y);
    }
    boxes[static_cast<std::size_t>(i)] = b;
  }
  const double contain_tol = 1e-12 * diam;
  const double box_tol = 1e-9 * diam;
  for (int id : domain.interior_ids()) {
    const Point2 p = domain.lattice_point(id);
    int owner = -1;
    for (int i = 0; i < m; ++i) {
      const Bbox& b = boxes[static_cast<std::size_t>(i)];
      if (p.x < b.x0 - box_tol || p.x > b.x1 + box_tol || p.y < b.y0 - box_tol || p.y > b.y1 + box_tol)
        continue;
      if (cells[static_cast<std::size_t>(i)].contains(p, contain_tol)) {
        owner = i;
        break;
      }
    }
    if (owner < 0) {
      // numerical sliver: fall back to the nearest generator
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m; ++i) {
        const double d = squared_norm(p - positions[i]);
        if (d < best) {
          best = d;
          owner = i;
        }
      }
    }
    cells[static_cast<std::size_t>(owner)].grid_point_ids.push_back(id);
  }

  return VoronoiPartition(std::move(cells), std::move(adjacency));
}

struct MassCentroid {
  double mass = 0.0;
  Point2 centroid;
  bool uniform_fallback = false;  // mass fell below the floor; centroid taken over uniform density
};

inline constexpr double kMassFloor = 1e-12;

// Midpoint-rule mass and center of mass of a cell under the given density.
// Densities are expected nonnegative (estimates get clamped upstream); if the
// cell mass still lands below the floor the centroid degenerates, so the cell
// is re-weighted uniformly and flagged.
inline MassCentroid cell_mass_centroid(const VoronoiCell& cell, const ScalarField2D& density) {
  const ConvexDomain& d = *density.domain;
  MassCentroid out;
  if (cell.grid_point_ids.empty()) {
    Point2 mean{0.0, 0.0};
    for (const Point2& v : cell.polygon) mean = mean + v;
    out.centroid = (1.0 / static_cast<double>(cell.polygon.size())) * mean;
    out.uniform_fallback = true;
    return out;
  }
  double mass_raw = 0.0, cx = 0.0, cy = 0.0;
  for (int id : cell.grid_point_ids) {
    const double w = density.values[id];
    const Point2 p = d.lattice_point(id);
    mass_raw += w;
    cx += w * p.x;
    cy += w * p.y;
  }
  out.mass = mass_raw * d.cell_area();
  if (out.mass < kMassFloor) {
    double sx = 0.0, sy = 0.0;
    for (int id : cell.grid_point_ids) {
      const Point2 p = d.lattice_point(id);
      sx += p.x;
      sy += p.y;
    }
    const double inv = 1.0 / static_cast<double>(cell.grid_point_ids.size());
    out.centroid = {sx * inv, sy * inv};
    out.uniform_fallback = true;
    return out;
  }
  out.centroid = {cx / mass_raw, cy / mass_raw};
  return out;
}

// Grid point of the cell with the maximum field value; ties go to the lowest
// lattice index (the ids are stored ascending).
inline Point2 argmax_in_cell(const VoronoiCell& cell, const ScalarField2D& field) {
  if (cell.grid_point_ids.empty())
    throw std::invalid_argument("argmax_in_cell: cell owns no grid points");
  int best_id = cell.grid_point_ids.front();
  double best = field.values[best_id];
  for (int id : cell.grid_point_ids) {
    const double v = field.values[id];
    if (v > best) {
      best = v;
      best_id = id;
    }
  }
  return field.domain->lattice_point(best_id);
}

}  // namespace vorocover
