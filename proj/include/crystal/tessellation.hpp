#pragma once

#include "crystal/geometry.hpp"

#include <map>
#include <string>
#include <vector>

namespace crystal {

struct StandardTile {
  int type_id = 0;
  Mat corners;                                   ///< d x n, corner s_k in column k
  std::vector<std::vector<int>> simplices;       ///< corner ids of each d-simplex
  double volume = 0.0;                           ///< lambda(t_hat)
  std::vector<std::pair<int, int>> edge_pairs;
  std::vector<std::pair<int, int>> diagonal_pairs;
  std::vector<std::vector<int>> faces;           ///< all faces of dimension 0..d-1
  std::vector<std::vector<int>> facets;          ///< faces of dimension d-1
  std::vector<std::vector<int>> symmetry_group;  ///< corner permutations realised by proper rigid motions
  double diameter = 0.0;

  int n() const { return int(corners.cols()); }
  int d() const { return int(corners.rows()); }
  /// edges followed by diagonals: the pair set D of the local Hamiltonian
  std::vector<std::pair<int, int>> energy_pairs() const;
  bool is_face(const std::vector<int>& corner_ids) const;
};

/// Tile of M inside the reference cell: corners = orientation * s + offset.
struct Placement {
  int type_id = 0;
  Vec offset;
  Mat orientation;
};

struct VertexType {
  std::string key;            ///< canonical star description
  std::vector<int> cell_vertices;
};

struct Tessellation {
  std::string name;
  int d = 2;
  double ell = 1.0;
  std::vector<StandardTile> prototiles;
  Mat cell;                          ///< columns: B0 basis L e_j
  std::vector<Placement> placements; ///< tiles per cell
  std::vector<Vec> cell_vertices;    ///< vertex offsets inside the cell
  std::vector<int> vertex_type_of;   ///< per cell vertex
  std::vector<VertexType> vertex_types;
  std::vector<Vec> labels;           ///< Sigma

  Mat placed_corners(int placement) const;
  const StandardTile& proto_of(int placement) const { return prototiles[placements[placement].type_id]; }
  double max_diameter() const;
  int max_star_size() const;
};

struct TessellationConstants {
  std::map<std::pair<int, int>, int> b;
  std::map<std::pair<int, int>, int> e;
  std::map<std::pair<int, int>, int> f;
  std::map<int, double> gamma;
  double rho_max = 0.0;
};

Tessellation build_triangular(double ell);
Tessellation build_cubic(int d, double ell);
Tessellation build_tessellation(const std::string& name, int d, double ell);

/// Tiles of M restricted to the torus of size N, as corner point indices in prototile corner order.
struct StandardTileRef {
  int placement;
  std::vector<int> corners;
};
struct StandardComplex {
  std::vector<Vec> points;  ///< wrapped
  std::vector<StandardTileRef> tiles;
  std::vector<int> vertex_type;  ///< per point
};
StandardComplex standard_complex(const Tessellation& tess, int N);

TessellationConstants compute_constants(const Tessellation& tess);

/// Corner correspondences pi (x_k -> s_pi[k]) with |d(x_a,x_b) - d(s_pi(a),s_pi(b))| <= tol for all pairs.
std::vector<std::vector<int>> distance_compatible_perms(const Mat& x, const Mat& s, double tol);

}  // namespace crystal
