#pragma once

#include "crystal/extraction.hpp"

#include <vector>

namespace crystal {

struct DeformationEntry {
  double weight = 0.0;  ///< simplex volume
  Mat V;                ///< constant gradient of v_t on the simplex
  int tile = 0;
  int simplex = 0;
};

struct DeformationField {
  int d = 2;
  int n_tiles = 0;
  std::vector<DeformationEntry> entries;
  std::vector<int> first_entry;  ///< per tile, index of its first simplex entry
  double total_volume() const;
};

struct OrderParameter {
  double value = 0.0;
  Mat R;
};

/// Parent links are in BFS visit numbering: parent[l] < l for l >= 1, parent[0] = -1.
struct LabelledTree {
  std::vector<int> parent;
  std::vector<Vec> labels;      ///< labels[l] = v_t(X_order[l]) - v_t(X_order[parent[l]])
  std::vector<int> order;       ///< visit index -> point index
  std::vector<int> label_tile;  ///< tile used for each label
};

DeformationField build_deformation(const TileComplex& complex, const Tessellation& tess);

/// Max corner mismatch between per-simplex affine maps sharing a tile corner.
double gluing_defect(const TileComplex& complex, const Tessellation& tess);

/// sum over the tile's simplices of lambda * dist(V, SO(d))^2
double local_distortion(const DeformationField& field, int tile);

OrderParameter order_parameter(const DeformationField& field);

LabelledTree labelled_spanning_tree(const TileComplex& complex, const PointConfig& P, const Tessellation& tess);

/// sum over simplices of lambda |V - R|^2
double deformation_gap(const DeformationField& field, const Mat& R);

double tree_lower_bound(const LabelledTree& tree, const PointConfig& P, const Mat& R);

/// Per-simplex ratios lambda|V - R|^2 / sum |(X_l - X_k) - R^T xi_l|^2 over simplices carrying tree edges;
/// simplices whose edge sum is at rounding level (below 1e-20 of the squared edge lengths) are skipped.
std::vector<double> tree_simplex_ratios(const LabelledTree& tree, const TileComplex& complex,
                                        const DeformationField& field, const PointConfig& P, const Tessellation& tess,
                                        const Mat& R);

}  // namespace crystal
