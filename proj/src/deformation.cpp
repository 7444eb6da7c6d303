#include "crystal/deformation.hpp"

#include <algorithm>
#include <deque>
#include <stdexcept>

namespace crystal {

double DeformationField::total_volume() const {
  double v = 0.0;
  for (const auto& e : entries) v += e.weight;
  return v;
}

DeformationField build_deformation(const TileComplex& complex, const Tessellation& tess) {
  DeformationField f;
  f.d = tess.d;
  f.n_tiles = complex.size();
  for (int t = 0; t < complex.size(); ++t) {
    const CandidateTile& tile = complex.tiles[t];
    const double floor = 1e-14 * tess.prototiles[tile.type_id].volume;
    f.first_entry.push_back(int(f.entries.size()));
    for (size_t s = 0; s < tile.per_simplex_gradients.size(); ++s) {
      if (!(tile.simplex_volumes[s] >= floor))
        throw std::runtime_error("build_deformation: degenerate simplex in tile " + std::to_string(t));
      f.entries.push_back({tile.simplex_volumes[s], tile.per_simplex_gradients[s], t, int(s)});
    }
  }
  return f;
}

double gluing_defect(const TileComplex& complex, const Tessellation& tess) {
  double worst = 0.0;
  for (const auto& tile : complex.tiles) {
    const StandardTile& proto = tess.prototiles[tile.type_id];
    Mat ref = tess.placed_corners(tile.placement);
    std::vector<int> col_of(proto.n());
    for (size_t k = 0; k < tile.perm.size(); ++k) col_of[tile.perm[k]] = int(k);
    for (size_t s = 0; s < proto.simplices.size(); ++s) {
      const auto& sx = proto.simplices[s];
      const Mat& V = tile.per_simplex_gradients[s];
      Vec x0 = tile.local.col(col_of[sx[0]]);
      Vec s0 = ref.col(sx[0]);
      for (int c : sx) {
        Vec img = s0 + V * (tile.local.col(col_of[c]) - x0);
        worst = std::max(worst, (img - ref.col(c)).norm());
      }
    }
  }
  return worst;
}

double local_distortion(const DeformationField& field, int tile) {
  double sum = 0.0;
  for (const auto& e : field.entries)
    if (e.tile == tile) {
      double dist = nearest_rotation(e.V).dist;
      sum += e.weight * dist * dist;
    }
  return sum;
}

OrderParameter order_parameter(const DeformationField& field) {
  if (field.entries.empty() || field.n_tiles == 0) throw std::invalid_argument("order_parameter: empty field");
  std::vector<std::pair<double, Mat>> terms;
  terms.reserve(field.entries.size());
  for (const auto& e : field.entries) terms.emplace_back(e.weight, e.V);
  OrderParameter op;
  op.R = weighted_best_rotation(terms);
  op.value = rotation_objective(terms, op.R) / double(field.n_tiles);
  return op;
}

namespace {

struct TileEdge {
  int a, b;  ///< point indices
  int tile;
  int ca, cb;  ///< prototile corners
};

}  // namespace

LabelledTree labelled_spanning_tree(const TileComplex& complex, const PointConfig& P, const Tessellation& tess) {
  const int np = P.size();
  std::vector<std::vector<TileEdge>> adj(np);
  for (int t = 0; t < complex.size(); ++t) {
    const CandidateTile& tile = complex.tiles[t];
    for (auto [ca, cb] : tess.prototiles[tile.type_id].edge_pairs) {
      int a = tile.point_of(ca), b = tile.point_of(cb);
      adj[a].push_back({a, b, t, ca, cb});
      adj[b].push_back({b, a, t, cb, ca});
    }
  }
  for (auto& l : adj)
    std::stable_sort(l.begin(), l.end(), [](const TileEdge& x, const TileEdge& y) {
      return x.b != y.b ? x.b < y.b : x.tile < y.tile;
    });

  LabelledTree tree;
  std::vector<int> visit(np, -1);
  int root = -1, members = 0;
  for (int x = 0; x < np; ++x)
    if (!complex.vertex_map.empty() && !complex.vertex_map[x].empty()) {
      if (root < 0) root = x;
      ++members;
    }
  if (root < 0) throw std::invalid_argument("labelled_spanning_tree: no crystal points");
  std::deque<int> queue{root};
  visit[root] = 0;
  tree.order.push_back(root);
  tree.parent.push_back(-1);
  tree.labels.push_back(Vec::Zero(tess.d));
  tree.label_tile.push_back(-1);
  while (!queue.empty()) {
    int x = queue.front();
    queue.pop_front();
    for (const TileEdge& e : adj[x]) {
      if (visit[e.b] >= 0) continue;
      // first edge entry for e.b carries the lowest tile index
      const CandidateTile& tile = complex.tiles[e.tile];
      Mat ref = tess.placed_corners(tile.placement);
      visit[e.b] = int(tree.order.size());
      tree.order.push_back(e.b);
      tree.parent.push_back(visit[x]);
      tree.labels.push_back(ref.col(e.cb) - ref.col(e.ca));
      tree.label_tile.push_back(e.tile);
      queue.push_back(e.b);
    }
  }
  if (int(tree.order.size()) != members)
    throw std::runtime_error("labelled_spanning_tree: crystal graph is disconnected");
  return tree;
}

double deformation_gap(const DeformationField& field, const Mat& R) {
  double sum = 0.0;
  for (const auto& e : field.entries) sum += e.weight * (e.V - R).squaredNorm();
  return sum;
}

double tree_lower_bound(const LabelledTree& tree, const PointConfig& P, const Mat& R) {
  double sum = 0.0;
  for (size_t l = 1; l < tree.order.size(); ++l) {
    Vec dx = minimal_image(P.points[tree.order[tree.parent[l]]], P.points[tree.order[l]], P.dom);
    sum += (dx - R.transpose() * tree.labels[l]).squaredNorm();
  }
  return sum;
}

std::vector<double> tree_simplex_ratios(const LabelledTree& tree, const TileComplex& complex,
                                        const DeformationField& field, const PointConfig& P, const Tessellation& tess,
                                        const Mat& R) {
  std::vector<double> edge_sum(field.entries.size(), 0.0), edge_len(field.entries.size(), 0.0);
  std::vector<char> carries(field.entries.size(), 0);
  for (size_t l = 1; l < tree.order.size(); ++l) {
    const int t = tree.label_tile[l];
    const CandidateTile& tile = complex.tiles[t];
    const int a = tree.order[tree.parent[l]], b = tree.order[l];
    int ca = -1, cb = -1;
    for (size_t k = 0; k < tile.corners.size(); ++k) {
      if (tile.corners[k] == a) ca = tile.perm[k];
      if (tile.corners[k] == b) cb = tile.perm[k];
    }
    const auto& simplices = tess.prototiles[tile.type_id].simplices;
    int owner = -1;
    for (size_t s = 0; s < simplices.size() && owner < 0; ++s) {
      const auto& sx = simplices[s];
      if (std::find(sx.begin(), sx.end(), ca) != sx.end() && std::find(sx.begin(), sx.end(), cb) != sx.end())
        owner = int(s);
    }
    if (owner < 0) throw std::logic_error("tree_simplex_ratios: tree edge not in a simplex");
    const int idx = field.first_entry[t] + owner;
    Vec dx = minimal_image(P.points[a], P.points[b], P.dom);
    edge_sum[idx] += (dx - R.transpose() * tree.labels[l]).squaredNorm();
    edge_len[idx] += dx.squaredNorm();
    carries[idx] = 1;
  }
  std::vector<double> ratios;
  for (size_t i = 0; i < field.entries.size(); ++i) {
    // rounding-level edge terms carry no constraint
    if (!carries[i] || edge_sum[i] <= 1e-20 * edge_len[i]) continue;
    double num = field.entries[i].weight * (field.entries[i].V - R).squaredNorm();
    ratios.push_back(num / edge_sum[i]);
  }
  return ratios;
}

}  // namespace crystal
