#include "crystal/tessellation.hpp"

#include "crystal/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace crystal {

std::vector<std::pair<int, int>> StandardTile::energy_pairs() const {
  auto out = edge_pairs;
  out.insert(out.end(), diagonal_pairs.begin(), diagonal_pairs.end());
  return out;
}

bool StandardTile::is_face(const std::vector<int>& corner_ids) const {
  std::vector<int> s = corner_ids;
  std::sort(s.begin(), s.end());
  for (const auto& f : faces)
    if (f == s) return true;
  return false;
}

Mat Tessellation::placed_corners(int placement) const {
  const Placement& p = placements[placement];
  Mat c = p.orientation * prototiles[p.type_id].corners;
  c.colwise() += p.offset;
  return c;
}

double Tessellation::max_diameter() const {
  double m = 0.0;
  for (const auto& t : prototiles) m = std::max(m, t.diameter);
  return m;
}

namespace {

double diameter_of(const Mat& c) {
  double m = 0.0;
  for (int i = 0; i < c.cols(); ++i)
    for (int j = i + 1; j < c.cols(); ++j) m = std::max(m, (c.col(i) - c.col(j)).norm());
  return m;
}

}  // namespace

std::vector<std::vector<int>> distance_compatible_perms(const Mat& x, const Mat& s, double tol) {
  std::vector<std::vector<int>> out;
  const int n = int(x.cols());
  if (s.cols() != n) return out;
  std::vector<int> pi(n, -1);
  std::vector<char> used(n, 0);
  std::function<void(int)> rec = [&](int k) {
    if (k == n) {
      out.push_back(pi);
      return;
    }
    for (int c = 0; c < n; ++c) {
      if (used[c]) continue;
      bool ok = true;
      for (int j = 0; j < k && ok; ++j)
        ok = std::abs((x.col(k) - x.col(j)).norm() - (s.col(c) - s.col(pi[j])).norm()) <= tol;
      if (!ok) continue;
      used[c] = 1;
      pi[k] = c;
      rec(k + 1);
      used[c] = 0;
    }
  };
  rec(0);
  return out;
}

namespace {

void finish_tile(StandardTile& t) {
  const int n = t.n();
  t.diameter = diameter_of(t.corners);
  t.volume = 0.0;
  for (const auto& s : t.simplices) {
    Mat v(t.d(), s.size());
    for (size_t k = 0; k < s.size(); ++k) v.col(k) = t.corners.col(s[k]);
    t.volume += simplex_volume(v);
  }
  for (auto& f : t.faces) std::sort(f.begin(), f.end());
  for (auto& f : t.facets) std::sort(f.begin(), f.end());
  auto perms = distance_compatible_perms(t.corners, t.corners, 1e-9);
  Vec c = t.corners.rowwise().mean();
  for (const auto& p : perms) {
    Mat H = Mat::Zero(t.d(), t.d());
    for (int k = 0; k < n; ++k) H += (t.corners.col(p[k]) - c) * (t.corners.col(k) - c).transpose();
    Mat R = nearest_rotation(H).R;
    double dev = 0.0;
    for (int k = 0; k < n; ++k) dev = std::max(dev, (t.corners.col(p[k]) - c - R * (t.corners.col(k) - c)).norm());
    if (dev < 1e-9) t.symmetry_group.push_back(p);
  }
}

std::vector<Vec> make_labels(const Tessellation& tess) {
  std::vector<Vec> labels;
  auto add = [&](const Vec& v) {
    for (const auto& l : labels)
      if ((l - v).norm() < 1e-9) return;
    labels.push_back(v);
  };
  for (size_t p = 0; p < tess.placements.size(); ++p) {
    Mat c = tess.placed_corners(int(p));
    for (auto [a, b] : tess.proto_of(int(p)).edge_pairs) {
      add(c.col(b) - c.col(a));
      add(c.col(a) - c.col(b));
    }
  }
  return labels;
}

std::string round_key(double v) {
  long long q = std::llround(v * 1e9);
  return std::to_string(q == 0 ? 0 : q);
}

void assign_vertex_types(Tessellation& tess) {
  // star of each cell vertex: (type, placement, corner offsets relative to the vertex)
  const int nv = int(tess.cell_vertices.size());
  std::vector<std::string> keys(nv);
  for (int v = 0; v < nv; ++v) {
    std::vector<std::string> parts;
    const int span = 2;
    int total = 1;
    for (int k = 0; k < tess.d; ++k) total *= (2 * span + 1);
    for (size_t p = 0; p < tess.placements.size(); ++p) {
      Mat c = tess.placed_corners(int(p));
      for (int code = 0; code < total; ++code) {
        Vec z(tess.d);
        int cc = code;
        for (int k = 0; k < tess.d; ++k) {
          z(k) = double(cc % (2 * span + 1) - span);
          cc /= (2 * span + 1);
        }
        Vec shift = tess.cell * z;
        for (int k = 0; k < c.cols(); ++k) {
          if ((c.col(k) + shift - tess.cell_vertices[v]).norm() > 1e-9) continue;
          std::vector<std::string> rel;
          for (int j = 0; j < c.cols(); ++j) {
            Vec r = c.col(j) + shift - tess.cell_vertices[v];
            std::string s;
            for (int i = 0; i < tess.d; ++i) s += round_key(r(i)) + ",";
            rel.push_back(s);
          }
          std::sort(rel.begin(), rel.end());
          std::string part = std::to_string(tess.placements[p].type_id) + ":";
          for (const auto& r : rel) part += r + ";";
          parts.push_back(part);
        }
      }
    }
    std::sort(parts.begin(), parts.end());
    for (const auto& s : parts) keys[v] += s + "|";
  }
  tess.vertex_type_of.assign(nv, -1);
  for (int v = 0; v < nv; ++v) {
    int found = -1;
    for (size_t j = 0; j < tess.vertex_types.size(); ++j)
      if (tess.vertex_types[j].key == keys[v]) found = int(j);
    if (found < 0) {
      tess.vertex_types.push_back({keys[v], {}});
      found = int(tess.vertex_types.size()) - 1;
    }
    tess.vertex_types[found].cell_vertices.push_back(v);
    tess.vertex_type_of[v] = found;
  }
}

}  // namespace

int Tessellation::max_star_size() const {
  StandardComplex sc = standard_complex(*this, 3);
  std::vector<int> deg(sc.points.size(), 0);
  for (const auto& t : sc.tiles)
    for (int c : t.corners) ++deg[c];
  return *std::max_element(deg.begin(), deg.end());
}

Tessellation build_triangular(double ell) {
  if (!(ell > 0)) throw std::invalid_argument("build_triangular: ell must be positive");
  Tessellation tess;
  tess.name = "triangular";
  tess.d = 2;
  tess.ell = ell;
  StandardTile t;
  t.corners.resize(2, 3);
  t.corners << 0.0, ell, 0.5 * ell, 0.0, 0.0, 0.5 * std::sqrt(3.0) * ell;
  t.simplices = {{0, 1, 2}};
  t.edge_pairs = {{0, 1}, {0, 2}, {1, 2}};
  t.faces = {{0}, {1}, {2}, {0, 1}, {0, 2}, {1, 2}};
  t.facets = {{0, 1}, {0, 2}, {1, 2}};
  finish_tile(t);
  tess.prototiles.push_back(t);
  tess.cell.resize(2, 2);
  tess.cell << ell, 0.5 * ell, 0.0, 0.5 * std::sqrt(3.0) * ell;
  tess.placements.push_back({0, Vec::Zero(2), Mat::Identity(2, 2)});
  tess.placements.push_back({0, Vec::Zero(2), rotation2(M_PI / 3.0)});
  tess.cell_vertices = {Vec::Zero(2)};
  assign_vertex_types(tess);
  tess.labels = make_labels(tess);
  return tess;
}

Tessellation build_cubic(int d, double ell) {
  if (d < 2) throw std::invalid_argument("build_cubic: d must be >= 2");
  if (!(ell > 0)) throw std::invalid_argument("build_cubic: ell must be positive");
  Tessellation tess;
  tess.name = "cubic";
  tess.d = d;
  tess.ell = ell;
  const int n = 1 << d;
  StandardTile t;
  t.corners.resize(d, n);
  for (int m = 0; m < n; ++m)
    for (int k = 0; k < d; ++k) t.corners(k, m) = ((m >> k) & 1) ? ell : 0.0;
  std::vector<int> axes(d);
  std::iota(axes.begin(), axes.end(), 0);
  do {
    std::vector<int> s{0};
    int m = 0;
    for (int a : axes) {
      m |= 1 << a;
      s.push_back(m);
    }
    t.simplices.push_back(s);
  } while (std::next_permutation(axes.begin(), axes.end()));
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      if (__builtin_popcount(unsigned(a ^ b)) == 1)
        t.edge_pairs.push_back({a, b});
      else
        t.diagonal_pairs.push_back({a, b});
    }
  // faces: fix a nonempty set of axes to given values
  for (int fixed = 1; fixed < n; ++fixed) {
    for (int vals = 0; vals < n; ++vals) {
      if ((vals & ~fixed) != 0) continue;
      std::vector<int> f;
      for (int m = 0; m < n; ++m)
        if ((m & fixed) == vals) f.push_back(m);
      t.faces.push_back(f);
      if (__builtin_popcount(unsigned(fixed)) == 1) t.facets.push_back(f);
    }
  }
  finish_tile(t);
  tess.prototiles.push_back(t);
  tess.cell = Mat::Identity(d, d) * ell;
  tess.placements.push_back({0, Vec::Zero(d), Mat::Identity(d, d)});
  tess.cell_vertices = {Vec::Zero(d)};
  assign_vertex_types(tess);
  tess.labels = make_labels(tess);
  return tess;
}

Tessellation build_tessellation(const std::string& name, int d, double ell) {
  if (name == "triangular") {
    if (d != 2) throw std::invalid_argument("triangular tessellation requires d = 2");
    return build_triangular(ell);
  }
  if (name == "cubic") return build_cubic(d, ell);
  throw std::invalid_argument("unknown tessellation '" + name + "'");
}

StandardComplex standard_complex(const Tessellation& tess, int N) {
  if (N < 1) throw std::invalid_argument("standard_complex: N must be >= 1");
  const int d = tess.d;
  const int nv = int(tess.cell_vertices.size());
  TorusDomain dom(N, tess.cell);
  Mat cell_inv = tess.cell.inverse();

  // corner k of placement p sits at vertex v of cell (c + shift)
  struct Loc {
    std::vector<int> shift;
    int v;
  };
  std::vector<std::vector<Loc>> where(tess.placements.size());
  for (size_t p = 0; p < tess.placements.size(); ++p) {
    Mat c = tess.placed_corners(int(p));
    for (int k = 0; k < c.cols(); ++k) {
      bool found = false;
      for (int v = 0; v < nv && !found; ++v) {
        Vec z = cell_inv * (c.col(k) - tess.cell_vertices[v]);
        Vec zr = z.array().round();
        if ((z - zr).norm() < 1e-9) {
          Loc l;
          for (int i = 0; i < d; ++i) l.shift.push_back(int(zr(i)));
          l.v = v;
          where[p].push_back(l);
          found = true;
        }
      }
      if (!found) throw std::logic_error("standard_complex: placement corner is not a lattice vertex");
    }
  }

  int ncells = 1;
  for (int k = 0; k < d; ++k) ncells *= N;
  auto cell_index = [&](const std::vector<int>& c) {
    int idx = 0;
    for (int k = d - 1; k >= 0; --k) idx = idx * N + ((c[k] % N) + N) % N;
    return idx;
  };

  StandardComplex sc;
  sc.points.resize(size_t(ncells) * nv);
  sc.vertex_type.resize(sc.points.size());
  std::vector<int> c(d, 0);
  for (int lin = 0; lin < ncells; ++lin) {
    int r = lin;
    for (int k = 0; k < d; ++k) {
      c[k] = r % N;
      r /= N;
    }
    Vec origin = Vec::Zero(d);
    for (int k = 0; k < d; ++k) origin += tess.cell.col(k) * double(c[k]);
    for (int v = 0; v < nv; ++v) {
      sc.points[size_t(lin) * nv + v] = dom.wrap(origin + tess.cell_vertices[v]);
      sc.vertex_type[size_t(lin) * nv + v] = tess.vertex_type_of[v];
    }
    for (size_t p = 0; p < tess.placements.size(); ++p) {
      StandardTileRef ref;
      ref.placement = int(p);
      for (const Loc& l : where[p]) {
        std::vector<int> cc(d);
        for (int k = 0; k < d; ++k) cc[k] = c[k] + l.shift[k];
        ref.corners.push_back(cell_index(cc) * nv + l.v);
      }
      sc.tiles.push_back(ref);
    }
  }
  return sc;
}

TessellationConstants compute_constants(const Tessellation& tess) {
  const int Np = 3;
  StandardComplex sc = standard_complex(tess, Np);
  TorusDomain dom(Np, tess.cell);
  const int nt = int(sc.tiles.size());
  const int np = int(sc.points.size());

  std::vector<std::vector<int>> star(np);
  for (int t = 0; t < nt; ++t)
    for (int c : sc.tiles[t].corners) star[c].push_back(t);
  auto type_of = [&](int t) { return tess.placements[sc.tiles[t].placement].type_id; };

  TessellationConstants out;
  auto set_consistent = [](std::map<std::pair<int, int>, int>& m, std::pair<int, int> key, int val, const char* what) {
    auto it = m.find(key);
    if (it == m.end())
      m[key] = val;
    else if (it->second != val)
      throw std::logic_error(std::string("compute_constants: inconsistent ") + what);
  };

  const int ntypes = int(tess.prototiles.size());
  const int nvt = int(tess.vertex_types.size());
  for (int t = 0; t < nt; ++t) {
    std::set<int> nb;
    for (int c : sc.tiles[t].corners)
      for (int u : star[c])
        if (u != t) nb.insert(u);
    for (int l = 0; l < ntypes; ++l) {
      int cnt = 0;
      for (int u : nb)
        if (type_of(u) == l) ++cnt;
      set_consistent(out.b, {type_of(t), l}, cnt, "b");
    }
    for (int j = 0; j < nvt; ++j) {
      int cnt = 0;
      for (int c : sc.tiles[t].corners)
        if (sc.vertex_type[c] == j) ++cnt;
      set_consistent(out.e, {type_of(t), j}, cnt, "e");
    }
  }
  for (int x = 0; x < np; ++x)
    for (int i = 0; i < ntypes; ++i) {
      int cnt = 0;
      for (int u : star[x])
        if (type_of(u) == i) ++cnt;
      set_consistent(out.f, {i, sc.vertex_type[x]}, cnt, "f");
    }
  for (int i = 0; i < ntypes; ++i) {
    double g = 0.0;
    for (int j = 0; j < nvt; ++j) {
      int Ij = 0;
      for (int l = 0; l < ntypes; ++l)
        if (out.f[{l, j}] != 0) ++Ij;
      if (out.f[{i, j}] != 0) g += double(out.e[{i, j}]) / double(out.f[{i, j}]) / double(Ij);
    }
    out.gamma[i] = g;
  }

  // distance scan needs a patch wide enough to contain disjoint tiles
  const int Nd = 5;
  sc = standard_complex(tess, Nd);
  dom = TorusDomain(Nd, tess.cell);
  const int ntd = int(sc.tiles.size());

  // geometry of each tile, unwrapped around its first corner, as simplices
  auto tile_simplices = [&](int t, const Vec& shift) {
    const auto& ref = sc.tiles[t];
    const StandardTile& proto = tess.proto_of(ref.placement);
    Vec anchor = sc.points[ref.corners[0]];
    Mat pos(tess.d, ref.corners.size());
    for (size_t k = 0; k < ref.corners.size(); ++k)
      pos.col(k) = anchor + minimal_image(anchor, sc.points[ref.corners[k]], dom) + shift;
    std::vector<Mat> out_s;
    for (const auto& s : proto.simplices) {
      Mat v(tess.d, s.size());
      for (size_t k = 0; k < s.size(); ++k) v.col(k) = pos.col(s[k]);
      out_s.push_back(v);
    }
    return out_s;
  };
  double min_disjoint = INFINITY;
  for (int a = 0; a < ntd; ++a)
    for (int b = a + 1; b < ntd; ++b) {
      std::set<int> ca(sc.tiles[a].corners.begin(), sc.tiles[a].corners.end());
      bool share = false;
      for (int c : sc.tiles[b].corners) share = share || ca.count(c);
      if (share) continue;
      Vec pa = sc.points[sc.tiles[a].corners[0]], pb = sc.points[sc.tiles[b].corners[0]];
      Vec shift = pa + minimal_image(pa, pb, dom) - pb;
      auto sa = tile_simplices(a, Vec::Zero(tess.d));
      auto sb = tile_simplices(b, shift);
      for (const auto& A : sa)
        for (const auto& B : sb) min_disjoint = std::min(min_disjoint, simplex_distance(A, B));
    }
  out.rho_max = std::min(1.0, min_disjoint / 3.0);
  return out;
}

}  // namespace crystal
