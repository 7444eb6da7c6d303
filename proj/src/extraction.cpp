#include "crystal/extraction.hpp"

#include "crystal/polytope.hpp"
#include "torus_bins.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace crystal {

namespace {

constexpr double kVolumeSlack = 1e-12;
constexpr double kTieSlack = 1e-9;
constexpr double kPruneSlack = 1e-9;

/// sorted facet corner indices, padded with -1
using FacetKey = std::array<int, 8>;

struct KeyHash {
  size_t operator()(const FacetKey& v) const {
    size_t h = 1469598103934665603ull;
    for (int x : v) h = (h ^ size_t(unsigned(x))) * 1099511628211ull;
    return h;
  }
};

using FacetCount = std::unordered_map<FacetKey, int, KeyHash>;

bool key_has(const FacetKey& k, int x) {
  for (int v : k)
    if (v == x) return true;
  return false;
}

double hull_volume(const Mat& x, const StandardTile& proto, const std::vector<int>& perm) {
  if (x.rows() == 2) return convex_hull_area(x);
  std::vector<int> inv(perm.size());
  for (size_t k = 0; k < perm.size(); ++k) inv[perm[k]] = int(k);
  double v = 0.0;
  for (const auto& s : proto.simplices) {
    Mat pts(x.rows(), s.size());
    for (size_t k = 0; k < s.size(); ++k) pts.col(k) = x.col(inv[s[k]]);
    v += simplex_volume(pts);
  }
  return v;
}

CandidateTile make_candidate(std::vector<int> corners, const Vec& anchor, const Mat& local, const TileMatch& m,
                             int type_id, const Tessellation& tess) {
  const StandardTile& proto = tess.prototiles[type_id];
  const int d = tess.d;
  CandidateTile c;
  c.corners = std::move(corners);
  c.type_id = type_id;
  c.placement = m.placement;
  c.perm = m.perm;
  c.alignment = m.alignment;
  c.anchor = anchor;
  c.local = local;
  c.volume = m.volume;
  Mat ref = tess.placed_corners(m.placement);
  std::vector<int> inv(c.perm.size());
  for (size_t k = 0; k < c.perm.size(); ++k) inv[c.perm[k]] = int(k);
  for (const auto& s : proto.simplices) {
    Mat pts(d, d + 1);
    Mat Y(d, d), S(d, d);
    for (int k = 0; k <= d; ++k) pts.col(k) = local.col(inv[s[k]]);
    for (int k = 1; k <= d; ++k) {
      Y.col(k - 1) = pts.col(k) - pts.col(0);
      S.col(k - 1) = ref.col(s[k]) - ref.col(s[0]);
    }
    double vol = simplex_volume(pts);
    if (!(vol > 1e-14 * proto.volume)) {
      std::ostringstream os;
      os << "degenerate simplex in tile {";
      for (int p : c.corners) os << p << ' ';
      os << "}";
      throw std::runtime_error(os.str());
    }
    c.simplex_pts.push_back(pts);
    c.per_simplex_gradients.push_back(S * Y.inverse());
    c.simplex_volumes.push_back(vol);
  }
  c.center = local.rowwise().mean();
  c.radius = 0.0;
  for (int k = 0; k < local.cols(); ++k) c.radius = std::max(c.radius, (local.col(k) - c.center).norm());
  return c;
}

std::vector<int> tile_types_with(const Tessellation& tess, int n) {
  std::vector<int> out;
  for (size_t i = 0; i < tess.prototiles.size(); ++i)
    if (tess.prototiles[i].n() == n) out.push_back(int(i));
  return out;
}

std::vector<int> corner_counts(const Tessellation& tess) {
  std::vector<int> ns;
  for (const auto& t : tess.prototiles) ns.push_back(t.n());
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
  return ns;
}

double search_radius(const Tessellation& tess, int n, double eps) {
  double r = 0.0;
  for (const auto& t : tess.prototiles)
    if (t.n() == n) r = std::max(r, t.diameter);
  return r + 2.0 * eps + kPruneSlack;
}

/// Tries every tile type on the sorted corner set and appends accepted candidates.
void try_subset(const PointConfig& P, const std::vector<int>& corners, const Tessellation& tess, double eps,
                std::vector<CandidateTile>& out) {
  const int d = P.dom.d;
  const int n = int(corners.size());
  const Vec& anchor = P.points[corners[0]];
  Mat local(d, n);
  local.col(0).setZero();
  for (int k = 1; k < n; ++k) local.col(k) = minimal_image(anchor, P.points[corners[k]], P.dom);
  for (int type : tile_types_with(tess, n)) {
    auto m = match_tile(local, tess, type, eps);
    if (m) out.push_back(make_candidate(corners, anchor, local, *m, type, tess));
  }
}

bool candidate_less(const CandidateTile& a, const CandidateTile& b) {
  if (a.corners != b.corners) return a.corners < b.corners;
  return a.type_id < b.type_id;
}

}  // namespace

int CandidateTile::point_of(int proto_corner) const {
  for (size_t k = 0; k < perm.size(); ++k)
    if (perm[k] == proto_corner) return corners[k];
  return -1;
}

std::optional<TileMatch> match_tile(const Mat& x, const Tessellation& tess, int type_id, double eps) {
  const StandardTile& proto = tess.prototiles.at(type_id);
  const int n = proto.n();
  if (x.cols() != n || x.rows() != proto.d()) return std::nullopt;
  auto perms = distance_compatible_perms(x, proto.corners, 2.0 * eps);
  if (perms.empty()) return std::nullopt;
  const Vec xbar = x.rowwise().mean();
  const double hull2 = x.rows() == 2 ? convex_hull_area(x) : -1.0;

  std::optional<TileMatch> best;
  double best_dev = INFINITY, best_trace = -INFINITY;
  for (size_t p = 0; p < tess.placements.size(); ++p) {
    if (tess.placements[p].type_id != type_id) continue;
    Mat y = tess.placed_corners(int(p));
    Vec ybar = y.rowwise().mean();
    for (const auto& perm : perms) {
      Mat H = Mat::Zero(x.rows(), x.rows());
      for (int k = 0; k < n; ++k) H += (x.col(k) - xbar) * (y.col(perm[k]) - ybar).transpose();
      Mat R = nearest_rotation(H).R;
      Vec a = xbar - R * ybar;
      double dev = 0.0;
      for (int k = 0; k < n; ++k) dev = std::max(dev, (x.col(k) - a - R * y.col(perm[k])).norm());
      if (dev > eps) continue;
      double vol = hull2 >= 0.0 ? hull2 : hull_volume(x, proto, perm);
      if (!(vol > 1e-14 * proto.volume) || vol < proto.volume * (1.0 - kVolumeSlack)) continue;
      double tr = R.trace();
      bool better = dev < best_dev - kTieSlack || (dev <= best_dev + kTieSlack && tr > best_trace + 1e-12);
      if (!best || better) {
        TileMatch m;
        m.placement = int(p);
        m.perm = perm;
        m.alignment = {a, R, dev};
        m.volume = vol;
        best = m;
        best_dev = std::min(best_dev, dev);
        best_trace = tr;
      }
    }
  }
  return best;
}

std::optional<Alignment> match_tile(const Mat& corners, const StandardTile& proto, double eps) {
  Tessellation t;
  t.d = proto.d();
  t.prototiles = {proto};
  t.prototiles[0].type_id = 0;
  t.placements = {{0, Vec::Zero(t.d), Mat::Identity(t.d, t.d)}};
  auto m = match_tile(corners, t, 0, eps);
  if (!m) return std::nullopt;
  return m->alignment;
}

std::optional<CandidateTile> candidate_from_corners(const Mat& corners, const Tessellation& tess, double eps) {
  const int n = int(corners.cols());
  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  for (int type : tile_types_with(tess, n)) {
    auto m = match_tile(corners, tess, type, eps);
    if (m) return make_candidate(ids, Vec::Zero(corners.rows()), corners, *m, type, tess);
  }
  return std::nullopt;
}

std::vector<CandidateTile> enumerate_candidates(const PointConfig& P, const Tessellation& tess, double eps) {
  std::vector<CandidateTile> out;
  const int np = P.size();
  if (np == 0) return out;
  for (int n : corner_counts(tess)) {
    if (np < n) continue;
    const double r = search_radius(tess, n, eps);
    TorusBins bins(P.dom, r);
    for (int i = 0; i < np; ++i) bins.insert(i, P.points[i]);
    for (int i = 0; i < np; ++i) {
      std::vector<int> nb;
      std::vector<Vec> rel;
      std::vector<int> ids;
      bins.for_near(P.points[i], [&](int j) {
        if (j > i) ids.push_back(j);
      });
      std::sort(ids.begin(), ids.end());
      ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
      for (int j : ids) {
        Vec v = minimal_image(P.points[i], P.points[j], P.dom);
        if (v.norm() <= r) {
          nb.push_back(j);
          rel.push_back(v);
        }
      }
      std::vector<int> pick;
      std::function<void(size_t)> rec = [&](size_t start) {
        if (int(pick.size()) == n - 1) {
          std::vector<int> corners{i};
          for (int q : pick) corners.push_back(nb[q]);
          try_subset(P, corners, tess, eps, out);
          return;
        }
        for (size_t q = start; q < nb.size(); ++q) {
          bool ok = true;
          for (int s : pick) ok = ok && (rel[q] - rel[s]).norm() <= r;
          if (!ok) continue;
          pick.push_back(int(q));
          rec(q + 1);
          pick.pop_back();
        }
      };
      rec(0);
    }
  }
  std::sort(out.begin(), out.end(), candidate_less);
  return out;
}

std::vector<CandidateTile> candidates_containing(const PointConfig& P, int j, const Tessellation& tess,
                                                 double eps) {
  std::vector<CandidateTile> out;
  const int np = P.size();
  for (int n : corner_counts(tess)) {
    if (np < n) continue;
    const double r = search_radius(tess, n, eps);
    std::vector<int> nb;
    std::vector<Vec> rel;
    for (int k = 0; k < np; ++k) {
      if (k == j) continue;
      Vec v = minimal_image(P.points[j], P.points[k], P.dom);
      if (v.norm() <= r) {
        nb.push_back(k);
        rel.push_back(v);
      }
    }
    std::vector<int> pick;
    std::function<void(size_t)> rec = [&](size_t start) {
      if (int(pick.size()) == n - 1) {
        std::vector<int> corners{j};
        for (int q : pick) corners.push_back(nb[q]);
        std::sort(corners.begin(), corners.end());
        try_subset(P, corners, tess, eps, out);
        return;
      }
      for (size_t q = start; q < nb.size(); ++q) {
        bool ok = true;
        for (int s : pick) ok = ok && (rel[q] - rel[s]).norm() <= r;
        if (!ok) continue;
        pick.push_back(int(q));
        rec(q + 1);
        pick.pop_back();
      }
    };
    rec(0);
  }
  std::sort(out.begin(), out.end(), candidate_less);
  return out;
}

CandidateSet::CandidateSet(const PointConfig& P, const Tessellation& tess, double eps)
    : tess_(&tess), eps_(eps), tiles_(enumerate_candidates(P, tess, eps)) {
  stamp(tiles_);
}

void CandidateSet::stamp(std::vector<CandidateTile>& tiles) {
  for (auto& t : tiles) {
    t.uid = next_uid_++;
    if (editing_) undo_added_.push_back(t.uid);
  }
  if (verdicts_.size() > 64 * tiles_.size() + 4096) verdicts_.clear();
}

void CandidateSet::drop_point(int j) {
  auto it = std::stable_partition(tiles_.begin(), tiles_.end(), [&](const CandidateTile& t) {
    return !std::binary_search(t.corners.begin(), t.corners.end(), j);
  });
  if (editing_)
    for (auto r = it; r != tiles_.end(); ++r)
      if (std::find(undo_added_.begin(), undo_added_.end(), r->uid) == undo_added_.end())
        undo_removed_.push_back(std::move(*r));
  tiles_.erase(it, tiles_.end());
}

void CandidateSet::begin_edit() {
  editing_ = true;
  undo_removed_.clear();
  undo_added_.clear();
}

void CandidateSet::rollback() {
  if (!editing_) throw std::logic_error("CandidateSet::rollback without begin_edit");
  tiles_.erase(std::remove_if(tiles_.begin(), tiles_.end(),
                              [&](const CandidateTile& t) {
                                return std::find(undo_added_.begin(), undo_added_.end(), t.uid) != undo_added_.end();
                              }),
               tiles_.end());
  for (auto& t : undo_removed_) tiles_.push_back(std::move(t));
  sort_tiles();
  editing_ = false;
  undo_removed_.clear();
  undo_added_.clear();
}

void CandidateSet::sort_tiles() { std::sort(tiles_.begin(), tiles_.end(), candidate_less); }

void CandidateSet::refresh_point(const PointConfig& P, int j) {
  drop_point(j);
  auto add = candidates_containing(P, j, *tess_, eps_);
  stamp(add);
  tiles_.insert(tiles_.end(), std::make_move_iterator(add.begin()), std::make_move_iterator(add.end()));
  sort_tiles();
}

void CandidateSet::swap_remove(const PointConfig& P, int j, int old_last) {
  drop_point(j);
  if (old_last != j) drop_point(old_last);
  if (j < P.size()) {
    auto add = candidates_containing(P, j, *tess_, eps_);
    stamp(add);
    tiles_.insert(tiles_.end(), std::make_move_iterator(add.begin()), std::make_move_iterator(add.end()));
  }
  sort_tiles();
}

Mat tile_corners_near(const CandidateTile& t, const Vec& anchor, const TorusDomain& dom) {
  Mat out = t.local;
  out.colwise() += minimal_image(anchor, t.anchor, dom);
  return out;
}

// ---------------------------------------------------------------------------
// Pairwise and star conditions

namespace {

enum class Verdict : std::uint8_t { ok, not_face, overlap, too_close, slit, facet_overuse, star_degree, closed_star, link };

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::ok: return "ok";
    case Verdict::not_face: return "(i) shared points are not a common face";
    case Verdict::overlap: return "(i) interiors overlap";
    case Verdict::too_close: return "(iii) disjoint tiles within 3 rho";
    case Verdict::slit: return "(iv) face within 3 rho of another tile";
    case Verdict::facet_overuse: return "(i) facet in more than two tiles";
    case Verdict::star_degree: return "(i) vertex star larger than in M";
    case Verdict::closed_star: return "(i) closed vertex star with wrong tile count";
    case Verdict::link: return "(i) vertex link not a sub-star of M";
  }
  return "?";
}

class ConditionChecker {
 public:
  ConditionChecker(const Tessellation& tess, const TorusDomain& dom, double rho)
      : tess_(tess), dom_(dom), rho3_(3.0 * rho) {
    StandardComplex sc = standard_complex(tess, 3);
    std::vector<int> deg(sc.points.size(), 0);
    for (const auto& t : sc.tiles)
      for (int c : t.corners) ++deg[c];
    fmax_ = *std::max_element(deg.begin(), deg.end());
    for (size_t x = 0; x < sc.points.size(); ++x) closed_sizes_.push_back(deg[x]);
    std::sort(closed_sizes_.begin(), closed_sizes_.end());
    closed_sizes_.erase(std::unique(closed_sizes_.begin(), closed_sizes_.end()), closed_sizes_.end());
  }

  int fmax() const { return fmax_; }
  bool closed_size_ok(int deg) const {
    return std::binary_search(closed_sizes_.begin(), closed_sizes_.end(), deg);
  }

  void use_cache(std::unordered_map<std::uint64_t, std::uint8_t>* cache) { cache_ = cache; }

  Verdict pair(const CandidateTile& A, const CandidateTile& B) const {
    if (!cache_ || A.uid == 0 || B.uid == 0) return pair_uncached(A, B);
    std::uint64_t lo = std::min(A.uid, B.uid), hi = std::max(A.uid, B.uid);
    std::uint64_t key = (hi << 32) ^ lo;
    auto it = cache_->find(key);
    if (it != cache_->end()) return Verdict(it->second);
    Verdict v = pair_uncached(A, B);
    cache_->emplace(key, std::uint8_t(v));
    return v;
  }

  Verdict pair_uncached(const CandidateTile& A, const CandidateTile& B) const {
    const Vec off = minimal_image(A.anchor, B.anchor, dom_);
    if ((B.center + off - A.center).norm() > A.radius + B.radius + rho3_ + 1e-9) return Verdict::ok;
    std::vector<int> shared;
    std::set_intersection(A.corners.begin(), A.corners.end(), B.corners.begin(), B.corners.end(),
                          std::back_inserter(shared));
    std::vector<Mat> sb;
    for (const Mat& s : B.simplex_pts) sb.push_back(s.colwise() + off);
    if (!shared.empty()) {
      if (shared.size() == A.corners.size() || shared.size() == B.corners.size()) return Verdict::not_face;
      if (!is_face_of(A, shared) || !is_face_of(B, shared)) return Verdict::not_face;
      for (const Mat& sa : A.simplex_pts)
        for (const Mat& s : sb)
          if (simplices_overlap(sa, s, 1e-9)) return Verdict::overlap;
    } else {
      for (const Mat& sa : A.simplex_pts)
        for (const Mat& s : sb)
          if (simplex_distance(sa, s) <= rho3_) return Verdict::too_close;
    }
    if (!faces_clear(A, B, sb, B.center + off)) return Verdict::slit;
    std::vector<Mat> sa_in_b;
    for (const Mat& s : A.simplex_pts) sa_in_b.push_back(s.colwise() - off);
    if (!faces_clear(B, A, sa_in_b, A.center - off)) return Verdict::slit;
    return Verdict::ok;
  }

  /// Star conditions at the corners of `c` when added to the tiles listed in `star_of`.
  Verdict star(const CandidateTile& c, const std::vector<const CandidateTile*>& all_tiles,
               const std::vector<std::vector<int>>& star_of, const FacetCount& facets) const {
    const StandardTile& proto = tess_.prototiles[c.type_id];
    for (const auto& f : proto.facets) {
      auto key = facet_key(c, f);
      auto it = facets.find(key);
      if (it != facets.end() && it->second >= 2) return Verdict::facet_overuse;
    }
    for (int x : c.corners) {
      std::vector<const CandidateTile*> st;
      for (int t : star_of[x]) st.push_back(all_tiles[t]);
      st.push_back(&c);
      Verdict v = star_at(x, st);
      if (v != Verdict::ok) return v;
    }
    return Verdict::ok;
  }

  Verdict star_at(int x, const std::vector<const CandidateTile*>& st) const {
    const int deg = int(st.size());
    if (deg > fmax_) return Verdict::star_degree;
    std::vector<std::pair<FacetKey, int>> local;
    for (const CandidateTile* t : st) {
      for (const auto& f : tess_.prototiles[t->type_id].facets) {
        FacetKey key = facet_key(*t, f);
        if (!key_has(key, x)) continue;
        auto it = std::find_if(local.begin(), local.end(), [&](const auto& e) { return e.first == key; });
        if (it == local.end())
          local.push_back({key, 1});
        else
          ++it->second;
      }
    }
    bool closed = true;
    for (const auto& [k, n] : local) {
      if (n > 2) return Verdict::facet_overuse;
      if (n != 2) closed = false;
    }
    if (closed && !closed_size_ok(deg)) return Verdict::closed_star;
    if (tess_.d == 2) {
      // link graph: each tile joins the two edge-neighbours of x
      std::vector<std::pair<int, int>> edges;
      for (const CandidateTile* t : st) {
        const StandardTile& proto = tess_.prototiles[t->type_id];
        int cx = -1;
        for (size_t k = 0; k < t->corners.size(); ++k)
          if (t->corners[k] == x) cx = t->perm[k];
        std::vector<int> nb;
        for (auto [a, b] : proto.edge_pairs) {
          if (a == cx) nb.push_back(t->point_of(b));
          if (b == cx) nb.push_back(t->point_of(a));
        }
        if (nb.size() != 2) return Verdict::link;
        edges.push_back({std::min(nb[0], nb[1]), std::max(nb[0], nb[1])});
      }
      std::sort(edges.begin(), edges.end());
      if (std::adjacent_find(edges.begin(), edges.end()) != edges.end()) return Verdict::link;
      std::vector<int> nodes;
      for (auto [a, b] : edges) {
        nodes.push_back(a);
        nodes.push_back(b);
      }
      std::sort(nodes.begin(), nodes.end());
      std::vector<int> count;
      for (size_t i = 0; i < nodes.size();) {
        size_t j = i;
        while (j < nodes.size() && nodes[j] == nodes[i]) ++j;
        if (j - i > 2) return Verdict::link;
        i = j;
      }
      nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
      std::vector<int> parent(nodes.size());
      std::iota(parent.begin(), parent.end(), 0);
      std::function<int(int)> find = [&](int a) { return parent[a] == a ? a : parent[a] = find(parent[a]); };
      auto idx = [&](int p) { return int(std::lower_bound(nodes.begin(), nodes.end(), p) - nodes.begin()); };
      bool cycle = false;
      int comps = int(nodes.size());
      for (auto [a, b] : edges) {
        int ra = find(idx(a)), rb = find(idx(b));
        if (ra == rb)
          cycle = true;
        else {
          parent[ra] = rb;
          --comps;
        }
      }
      if (cycle && (comps != 1 || edges.size() != nodes.size() || !closed_size_ok(deg))) return Verdict::link;
    }
    return Verdict::ok;
  }

  static FacetKey facet_key(const CandidateTile& t, const std::vector<int>& proto_face) {
    FacetKey key;
    key.fill(-1);
    if (proto_face.size() > key.size()) throw std::logic_error("facet_key: facet too large");
    for (size_t k = 0; k < proto_face.size(); ++k) key[k] = t.point_of(proto_face[k]);
    std::sort(key.begin(), key.begin() + proto_face.size());
    return key;
  }

 private:
  bool is_face_of(const CandidateTile& t, const std::vector<int>& pts) const {
    std::vector<int> ids;
    for (int p : pts)
      for (size_t k = 0; k < t.corners.size(); ++k)
        if (t.corners[k] == p) ids.push_back(t.perm[k]);
    return tess_.prototiles[t.type_id].is_face(ids);
  }

  /// true when q is farther than 3 rho from every simplex
  bool far_from(const Vec& q, const Vec& center, double radius, const std::vector<Mat>& simplices) const {
    if ((q - center).norm() > radius + rho3_) return true;
    for (const Mat& s : simplices)
      if (point_hull_distance(q, s) <= rho3_) return false;
    return true;
  }

  /// condition (iv) for all faces of A against tile B (given by its simplices in A's frame)
  bool faces_clear(const CandidateTile& A, const CandidateTile& B, const std::vector<Mat>& sb,
                   const Vec& b_center) const {
    const StandardTile& proto = tess_.prototiles[A.type_id];
    for (const auto& f : proto.faces) {
      bool contained = true;
      std::vector<int> cols;
      for (int c : f) {
        int p = A.point_of(c);
        contained = contained && std::binary_search(B.corners.begin(), B.corners.end(), p);
        for (size_t k = 0; k < A.perm.size(); ++k)
          if (A.perm[k] == c) cols.push_back(int(k));
      }
      if (contained) continue;
      std::vector<Vec> quad;
      Vec bary = Vec::Zero(dom_.d);
      for (int k : cols) {
        quad.push_back(A.local.col(k));
        bary += A.local.col(k);
      }
      if (cols.size() > 1) {
        quad.push_back(bary / double(cols.size()));
        for (auto [a, b] : proto.edge_pairs) {
          bool ina = std::find(f.begin(), f.end(), a) != f.end();
          bool inb = std::find(f.begin(), f.end(), b) != f.end();
          if (ina && inb) {
            int ka = -1, kb = -1;
            for (size_t k = 0; k < A.perm.size(); ++k) {
              if (A.perm[k] == a) ka = int(k);
              if (A.perm[k] == b) kb = int(k);
            }
            quad.push_back(0.5 * (A.local.col(ka) + A.local.col(kb)));
          }
        }
      }
      bool clear = false;
      for (const Vec& q : quad)
        if (far_from(q, b_center, B.radius, sb)) {
          clear = true;
          break;
        }
      if (!clear) return false;
    }
    return true;
  }

  const Tessellation& tess_;
  TorusDomain dom_;
  double rho3_;
  int fmax_ = 0;
  std::vector<int> closed_sizes_;
  std::unordered_map<std::uint64_t, std::uint8_t>* cache_ = nullptr;
};

std::string describe(const CandidateTile& t) {
  std::ostringstream os;
  os << "{";
  for (size_t k = 0; k < t.corners.size(); ++k) os << (k ? "," : "") << t.corners[k];
  os << "}";
  return os.str();
}

}  // namespace

namespace {

using VerdictCache = std::unordered_map<std::uint64_t, std::uint8_t>;

std::string verify_impl(const TileComplex& cx, const PointConfig& P, const Tessellation& tess,
                        const ExtractionParams& params, VerdictCache* cache);

TileComplex extract_impl(const std::vector<CandidateTile>& cand, const PointConfig& P, const Tessellation& tess,
                         const ExtractionParams& params, VerdictCache* cache) {
  TileComplex out;
  const int nc = int(cand.size());
  if (nc == 0) {
    classify_points(P, tess, out);
    return out;
  }
  ConditionChecker check(tess, P.dom, params.rho);
  check.use_cache(cache);

  // candidates sharing each facet
  FacetCount facet_id;
  std::vector<std::vector<int>> facet_members;
  std::vector<std::vector<int>> facets_of(nc);
  for (int c = 0; c < nc; ++c) {
    for (const auto& f : tess.prototiles[cand[c].type_id].facets) {
      auto key = ConditionChecker::facet_key(cand[c], f);
      auto [it, fresh] = facet_id.emplace(key, int(facet_members.size()));
      if (fresh) facet_members.emplace_back();
      facet_members[it->second].push_back(c);
      facets_of[c].push_back(it->second);
    }
  }
  auto facet_neighbours = [&](int c) {
    std::vector<int> nb;
    for (int f : facets_of[c])
      for (int o : facet_members[f])
        if (o != c) nb.push_back(o);
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    return nb;
  };

  // seed: maximal local support, then smallest corner list (candidates are sorted)
  int seed = -1, best_support = -1;
  for (int c = 0; c < nc; ++c) {
    int support = 0;
    for (int o : facet_neighbours(c))
      if (check.pair(cand[c], cand[o]) == Verdict::ok) ++support;
    if (support > best_support) {
      best_support = support;
      seed = c;
    }
  }

  double max_radius = 0.0;
  for (const auto& c : cand) max_radius = std::max(max_radius, c.radius);
  TorusBins bins(P.dom, 2.0 * max_radius + 3.0 * params.rho + 1e-6);

  std::vector<char> state(nc, 0);  // 0 undecided, 1 admitted, 2 rejected
  std::vector<int> admitted;
  std::vector<const CandidateTile*> admitted_ptr;
  std::vector<std::vector<int>> star_of(P.size());
  FacetCount facet_use;

  auto world_center = [&](const CandidateTile& t) { return Vec(t.anchor + t.center); };
  auto admit = [&](int c) {
    int slot = int(admitted.size());
    admitted.push_back(c);
    admitted_ptr.push_back(&cand[c]);
    state[c] = 1;
    for (int x : cand[c].corners) star_of[x].push_back(slot);
    for (const auto& f : tess.prototiles[cand[c].type_id].facets) ++facet_use[ConditionChecker::facet_key(cand[c], f)];
    bins.insert(slot, world_center(cand[c]));
  };
  auto try_admit = [&](int c) -> Verdict {
    Verdict v = Verdict::ok;
    bins.for_near(world_center(cand[c]), [&](int slot) {
      if (v == Verdict::ok) v = check.pair(cand[c], *admitted_ptr[slot]);
    });
    if (v == Verdict::ok) v = check.star(cand[c], admitted_ptr, star_of, facet_use);
    return v;
  };

  admit(seed);
  std::deque<int> queue{seed};
  while (!queue.empty()) {
    int t = queue.front();
    queue.pop_front();
    for (int c : facet_neighbours(t)) {
      if (state[c] != 0) continue;
      Verdict v = try_admit(c);
      if (v == Verdict::ok) {
        admit(c);
        queue.push_back(c);
      } else {
        state[c] = 2;
        if (params.debug) out.debug.push_back("reject " + describe(cand[c]) + ": " + verdict_name(v));
      }
    }
  }
  if (params.debug)
    for (int c = 0; c < nc; ++c)
      if (state[c] == 0) out.debug.push_back("unreached " + describe(cand[c]) + ": not facet-connected to T");

  std::sort(admitted.begin(), admitted.end());
  for (int c : admitted) out.tiles.push_back(cand[c]);
  classify_points(P, tess, out);
  std::string err = verify_impl(out, P, tess, params, cache);
  if (!err.empty()) throw std::logic_error("extract_crystal: final re-check failed: " + err);
  return out;
}

}  // namespace

TileComplex extract_crystal(const std::vector<CandidateTile>& cand, const PointConfig& P, const Tessellation& tess,
                            const ExtractionParams& params) {
  return extract_impl(cand, P, tess, params, nullptr);
}

TileComplex extract_crystal(const CandidateSet& cand, const PointConfig& P, const Tessellation& tess,
                            const ExtractionParams& params) {
  return extract_impl(cand.tiles(), P, tess, params, &cand.verdicts());
}

void classify_points(const PointConfig& P, const Tessellation& tess, TileComplex& cx) {
  const int np = P.size();
  cx.vertex_map.assign(np, {});
  cx.adjacency.clear();
  cx.boundary_tiles.clear();
  cx.surface_points.clear();
  cx.exterior_points.clear();
  for (int t = 0; t < cx.size(); ++t)
    for (int x : cx.tiles[t].corners) cx.vertex_map[x].push_back(t);
  FacetCount use;
  for (const auto& t : cx.tiles)
    for (const auto& f : tess.prototiles[t.type_id].facets) ++use[ConditionChecker::facet_key(t, f)];
  std::vector<char> surface(np, 0);
  for (const auto& [key, n] : use)
    if (n < 2)
      for (int x : key)
        if (x >= 0) surface[x] = 1;
  for (int x = 0; x < np; ++x) {
    if (cx.vertex_map[x].empty()) {
      cx.exterior_points.push_back(x);
      surface[x] = 1;
    }
    if (surface[x]) cx.surface_points.push_back(x);
  }
  for (int t = 0; t < cx.size(); ++t) {
    bool b = false;
    for (int x : cx.tiles[t].corners) b = b || surface[x];
    if (b) cx.boundary_tiles.push_back(t);
  }
  for (int x = 0; x < np; ++x) {
    const auto& st = cx.vertex_map[x];
    for (size_t i = 0; i < st.size(); ++i)
      for (size_t j = i + 1; j < st.size(); ++j) cx.adjacency.push_back({std::min(st[i], st[j]), std::max(st[i], st[j])});
  }
  std::sort(cx.adjacency.begin(), cx.adjacency.end());
  cx.adjacency.erase(std::unique(cx.adjacency.begin(), cx.adjacency.end()), cx.adjacency.end());
}

bool check_admissible(const TileComplex& complex, double c0, int N, int d) {
  return double(complex.size()) >= c0 * std::pow(double(N), double(d));
}

namespace {

std::string verify_impl(const TileComplex& cx, const PointConfig& P, const Tessellation& tess,
                        const ExtractionParams& params, VerdictCache* cache) {
  const int nt = cx.size();
  if (nt == 0) return "";
  ConditionChecker check(tess, P.dom, params.rho);
  check.use_cache(cache);
  double max_radius = 0.0;
  for (const auto& t : cx.tiles) max_radius = std::max(max_radius, t.radius);
  TorusBins bins(P.dom, 2.0 * max_radius + 3.0 * params.rho + 1e-6);
  for (int t = 0; t < nt; ++t) bins.insert(t, cx.tiles[t].anchor + cx.tiles[t].center);
  for (int a = 0; a < nt; ++a) {
    std::string err;
    bins.for_near(cx.tiles[a].anchor + cx.tiles[a].center, [&](int b) {
      if (b <= a || !err.empty()) return;
      Verdict v = check.pair(cx.tiles[a], cx.tiles[b]);
      if (v != Verdict::ok) err = describe(cx.tiles[a]) + " vs " + describe(cx.tiles[b]) + ": " + verdict_name(v);
    });
    if (!err.empty()) return err;
  }
  std::vector<std::vector<int>> star(P.size());
  for (int t = 0; t < nt; ++t)
    for (int x : cx.tiles[t].corners) star[x].push_back(t);
  for (int x = 0; x < P.size(); ++x) {
    if (star[x].empty()) continue;
    std::vector<const CandidateTile*> st;
    for (int t : star[x]) st.push_back(&cx.tiles[t]);
    Verdict v = check.star_at(x, st);
    if (v != Verdict::ok) return "vertex " + std::to_string(x) + ": " + verdict_name(v);
  }
  // (ii): tiles sharing a point are connected
  std::vector<int> parent(nt);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int a) { return parent[a] == a ? a : parent[a] = find(parent[a]); };
  for (int x = 0; x < P.size(); ++x)
    for (size_t i = 1; i < star[x].size(); ++i) parent[find(star[x][i])] = find(star[x][0]);
  for (int t = 1; t < nt; ++t)
    if (find(t) != find(0)) return "(ii) union of tiles is disconnected";
  return "";
}

}  // namespace

std::string verify_conditions(const TileComplex& cx, const PointConfig& P, const Tessellation& tess,
                              const ExtractionParams& params) {
  return verify_impl(cx, P, tess, params, nullptr);
}

TileComplex extract(const PointConfig& P, const Tessellation& tess, const ExtractionParams& params) {
  return extract_crystal(enumerate_candidates(P, tess, params.eps), P, tess, params);
}

bool boundary_inequality(const TileComplex& complex, const PointConfig& P, const TessellationConstants& consts) {
  double weighted = 0.0;
  for (const auto& t : complex.tiles) weighted += consts.gamma.at(t.type_id);
  const double slack = 1e-9;
  const double lower = double(P.size()) - weighted;
  return double(complex.surface_points.size()) >= lower - slack && lower >= -slack;
}

CountingSample counting_sample(const TileComplex& complex, const PointConfig& P, const Tessellation& tess,
                               const TessellationConstants& consts, int N) {
  CountingSample s;
  s.N = N;
  s.d = tess.d;
  s.points = P.size();
  s.covered_points = P.size() - int(complex.exterior_points.size());
  s.surface_points = int(complex.surface_points.size());
  s.boundary_tiles = int(complex.boundary_tiles.size());
  const int types = int(tess.prototiles.size());
  s.tiles.assign(types, 0);
  s.standard_tiles.assign(types, 0);
  int cells = 1;
  for (int k = 0; k < tess.d; ++k) cells *= N;
  for (const auto& pl : tess.placements) s.standard_tiles[pl.type_id] += cells;
  for (const auto& t : complex.tiles) {
    ++s.tiles[t.type_id];
    s.gamma_sum += consts.gamma.at(t.type_id);
  }
  return s;
}

CountingFit fit_counting(const std::vector<CountingSample>& samples) {
  CountingFit f;
  f.samples = int(samples.size());
  if (samples.empty()) return f;
  f.c12 = std::numeric_limits<double>::infinity();
  for (const auto& s : samples) {
    const double vol = std::pow(double(s.N), s.d);
    f.c12 = std::min(f.c12, s.covered_points / vol);
    f.c13 = std::max(f.c13, s.covered_points / vol);
    if (s.boundary_tiles > 0)
      for (size_t i = 0; i < s.tiles.size(); ++i)
        f.c9 = std::max(f.c9, std::abs(s.tiles[i] - s.standard_tiles[i]) / double(s.boundary_tiles));
    const double lower = s.points - s.gamma_sum;
    if (!(s.surface_points >= lower - 1e-9 && lower >= -1e-9)) ++f.boundary_violations;
  }
  return f;
}

}  // namespace crystal
