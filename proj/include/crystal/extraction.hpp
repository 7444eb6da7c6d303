#pragma once

#include "crystal/geometry.hpp"
#include "crystal/tessellation.hpp"

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <string>
#include <vector>

namespace crystal {

struct PointConfig {
  TorusDomain dom;
  std::vector<Vec> points;

  int size() const { return int(points.size()); }
};

/// Result of matching a corner set against one tile type.
struct TileMatch {
  int placement = 0;
  std::vector<int> perm;  ///< perm[k] = prototile corner of input corner k
  Alignment alignment;
  double volume = 0.0;
};

struct CandidateTile {
  std::vector<int> corners;  ///< sorted point indices
  int type_id = 0;
  int placement = 0;
  std::vector<int> perm;
  Alignment alignment;
  Vec anchor;                ///< wrapped position of corners[0]
  Mat local;                 ///< corner positions relative to anchor (unwrapped)
  std::vector<Mat> simplex_pts;        ///< per simplex, d x (d+1), relative to anchor
  std::vector<Mat> per_simplex_gradients;
  std::vector<double> simplex_volumes;
  double volume = 0.0;
  Vec center;                ///< relative to anchor
  double radius = 0.0;
  std::uint64_t uid = 0;     ///< nonzero inside a CandidateSet; identifies unchanged candidates

  /// point index of prototile corner c
  int point_of(int proto_corner) const;
};

struct TileComplex {
  std::vector<CandidateTile> tiles;
  std::vector<std::pair<int, int>> adjacency;   ///< tile pairs sharing at least one point
  std::vector<int> boundary_tiles;
  std::vector<int> surface_points;
  std::vector<int> exterior_points;
  std::vector<std::vector<int>> vertex_map;     ///< point -> incident tiles
  std::vector<std::string> debug;               ///< rejection log when requested

  int size() const { return int(tiles.size()); }
};

struct ExtractionParams {
  double eps = 0.05;
  double rho = 0.1;
  bool debug = false;
};

/// Best rigid match of `corners` (d x n, unwrapped) against tile type `type_id`.
std::optional<TileMatch> match_tile(const Mat& corners, const Tessellation& tess, int type_id, double eps);

/// Match against a single prototile in its reference placement.
std::optional<Alignment> match_tile(const Mat& corners, const StandardTile& proto, double eps);

/// Standalone tile from corner positions (corner k is point k, anchor at the origin); empty if not in U_eps.
std::optional<CandidateTile> candidate_from_corners(const Mat& corners, const Tessellation& tess, double eps);

std::vector<CandidateTile> enumerate_candidates(const PointConfig& P, const Tessellation& tess, double eps);

/// Candidates containing point j (corner sets sorted, same numerics as a full enumeration).
std::vector<CandidateTile> candidates_containing(const PointConfig& P, int j, const Tessellation& tess, double eps);

TileComplex extract_crystal(const std::vector<CandidateTile>& candidates, const PointConfig& P,
                            const Tessellation& tess, const ExtractionParams& params);

/// Fills boundary_tiles, surface_points, exterior_points, vertex_map, adjacency.
void classify_points(const PointConfig& P, const Tessellation& tess, TileComplex& complex);

bool check_admissible(const TileComplex& complex, double c0, int N, int d);

/// Exhaustive check of conditions (i)-(iv) on a finished complex; empty string when valid.
std::string verify_conditions(const TileComplex& complex, const PointConfig& P, const Tessellation& tess,
                              const ExtractionParams& params);

/// Positions of a tile's corners in the frame of `anchor` (minimal image of the tile anchor).
Mat tile_corners_near(const CandidateTile& t, const Vec& anchor, const TorusDomain& dom);

/// Full pipeline: enumerate + extract.
TileComplex extract(const PointConfig& P, const Tessellation& tess, const ExtractionParams& params);

/// |dP| >= |P| - sum_i gamma_i |T^i| >= 0 (exact up to 1e-9 rounding of the gamma sum).
bool boundary_inequality(const TileComplex& complex, const PointConfig& P, const TessellationConstants& consts);

/// Cardinalities entering the counting estimates for one extracted configuration.
struct CountingSample {
  int N = 0;
  int d = 2;
  int points = 0;
  int covered_points = 0;   ///< |P \ P_e|
  int surface_points = 0;
  int boundary_tiles = 0;   ///< |dT|
  std::vector<int> tiles;   ///< |T^i| per type
  std::vector<int> standard_tiles;  ///< |U^i| per type
  double gamma_sum = 0.0;   ///< sum_i gamma_i |T^i|
};

CountingSample counting_sample(const TileComplex& complex, const PointConfig& P, const Tessellation& tess,
                               const TessellationConstants& consts, int N);

struct CountingFit {
  double c9 = 0.0;   ///< max over samples and types of ||T^i| - |U^i|| / |dT|
  double c12 = 0.0;  ///< min |P \ P_e| / N^d
  double c13 = 0.0;  ///< max |P \ P_e| / N^d
  int boundary_violations = 0;
  int samples = 0;
};

CountingFit fit_counting(const std::vector<CountingSample>& samples);

/// Maintains T_psbl under single-point edits.
class CandidateSet {
 public:
  CandidateSet() = default;
  CandidateSet(const PointConfig& P, const Tessellation& tess, double eps);

  const std::vector<CandidateTile>& tiles() const { return tiles_; }

  /// Call after P.points[j] changed (or was appended).
  void refresh_point(const PointConfig& P, int j);
  /// Call after P removed index j by moving the last point into slot j; `old_last` is the previous last index.
  void swap_remove(const PointConfig& P, int j, int old_last);

  /// Starts recording edits; rollback() restores the set (including uids) to this point.
  void begin_edit();
  void rollback();

  /// Pairwise verdicts between candidates, keyed by uid pair.
  std::unordered_map<std::uint64_t, std::uint8_t>& verdicts() const { return verdicts_; }

 private:
  void drop_point(int j);
  void sort_tiles();
  void stamp(std::vector<CandidateTile>& tiles);

  const Tessellation* tess_ = nullptr;
  double eps_ = 0.0;
  std::vector<CandidateTile> tiles_;
  std::uint64_t next_uid_ = 1;
  bool editing_ = false;
  std::vector<CandidateTile> undo_removed_;
  std::vector<std::uint64_t> undo_added_;
  mutable std::unordered_map<std::uint64_t, std::uint8_t> verdicts_;
};

/// Extraction on a maintained candidate set, reusing cached pair verdicts.
TileComplex extract_crystal(const CandidateSet& candidates, const PointConfig& P, const Tessellation& tess,
                            const ExtractionParams& params);

}  // namespace crystal
