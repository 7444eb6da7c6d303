#pragma once

#include "crystal/geometry.hpp"

namespace crystal {

// Simplices are d x (d+1) matrices of vertex columns; faces are d x k with k <= d+1.

/// Euclidean distance from x to the convex hull of the columns of S.
double point_hull_distance(const Vec& x, const Mat& S);

/// Distance between two d-simplices (0 when they intersect), d in {2,3}.
double simplex_distance(const Mat& A, const Mat& B);

/// True when the two d-simplices share interior volume (touching counts as disjoint).
bool simplices_overlap(const Mat& A, const Mat& B, double tol);

/// Area of the convex hull of 2D points (columns).
double convex_hull_area(const Mat& pts);

}  // namespace crystal
