#pragma once

#include "crystal/geometry.hpp"

#include <cmath>
#include <vector>

namespace crystal {

/// Cell list on a torus. `for_near` visits a superset of all ids within `radius` of a position.
class TorusBins {
 public:
  TorusBins(const TorusDomain& dom, double radius) : dom_(dom), inv_(dom.periods().inverse()) {
    const int d = dom.d;
    n_.assign(d, 1);
    brute_ = false;
    for (int k = 0; k < d; ++k) {
      double height = 1.0 / inv_.row(k).norm();
      n_[k] = int(std::floor(height / radius));
      if (n_[k] < 3) brute_ = true;
    }
    if (!brute_) {
      size_t total = 1;
      for (int k = 0; k < d; ++k) total *= size_t(n_[k]);
      if (total > 4000000) brute_ = true;
      else bins_.resize(total);
    }
  }

  void insert(int id, const Vec& pos) {
    if (brute_) {
      all_.push_back(id);
      return;
    }
    bins_[bin_of(pos)].push_back(id);
  }

  template <typename F>
  void for_near(const Vec& pos, F&& f) const {
    if (brute_) {
      for (int id : all_) f(id);
      return;
    }
    const int d = dom_.d;
    int c[8];
    coords(pos, c);
    int total = 1;
    for (int k = 0; k < d; ++k) total *= 3;
    for (int code = 0; code < total; ++code) {
      int cc = code;
      size_t idx = 0;
      size_t stride = 1;
      for (int k = 0; k < d; ++k) {
        int o = cc % 3 - 1;
        cc /= 3;
        int v = ((c[k] + o) % n_[k] + n_[k]) % n_[k];
        idx += size_t(v) * stride;
        stride *= size_t(n_[k]);
      }
      for (int id : bins_[idx]) f(id);
    }
  }

 private:
  void coords(const Vec& pos, int* c) const {
    Vec f = inv_ * pos;
    for (int k = 0; k < dom_.d; ++k) {
      double u = f(k) - std::floor(f(k));
      int v = int(std::floor(u * n_[k]));
      c[k] = std::min(std::max(v, 0), n_[k] - 1);
    }
  }
  size_t bin_of(const Vec& pos) const {
    int c[8];
    coords(pos, c);
    size_t idx = 0, stride = 1;
    for (int k = 0; k < dom_.d; ++k) {
      idx += size_t(c[k]) * stride;
      stride *= size_t(n_[k]);
    }
    return idx;
  }

  TorusDomain dom_;
  Mat inv_;
  std::vector<int> n_;
  bool brute_ = true;
  std::vector<std::vector<int>> bins_;
  std::vector<int> all_;
};

}  // namespace crystal
