#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace lrlab {

using cxd = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Error taxonomy. Everything thrown by the library derives from lrlab::error
// so callers can catch one base type; the concrete types mirror the distinct
// failure modes (bad geometry, dense-budget overflow, integrator failure, ...).
// ---------------------------------------------------------------------------

struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct range_error : error {
  using error::error;
};
struct shape_error : error {
  using error::error;
};
struct budget_error : error {
  using error::error;
};
struct parameter_error : error {
  using error::error;
};
struct geometry_error : error {
  using error::error;
};
struct numeric_error : error {
  using error::error;
};
struct fit_error : error {
  using error::error;
};
struct normalization_error : error {
  using error::error;
};
struct validation_error : error {
  validation_error(const std::string& field, const std::string& what)
      : error(field + ": " + what), field_path(field) {}
  std::string field_path;
};
struct convergence_error : error {
  convergence_error(const std::string& what, double diff)
      : error(what), last_diff(diff) {}
  double last_diff;  // distance between the last two iterates
};

// ---------------------------------------------------------------------------
// Lattice geometry
// ---------------------------------------------------------------------------

/// One-dimensional chain of `num_sites` sites with local dimension
/// `local_dim`. Site indices run 0..num_sites-1. The total Hilbert space is
/// dense, so construction enforces local_dim^num_sites <= max_dim.
struct Lattice {
  int num_sites = 1;
  int local_dim = 2;

  static constexpr long default_max_dim = 1L << 14;

  Lattice() = default;
  Lattice(int n, int r = 2, long max_dim = default_max_dim)
      : num_sites(n), local_dim(r) {
    if (n < 1) throw parameter_error("lattice needs at least one site");
    if (r < 2) throw parameter_error("local dimension must be >= 2");
    long d = 1;
    for (int i = 0; i < n; ++i) {
      d *= r;
      if (d > max_dim)
        throw budget_error("Hilbert dimension " + std::to_string(r) + "^" +
                           std::to_string(n) + " exceeds dense budget " +
                           std::to_string(max_dim));
    }
  }

  long dim() const {
    long d = 1;
    for (int i = 0; i < num_sites; ++i) d *= local_dim;
    return d;
  }

  /// local_dim^k for 0 <= k <= num_sites.
  long pow_dim(int k) const {
    long d = 1;
    for (int i = 0; i < k; ++i) d *= local_dim;
    return d;
  }

  bool operator==(const Lattice& o) const {
    return num_sites == o.num_sites && local_dim == o.local_dim;
  }
};

/// Inclusive interval of sites [lo, hi].
struct SiteInterval {
  int lo = 0;
  int hi = 0;

  SiteInterval() = default;
  SiteInterval(int l, int h) : lo(l), hi(h) {
    if (l > h) throw range_error("interval lo > hi");
    if (l < 0) throw range_error("interval lo < 0");
  }

  int size() const { return hi - lo + 1; }
  bool contains(int site) const { return site >= lo && site <= hi; }
  bool contains(const SiteInterval& o) const { return o.lo >= lo && o.hi <= hi; }
  bool overlaps(const SiteInterval& o) const { return lo <= o.hi && o.lo <= hi; }
  bool within(const Lattice& lat) const { return lo >= 0 && hi <= lat.num_sites - 1; }

  bool operator==(const SiteInterval& o) const { return lo == o.lo && hi == o.hi; }
};

/// Minimal site-pair distance between two intervals, in lattice units.
/// Overlapping or touching supports have distance 0.
inline int distance(const SiteInterval& a, const SiteInterval& b) {
  if (a.overlaps(b)) return 0;
  return a.lo > b.hi ? a.lo - b.hi : b.lo - a.hi;
}

}  // namespace lrlab
