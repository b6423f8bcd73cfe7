#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace kickpend {

/// Per-cell outcome of a grid computation. Producers use the subset that
/// makes sense for them (basin grids: Ok/Unsettled/Error, averaging sweeps:
/// Converged/Truncated/Diverged/Escaped/Error).
enum class CellStatus : unsigned char {
  Ok,
  Converged,
  Truncated,
  Diverged,
  Escaped,
  Unsettled,
  Error,
};

inline const char* to_string(CellStatus s) {
  switch (s) {
    case CellStatus::Ok: return "ok";
    case CellStatus::Converged: return "converged";
    case CellStatus::Truncated: return "truncated";
    case CellStatus::Diverged: return "diverged";
    case CellStatus::Escaped: return "escaped";
    case CellStatus::Unsettled: return "unsettled";
    case CellStatus::Error: return "error";
  }
  return "error";
}

struct Window {
  double theta_min = 0.0, theta_max = 0.0;
  double p_min = 0.0, p_max = 0.0;
};

struct Resolution {
  std::size_t n_theta = 0, n_p = 0;
};

/// Scalar field sampled on a rectangular (theta, p) grid, row-major over
/// theta. Axes are inclusive linspaces of the window. `meta` is an ordered
/// key/value list so serialized output is deterministic.
struct GridField {
  std::vector<double> theta_axis;
  std::vector<double> p_axis;
  std::vector<std::complex<double>> values;
  std::vector<CellStatus> status;
  std::vector<std::pair<std::string, std::string>> meta;

  std::size_t n_theta() const { return theta_axis.size(); }
  std::size_t n_p() const { return p_axis.size(); }
  std::size_t index(std::size_t i, std::size_t j) const { return i * p_axis.size() + j; }
  std::complex<double>& at(std::size_t i, std::size_t j) { return values[index(i, j)]; }
  const std::complex<double>& at(std::size_t i, std::size_t j) const { return values[index(i, j)]; }
  CellStatus& status_at(std::size_t i, std::size_t j) { return status[index(i, j)]; }
  CellStatus status_at(std::size_t i, std::size_t j) const { return status[index(i, j)]; }
};

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n == 0) throw std::invalid_argument("linspace: n must be >= 1");
  std::vector<double> v(n);
  if (n == 1) {
    v[0] = lo;
    return v;
  }
  for (std::size_t i = 0; i < n; ++i) v[i] = lo + (hi - lo) * (double(i) / double(n - 1));
  return v;
}

/// Empty field over the window with all cells zero / Ok.
inline GridField make_grid(const Window& window, const Resolution& res) {
  if (window.theta_max < window.theta_min || window.p_max < window.p_min)
    throw std::invalid_argument("make_grid: window bounds out of order");
  GridField f;
  f.theta_axis = linspace(window.theta_min, window.theta_max, res.n_theta);
  f.p_axis = linspace(window.p_min, window.p_max, res.n_p);
  f.values.assign(res.n_theta * res.n_p, {0.0, 0.0});
  f.status.assign(res.n_theta * res.n_p, CellStatus::Ok);
  return f;
}

}  // namespace kickpend
