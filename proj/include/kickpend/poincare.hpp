#pragma once

#include <stdexcept>
#include <vector>

#include "kickpend/core.hpp"
#include "kickpend/gridfield.hpp"

namespace kickpend {

/// Momentum at a kick, or the absorbing boundary symbol (the homoclinic
/// state): once gamma, always gamma.
struct PoincareState {
  double p = 0.0;
  bool is_gamma = false;
};

inline PoincareState gamma_state() { return {0.0, true}; }

/// Identifies where a trajectory ends up: the period-2 cycle {p1, p1 - 1}
/// with p1 in (0,1), the p = 0 fixed point, or the homoclinic boundary.
struct CycleLabel {
  enum class Kind { Cycle, FixedPoint, Homoclinic };
  Kind kind = Kind::FixedPoint;
  double p1 = 0.0;  // meaningful only when kind == Cycle
};

struct OutsideA2 : std::domain_error {
  using std::domain_error::domain_error;
};

struct Unsettled : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Momentum of the orbit homoclinic to the grazing state.
double p_critical(const Params& par);

/// Inputs within this distance of +-(p_critical + 1) are treated as exactly
/// on the boundary and absorbed into gamma.
inline constexpr double boundary_tol = 1e-12;

/// One application of the return map on pre-kick momenta.
PoincareState poincare_T(PoincareState s, const Params& par);

/// [p0, T(p0), ..., T^n(p0)], length n + 1.
std::vector<PoincareState> iterate_T(PoincareState p0, int n, const Params& par);

struct SettleResult {
  enum class Kind { Settled, Gamma, Unsettled };
  Kind kind = Kind::Unsettled;
  int n = 0;  // first index inside [-1,1], or the gamma-absorption index
};

/// Smallest n with T^n(p0) in [-1,1] (descent is one unit of |p| per step).
SettleResult settle_index(double p0, const Params& par, int n_max = 1000);

enum class Region { A1, A2, KickedOuter };

/// Energy of the grazing orbit H(theta_star, 0); lower edge of the attracting band.
double h_minus(const Params& par);
/// Energy H(theta_star, 1); upper edge of the attracting band.
double h_plus(const Params& par);

/// A1: below the grazing energy (never kicked). A2: energy in [H-, H+] with
/// |theta| <= theta_star. Everything else: KickedOuter.
Region region_of(const State& s, const Params& par);

/// Cycle coordinate p1 read off the energy level through `s`. Requires s in A2.
double limit_cycle_label(const State& s, const Params& par);

/// Simulates to the first kick (unless `s` already sits on a guard), then
/// drives the closed-form map to settlement. Throws std::domain_error for
/// states below the grazing energy, Unsettled if nothing settles.
CycleLabel classify_basin(const State& s, const Params& par, const IntegratorOptions& opts);

/// Basin-membership field. Cell values carry the settled label in the real
/// part (p1, -1 for the fixed point, -2 for homoclinic, NaN when status is
/// not Ok) and the match indicator against target_p1 in the imaginary part.
/// Statuses: Ok, Unsettled, Error.
GridField basin_grid(const Window& window, const Resolution& res, double target_p1, double tol,
                     const Params& par, const IntegratorOptions& opts, unsigned workers = 1);

}  // namespace kickpend
