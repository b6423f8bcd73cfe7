#pragma once

#include <array>
#include <complex>
#include <functional>
#include <stdexcept>
#include <utility>

#include "kickpend/core.hpp"
#include "kickpend/gridfield.hpp"

namespace kickpend {

enum class Observable { Hamiltonian, SignedHamiltonian, G1, G2 };

using ObservableFn = std::function<std::complex<double>(const State&)>;

struct Overdamped : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OriginSingular : std::domain_error {
  using std::domain_error::domain_error;
};

struct PhaseUndefined : std::domain_error {
  using std::domain_error::domain_error;
};

/// Spectrum and eigenvectors of the pendulum linearized at the origin,
/// theta' = mu1 p, p' = -(mu2^2/mu1) theta - k p. lambda = -sigma + i eta
/// with sigma = k/2, eta = sqrt(mu2^2 - k^2/4). Eigenvectors are unit length
/// with real positive first component. k = 0 is allowed (pure rotation).
struct LinearizedEigendata {
  double sigma = 0.0;
  double eta = 0.0;
  std::complex<double> lambda;
  std::array<std::complex<double>, 2> v;
  std::array<std::complex<double>, 2> v_bar;
};

/// Throws Overdamped when k >= 2 mu2 (no oscillatory pair).
LinearizedEigendata linearized_eigendata(const Params& par);

/// Coefficient z of the state along v in (theta, p) = z v + conj(z) v_bar.
std::complex<double> eigencoordinate(const State& s, const LinearizedEigendata& eig);

/// |z| — degree-1 homogeneous, vanishes only at the origin.
double observable_g1(const State& s, const LinearizedEigendata& eig);

/// z/|z| — unit modulus; throws OriginSingular at the origin.
std::complex<double> observable_g2(const State& s, const LinearizedEigendata& eig);

/// The enumerated observables as callables (G1/G2 capture the linearized
/// eigendata for the given damping).
ObservableFn make_observable(Observable which, const Params& par);

struct AverageResult {
  std::complex<double> value{0.0, 0.0};
  CellStatus status = CellStatus::Truncated;
  double T_used = 0.0;
};

/// Birkhoff average (1/T) int_0^T g(S^tau x0) dtau accumulated on the dense
/// output (Gauss-Legendre per step, split at kicks and checkpoints).
/// Converged when the value moved < 1e-5 across each of the last two
/// doublings of the horizon. With stop_when_converged the integration halts
/// at the first checkpoint where that holds (grid sweeps use this; the
/// returned T_used records the actual horizon). Integrator failures come
/// back as status Error, kick-budget overflow as Diverged.
///
/// The doubling test is a heuristic. When the running average oscillates
/// through its limit instead of settling (a zero-mean observable on a
/// periodic orbit, e.g. the signed Hamiltonian on a libration), two
/// checkpoint deltas can align under the tolerance by coincidence, freezing
/// a value that still carries the O(1/T_used) partial-period remainder.
/// Such averages are better read at a fixed horizon (stop_when_converged =
/// false) sized so the remainder bound, |g|_max * period / T, meets the
/// accuracy needed.
AverageResult time_average(const ObservableFn& g, const State& x0, double T, const Params& par,
                           const IntegratorOptions& opts, bool stop_when_converged = false);

/// Laplace average (1/T) int_0^T e^{-lambda tau} g(S^tau x0) dtau; reduces to
/// time_average at lambda = 0. Diverged when the running integral magnitude
/// passes 1e12.
AverageResult laplace_average(const ObservableFn& g, std::complex<double> lambda,
                              const State& x0, double T, const Params& par,
                              const IntegratorOptions& opts, bool stop_when_converged = false);

/// Time averages of the signed Hamiltonian on the mirror-image cycles
/// {p1, p1-1} and {1-p1, -p1}, taken over exact multiples of the common
/// period so the cycle means are hit to integrator accuracy.
std::pair<double, double> signed_average_separates(double p1, const Params& par,
                                                   const IntegratorOptions& opts);

struct DampedEigen {
  double modulus = 0.0;
  double phase = 0.0;  // argument of the averaged unit observable, g2 gauge at t = 0
  CellStatus status = CellStatus::Truncated;
};

/// Principal Koopman eigenfunction of the damped flow at lambda = -sigma
/// + i eta, computed in one pass: modulus from the e^{+sigma tau}-weighted
/// average of g1, phase from the e^{-i eta tau}-weighted average of g2
/// (the weight must counter-rotate g2's forward rotation, or the average
/// cancels). Each is refined by one Richardson step across the final
/// doubling, which removes the O(1/T) Cesaro tail; convergence is relative
/// 1e-3 on the refined values. Throws PhaseUndefined at the origin.
///
/// The growing modulus weight amplifies the integrator's absolute error
/// floor: once the orbit has decayed to amplitude ~1e3 * opts.abs_tol the
/// weighted integrand is amplified noise. Horizons past
/// ln(amplitude / (1e3 abs_tol)) / sigma need a tighter abs_tol or the late
/// checkpoints degrade toward Truncated/Diverged.
DampedEigen damped_eigenfunction(const State& x0, const Params& par,
                                 const IntegratorOptions& opts, double T_max = 500.0,
                                 bool stop_when_converged = false);

enum class SweepKind { TimeAverage, Laplace, DampedEigen, Basin };

struct SweepSpec {
  SweepKind kind = SweepKind::TimeAverage;
  Observable observable = Observable::Hamiltonian;  // TimeAverage / Laplace
  std::complex<double> lambda{0.0, 0.0};            // Laplace
  double T_max = 0.0;                               // 0 picks 2000 (averages) / 500 (damped)
  double target_p1 = 0.7;                           // Basin
  double basin_tol = 1e-2;                          // Basin
  // Stop each cell at its first converged checkpoint, or run every cell to
  // the full horizon. Fixed-horizon values suit observables whose running
  // average oscillates through its limit (see time_average); ignored by
  // basin sweeps.
  bool stop_early = true;
};

/// Per-cell evaluation of the chosen operation over the window; results are
/// identical for any worker count. Cell failures become status flags, kick
/// budget overflow becomes Diverged (isostable blow-up is a feature of the
/// dynamics near the unstable periodic orbit, not an error).
GridField grid_sweep(const SweepSpec& spec, const Window& window, const Resolution& res,
                     const Params& par, const IntegratorOptions& opts, unsigned workers = 1);

}  // namespace kickpend
