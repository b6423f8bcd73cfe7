#pragma once

#include <complex>
#include <functional>
#include <stdexcept>
#include <vector>

#include "kickpend/core.hpp"

namespace kickpend {

/// Action-angle coordinates on the limit-cycle band: I is the cycle label
/// p1 in (0,1), psi the phase in [0, 2pi) with psi = 0 at (-theta_star, p1).
struct ActionAngle {
  double I = 0.0;
  double psi = 0.0;
};

struct QuadratureFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Arc time Gamma[theta, p1]: time for the rightward branch of cycle p1 to
/// travel from -theta_star to theta. Adaptive quadrature to 1e-10 relative
/// accuracy (singular-endpoint substitution below p1 = 0.02, where the
/// radicand bottoms out near 2*(mu1*p1/mu2)^2/2). Requires p1 in (0,1] and
/// theta in [-theta_star, theta_star].
double gamma_integral(double theta, double p1, const Params& par);

/// Cycle period P[p1] = Gamma[theta*, p1] + Gamma[theta*, 1-p1], p1 in (0,1).
double period(double p1, const Params& par);

/// Phase of the kick within the cycle: 2*pi*Gamma[theta*, p1]/P[p1].
double kick_phase(double p1, const Params& par);

/// Phase in [0, 2pi) of an attracting-band state. The rightward arc (p >= 0)
/// reads Gamma[theta, p1] directly; the leftward arc adds the elapsed kick
/// time, Gamma[theta*, p1] + Gamma[-theta, 1-p1], which is continuous at the
/// kick and wraps to 2pi at the cycle closure. Throws OutsideA2 off the band
/// and std::domain_error on the boundary cycles p1 = 0, 1.
double phase(const State& s, const Params& par);

ActionAngle to_action_angle(const State& s, const Params& par);

/// Inverse chart: monotone root-find of theta from the arc time, then the
/// momentum off the energy level. psi is reduced mod 2pi.
State from_action_angle(const ActionAngle& aa, const Params& par);

/// Rigid rotation: (I, psi + Omega[I] t) with Omega[I] = 2pi/P[I].
ActionAngle flow_action_angle(const ActionAngle& aa, double t, const Params& par);

/// One cycle's truncated Fourier data: g has 2J+1 entries for j = -J..J,
/// normalized so the observable along the cycle is approximately
/// sum_j g[j+J] e^{i j psi}.
struct FourierRow {
  double I = 0.0;
  double P = 0.0;
  double Omega = 0.0;
  std::vector<std::complex<double>> g;

  int J() const { return (int(g.size()) - 1) / 2; }
  std::complex<double> coeff(int j) const { return g[std::size_t(j + J())]; }
};

struct FourierTable {
  std::vector<FourierRow> rows;
};

/// Coefficients of `obs` along cycle I from M equispaced phase samples,
/// truncated at |j| <= J. Requires M >= 2J + 2.
FourierRow fourier_coefficients(const std::function<std::complex<double>(const State&)>& obs,
                                double I, int J, int M, const Params& par);

/// Spectral Koopman evolution sum_j g_j e^{i j Omega t} e^{i j psi}.
std::complex<double> spectral_evolve(const FourierRow& row, double psi, double t);

/// Table lookup variant; I must match a row to within 1e-12.
std::complex<double> spectral_evolve(const FourierTable& table, double I, double psi, double t);

}  // namespace kickpend
