#pragma once

#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "kickpend/core.hpp"

namespace kickpend {

/// One measured half-swing: energy entering at a guard vs energy arriving at
/// the opposite guard (pre-kick). Strictly dissipative for k > 0.
struct EnergySample {
  double H_in = 0.0;
  double H_out = 0.0;
  double k = 0.0;
};

/// Linear retention model d(H) = r H. delta = 1 - r. fit_residual is the
/// worst relative deviation of the samples from the fitted line; callers that
/// rely on strict dissipation must check delta > 0 (an undamped fit returns
/// r = 1 with delta = 0).
struct DissipationModel {
  double r = 1.0;
  double delta = 0.0;
  double fit_residual = 0.0;
};

struct NoCrossing : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InsufficientSamples : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NoFixedPoint : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Post-kick energy as a function of the pre-kick energy at a guard:
/// f(H) = H - (mu1/mu2)^2 p(H) + (1/2)(mu1/mu2)^2 with
/// p(H) = (mu2/mu1) sqrt(2 (H + cos theta_star - 1)). An involution on
/// (H-, H+). Throws std::domain_error below the grazing energy.
double kick_energy_f(double H, const Params& par);

/// Momentum magnitude on the guard at energy H (the p(H) above).
double guard_momentum(double H, const Params& par);

/// Places the pendulum at (-theta_star, p(H)) and simulates one traverse with
/// the guards inert, returning the energy on arrival at +theta_star. Throws
/// NoCrossing when damping drops the swing into the inner region first.
EnergySample measure_dissipation(double H, const Params& par, const IntegratorOptions& opts);

/// measure_dissipation over a batch of energies; identical results for any
/// worker count. A NoCrossing sample is skipped (not an error for a batch).
std::vector<EnergySample> collect_dissipation_samples(const std::vector<double>& H_values,
                                                      const Params& par,
                                                      const IntegratorOptions& opts,
                                                      unsigned workers = 1);

/// Least-squares slope of H_out vs H_in through the origin. Requires at
/// least three samples spanning at least half of [H-, H+].
DissipationModel fit_retention(const std::vector<EnergySample>& samples, const Params& par);

/// The damped half-swing return map u(H) = f(r H) on [H0, H+], H0 = H-/r.
/// Below H0 the trajectory enters the inner region and never returns:
/// std::domain_error.
double energy_map_u(double H, const DissipationModel& model, const Params& par);

/// Analytic derivative u'(H) = r (1 - 1/p(r H)).
double energy_map_u_prime(double H, const DissipationModel& model, const Params& par);

/// Solves u(H) = H on [H_fp(0), H+] by bracketed root-finding (1e-12 in H)
/// and returns the fixed point with u' there. delta = 0 lands exactly on the
/// neutral fixed point of f with slope -1; small delta > 0 shifts it right
/// and makes it strictly unstable.
std::pair<double, double> fixed_point(const DissipationModel& model, const Params& par);

/// u'(u(H)) u'(H) — equals 1 exactly at delta = 0 and stays >= 1 for small
/// delta, which is what rules out period-2 cycles.
double second_iterate_derivative(double H, const DissipationModel& model, const Params& par);

/// Largest H in the band whose image still lies in the band, i.e. the root
/// of u(H) = H0 (u is decreasing). Second-iterate scans run on [H0, this].
double second_iterate_domain_end(const DissipationModel& model, const Params& par);

/// Smallest n with u^n(H0_val) outside [H0, H+], or nullopt (never escapes
/// within the budget). The fixed point is unstable, so any finite-precision
/// H_fp escapes eventually; n_max = 1000 keeps points within ~1e-9 of it
/// inside while everything farther leaves in a few hundred steps.
std::optional<int> escape_count(double H0_val, const DissipationModel& model, const Params& par,
                                int n_max = 1000);

}  // namespace kickpend
