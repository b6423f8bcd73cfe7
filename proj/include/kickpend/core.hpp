#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace kickpend {

inline constexpr double pi = 3.141592653589793238462643383279502884;

/// Canonical circle reduction to (-pi, pi].
double wrap(double theta);

/// System constants. mu1 is the kick strength (the momentum jump at the
/// guards is exactly +-1 in normalized units), mu2 the natural frequency
/// sqrt(g/l), theta_star the guard angle, k the viscous damping coefficient.
struct Params {
  double mu1 = 1.0;
  double mu2 = 1.0;
  double theta_star = pi / 3.0;
  double k = 0.0;

  void validate() const;  // throws std::invalid_argument on bad values
};

/// Point on the cylinder. theta is kept unwrapped on R during integration so
/// rotating orbits cross the guard copies {+-theta* + 2 pi n} in one chart;
/// observables consume wrap(theta).
struct State {
  double theta = 0.0;
  double p = 0.0;
};

struct KickEvent {
  double t = 0.0;
  int side = 0;  // +1: guard at +theta*, -1: guard at -theta*
  State pre;
  State post;
};

struct Trajectory {
  std::vector<double> t;
  std::vector<State> y;
  std::vector<KickEvent> events;
};

struct IntegratorOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-10;
  double max_step = 10.0;
  double event_time_tol = 1e-12;
  double grazing_p_tol = 1e-10;
  double max_time = 500.0;
  std::int64_t max_events = 100000;

  void validate() const;
};

struct StepFailure : std::runtime_error {
  explicit StepFailure(const std::string& what) : std::runtime_error(what) {}
};

struct MaxEventsExceeded : std::runtime_error {
  explicit MaxEventsExceeded(const std::string& what) : std::runtime_error(what) {}
};

double hamiltonian(const State& s, const Params& par);

struct Deriv {
  double dtheta;
  double dp;
};
Deriv vector_field(const State& s, const Params& par);

/// Reset map at the guard side*theta_star. Returns the post-kick state, or
/// nullopt when the crossing grazes (|p| <= grazing_p_tol) or runs against
/// the guard direction; such crossings pass through unkicked.
std::optional<State> guard_and_reset(const State& pre, int side, const Params& par,
                                     double grazing_p_tol = 1e-10);

/// One accepted integrator step with its dense-output polynomial. eval() is
/// valid on [t0, t1]; h_poly is the interpolation scale of the underlying
/// step, which may extend past t1 when the step was truncated at an event.
struct DenseSegment {
  double t0 = 0.0;
  double t1 = 0.0;
  double h_poly = 0.0;
  double r_theta[5] = {0, 0, 0, 0, 0};
  double r_p[5] = {0, 0, 0, 0, 0};

  double theta_at(double t) const;
  double p_at(double t) const;
  State eval(double t) const;
};

/// Streaming consumer for the low-level driver. Segments and events arrive in
/// time order; return false from either hook to stop integration early.
class StepSink {
 public:
  virtual ~StepSink() = default;
  virtual bool on_segment(const DenseSegment&) { return true; }
  virtual bool on_event(const KickEvent&) { return true; }
};

/// Kick applies the reset map at directional guard crossings; Observe reports
/// the same crossings (post == pre) but lets the trajectory pass through.
enum class GuardMode { Kick, Observe };

/// Integrates the hybrid system from `initial` over [t0, t0 + duration] and
/// returns the final state. Crossings of the guard surfaces are localized on
/// the dense output to within opts.event_time_tol. Throws StepFailure if the
/// error controller stalls and MaxEventsExceeded past opts.max_events kicks.
State integrate(const State& initial, double t0, double duration, const Params& par,
                const IntegratorOptions& opts, StepSink& sink,
                GuardMode mode = GuardMode::Kick);

/// Convenience wrapper over integrate(): records one sample per accepted step
/// plus the full event log.
Trajectory flow(const State& initial, double duration, const Params& par,
                const IntegratorOptions& opts);

struct Crossing {
  State pre;  // state immediately before the reset (on the guard)
  double t = 0.0;
  int side = 0;
};

/// State just before the first directional guard crossing, or nullopt if none
/// occurs before opts.max_time. In Observe mode nothing is reset; the crossing
/// itself is still what is reported.
std::optional<Crossing> first_crossing(const State& initial, const Params& par,
                                       const IntegratorOptions& opts,
                                       GuardMode mode = GuardMode::Kick);

}  // namespace kickpend
