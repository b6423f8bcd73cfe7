#include "kickpend/koopman.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "kickpend/action_angle.hpp"
#include "kickpend/parallel.hpp"
#include "kickpend/poincare.hpp"

namespace kickpend {

namespace {

constexpr double divergence_magnitude = 1e12;

double nan_d() { return std::numeric_limits<double>::quiet_NaN(); }

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// exp(-lambda tau) with the pure cases kept exact-real / unit-modulus.
std::complex<double> weight_at(std::complex<double> lambda, double tau) {
  if (lambda.imag() == 0.0) {
    if (lambda.real() == 0.0) return {1.0, 0.0};
    return {std::exp(-lambda.real() * tau), 0.0};
  }
  return std::exp(-lambda * tau);
}

struct Channel {
  ObservableFn g;
  std::complex<double> lambda;
  std::complex<double> integral{0.0, 0.0};
  std::vector<std::complex<double>> raw;   // plain averages at checkpoints
  std::vector<std::complex<double>> val;   // monitored values (Richardson-refined when enabled)
};

// Accumulates (sum of) int e^{-lambda tau} g(S^tau x) dtau over the dense
// output, one 3-point Gauss-Legendre rule per step segment, split at kicks
// (segment boundaries) and at the dyadic checkpoints where running averages
// are recorded for the doubling test.
struct AverageSink final : StepSink {
  std::vector<Channel> channels;
  std::vector<double> checkpoints;
  std::size_t next_cp = 0;
  double tol = 1e-5;
  bool relative = false;
  bool richardson = false;
  bool stop_early = false;
  int required_streak = 2;
  int streak = 0;
  bool converged = false;
  bool diverged = false;
  double t_reached = 0.0;

  void accumulate(const DenseSegment& seg, double a, double b) {
    if (!(b > a)) return;
    static const double node = std::sqrt(0.6);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    const double taus[3] = {mid - half * node, mid, mid + half * node};
    const double ws[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    for (auto& ch : channels) {
      std::complex<double> acc{0.0, 0.0};
      for (int i = 0; i < 3; ++i)
        acc += ws[i] * weight_at(ch.lambda, taus[i]) * ch.g(seg.eval(taus[i]));
      ch.integral += half * acc;
    }
  }

  // Records averages at time t; returns true when integration should stop.
  bool record(double t) {
    bool all_small = true;
    for (auto& ch : channels) {
      const std::complex<double> avg = ch.integral / t;
      std::complex<double> v = avg;
      if (richardson && !ch.raw.empty()) v = 2.0 * avg - ch.raw.back();
      if (ch.val.empty()) {
        all_small = false;
      } else {
        const double delta = std::abs(v - ch.val.back());
        const double scale = relative ? std::max(std::abs(v), 1e-12) : 1.0;
        if (!(delta < tol * scale)) all_small = false;
      }
      ch.raw.push_back(avg);
      ch.val.push_back(v);
    }
    streak = all_small ? streak + 1 : 0;
    if (streak >= required_streak) converged = true;
    t_reached = t;
    return converged && stop_early;
  }

  bool check_magnitude() {
    for (const auto& ch : channels) {
      const double m = std::abs(ch.integral);
      if (!std::isfinite(m) || m > divergence_magnitude) {
        diverged = true;
        return false;
      }
    }
    return true;
  }

  bool on_segment(const DenseSegment& seg) override {
    double a = seg.t0;
    while (next_cp < checkpoints.size() && checkpoints[next_cp] <= seg.t1 + 1e-12) {
      const double c = std::clamp(checkpoints[next_cp], a, seg.t1);
      accumulate(seg, a, c);
      a = c;
      ++next_cp;
      if (record(c)) return false;
      if (!check_magnitude()) return false;
    }
    accumulate(seg, a, seg.t1);
    t_reached = seg.t1;
    return check_magnitude();
  }
};

// Dyadic horizons T/2^m, ..., T/2, T with the shortest at least ~8 time
// units (clamped to a minimum of three entries so the doubling test can run).
std::vector<double> doubling_checkpoints(double T) {
  int m = 2;
  if (T > 32.0) m = std::max(2, static_cast<int>(std::floor(std::log2(T / 8.0))));
  std::vector<double> cps(static_cast<std::size_t>(m) + 1);
  for (int j = 0; j <= m; ++j) cps[static_cast<std::size_t>(j)] = std::ldexp(T, j - m);
  return cps;
}

struct RunOutcome {
  AverageSink sink;
  CellStatus status = CellStatus::Error;
};

RunOutcome run_weighted_average(std::vector<Channel> channels, const State& x0, double T,
                                const Params& par, const IntegratorOptions& opts, double tol,
                                bool relative, bool richardson, bool stop_early,
                                int required_streak) {
  if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("averaging horizon must be positive");
  RunOutcome out;
  out.sink.channels = std::move(channels);
  out.sink.checkpoints = doubling_checkpoints(T);
  out.sink.tol = tol;
  out.sink.relative = relative;
  out.sink.richardson = richardson;
  out.sink.stop_early = stop_early;
  out.sink.required_streak = required_streak;
  try {
    integrate(x0, 0.0, T, par, opts, out.sink, GuardMode::Kick);
  } catch (const MaxEventsExceeded&) {
    out.status = CellStatus::Diverged;
    return out;
  } catch (const StepFailure&) {
    out.status = CellStatus::Error;
    return out;
  }
  if (out.sink.diverged) {
    out.status = CellStatus::Diverged;
    return out;
  }
  // The final checkpoint coincides with the end time; flush it if the last
  // segment ended within rounding of it.
  if (out.sink.next_cp + 1 == out.sink.checkpoints.size() &&
      std::abs(out.sink.checkpoints.back() - out.sink.t_reached) < 1e-9) {
    out.sink.record(out.sink.checkpoints.back());
    ++out.sink.next_cp;
  }
  if (out.sink.channels.front().val.empty()) {
    out.status = CellStatus::Error;  // nothing recorded: cannot happen for T > 0
    return out;
  }
  out.status = out.sink.converged ? CellStatus::Converged : CellStatus::Truncated;
  return out;
}

const char* kind_name(SweepKind k) {
  switch (k) {
    case SweepKind::TimeAverage: return "timeavg";
    case SweepKind::Laplace: return "laplace";
    case SweepKind::DampedEigen: return "damped-eig";
    case SweepKind::Basin: return "basin";
  }
  return "?";
}

const char* observable_name(Observable o) {
  switch (o) {
    case Observable::Hamiltonian: return "hamiltonian";
    case Observable::SignedHamiltonian: return "signed-hamiltonian";
    case Observable::G1: return "g1";
    case Observable::G2: return "g2";
  }
  return "?";
}

void stamp_meta(GridField& f, const SweepSpec& spec, const Resolution& res, const Params& par,
                double T_used) {
  f.meta.emplace_back("kind", kind_name(spec.kind));
  if (spec.kind == SweepKind::TimeAverage || spec.kind == SweepKind::Laplace)
    f.meta.emplace_back("observable", observable_name(spec.observable));
  if (spec.kind == SweepKind::Laplace) {
    f.meta.emplace_back("lambda_re", fmt_double(spec.lambda.real()));
    f.meta.emplace_back("lambda_im", fmt_double(spec.lambda.imag()));
  }
  if (spec.kind == SweepKind::Basin) {
    f.meta.emplace_back("target_p1", fmt_double(spec.target_p1));
    f.meta.emplace_back("tol", fmt_double(spec.basin_tol));
  } else {
    f.meta.emplace_back("T_max", fmt_double(T_used));
    f.meta.emplace_back("stop_early", spec.stop_early ? "true" : "false");
  }
  f.meta.emplace_back("n_theta", std::to_string(res.n_theta));
  f.meta.emplace_back("n_p", std::to_string(res.n_p));
  f.meta.emplace_back("mu1", fmt_double(par.mu1));
  f.meta.emplace_back("mu2", fmt_double(par.mu2));
  f.meta.emplace_back("theta_star", fmt_double(par.theta_star));
  f.meta.emplace_back("k", fmt_double(par.k));
}

}  // namespace

LinearizedEigendata linearized_eigendata(const Params& par) {
  if (!(par.mu1 > 0.0) || !(par.mu2 > 0.0)) throw std::domain_error("mu1, mu2 must be positive");
  if (par.k < 0.0) throw std::domain_error("damping must be nonnegative");
  if (par.k >= 2.0 * par.mu2) throw Overdamped("k >= 2 mu2: the linearization has no oscillatory pair");
  LinearizedEigendata e;
  e.sigma = 0.5 * par.k;
  e.eta = std::sqrt(par.mu2 * par.mu2 - e.sigma * e.sigma);
  e.lambda = {-e.sigma, e.eta};
  const double nrm = std::sqrt(1.0 + (par.mu2 * par.mu2) / (par.mu1 * par.mu1));
  e.v = {std::complex<double>{1.0 / nrm, 0.0}, e.lambda / (par.mu1 * nrm)};
  e.v_bar = {std::conj(e.v[0]), std::conj(e.v[1])};
  return e;
}

std::complex<double> eigencoordinate(const State& s, const LinearizedEigendata& eig) {
  const std::complex<double> det = eig.v[0] * eig.v_bar[1] - eig.v_bar[0] * eig.v[1];
  return (eig.v_bar[1] * s.theta - eig.v_bar[0] * s.p) / det;
}

double observable_g1(const State& s, const LinearizedEigendata& eig) {
  return std::abs(eigencoordinate(s, eig));
}

std::complex<double> observable_g2(const State& s, const LinearizedEigendata& eig) {
  const std::complex<double> z = eigencoordinate(s, eig);
  const double m = std::abs(z);
  if (m == 0.0) throw OriginSingular("g2 has no value at the origin");
  return z / m;
}

ObservableFn make_observable(Observable which, const Params& par) {
  switch (which) {
    case Observable::Hamiltonian:
      return [par](const State& s) { return std::complex<double>(hamiltonian(s, par), 0.0); };
    case Observable::SignedHamiltonian:
      return [par](const State& s) {
        const double sgn = (s.p > 0.0) ? 1.0 : (s.p < 0.0 ? -1.0 : 0.0);
        return std::complex<double>(sgn * hamiltonian(s, par), 0.0);
      };
    case Observable::G1: {
      const LinearizedEigendata eig = linearized_eigendata(par);
      return [eig](const State& s) { return std::complex<double>(observable_g1(s, eig), 0.0); };
    }
    case Observable::G2: {
      const LinearizedEigendata eig = linearized_eigendata(par);
      return [eig](const State& s) { return observable_g2(s, eig); };
    }
  }
  throw std::invalid_argument("unknown observable");
}

AverageResult laplace_average(const ObservableFn& g, std::complex<double> lambda, const State& x0,
                              double T, const Params& par, const IntegratorOptions& opts,
                              bool stop_when_converged) {
  std::vector<Channel> ch(1);
  ch[0].g = g;
  ch[0].lambda = lambda;
  // Plain averages must sit still across two successive doublings; the
  // damped construction below accepts one clean doubling of the refined
  // values (its transient dies like e^{-2 sigma tau}, so the prior doubling
  // still carries it).
  RunOutcome out = run_weighted_average(std::move(ch), x0, T, par, opts, /*tol=*/1e-5,
                                        /*relative=*/false, /*richardson=*/false,
                                        stop_when_converged, /*required_streak=*/2);
  AverageResult r;
  r.status = out.status;
  r.T_used = out.sink.t_reached;
  if (out.status == CellStatus::Converged || out.status == CellStatus::Truncated)
    r.value = out.sink.channels.front().val.back();
  else
    r.value = {nan_d(), nan_d()};
  return r;
}

AverageResult time_average(const ObservableFn& g, const State& x0, double T, const Params& par,
                           const IntegratorOptions& opts, bool stop_when_converged) {
  return laplace_average(g, {0.0, 0.0}, x0, T, par, opts, stop_when_converged);
}

std::pair<double, double> signed_average_separates(double p1, const Params& par,
                                                   const IntegratorOptions& opts) {
  if (!(p1 > 0.0) || !(p1 < 1.0)) throw std::domain_error("p1 must lie in (0, 1)");
  const ObservableFn g = make_observable(Observable::SignedHamiltonian, par);
  const double T = 4.0 * period(p1, par);
  const State a0{-par.theta_star, p1};
  const State b0{-par.theta_star, 1.0 - p1};
  const AverageResult ra = time_average(g, a0, T, par, opts);
  const AverageResult rb = time_average(g, b0, T, par, opts);
  if (ra.status == CellStatus::Error || rb.status == CellStatus::Error ||
      ra.status == CellStatus::Diverged || rb.status == CellStatus::Diverged)
    throw std::runtime_error("cycle average failed to evaluate");
  return {ra.value.real(), rb.value.real()};
}

DampedEigen damped_eigenfunction(const State& x0, const Params& par, const IntegratorOptions& opts,
                                 double T_max, bool stop_when_converged) {
  const LinearizedEigendata eig = linearized_eigendata(par);
  if (x0.theta == 0.0 && x0.p == 0.0)
    throw PhaseUndefined("the eigenfunction phase has no value at the origin");
  std::vector<Channel> ch(2);
  ch[0].g = [eig](const State& s) { return std::complex<double>(observable_g1(s, eig), 0.0); };
  ch[0].lambda = {-eig.sigma, 0.0};  // weight e^{+sigma tau}
  ch[1].g = [eig](const State& s) { return observable_g2(s, eig); };
  ch[1].lambda = {0.0, eig.eta};  // weight e^{-i eta tau}
  RunOutcome out = run_weighted_average(std::move(ch), x0, T_max, par, opts, /*tol=*/1e-3,
                                        /*relative=*/true, /*richardson=*/true,
                                        stop_when_converged, /*required_streak=*/1);
  DampedEigen de;
  de.status = out.status;
  if (out.status != CellStatus::Converged && out.status != CellStatus::Truncated) {
    de.modulus = nan_d();
    de.phase = nan_d();
    return de;
  }
  de.modulus = out.sink.channels[0].val.back().real();
  const std::complex<double> zbar = out.sink.channels[1].val.back();
  if (!(std::abs(zbar) > 1e-250))
    throw PhaseUndefined("phase average collapsed to zero");
  de.phase = std::arg(zbar);
  return de;
}

GridField grid_sweep(const SweepSpec& spec, const Window& window, const Resolution& res,
                     const Params& par, const IntegratorOptions& opts, unsigned workers) {
  if (spec.kind == SweepKind::Basin) {
    GridField f = basin_grid(window, res, spec.target_p1, spec.basin_tol, par, opts, workers);
    stamp_meta(f, spec, res, par, 0.0);
    return f;
  }
  const double T = spec.T_max > 0.0
                       ? spec.T_max
                       : (spec.kind == SweepKind::DampedEigen ? 500.0 : 2000.0);
  GridField f = make_grid(window, res);
  stamp_meta(f, spec, res, par, T);
  const ObservableFn g = (spec.kind == SweepKind::DampedEigen)
                             ? ObservableFn{}
                             : make_observable(spec.observable, par);
  parallel_for(f.values.size(), workers, [&](std::size_t idx) {
    const std::size_t i = idx / static_cast<std::size_t>(res.n_p);
    const std::size_t j = idx % static_cast<std::size_t>(res.n_p);
    const State x{f.theta_axis[i], f.p_axis[j]};
    try {
      if (spec.kind == SweepKind::DampedEigen) {
        const DampedEigen de = damped_eigenfunction(x, par, opts, T, spec.stop_early);
        if (de.status == CellStatus::Converged || de.status == CellStatus::Truncated)
          f.values[idx] = std::polar(de.modulus, de.phase);
        else
          f.values[idx] = {nan_d(), nan_d()};
        f.status[idx] = de.status;
      } else {
        const AverageResult r =
            (spec.kind == SweepKind::Laplace)
                ? laplace_average(g, spec.lambda, x, T, par, opts, spec.stop_early)
                : time_average(g, x, T, par, opts, spec.stop_early);
        f.values[idx] = r.value;
        f.status[idx] = r.status;
      }
    } catch (const PhaseUndefined&) {
      f.values[idx] = {nan_d(), nan_d()};
      f.status[idx] = CellStatus::Error;
    } catch (const OriginSingular&) {
      f.values[idx] = {nan_d(), nan_d()};
      f.status[idx] = CellStatus::Error;
    } catch (const MaxEventsExceeded&) {
      f.values[idx] = {nan_d(), nan_d()};
      f.status[idx] = CellStatus::Diverged;
    } catch (const std::exception&) {
      f.values[idx] = {nan_d(), nan_d()};
      f.status[idx] = CellStatus::Error;
    }
  });
  return f;
}

}  // namespace kickpend
