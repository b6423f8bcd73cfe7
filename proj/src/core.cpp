#include "kickpend/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace kickpend {

double wrap(double theta) {
  double t = std::remainder(theta, 2.0 * pi);
  if (t <= -pi) t += 2.0 * pi;
  return t;
}

void Params::validate() const {
  if (!(mu1 > 0.0) || !std::isfinite(mu1)) throw std::invalid_argument("Params: mu1 must be > 0");
  if (!(mu2 > 0.0) || !std::isfinite(mu2)) throw std::invalid_argument("Params: mu2 must be > 0");
  if (!(theta_star > 0.0) || !(theta_star < pi))
    throw std::invalid_argument("Params: theta_star must lie in (0, pi)");
  if (!(k >= 0.0) || !std::isfinite(k)) throw std::invalid_argument("Params: k must be >= 0");
}

void IntegratorOptions::validate() const {
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw std::invalid_argument("IntegratorOptions: tolerances must be > 0");
  if (!(max_step > 0.0)) throw std::invalid_argument("IntegratorOptions: max_step must be > 0");
  if (!(event_time_tol > 0.0)) throw std::invalid_argument("IntegratorOptions: event_time_tol must be > 0");
  if (!(grazing_p_tol > 0.0)) throw std::invalid_argument("IntegratorOptions: grazing_p_tol must be > 0");
  if (!(max_time > 0.0)) throw std::invalid_argument("IntegratorOptions: max_time must be > 0");
  if (max_events < 1) throw std::invalid_argument("IntegratorOptions: max_events must be >= 1");
}

double hamiltonian(const State& s, const Params& par) {
  double w = par.mu1 * s.p / par.mu2;
  double half = std::sin(0.5 * wrap(s.theta));
  return 0.5 * w * w + 2.0 * half * half;
}

Deriv vector_field(const State& s, const Params& par) {
  return {par.mu1 * s.p, -(par.mu2 * par.mu2 / par.mu1) * std::sin(s.theta) - par.k * s.p};
}

std::optional<State> guard_and_reset(const State& pre, int side, const Params& par,
                                     double grazing_p_tol) {
  (void)par;
  if (side == +1 && pre.p > grazing_p_tol) return State{pre.theta, pre.p - 1.0};
  if (side == -1 && pre.p < -grazing_p_tol) return State{pre.theta, pre.p + 1.0};
  return std::nullopt;
}

double DenseSegment::theta_at(double t) const {
  double s = (t - t0) / h_poly, s1 = 1.0 - s;
  return r_theta[0] + s * (r_theta[1] + s1 * (r_theta[2] + s * (r_theta[3] + s1 * r_theta[4])));
}

double DenseSegment::p_at(double t) const {
  double s = (t - t0) / h_poly, s1 = 1.0 - s;
  return r_p[0] + s * (r_p[1] + s1 * (r_p[2] + s * (r_p[3] + s1 * r_p[4])));
}

State DenseSegment::eval(double t) const { return {theta_at(t), p_at(t)}; }

namespace {

// Dormand-Prince 5(4) with the classic 4th-order continuous extension.
constexpr double A21 = 1.0 / 5;
constexpr double A31 = 3.0 / 40, A32 = 9.0 / 40;
constexpr double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9;
constexpr double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561,
                 A54 = -212.0 / 729;
constexpr double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176,
                 A65 = -5103.0 / 18656;
constexpr double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784,
                 B6 = 11.0 / 84;
constexpr double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200,
                 E6 = 22.0 / 525, E7 = -1.0 / 40;
constexpr double D1 = -12715105075.0 / 11282082432.0, D3 = 87487479700.0 / 32700410799.0,
                 D4 = -10690763975.0 / 1880347072.0, D5 = 701980252875.0 / 199316789632.0,
                 D6 = -1453857185.0 / 822651844.0, D7 = 69997945.0 / 29380423.0;

struct CrossingHit {
  double t;
  double surface;
  int side;
  double p;
};

double step_cap(const State& y, const Params& par) {
  double gap = std::min(2.0 * par.theta_star, 2.0 * pi - 2.0 * par.theta_star);
  return 0.45 * gap / (par.mu1 * (std::abs(y.p) + 0.1));
}

template <typename F>
double refine_root(F&& g, double ta, double tb, double tol) {
  double ga = g(ta);
  double gb = g(tb);
  for (int it = 0; it < 256 && (tb - ta) > tol; ++it) {
    double tm = 0.5 * (ta + tb);
    double ts = tm;
    if (it % 2 == 0 && std::abs(gb - ga) > 0.0) {
      ts = ta - ga * (tb - ta) / (gb - ga);
      if (!(ts > ta + 0.0625 * tol && ts < tb - 0.0625 * tol)) ts = tm;
    }
    double gs = g(ts);
    if (gs == 0.0) return ts;
    if ((ga < 0.0) == (gs < 0.0)) {
      ta = ts;
      ga = gs;
    } else {
      tb = ts;
      gb = gs;
    }
  }
  return 0.5 * (ta + tb);
}

void surface_range(double lo, double hi, const Params& par, std::vector<double>& surfaces,
                   std::vector<int>& sides) {
  surfaces.clear();
  sides.clear();
  for (int side : {+1, -1}) {
    double base = side * par.theta_star;
    auto nlo = static_cast<long>(std::ceil((lo - base) / (2.0 * pi)));
    auto nhi = static_cast<long>(std::floor((hi - base) / (2.0 * pi)));
    for (long n = nlo; n <= nhi; ++n) {
      surfaces.push_back(base + 2.0 * pi * n);
      sides.push_back(side);
    }
  }
}

// All guard crossings inside the segment, in time order, each localized to
// within `tol`. Sign changes of theta - surface between subsamples give the
// transversal crossings; subsamples where p flips sign hide turning points,
// whose excursions past a surface and back are recovered by splitting at the
// momentum zero. A zero at the very first sample is a departure (the step
// starts on a surface right after a reset), never a crossing.
void scan_crossings(const DenseSegment& seg, const Params& par, double tol,
                    std::vector<CrossingHit>& out, std::vector<double>& surf_buf,
                    std::vector<int>& side_buf) {
  out.clear();
  constexpr int N = 8;
  std::array<double, N + 1> ts, th, pp;
  for (int i = 0; i <= N; ++i) {
    ts[i] = seg.t0 + (seg.t1 - seg.t0) * (double(i) / N);
    th[i] = seg.theta_at(ts[i]);
    pp[i] = seg.p_at(ts[i]);
  }

  auto add_hit = [&](double tc, double s, int side) {
    for (const auto& c : out)
      if (std::abs(c.t - tc) <= tol && c.surface == s) return;
    out.push_back({tc, s, side, seg.p_at(tc)});
  };

  double lo = *std::min_element(th.begin(), th.end()) - 1e-3;
  double hi = *std::max_element(th.begin(), th.end()) + 1e-3;
  surface_range(lo, hi, par, surf_buf, side_buf);

  for (std::size_t m = 0; m < surf_buf.size(); ++m) {
    double s = surf_buf[m];
    for (int i = 0; i < N; ++i) {
      double ga = th[i] - s, gb = th[i + 1] - s;
      if (ga == 0.0) {
        if (i > 0 && (th[i - 1] - s) * gb < 0.0) add_hit(ts[i], s, side_buf[m]);
        continue;
      }
      if (gb == 0.0) continue;  // lands exactly on the surface: next pair decides
      if ((ga < 0.0) != (gb < 0.0))
        add_hit(refine_root([&](double t) { return seg.theta_at(t) - s; }, ts[i], ts[i + 1], tol),
                s, side_buf[m]);
    }
  }

  // turning points between subsamples: an excursion past a surface and back
  // leaves no sign change at the subsamples, so split at p = 0 and test the
  // extremal angle against the surfaces on both sides
  for (int i = 0; i < N; ++i) {
    if (!(pp[i] * pp[i + 1] < 0.0)) continue;
    double tz = refine_root([&](double t) { return seg.p_at(t); }, ts[i], ts[i + 1],
                            std::min(tol, 1e-13 * std::max(1.0, std::abs(ts[i]))));
    double text = seg.theta_at(tz);
    surface_range(std::min({th[i], th[i + 1], text}) - 1e-9,
                  std::max({th[i], th[i + 1], text}) + 1e-9, par, surf_buf, side_buf);
    for (std::size_t m = 0; m < surf_buf.size(); ++m) {
      double s = surf_buf[m];
      if ((th[i] - s) * (text - s) < 0.0)
        add_hit(refine_root([&](double t) { return seg.theta_at(t) - s; }, ts[i], tz, tol), s,
                side_buf[m]);
      if ((text - s) * (th[i + 1] - s) < 0.0)
        add_hit(refine_root([&](double t) { return seg.theta_at(t) - s; }, tz, ts[i + 1], tol), s,
                side_buf[m]);
    }
  }

  std::sort(out.begin(), out.end(),
            [](const CrossingHit& a, const CrossingHit& b) { return a.t < b.t; });
}

}  // namespace

State integrate(const State& initial, double t0, double duration, const Params& par,
                const IntegratorOptions& opts, StepSink& sink, GuardMode mode) {
  par.validate();
  opts.validate();
  if (!(duration >= 0.0) || !std::isfinite(duration))
    throw std::invalid_argument("integrate: duration must be finite and >= 0");
  if (duration == 0.0) return initial;

  const double t_end = t0 + duration;
  State y = initial;
  double t = t0;
  Deriv k1 = vector_field(y, par);
  double h = std::min({1e-2, opts.max_step, duration});
  std::int64_t n_events = 0;
  bool after_reject = false;
  std::vector<CrossingHit> hits;
  hits.reserve(4);
  std::vector<double> surf_buf;
  std::vector<int> side_buf;

  while (t < t_end) {
    h = std::min({h, opts.max_step, step_cap(y, par), t_end - t});
    if (h < 1e-14 * std::max(1.0, std::abs(t)))
      throw StepFailure("integrate: step size underflow at t=" + std::to_string(t));

    // stages (FSAL: k1 is f(y))
    Deriv k2 = vector_field({y.theta + h * A21 * k1.dtheta, y.p + h * A21 * k1.dp}, par);
    Deriv k3 = vector_field({y.theta + h * (A31 * k1.dtheta + A32 * k2.dtheta),
                             y.p + h * (A31 * k1.dp + A32 * k2.dp)},
                            par);
    Deriv k4 = vector_field({y.theta + h * (A41 * k1.dtheta + A42 * k2.dtheta + A43 * k3.dtheta),
                             y.p + h * (A41 * k1.dp + A42 * k2.dp + A43 * k3.dp)},
                            par);
    Deriv k5 = vector_field(
        {y.theta + h * (A51 * k1.dtheta + A52 * k2.dtheta + A53 * k3.dtheta + A54 * k4.dtheta),
         y.p + h * (A51 * k1.dp + A52 * k2.dp + A53 * k3.dp + A54 * k4.dp)},
        par);
    Deriv k6 = vector_field({y.theta + h * (A61 * k1.dtheta + A62 * k2.dtheta + A63 * k3.dtheta +
                                            A64 * k4.dtheta + A65 * k5.dtheta),
                             y.p + h * (A61 * k1.dp + A62 * k2.dp + A63 * k3.dp + A64 * k4.dp +
                                        A65 * k5.dp)},
                            par);
    State y1{y.theta + h * (B1 * k1.dtheta + B3 * k3.dtheta + B4 * k4.dtheta + B5 * k5.dtheta +
                            B6 * k6.dtheta),
             y.p + h * (B1 * k1.dp + B3 * k3.dp + B4 * k4.dp + B5 * k5.dp + B6 * k6.dp)};
    Deriv k7 = vector_field(y1, par);

    double eth = h * (E1 * k1.dtheta + E3 * k3.dtheta + E4 * k4.dtheta + E5 * k5.dtheta +
                      E6 * k6.dtheta + E7 * k7.dtheta);
    double ep = h * (E1 * k1.dp + E3 * k3.dp + E4 * k4.dp + E5 * k5.dp + E6 * k6.dp + E7 * k7.dp);
    double sth = opts.abs_tol + opts.rel_tol * std::max(std::abs(y.theta), std::abs(y1.theta));
    double sp = opts.abs_tol + opts.rel_tol * std::max(std::abs(y.p), std::abs(y1.p));
    double err = std::sqrt(0.5 * ((eth / sth) * (eth / sth) + (ep / sp) * (ep / sp)));

    if (err > 1.0) {
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      after_reject = true;
      continue;
    }

    DenseSegment seg;
    seg.t0 = t;
    seg.t1 = t + h;
    seg.h_poly = h;
    {
      double dth = y1.theta - y.theta, dp = y1.p - y.p;
      seg.r_theta[0] = y.theta;
      seg.r_theta[1] = dth;
      seg.r_theta[2] = h * k1.dtheta - dth;
      seg.r_theta[3] = dth - h * k7.dtheta - seg.r_theta[2];
      seg.r_theta[4] = h * (D1 * k1.dtheta + D3 * k3.dtheta + D4 * k4.dtheta + D5 * k5.dtheta +
                            D6 * k6.dtheta + D7 * k7.dtheta);
      seg.r_p[0] = y.p;
      seg.r_p[1] = dp;
      seg.r_p[2] = h * k1.dp - dp;
      seg.r_p[3] = dp - h * k7.dp - seg.r_p[2];
      seg.r_p[4] = h * (D1 * k1.dp + D3 * k3.dp + D4 * k4.dp + D5 * k5.dp + D6 * k6.dp + D7 * k7.dp);
    }

    scan_crossings(seg, par, opts.event_time_tol, hits, surf_buf, side_buf);

    if (mode == GuardMode::Kick) {
      const CrossingHit* trig = nullptr;
      for (const auto& c : hits) {
        if ((c.side == +1 && c.p > opts.grazing_p_tol) ||
            (c.side == -1 && c.p < -opts.grazing_p_tol)) {
          trig = &c;
          break;
        }
      }
      if (trig) {
        KickEvent ev;
        ev.t = trig->t;
        ev.side = trig->side;
        ev.pre = State{trig->surface, seg.p_at(ev.t)};
        auto post = guard_and_reset(ev.pre, ev.side, par, opts.grazing_p_tol);
        if (post) {
          ev.post = *post;
          seg.t1 = ev.t;
          if (seg.t1 > seg.t0 && !sink.on_segment(seg)) return ev.pre;
          if (n_events + 1 > opts.max_events)
            throw MaxEventsExceeded("integrate: more than " + std::to_string(opts.max_events) +
                                    " kicks");
          ++n_events;
          bool keep = sink.on_event(ev);
          y = ev.post;
          t = ev.t;
          k1 = vector_field(y, par);
          if (!keep) return y;
          after_reject = false;
          continue;
        }
      }
    } else {
      // Observe mode: report directional crossings (no reset applied); the
      // step's segment is delivered afterwards in one piece.
      for (const auto& c : hits) {
        bool directional = (c.side == +1 && c.p > opts.grazing_p_tol) ||
                           (c.side == -1 && c.p < -opts.grazing_p_tol);
        if (!directional) continue;
        KickEvent ev;
        ev.t = c.t;
        ev.side = c.side;
        ev.pre = ev.post = State{c.surface, c.p};
        if (!sink.on_event(ev)) return ev.pre;
      }
    }

    if (!sink.on_segment(seg)) return y1;
    t = seg.t1;
    y = y1;
    k1 = k7;
    double fac = (err < 1e-30) ? 5.0 : 0.9 * std::pow(err, -0.2);
    h *= std::clamp(fac, 0.2, after_reject ? 1.0 : 5.0);
    after_reject = false;
  }
  return y;
}

namespace {

struct RecordingSink final : StepSink {
  Trajectory* traj;
  bool on_segment(const DenseSegment& seg) override {
    traj->t.push_back(seg.t1);
    traj->y.push_back(seg.eval(seg.t1));
    return true;
  }
  bool on_event(const KickEvent& ev) override {
    traj->events.push_back(ev);
    return true;
  }
};

struct FirstEventSink final : StepSink {
  std::optional<KickEvent> hit;
  bool on_event(const KickEvent& ev) override {
    hit = ev;
    return false;
  }
};

}  // namespace

Trajectory flow(const State& initial, double duration, const Params& par,
                const IntegratorOptions& opts) {
  if (!(duration > 0.0)) throw std::invalid_argument("flow: duration must be > 0");
  Trajectory traj;
  traj.t.push_back(0.0);
  traj.y.push_back(initial);
  RecordingSink sink;
  sink.traj = &traj;
  integrate(initial, 0.0, duration, par, opts, sink, GuardMode::Kick);
  return traj;
}

std::optional<Crossing> first_crossing(const State& initial, const Params& par,
                                       const IntegratorOptions& opts, GuardMode mode) {
  FirstEventSink sink;
  integrate(initial, 0.0, opts.max_time, par, opts, sink, mode);
  if (!sink.hit) return std::nullopt;
  return Crossing{sink.hit->pre, sink.hit->t, sink.hit->side};
}

}  // namespace kickpend
