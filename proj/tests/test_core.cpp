#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "kickpend/core.hpp"

using namespace kickpend;

namespace {

Params defaults() { return Params{}; }

double surface_distance(double theta, double theta_star) {
  double d1 = std::abs(std::remainder(theta - theta_star, 2.0 * pi));
  double d2 = std::abs(std::remainder(theta + theta_star, 2.0 * pi));
  return std::min(d1, d2);
}

}  // namespace

TEST_CASE("wrap maps onto (-pi, pi]") {
  CHECK(wrap(0.0) == 0.0);
  CHECK(wrap(3.0 * pi) == doctest::Approx(pi));
  CHECK(wrap(-pi) == doctest::Approx(pi));
  CHECK(wrap(2.0 * pi + 0.25) == doctest::Approx(0.25));
  CHECK(wrap(-7.5) == doctest::Approx(-7.5 + 2.0 * pi));
}

TEST_CASE("hamiltonian: well depth and kinetic scaling") {
  auto par = defaults();
  CHECK(hamiltonian({0.0, 0.0}, par) == doctest::Approx(0.0));
  CHECK(hamiltonian({par.theta_star, 0.0}, par) == doctest::Approx(0.5));
  CHECK(hamiltonian({pi, 0.0}, par) == doctest::Approx(2.0));
  CHECK(hamiltonian({0.0, 1.0}, par) == doctest::Approx(0.5));
  // angle enters only through its wrapped value
  CHECK(hamiltonian({0.3 + 6.0 * pi, 0.7}, par) == doctest::Approx(hamiltonian({0.3, 0.7}, par)));

  Params scaled;
  scaled.mu1 = 2.0;
  scaled.mu2 = 1.0;
  CHECK(hamiltonian({0.0, 1.0}, scaled) == doctest::Approx(2.0));
}

TEST_CASE("vector_field includes damping") {
  Params par = defaults();
  par.k = 0.03;
  auto d = vector_field({pi / 2.0, 2.0}, par);
  CHECK(d.dtheta == doctest::Approx(2.0));
  CHECK(d.dp == doctest::Approx(-1.0 - 0.03 * 2.0));
}

TEST_CASE("guard_and_reset: direction and grazing band") {
  auto par = defaults();
  auto out = guard_and_reset({par.theta_star, 0.6}, +1, par);
  REQUIRE(out.has_value());
  CHECK(out->p == doctest::Approx(-0.4));
  CHECK(out->theta == doctest::Approx(par.theta_star));

  auto in = guard_and_reset({-par.theta_star, -0.6}, -1, par);
  REQUIRE(in.has_value());
  CHECK(in->p == doctest::Approx(0.4));

  CHECK_FALSE(guard_and_reset({par.theta_star, 5e-11}, +1, par).has_value());
  CHECK_FALSE(guard_and_reset({par.theta_star, -5e-11}, +1, par).has_value());
  CHECK_FALSE(guard_and_reset({par.theta_star, -0.3}, +1, par).has_value());
  CHECK_FALSE(guard_and_reset({-par.theta_star, 0.3}, -1, par).has_value());
}

TEST_CASE("parameter validation rejects bad input") {
  Params par;
  par.mu1 = -1.0;
  CHECK_THROWS_AS(par.validate(), std::invalid_argument);
  par = Params{};
  par.theta_star = pi;
  CHECK_THROWS_AS(par.validate(), std::invalid_argument);

  IntegratorOptions opts;
  opts.rel_tol = 0.0;
  CHECK_THROWS_AS(opts.validate(), std::invalid_argument);
  opts = IntegratorOptions{};
  opts.max_events = 0;
  CHECK_THROWS_AS(opts.validate(), std::invalid_argument);
}

TEST_CASE("energy conserved on a kick-free libration") {
  auto par = defaults();
  IntegratorOptions opts;
  State y0{0.0, 0.8};  // H = 0.32, stays inside the well
  double H0 = hamiltonian(y0, par);
  auto traj = flow(y0, 50.0, par, opts);
  CHECK(traj.events.empty());
  REQUIRE(traj.t.size() > 10);
  CHECK(traj.t.front() == 0.0);
  for (std::size_t i = 0; i < traj.t.size(); ++i) {
    CHECK(std::abs(hamiltonian(traj.y[i], par) - H0) < 1e-8);
    if (i) CHECK(traj.t[i] >= traj.t[i - 1]);
  }
}

TEST_CASE("dense output stays on the energy level inside steps") {
  auto par = defaults();
  IntegratorOptions opts;
  struct MidSink final : StepSink {
    const Params* par;
    double H0, worst = 0.0;
    bool on_segment(const DenseSegment& seg) override {
      for (double f : {0.25, 0.5, 0.75}) {
        double tm = seg.t0 + f * (seg.t1 - seg.t0);
        worst = std::max(worst, std::abs(hamiltonian(seg.eval(tm), *par) - H0));
      }
      return true;
    }
  } sink;
  sink.par = &par;
  State y0{0.0, 0.8};
  sink.H0 = hamiltonian(y0, par);
  integrate(y0, 0.0, 30.0, par, opts, sink);
  CHECK(sink.worst < 1e-8);
}

TEST_CASE("first_crossing finds the outgoing guard hit") {
  auto par = defaults();
  IntegratorOptions opts;
  opts.max_time = 30.0;
  auto hit = first_crossing({-par.theta_star, 0.6}, par, opts);
  REQUIRE(hit.has_value());
  CHECK(hit->side == +1);
  CHECK(hit->pre.theta == doctest::Approx(par.theta_star).epsilon(1e-10));
  CHECK(hit->pre.p == doctest::Approx(0.6).epsilon(1e-8));
  CHECK(hit->t > 0.0);
}

TEST_CASE("kick applied at the crossing, trajectory continues") {
  auto par = defaults();
  IntegratorOptions opts;
  auto traj = flow({-par.theta_star, 0.6}, 10.0, par, opts);
  REQUIRE_FALSE(traj.events.empty());
  const auto& ev = traj.events.front();
  CHECK(ev.side == +1);
  CHECK(ev.pre.p == doctest::Approx(0.6).epsilon(1e-8));
  CHECK(ev.post.p == doctest::Approx(-0.4).epsilon(1e-8));
  CHECK(ev.post.theta == doctest::Approx(ev.pre.theta));
  for (const auto& e : traj.events) {
    CHECK(surface_distance(e.pre.theta, par.theta_star) < 1e-9);
    CHECK(e.t >= 0.0);
    CHECK(e.t <= 10.0);
  }
}

TEST_CASE("wrong-direction crossings pass through unkicked") {
  auto par = defaults();
  IntegratorOptions opts;
  // fast rotation: increasing theta crosses -theta_star with p > 0 (no kick),
  // then +theta_star with p = sqrt(7) (kick)
  auto traj = flow({-pi, 2.0}, 2.0, par, opts);
  REQUIRE_FALSE(traj.events.empty());
  const auto& ev = traj.events.front();
  CHECK(ev.side == +1);
  CHECK(ev.pre.p == doctest::Approx(std::sqrt(7.0)).epsilon(1e-8));
  CHECK(ev.post.p == doctest::Approx(std::sqrt(7.0) - 1.0).epsilon(1e-8));
}

TEST_CASE("start on the guard does not retrigger; poke past the guard returns") {
  auto par = defaults();
  IntegratorOptions opts;
  // H = 0.745: pokes out to theta ~ 1.31 > theta_star, turns, comes back, and
  // the first kick happens on the far side with p = -0.7
  auto traj = flow({par.theta_star, 0.7}, 20.0, par, opts);
  REQUIRE_FALSE(traj.events.empty());
  const auto& ev = traj.events.front();
  CHECK(ev.side == -1);
  CHECK(ev.pre.theta == doctest::Approx(-par.theta_star).epsilon(1e-10));
  CHECK(ev.pre.p == doctest::Approx(-0.7).epsilon(1e-8));
  CHECK(ev.post.p == doctest::Approx(0.3).epsilon(1e-8));
}

TEST_CASE("small transversal crossings are not missed between steps") {
  auto par = defaults();
  IntegratorOptions opts;
  // post-kick momentum 1.1e-3: the orbit creeps over the guard, turns just
  // past it, and must be kicked on the way out, not silently passed through
  double s = 1.1e-3;
  auto traj = flow({-par.theta_star, s}, 30.0, par, opts);
  REQUIRE_FALSE(traj.events.empty());
  const auto& ev = traj.events.front();
  CHECK(ev.side == +1);
  CHECK(ev.pre.p == doctest::Approx(s).epsilon(1e-5));
  CHECK(ev.post.p == doctest::Approx(s - 1.0).epsilon(1e-6));
}

TEST_CASE("reflection symmetry of the flow") {
  auto par = defaults();
  IntegratorOptions opts;
  auto a = flow({-par.theta_star + 0.2, 0.55}, 12.0, par, opts);
  auto b = flow({par.theta_star - 0.2, -0.55}, 12.0, par, opts);
  REQUIRE(a.events.size() == b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    CHECK(a.events[i].side == -b.events[i].side);
    CHECK(a.events[i].t == doctest::Approx(b.events[i].t).epsilon(1e-8));
    CHECK(a.events[i].pre.p == doctest::Approx(-b.events[i].pre.p).epsilon(1e-8));
  }
  CHECK(a.y.back().theta == doctest::Approx(-b.y.back().theta).epsilon(1e-7));
  CHECK(a.y.back().p == doctest::Approx(-b.y.back().p).epsilon(1e-7));
}

TEST_CASE("event times are stable under event_time_tol refinement") {
  auto par = defaults();
  IntegratorOptions coarse, fine;
  coarse.event_time_tol = 1e-9;
  fine.event_time_tol = 5e-10;
  auto a = flow({-par.theta_star, 0.6}, 20.0, par, coarse);
  auto b = flow({-par.theta_star, 0.6}, 20.0, par, fine);
  REQUIRE_FALSE(a.events.empty());
  REQUIRE(a.events.size() == b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i)
    CHECK(std::abs(a.events[i].t - b.events[i].t) < coarse.event_time_tol);
}

TEST_CASE("damping dissipates energy monotonically between kicks") {
  Params par = defaults();
  par.k = 0.05;
  IntegratorOptions opts;
  auto traj = flow({0.0, 0.8}, 40.0, par, opts);
  CHECK(traj.events.empty());
  double prev = hamiltonian(traj.y.front(), par);
  for (std::size_t i = 1; i < traj.y.size(); ++i) {
    double cur = hamiltonian(traj.y[i], par);
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
  CHECK(prev < 0.32);
}

TEST_CASE("max_step bounds the sample spacing") {
  auto par = defaults();
  IntegratorOptions opts;
  opts.max_step = 0.05;
  auto traj = flow({0.0, 0.5}, 5.0, par, opts);
  for (std::size_t i = 1; i < traj.t.size(); ++i)
    CHECK(traj.t[i] - traj.t[i - 1] <= 0.05 + 1e-12);
}

TEST_CASE("max_events overflow throws") {
  auto par = defaults();
  IntegratorOptions opts;
  opts.max_events = 3;
  opts.max_time = 200.0;
  CHECK_THROWS_AS(flow({0.0, 5.0}, 200.0, par, opts), MaxEventsExceeded);
}

TEST_CASE("unachievable tolerances raise StepFailure") {
  auto par = defaults();
  IntegratorOptions opts;
  opts.rel_tol = 1e-300;
  opts.abs_tol = 1e-300;
  CHECK_THROWS_AS(flow({0.3, 0.4}, 1.0, par, opts), StepFailure);
}

TEST_CASE("observe mode reports crossings without resetting") {
  auto par = defaults();
  IntegratorOptions opts;
  struct Collect final : StepSink {
    std::vector<KickEvent> events;
    bool on_event(const KickEvent& ev) override {
      events.push_back(ev);
      return true;
    }
  } sink;
  State y0{0.0, 1.2};  // H = 0.72, librates across both guards
  double H0 = hamiltonian(y0, par);
  double p_cross = std::sqrt(2.0 * (H0 - 0.5));
  State yT = integrate(y0, 0.0, 15.0, par, opts, sink, GuardMode::Observe);
  REQUIRE(sink.events.size() >= 2);
  CHECK(sink.events[0].side == +1);
  CHECK(sink.events[0].pre.p == doctest::Approx(p_cross).epsilon(1e-8));
  CHECK(sink.events[1].side == -1);
  CHECK(sink.events[1].pre.p == doctest::Approx(-p_cross).epsilon(1e-8));
  for (const auto& ev : sink.events) {
    CHECK(ev.post.theta == ev.pre.theta);
    CHECK(ev.post.p == ev.pre.p);
  }
  CHECK(hamiltonian(yT, par) == doctest::Approx(H0).epsilon(1e-9));
}

TEST_CASE("zero duration returns the initial state") {
  auto par = defaults();
  IntegratorOptions opts;
  struct Null final : StepSink {
  } sink;
  State y0{0.2, -0.1};
  State y = integrate(y0, 0.0, 0.0, par, opts, sink);
  CHECK(y.theta == y0.theta);
  CHECK(y.p == y0.p);
  CHECK_THROWS_AS(flow(y0, 0.0, par, opts), std::invalid_argument);
}
