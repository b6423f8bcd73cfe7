#include "kickpend/poincare.hpp"

#include <cmath>
#include <limits>

#include "kickpend/parallel.hpp"

namespace kickpend {

double p_critical(const Params& par) {
  return (par.mu2 / par.mu1) * std::sqrt(2.0 + 2.0 * std::cos(par.theta_star));
}

PoincareState poincare_T(PoincareState s, const Params& par) {
  if (s.is_gamma) return s;
  const double edge = p_critical(par) + 1.0;
  const double p = s.p;
  if (std::abs(p - edge) <= boundary_tol || std::abs(p + edge) <= boundary_tol)
    return gamma_state();
  if (p == 0.0) return s;
  if (p < -edge) return {p + 1.0, false};
  if (p < 0.0) return {std::abs(p + 1.0), false};
  if (p < edge) return {-std::abs(p - 1.0), false};
  return {p - 1.0, false};
}

std::vector<PoincareState> iterate_T(PoincareState p0, int n, const Params& par) {
  if (n < 0) throw std::invalid_argument("iterate_T: n must be >= 0");
  std::vector<PoincareState> orbit;
  orbit.reserve(std::size_t(n) + 1);
  orbit.push_back(p0);
  for (int i = 0; i < n; ++i) orbit.push_back(poincare_T(orbit.back(), par));
  return orbit;
}

SettleResult settle_index(double p0, const Params& par, int n_max) {
  if (n_max < 1) throw std::invalid_argument("settle_index: n_max must be >= 1");
  PoincareState s{p0, false};
  for (int n = 0; n <= n_max; ++n) {
    if (s.is_gamma) return {SettleResult::Kind::Gamma, n};
    if (std::abs(s.p) <= 1.0) return {SettleResult::Kind::Settled, n};
    s = poincare_T(s, par);
  }
  return {SettleResult::Kind::Unsettled, n_max};
}

double h_minus(const Params& par) { return hamiltonian({par.theta_star, 0.0}, par); }

double h_plus(const Params& par) { return hamiltonian({par.theta_star, 1.0}, par); }

Region region_of(const State& s, const Params& par) {
  double H = hamiltonian(s, par);
  if (H < h_minus(par)) return Region::A1;
  if (H <= h_plus(par) && std::abs(wrap(s.theta)) <= par.theta_star) return Region::A2;
  return Region::KickedOuter;
}

double limit_cycle_label(const State& s, const Params& par) {
  if (region_of(s, par) != Region::A2)
    throw OutsideA2("limit_cycle_label: state is not in the attracting band");
  double rad = 2.0 * (hamiltonian(s, par) - 1.0 + std::cos(par.theta_star));
  double q = (par.mu2 / par.mu1) * std::sqrt(std::max(0.0, rad));
  return s.p >= 0.0 ? q : 1.0 - q;
}

namespace {

CycleLabel settle_to_label(double q0, const Params& par) {
  PoincareState s{q0, false};
  for (int n = 0; n <= 1000; ++n) {
    if (s.is_gamma) return {CycleLabel::Kind::Homoclinic, 0.0};
    if (std::abs(s.p) <= 1.0) {
      double p1 = s.p > 0.0 ? s.p : 1.0 + s.p;
      if (p1 <= 0.0 || p1 >= 1.0) return {CycleLabel::Kind::FixedPoint, 0.0};
      return {CycleLabel::Kind::Cycle, p1};
    }
    s = poincare_T(s, par);
  }
  throw Unsettled("classify_basin: map iteration did not settle");
}

bool on_guard(const State& s, const Params& par) {
  double w = wrap(s.theta);
  return std::abs(std::abs(w) - par.theta_star) <= 1e-9;
}

}  // namespace

CycleLabel classify_basin(const State& s, const Params& par, const IntegratorOptions& opts) {
  if (hamiltonian(s, par) < h_minus(par))
    throw std::domain_error("classify_basin: state is below the grazing energy");
  double q0;
  if (on_guard(s, par)) {
    q0 = s.p;
  } else {
    auto hit = first_crossing(s, par, opts);
    if (!hit) throw Unsettled("classify_basin: no guard crossing before max_time");
    q0 = hit->pre.p;
  }
  return settle_to_label(q0, par);
}

GridField basin_grid(const Window& window, const Resolution& res, double target_p1, double tol,
                     const Params& par, const IntegratorOptions& opts, unsigned workers) {
  if (!(tol > 0.0)) throw std::invalid_argument("basin_grid: tol must be > 0");
  par.validate();
  opts.validate();
  GridField f = make_grid(window, res);
  double target = target_p1 < 0.0 ? 1.0 + target_p1 : target_p1;  // either pair member
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();

  parallel_for(f.values.size(), workers, [&](std::size_t idx) {
    std::size_t i = idx / f.p_axis.size(), j = idx % f.p_axis.size();
    State cell{f.theta_axis[i], f.p_axis[j]};
    double label = nan, match = 0.0;
    CellStatus st = CellStatus::Ok;
    try {
      CycleLabel lab = classify_basin(cell, par, opts);
      switch (lab.kind) {
        case CycleLabel::Kind::Cycle:
          label = lab.p1;
          match = std::abs(lab.p1 - target) < tol ? 1.0 : 0.0;
          break;
        case CycleLabel::Kind::FixedPoint: label = -1.0; break;
        case CycleLabel::Kind::Homoclinic: label = -2.0; break;
      }
    } catch (const Unsettled&) {
      st = CellStatus::Unsettled;
    } catch (const std::exception&) {
      st = CellStatus::Error;
    }
    f.values[idx] = {label, match};
    f.status[idx] = st;
  });
  return f;
}

}  // namespace kickpend
