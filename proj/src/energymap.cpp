#include "kickpend/energymap.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "kickpend/parallel.hpp"
#include "kickpend/poincare.hpp"

namespace kickpend {

namespace {

constexpr double edge_tol = 1e-12;

double ratio2(const Params& par) {
  const double q = par.mu1 / par.mu2;
  return q * q;
}

}  // namespace

double guard_momentum(double H, const Params& par) {
  const double hm = h_minus(par);
  if (H < hm - edge_tol) throw std::domain_error("energy below the grazing level H-");
  const double radicand = std::max(0.0, 2.0 * (H - hm));
  return (par.mu2 / par.mu1) * std::sqrt(radicand);
}

double kick_energy_f(double H, const Params& par) {
  const double p = guard_momentum(H, par);
  return H - ratio2(par) * p + 0.5 * ratio2(par);
}

EnergySample measure_dissipation(double H, const Params& par, const IntegratorOptions& opts) {
  const double hm = h_minus(par), hp = h_plus(par);
  if (H < hm - edge_tol || H > hp + edge_tol)
    throw std::domain_error("traverse energy must lie in [H-, H+]");
  const State start{-par.theta_star, guard_momentum(H, par)};
  const auto c = first_crossing(start, par, opts, GuardMode::Observe);
  if (!c || c->side != +1)
    throw NoCrossing("swing entered the inner region before reaching +theta_star");
  return {H, hamiltonian(c->pre, par), par.k};
}

std::vector<EnergySample> collect_dissipation_samples(const std::vector<double>& H_values,
                                                      const Params& par,
                                                      const IntegratorOptions& opts,
                                                      unsigned workers) {
  const double hm = h_minus(par), hp = h_plus(par);
  for (double H : H_values)
    if (H < hm - edge_tol || H > hp + edge_tol)
      throw std::domain_error("traverse energy must lie in [H-, H+]");
  std::vector<std::optional<EnergySample>> slots(H_values.size());
  parallel_for(H_values.size(), workers, [&](std::size_t i) {
    try {
      slots[i] = measure_dissipation(H_values[i], par, opts);
    } catch (const std::exception&) {
      slots[i] = std::nullopt;  // a dead swing is skipped, not fatal for a batch
    }
  });
  std::vector<EnergySample> out;
  out.reserve(H_values.size());
  for (const auto& s : slots)
    if (s) out.push_back(*s);
  return out;
}

DissipationModel fit_retention(const std::vector<EnergySample>& samples, const Params& par) {
  if (samples.size() < 3) throw InsufficientSamples("need at least three samples");
  double lo = samples.front().H_in, hi = lo;
  for (const auto& s : samples) {
    lo = std::min(lo, s.H_in);
    hi = std::max(hi, s.H_in);
  }
  if (hi - lo < 0.5 * (h_plus(par) - h_minus(par)) - edge_tol)
    throw InsufficientSamples("samples must span at least half of [H-, H+]");
  double sxy = 0.0, sxx = 0.0;
  for (const auto& s : samples) {
    sxy += s.H_in * s.H_out;
    sxx += s.H_in * s.H_in;
  }
  DissipationModel m;
  m.r = sxy / sxx;
  m.delta = 1.0 - m.r;
  m.fit_residual = 0.0;
  for (const auto& s : samples)
    m.fit_residual = std::max(m.fit_residual, std::abs(s.H_out - m.r * s.H_in) / (m.r * s.H_in));
  return m;
}

double energy_map_u(double H, const DissipationModel& model, const Params& par) {
  return kick_energy_f(model.r * H, par);
}

double energy_map_u_prime(double H, const DissipationModel& model, const Params& par) {
  const double p = guard_momentum(model.r * H, par);
  return model.r * (1.0 - 1.0 / p);
}

std::pair<double, double> fixed_point(const DissipationModel& model, const Params& par) {
  if (!(model.r > 0.0) || model.r > 1.0 + edge_tol)
    throw std::domain_error("retention factor must lie in (0, 1]");
  const double a = hamiltonian({par.theta_star, 0.5}, par);  // neutral fixed point of f
  const double b = h_plus(par);
  auto g = [&](double H) { return energy_map_u(H, model, par) - H; };
  double ga, gb;
  try {
    ga = g(a);
    gb = g(b);
  } catch (const std::domain_error&) {
    throw NoFixedPoint("map undefined on the bracket");
  }
  if (std::abs(ga) < 1e-15) return {a, energy_map_u_prime(a, model, par)};
  if (std::abs(gb) < 1e-15) return {b, energy_map_u_prime(b, model, par)};
  if (ga < 0.0 || gb > 0.0) throw NoFixedPoint("no sign change of u(H) - H on [H_fp(0), H+]");
  double lo = a, hi = b, glo = ga;
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g(mid);
    if (gm == 0.0) {
      lo = hi = mid;
      break;
    }
    if ((glo > 0.0) == (gm > 0.0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
    }
  }
  const double root = 0.5 * (lo + hi);
  return {root, energy_map_u_prime(root, model, par)};
}

double second_iterate_derivative(double H, const DissipationModel& model, const Params& par) {
  const double u1 = energy_map_u(H, model, par);
  return energy_map_u_prime(u1, model, par) * energy_map_u_prime(H, model, par);
}

double second_iterate_domain_end(const DissipationModel& model, const Params& par) {
  const double H0 = h_minus(par) / model.r;
  const double b = h_plus(par);
  auto g = [&](double H) { return energy_map_u(H, model, par) - H0; };
  if (g(b) >= -1e-15) return b;  // undamped limit: the whole band maps into itself
  double lo = H0, hi = b;
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

std::optional<int> escape_count(double H0_val, const DissipationModel& model, const Params& par,
                                int n_max) {
  const double H0 = h_minus(par) / model.r;
  const double hp = h_plus(par);
  if (H0_val < H0 - edge_tol || H0_val > hp + edge_tol)
    throw std::domain_error("starting energy must lie in [H0, H+]");
  double H = H0_val;
  for (int n = 1; n <= n_max; ++n) {
    H = energy_map_u(H, model, par);
    if (H < H0 - edge_tol || H > hp + edge_tol) return n;
  }
  return std::nullopt;
}

}  // namespace kickpend
