#include "kickpend/action_angle.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>

#include "kickpend/poincare.hpp"

namespace kickpend {

namespace {

constexpr double quad_rel_tol = 1e-11;
constexpr double quad_accept = 1e-10;

double radicand_scale(double p1, const Params& par) {
  double w = par.mu1 * p1 / par.mu2;
  return 0.5 * w * w;
}

}  // namespace

double gamma_integral(double theta, double p1, const Params& par) {
  par.validate();
  if (!(p1 > 0.0) || !(p1 <= 1.0))
    throw std::domain_error("gamma_integral: p1 must be in (0, 1]");
  if (!(theta >= -par.theta_star - 1e-12) || !(theta <= par.theta_star + 1e-12))
    throw std::domain_error("gamma_integral: theta outside [-theta_star, theta_star]");
  theta = std::clamp(theta, -par.theta_star, par.theta_star);
  if (theta == -par.theta_star) return 0.0;

  const double a = radicand_scale(p1, par);
  const double cts = std::cos(par.theta_star);
  auto integrand = [&](double xi) {
    return 1.0 / (par.mu2 * std::sqrt(2.0 * (a - cts + std::cos(xi))));
  };

  double value, err;
  if (p1 < 0.02) {
    // radicand bottoms out at 2a near the endpoints; cluster nodes there
    boost::math::quadrature::tanh_sinh<double> quad;
    double l1;
    value = quad.integrate(integrand, -par.theta_star, theta, quad_rel_tol, &err, &l1);
  } else {
    value = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        integrand, -par.theta_star, theta, 15, quad_rel_tol, &err);
  }
  if (!(err <= quad_accept * std::max(std::abs(value), 1e-12)))
    throw QuadratureFailure("gamma_integral: accuracy target not met");
  return value;
}

double period(double p1, const Params& par) {
  if (!(p1 > 0.0) || !(p1 < 1.0)) throw std::domain_error("period: p1 must be in (0, 1)");
  return gamma_integral(par.theta_star, p1, par) + gamma_integral(par.theta_star, 1.0 - p1, par);
}

double kick_phase(double p1, const Params& par) {
  return 2.0 * pi * gamma_integral(par.theta_star, p1, par) / period(p1, par);
}

double phase(const State& s, const Params& par) {
  double p1 = limit_cycle_label(s, par);
  if (!(p1 > 0.0) || !(p1 < 1.0))
    throw std::domain_error("phase: state lies on a boundary cycle");
  double th = wrap(s.theta);
  double P = period(p1, par);
  double t = s.p >= 0.0 ? gamma_integral(th, p1, par)
                        : gamma_integral(par.theta_star, p1, par) +
                              gamma_integral(-th, 1.0 - p1, par);
  double psi = 2.0 * pi * t / P;
  if (psi >= 2.0 * pi) psi -= 2.0 * pi;
  return psi < 0.0 ? 0.0 : psi;
}

ActionAngle to_action_angle(const State& s, const Params& par) {
  return {limit_cycle_label(s, par), phase(s, par)};
}

namespace {

// Gamma[theta, p1] is strictly increasing in theta; bracketed secant/bisection
// solve of Gamma = target on [-theta_star, theta_star].
double invert_arc_time(double target, double p1, const Params& par) {
  double lo = -par.theta_star, hi = par.theta_star;
  double flo = -target, fhi = gamma_integral(hi, p1, par) - target;
  if (flo >= 0.0) return lo;
  if (fhi <= 0.0) return hi;
  for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
    double mid = 0.5 * (lo + hi);
    if (it % 2 == 0 && fhi > flo) {
      double sec = lo - flo * (hi - lo) / (fhi - flo);
      if (sec > lo + 1e-16 && sec < hi - 1e-16) mid = sec;
    }
    double fm = gamma_integral(mid, p1, par) - target;
    if (fm == 0.0) return mid;
    if (fm < 0.0) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
      fhi = fm;
    }
  }
  return 0.5 * (lo + hi);
}

double momentum_on_level(double theta, double p1, const Params& par) {
  double a = radicand_scale(p1, par);
  double rad = 2.0 * (a - std::cos(par.theta_star) + std::cos(theta));
  return (par.mu2 / par.mu1) * std::sqrt(std::max(0.0, rad));
}

}  // namespace

State from_action_angle(const ActionAngle& aa, const Params& par) {
  if (!(aa.I > 0.0) || !(aa.I < 1.0))
    throw std::domain_error("from_action_angle: I must be in (0, 1)");
  double psi = std::fmod(aa.psi, 2.0 * pi);
  if (psi < 0.0) psi += 2.0 * pi;
  double P = period(aa.I, par);
  double t_kick = gamma_integral(par.theta_star, aa.I, par);
  double t = psi * P / (2.0 * pi);
  if (t <= t_kick) {
    double theta = invert_arc_time(t, aa.I, par);
    return {theta, momentum_on_level(theta, aa.I, par)};
  }
  double theta = -invert_arc_time(t - t_kick, 1.0 - aa.I, par);
  return {theta, -momentum_on_level(theta, 1.0 - aa.I, par)};
}

ActionAngle flow_action_angle(const ActionAngle& aa, double t, const Params& par) {
  double omega = 2.0 * pi / period(aa.I, par);
  double psi = std::fmod(aa.psi + omega * t, 2.0 * pi);
  if (psi < 0.0) psi += 2.0 * pi;
  return {aa.I, psi};
}

FourierRow fourier_coefficients(const std::function<std::complex<double>(const State&)>& obs,
                                double I, int J, int M, const Params& par) {
  if (J < 0) throw std::invalid_argument("fourier_coefficients: J must be >= 0");
  if (M < 2 * J + 2) throw std::invalid_argument("fourier_coefficients: M must be >= 2J + 2");
  FourierRow row;
  row.I = I;
  row.P = period(I, par);
  row.Omega = 2.0 * pi / row.P;

  std::vector<std::complex<double>> samples(static_cast<std::size_t>(M));
  for (int m = 0; m < M; ++m)
    samples[std::size_t(m)] = obs(from_action_angle({I, 2.0 * pi * m / M}, par));

  row.g.assign(std::size_t(2 * J + 1), {0.0, 0.0});
  for (int j = -J; j <= J; ++j) {
    std::complex<double> acc{0.0, 0.0};
    for (int m = 0; m < M; ++m) {
      double ang = -2.0 * pi * j * m / double(M);
      acc += samples[std::size_t(m)] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    row.g[std::size_t(j + J)] = acc / double(M);
  }
  return row;
}

std::complex<double> spectral_evolve(const FourierRow& row, double psi, double t) {
  const int J = row.J();
  std::complex<double> sum{0.0, 0.0};
  for (int j = -J; j <= J; ++j) {
    double ang = j * (row.Omega * t + psi);
    sum += row.coeff(j) * std::complex<double>(std::cos(ang), std::sin(ang));
  }
  return sum;
}

std::complex<double> spectral_evolve(const FourierTable& table, double I, double psi, double t) {
  for (const auto& row : table.rows)
    if (std::abs(row.I - I) < 1e-12) return spectral_evolve(row, psi, t);
  throw std::invalid_argument("spectral_evolve: no table row for this action");
}

}  // namespace kickpend
