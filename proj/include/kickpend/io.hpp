#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kickpend/action_angle.hpp"
#include "kickpend/core.hpp"
#include "kickpend/energymap.hpp"
#include "kickpend/gridfield.hpp"

namespace kickpend {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Canonical float serialization: %.17g, enough digits that parsing the text
/// reproduces the double bitwise. Every file writer below uses it.
std::string format_float(double x);

// --- trajectory and event logs (CSV) ---

/// Header t,theta_wrapped,p,H. Angles wrapped to (-pi, pi] on output.
void write_trajectory_csv(const Trajectory& traj, const Params& par, const std::string& path);

/// Rows of (t, theta_wrapped, p, H) exactly as written.
std::vector<std::array<double, 4>> read_trajectory_csv(const std::string& path);

/// Header t,side,p_pre,p_post.
void write_events_csv(const std::vector<KickEvent>& events, const std::string& path);

struct EventRow {
  double t = 0.0;
  int side = 0;
  double p_pre = 0.0;
  double p_post = 0.0;
};
std::vector<EventRow> read_events_csv(const std::string& path);

// --- grid fields (CSV + JSON sidecar) ---

/// Header theta,p,re,im,status; one row per cell, row-major over theta.
void write_gridfield_csv(const GridField& f, const std::string& path);

/// Rebuilds axes, values and statuses from the cell rows. Meta is not stored
/// in the CSV; it travels in the sidecar.
GridField read_gridfield_csv(const std::string& path);

/// Header theta,p,label,status with the label read from the real part
/// (p1 value, -1 fixed point, -2 homoclinic). The match-indicator imaginary
/// part is derived data and is not serialized.
void write_basin_csv(const GridField& f, const std::string& path);

GridField read_basin_csv(const std::string& path);

/// Sidecar with the field's ordered meta entries plus the wall time. The wall
/// time is the only line that varies between reruns of the same config.
void write_sidecar_json(const GridField& f, double wall_time_s, const std::string& path);

struct Sidecar {
  std::vector<std::pair<std::string, std::string>> meta;
  double wall_time_s = 0.0;
};
Sidecar read_sidecar_json(const std::string& path);

// --- Fourier tables (JSON) ---

/// Array of rows {I, Omega, P, re_g, im_g}, coefficient arrays indexed
/// j = -J..J.
void write_fourier_json(const FourierTable& table, const std::string& path);

FourierTable read_fourier_json(const std::string& path);

// --- analysis reports (JSON) ---

struct DissipationReport {
  double k = 0.0;
  std::vector<EnergySample> samples;
  DissipationModel model;
};

/// {k, samples: [{H_in, H_out}], r, delta, fit_residual}
void write_dissipation_json(const DissipationReport& report, const std::string& path);

DissipationReport read_dissipation_json(const std::string& path);

struct EnergyMapReport {
  double r = 1.0;
  double H_fp = 0.0;
  double slope = 0.0;
  // (H0, escape count); count absent when the iterate never leaves the band
  std::vector<std::pair<double, std::optional<int>>> escape_table;
};

/// {r, H_fp, slope, escape_table: [{H0, n}]} with n null for non-escaping
/// seeds.
void write_energy_map_json(const EnergyMapReport& report, const std::string& path);

EnergyMapReport read_energy_map_json(const std::string& path);

}  // namespace kickpend
