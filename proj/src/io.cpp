#include "kickpend/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace kickpend {

namespace {

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  out.flush();
  if (!out) throw IoError("write failed: " + path);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (!in.good() && !in.eof()) throw IoError("read failed: " + path);
  return ss.str();
}

double parse_double(const std::string& s, const std::string& path) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double x = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw IoError("bad float '" + s + "' in " + path);
  return x;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

/// Lines of a CSV body after checking the header, blank tail lines dropped.
std::vector<std::vector<std::string>> read_csv(const std::string& path, const std::string& header,
                                               std::size_t n_fields) {
  std::istringstream in(slurp(path));
  std::string line;
  if (!std::getline(in, line) || line != header)
    throw IoError("expected header '" + header + "' in " + path);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (fields.size() != n_fields)
      throw IoError("malformed row '" + line + "' in " + path);
    rows.push_back(std::move(fields));
  }
  return rows;
}

CellStatus status_from(const std::string& s, const std::string& path) {
  for (auto c : {CellStatus::Ok, CellStatus::Converged, CellStatus::Truncated,
                 CellStatus::Diverged, CellStatus::Escaped, CellStatus::Unsettled,
                 CellStatus::Error})
    if (s == to_string(c)) return c;
  throw IoError("unknown status '" + s + "' in " + path);
}

/// JSON number token; non-finite values (never produced by the writers'
/// callers, but defensively) become null.
std::string json_number(double x) {
  if (!std::isfinite(x)) return "null";
  return format_float(x);
}

std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 2);
  out += '"';
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  out += '"';
  return out;
}

double number_or_nan(const nlohmann::json& v) {
  if (v.is_null()) return std::nan("");
  return v.get<double>();
}

nlohmann::json parse_json(const std::string& path) {
  try {
    return nlohmann::json::parse(slurp(path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad JSON in " + path + ": " + e.what());
  }
}

}  // namespace

std::string format_float(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_trajectory_csv(const Trajectory& traj, const Params& par, const std::string& path) {
  std::string body = "t,theta_wrapped,p,H\n";
  body.reserve(body.size() + traj.t.size() * 80);
  for (std::size_t i = 0; i < traj.t.size(); ++i) {
    const State& s = traj.y[i];
    body += format_float(traj.t[i]);
    body += ',';
    body += format_float(wrap(s.theta));
    body += ',';
    body += format_float(s.p);
    body += ',';
    body += format_float(hamiltonian(s, par));
    body += '\n';
  }
  write_file(path, body);
}

std::vector<std::array<double, 4>> read_trajectory_csv(const std::string& path) {
  const auto rows = read_csv(path, "t,theta_wrapped,p,H", 4);
  std::vector<std::array<double, 4>> out;
  out.reserve(rows.size());
  for (const auto& r : rows)
    out.push_back({parse_double(r[0], path), parse_double(r[1], path), parse_double(r[2], path),
                   parse_double(r[3], path)});
  return out;
}

void write_events_csv(const std::vector<KickEvent>& events, const std::string& path) {
  std::string body = "t,side,p_pre,p_post\n";
  for (const auto& ev : events) {
    body += format_float(ev.t);
    body += ',';
    body += std::to_string(ev.side);
    body += ',';
    body += format_float(ev.pre.p);
    body += ',';
    body += format_float(ev.post.p);
    body += '\n';
  }
  write_file(path, body);
}

std::vector<EventRow> read_events_csv(const std::string& path) {
  const auto rows = read_csv(path, "t,side,p_pre,p_post", 4);
  std::vector<EventRow> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    EventRow ev;
    ev.t = parse_double(r[0], path);
    ev.side = static_cast<int>(parse_double(r[1], path));
    ev.p_pre = parse_double(r[2], path);
    ev.p_post = parse_double(r[3], path);
    out.push_back(ev);
  }
  return out;
}

void write_gridfield_csv(const GridField& f, const std::string& path) {
  std::string body = "theta,p,re,im,status\n";
  body.reserve(body.size() + f.values.size() * 90);
  for (std::size_t i = 0; i < f.n_theta(); ++i)
    for (std::size_t j = 0; j < f.n_p(); ++j) {
      const auto& v = f.at(i, j);
      body += format_float(f.theta_axis[i]);
      body += ',';
      body += format_float(f.p_axis[j]);
      body += ',';
      body += format_float(v.real());
      body += ',';
      body += format_float(v.imag());
      body += ',';
      body += to_string(f.status_at(i, j));
      body += '\n';
    }
  write_file(path, body);
}

namespace {

/// Shared shape recovery for the two grid CSV layouts: the p axis is the
/// leading run of rows with the first row's theta, everything after follows
/// row-major.
GridField grid_from_rows(const std::vector<std::vector<std::string>>& rows, std::size_t value_cols,
                         const std::string& path) {
  if (rows.empty()) throw IoError("empty grid in " + path);
  GridField f;
  const double theta0 = parse_double(rows[0][0], path);
  std::size_t n_p = 0;
  while (n_p < rows.size() && parse_double(rows[n_p][0], path) == theta0) ++n_p;
  if (rows.size() % n_p != 0) throw IoError("ragged grid in " + path);
  const std::size_t n_theta = rows.size() / n_p;

  f.p_axis.resize(n_p);
  for (std::size_t j = 0; j < n_p; ++j) f.p_axis[j] = parse_double(rows[j][1], path);
  f.theta_axis.resize(n_theta);
  f.values.resize(rows.size());
  f.status.resize(rows.size());
  for (std::size_t i = 0; i < n_theta; ++i) {
    f.theta_axis[i] = parse_double(rows[i * n_p][0], path);
    for (std::size_t j = 0; j < n_p; ++j) {
      const auto& r = rows[i * n_p + j];
      if (parse_double(r[0], path) != f.theta_axis[i] || parse_double(r[1], path) != f.p_axis[j])
        throw IoError("grid rows out of order in " + path);
      const double re = parse_double(r[2], path);
      const double im = value_cols == 2 ? parse_double(r[3], path) : 0.0;
      f.values[f.index(i, j)] = {re, im};
      f.status[f.index(i, j)] = status_from(r[2 + value_cols], path);
    }
  }
  return f;
}

}  // namespace

GridField read_gridfield_csv(const std::string& path) {
  return grid_from_rows(read_csv(path, "theta,p,re,im,status", 5), 2, path);
}

void write_basin_csv(const GridField& f, const std::string& path) {
  std::string body = "theta,p,label,status\n";
  body.reserve(body.size() + f.values.size() * 70);
  for (std::size_t i = 0; i < f.n_theta(); ++i)
    for (std::size_t j = 0; j < f.n_p(); ++j) {
      body += format_float(f.theta_axis[i]);
      body += ',';
      body += format_float(f.p_axis[j]);
      body += ',';
      body += format_float(f.at(i, j).real());
      body += ',';
      body += to_string(f.status_at(i, j));
      body += '\n';
    }
  write_file(path, body);
}

GridField read_basin_csv(const std::string& path) {
  return grid_from_rows(read_csv(path, "theta,p,label,status", 4), 1, path);
}

void write_sidecar_json(const GridField& f, double wall_time_s, const std::string& path) {
  std::string body = "{\n";
  for (const auto& [key, value] : f.meta) {
    body += "  ";
    body += json_escape(key);
    body += ": ";
    body += json_escape(value);
    body += ",\n";
  }
  body += "  \"wall_time_s\": " + json_number(wall_time_s) + "\n}\n";
  write_file(path, body);
}

Sidecar read_sidecar_json(const std::string& path) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(slurp(path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad JSON in " + path + ": " + e.what());
  }
  Sidecar sc;
  for (const auto& [key, value] : j.items()) {
    if (key == "wall_time_s")
      sc.wall_time_s = number_or_nan(value);
    else
      sc.meta.emplace_back(key, value.get<std::string>());
  }
  return sc;
}

void write_fourier_json(const FourierTable& table, const std::string& path) {
  std::string body = "[\n";
  for (std::size_t n = 0; n < table.rows.size(); ++n) {
    const auto& row = table.rows[n];
    body += "  {\"I\": " + json_number(row.I);
    body += ", \"Omega\": " + json_number(row.Omega);
    body += ", \"P\": " + json_number(row.P);
    body += ", \"re_g\": [";
    for (std::size_t m = 0; m < row.g.size(); ++m) {
      if (m) body += ", ";
      body += json_number(row.g[m].real());
    }
    body += "], \"im_g\": [";
    for (std::size_t m = 0; m < row.g.size(); ++m) {
      if (m) body += ", ";
      body += json_number(row.g[m].imag());
    }
    body += "]}";
    body += n + 1 < table.rows.size() ? ",\n" : "\n";
  }
  body += "]\n";
  write_file(path, body);
}

FourierTable read_fourier_json(const std::string& path) {
  const auto j = parse_json(path);
  if (!j.is_array()) throw IoError("expected a top-level array in " + path);
  FourierTable table;
  for (const auto& item : j) {
    FourierRow row;
    row.I = number_or_nan(item.at("I"));
    row.Omega = number_or_nan(item.at("Omega"));
    row.P = number_or_nan(item.at("P"));
    const auto& re = item.at("re_g");
    const auto& im = item.at("im_g");
    if (re.size() != im.size() || re.size() % 2 == 0)
      throw IoError("re_g/im_g must share an odd length in " + path);
    row.g.resize(re.size());
    for (std::size_t m = 0; m < re.size(); ++m)
      row.g[m] = {number_or_nan(re[m]), number_or_nan(im[m])};
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_dissipation_json(const DissipationReport& report, const std::string& path) {
  std::string body = "{\n  \"k\": " + json_number(report.k) + ",\n  \"samples\": [\n";
  for (std::size_t i = 0; i < report.samples.size(); ++i) {
    body += "    {\"H_in\": " + json_number(report.samples[i].H_in);
    body += ", \"H_out\": " + json_number(report.samples[i].H_out) + "}";
    body += i + 1 < report.samples.size() ? ",\n" : "\n";
  }
  body += "  ],\n";
  body += "  \"r\": " + json_number(report.model.r) + ",\n";
  body += "  \"delta\": " + json_number(report.model.delta) + ",\n";
  body += "  \"fit_residual\": " + json_number(report.model.fit_residual) + "\n}\n";
  write_file(path, body);
}

DissipationReport read_dissipation_json(const std::string& path) {
  const auto j = parse_json(path);
  DissipationReport report;
  report.k = number_or_nan(j.at("k"));
  for (const auto& s : j.at("samples"))
    report.samples.push_back({number_or_nan(s.at("H_in")), number_or_nan(s.at("H_out")), report.k});
  report.model.r = number_or_nan(j.at("r"));
  report.model.delta = number_or_nan(j.at("delta"));
  report.model.fit_residual = number_or_nan(j.at("fit_residual"));
  return report;
}

void write_energy_map_json(const EnergyMapReport& report, const std::string& path) {
  std::string body = "{\n  \"r\": " + json_number(report.r) + ",\n";
  body += "  \"H_fp\": " + json_number(report.H_fp) + ",\n";
  body += "  \"slope\": " + json_number(report.slope) + ",\n";
  body += "  \"escape_table\": [\n";
  for (std::size_t i = 0; i < report.escape_table.size(); ++i) {
    const auto& [H0, n] = report.escape_table[i];
    body += "    {\"H0\": " + json_number(H0) + ", \"n\": ";
    body += n ? std::to_string(*n) : std::string("null");
    body += "}";
    body += i + 1 < report.escape_table.size() ? ",\n" : "\n";
  }
  body += "  ]\n}\n";
  write_file(path, body);
}

EnergyMapReport read_energy_map_json(const std::string& path) {
  const auto j = parse_json(path);
  EnergyMapReport report;
  report.r = number_or_nan(j.at("r"));
  report.H_fp = number_or_nan(j.at("H_fp"));
  report.slope = number_or_nan(j.at("slope"));
  for (const auto& e : j.at("escape_table")) {
    std::optional<int> n;
    if (!e.at("n").is_null()) n = e.at("n").get<int>();
    report.escape_table.emplace_back(number_or_nan(e.at("H0")), n);
  }
  return report;
}

}  // namespace kickpend
