#include "ductsr/flow.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace ductsr {

void DuctGeometry::validate() const {
  if (!(length > 0.0) || !(height > 0.0) || !(width > 0.0))
    throw Error("duct dimensions must be positive");
}

double CrossSection::y_at(int j) const {
  const double h = geometry.height / (ny - 1);
  return -geometry.height / 2.0 + j * h;
}

double CrossSection::z_at(int k) const {
  const double h = geometry.width / (nz - 1);
  return -geometry.width / 2.0 + k * h;
}

CrossSection solve_cross_section(double c, const DuctGeometry& geometry, int ny, int nz,
                                 double tol, long max_iterations) {
  geometry.validate();
  if (!(c < 0.0)) throw Error("pressure gradient c must be negative");
  if (ny < 17 || nz < 17 || ny % 2 == 0 || nz % 2 == 0)
    throw Error("grid sizes must be odd and at least 17");
  if (!(tol > 0.0)) throw Error("solver tolerance must be positive");

  CrossSection cs;
  cs.c = c;
  cs.geometry = geometry;
  cs.ny = ny;
  cs.nz = nz;
  cs.u.assign(static_cast<std::size_t>(ny) * nz, 0.0);

  const double hy = geometry.height / (ny - 1);
  const double hz = geometry.width / (nz - 1);
  const double ay = 1.0 / (hy * hy);
  const double az = 1.0 / (hz * hz);
  const double diag = 2.0 * (ay + az);

  // optimal over-relaxation factor for the 5-point Laplacian on a rectangle
  const double pi = std::numbers::pi;
  const double rho_jacobi =
      (ay * std::cos(pi / (ny - 1)) + az * std::cos(pi / (nz - 1))) / (ay + az);
  const double omega = 2.0 / (1.0 + std::sqrt(1.0 - rho_jacobi * rho_jacobi));

  const auto max_residual = [&]() {
    double res = 0.0;
    for (int j = 1; j < ny - 1; ++j) {
      const double* row = cs.u.data() + static_cast<std::size_t>(j) * nz;
      const double* up = row - nz;
      const double* dn = row + nz;
      for (int k = 1; k < nz - 1; ++k) {
        const double r =
            ay * (up[k] + dn[k] - 2.0 * row[k]) + az * (row[k - 1] + row[k + 1] - 2.0 * row[k]) - c;
        res = std::max(res, std::fabs(r));
      }
    }
    return res;
  };

  const double target = tol * std::fabs(c);
  double res = 0.0;
  long sweep = 0;
  const long check_every = 16;
  std::vector<double> recent;  // residuals at the last few checks
  for (; sweep < max_iterations; ++sweep) {
    for (int j = 1; j < ny - 1; ++j) {
      double* row = cs.u.data() + static_cast<std::size_t>(j) * nz;
      const double* up = row - nz;
      const double* dn = row + nz;
      for (int k = 1; k < nz - 1; ++k) {
        const double gs = (ay * (up[k] + dn[k]) + az * (row[k - 1] + row[k + 1]) - c) / diag;
        row[k] += omega * (gs - row[k]);
      }
    }
    if (sweep % check_every != check_every - 1) continue;
    res = max_residual();
    if (res <= target) break;
    // near the target a healthy SOR sweep still shrinks the residual fast; a
    // flat tail means the tolerance sits below the round-off floor of this
    // grid and no number of sweeps will reach it
    recent.push_back(res);
    if (recent.size() > 11) recent.erase(recent.begin());
    if (res < 1e4 * target && recent.size() == 11 && res > 0.9 * recent.front()) {
      char msg[160];
      std::snprintf(msg, sizeof msg,
                    "cross-section solve stagnated at residual %.3e above the requested %.3e "
                    "(tolerance below the attainable precision of this grid)",
                    res, target);
      throw SolverError(msg, res);
    }
  }
  res = max_residual();
  if (res > target) {
    char msg[128];
    std::snprintf(msg, sizeof msg, "cross-section solve did not converge after %ld sweeps "
                  "(residual %.3e)", max_iterations, res);
    throw SolverError(msg, res);
  }

  cs.iterations = sweep + 1;
  cs.residual = res;
  cs.u_max = *std::max_element(cs.u.begin(), cs.u.end());
  cs.re = compute_re(cs);
  return cs;
}

double series_reference(double c, double y, double z, int n_terms, const DuctGeometry& geometry) {
  geometry.validate();
  if (n_terms < 25) throw Error("series_reference needs at least 25 terms");
  const double a = geometry.height / 2.0;
  const double b = geometry.width / 2.0;
  if (std::fabs(y) > a || std::fabs(z) > b)
    throw Error("point lies outside the duct cross-section");

  const double pi = std::numbers::pi;
  // cosh(p)/cosh(q) for |p| <= q without overflow
  const auto cosh_ratio = [](double p, double q) {
    p = std::fabs(p);
    return std::exp(p - q) * (1.0 + std::exp(-2.0 * p)) / (1.0 + std::exp(-2.0 * q));
  };

  double sum = 0.0;
  for (int k = 0; k < n_terms; ++k) {
    const double i = 2.0 * k + 1.0;
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    const double alpha = i * pi / (2.0 * a);
    sum += sign / (i * i * i) * (1.0 - cosh_ratio(alpha * z, alpha * b)) * std::cos(alpha * y);
  }
  return -c * 16.0 * a * a / (pi * pi * pi) * sum;
}

double compute_re(const CrossSection& cs) {
  const double hy = cs.geometry.height / (cs.ny - 1);
  const double hz = cs.geometry.width / (cs.nz - 1);
  double sum = 0.0;
  for (int j = 0; j < cs.ny; ++j) {
    const double wy = (j == 0 || j == cs.ny - 1) ? hy / 2.0 : hy;
    double row = 0.0;
    for (int k = 0; k < cs.nz; ++k) {
      const double wz = (k == 0 || k == cs.nz - 1) ? hz / 2.0 : hz;
      row += wz * cs.at(j, k);
    }
    sum += wy * row;
  }
  return sum;
}

double pressure_field(double c, const DuctGeometry& geometry, double x) {
  geometry.validate();
  if (x < 0.0 || x > geometry.length)
    throw Error("axial position " + std::to_string(x) + " is outside [0, " +
                std::to_string(geometry.length) + "]");
  return c * (x - geometry.length);
}

std::vector<double> default_train_gradients() {
  return {-1000.0, -3000.0, -5000.0, -6000.0, -8000.0};
}

std::vector<double> default_test_gradients() {
  return {-2000.0, -4000.0, -6000.0, -7000.0};
}

namespace {

void append_case_records(std::vector<FlowRecord>& out, const CrossSection& cs, int nx) {
  const DuctGeometry& g = cs.geometry;
  for (int i = 0; i < nx; ++i) {
    const double x = g.length * i / (nx - 1);
    const double p = pressure_field(cs.c, g, x);
    for (int j = 0; j < cs.ny; ++j) {
      const double y = cs.y_at(j);
      for (int k = 0; k < cs.nz; ++k) {
        out.push_back(FlowRecord{x, y, cs.z_at(k), cs.re, cs.at(j, k), p});
      }
    }
  }
}

}  // namespace

FlowDataset assemble_dataset(const DuctGeometry& geometry, const std::vector<double>& c_train,
                             const std::vector<double>& c_test, int nx, int ny, int nz,
                             double tol) {
  if (c_train.empty() || c_test.empty()) throw Error("pressure-gradient sweeps must be non-empty");
  if (nx < 2) throw Error("at least two axial stations are required");

  // one solve per distinct gradient; |c| ascending keeps the case table
  // ordered by Reynolds number
  std::map<double, CrossSection, std::greater<double>> sections;  // c: -1000 before -8000
  for (double c : c_train) sections.emplace(c, CrossSection{});
  for (double c : c_test) sections.emplace(c, CrossSection{});
  FlowDataset ds;
  for (auto& [c, cs] : sections) {
    cs = solve_cross_section(c, geometry, ny, nz, tol);
    ds.cases.push_back(FlowCase{c, cs.re, cs.u_max});
  }

  auto emit = [&](const std::vector<double>& sweep, std::vector<FlowRecord>& out) {
    std::vector<double> ordered = sweep;
    std::sort(ordered.begin(), ordered.end(), std::greater<double>());
    for (double c : ordered) append_case_records(out, sections.at(c), nx);
  };
  emit(c_train, ds.train);
  emit(c_test, ds.test);
  return ds;
}

namespace {

void append_number(std::string& out, double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  out.append(buf, end);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError(path, "cannot open for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw IoError(path, "write failed");
}

}  // namespace

void write_records_csv(const std::vector<FlowRecord>& records, const std::string& path) {
  std::string out = "x,y,z,re,u,p\n";
  out.reserve(out.size() + records.size() * 48);
  for (const FlowRecord& r : records) {
    append_number(out, r.x);
    out.push_back(',');
    append_number(out, r.y);
    out.push_back(',');
    append_number(out, r.z);
    out.push_back(',');
    append_number(out, r.re);
    out.push_back(',');
    append_number(out, r.u);
    out.push_back(',');
    append_number(out, r.p);
    out.push_back('\n');
  }
  write_text(path, out);
}

std::vector<FlowRecord> read_records_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(path, "cannot open for reading");
  std::string line;
  if (!std::getline(f, line)) throw IoError(path, "empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "x,y,z,re,u,p") throw IoError(path, "unexpected header '" + line + "'");

  std::vector<FlowRecord> records;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    double fields[6];
    const char* p = line.data();
    const char* end = line.data() + line.size();
    for (int i = 0; i < 6; ++i) {
      auto [next, ec] = std::from_chars(p, end, fields[i]);
      if (ec != std::errc())
        throw IoError(path, "bad number on line " + std::to_string(lineno));
      p = next;
      if (i < 5) {
        if (p >= end || *p != ',')
          throw IoError(path, "expected ',' on line " + std::to_string(lineno));
        ++p;
      }
    }
    if (p != end) throw IoError(path, "trailing data on line " + std::to_string(lineno));
    records.push_back(FlowRecord{fields[0], fields[1], fields[2], fields[3], fields[4], fields[5]});
  }
  return records;
}

void write_cases_csv(const std::vector<FlowCase>& cases, const std::string& path) {
  std::string out = "c,re,u_max\n";
  for (const FlowCase& cse : cases) {
    append_number(out, cse.c);
    out.push_back(',');
    append_number(out, cse.re);
    out.push_back(',');
    append_number(out, cse.u_max);
    out.push_back('\n');
  }
  write_text(path, out);
}

void write_dataset_csv(const FlowDataset& ds, const std::string& directory) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(directory, ec);
  const fs::path dir(directory);
  write_records_csv(ds.train, (dir / "train.csv").string());
  write_records_csv(ds.test, (dir / "test.csv").string());
  write_cases_csv(ds.cases, (dir / "cases.csv").string());
}

}  // namespace ductsr
