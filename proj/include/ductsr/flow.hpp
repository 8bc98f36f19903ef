#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ductsr/errors.hpp"

namespace ductsr {

/// Non-dimensional duct (0,L) x (-H/2,H/2) x (-W/2,W/2).
struct DuctGeometry {
  double length = 5.0;
  double height = 1.0;
  double width = 1.0;

  void validate() const;
};

/// Fully developed axial velocity over one duct cross-section, solved for a
/// single pressure gradient c < 0. Node (j,k) sits at
/// (y_at(j), z_at(k)); boundary nodes are exactly zero.
struct CrossSection {
  double c = 0.0;
  DuctGeometry geometry;
  int ny = 0;
  int nz = 0;
  std::vector<double> u;  // row-major, ny*nz values
  double re = 0.0;
  double u_max = 0.0;
  long iterations = 0;
  double residual = 0.0;

  double at(int j, int k) const { return u[static_cast<std::size_t>(j) * nz + k]; }
  double& at(int j, int k) { return u[static_cast<std::size_t>(j) * nz + k]; }
  double y_at(int j) const;
  double z_at(int k) const;
};

/// Solves u_yy + u_zz = c on the cross-section with homogeneous Dirichlet
/// walls by 5-point finite differences and SOR iteration until the discrete
/// residual max-norm drops below tol*|c|. Grid sizes must be odd and >= 17 so
/// a node sits on the centerline. Fills re and u_max.
CrossSection solve_cross_section(double c, const DuctGeometry& geometry, int ny, int nz,
                                 double tol = 1e-10, long max_iterations = 1000000);

/// Classical cosine/hyperbolic-cosine series for fully developed laminar flow
/// in a rectangular duct, truncated after n_terms odd-index terms. Serves as
/// the independent reference for the finite-difference solver.
double series_reference(double c, double y, double z, int n_terms,
                        const DuctGeometry& geometry = DuctGeometry{});

/// Reynolds number: composite trapezoidal integral of u over the section.
double compute_re(const CrossSection& cs);

/// Linear pressure drop p(x) = c*(x - L), zero at the outlet.
double pressure_field(double c, const DuctGeometry& geometry, double x);

struct FlowRecord {
  double x = 0.0, y = 0.0, z = 0.0;
  double re = 0.0;
  double u = 0.0;
  double p = 0.0;
};

struct FlowCase {
  double c = 0.0;
  double re = 0.0;
  double u_max = 0.0;
};

struct FlowDataset {
  std::vector<FlowRecord> train;
  std::vector<FlowRecord> test;
  std::vector<FlowCase> cases;  // distinct pressure gradients, |c| ascending
};

/// Pressure-gradient sweeps reproducing the published Reynolds splits; the
/// c = -6000 case appears in both lists.
std::vector<double> default_train_gradients();
std::vector<double> default_test_gradients();

/// Solves one cross-section per distinct c, replicates it at nx axial
/// stations (u is independent of x in fully developed flow), pairs it with
/// the linear pressure field and tags records with the case Reynolds number.
FlowDataset assemble_dataset(const DuctGeometry& geometry, const std::vector<double>& c_train,
                             const std::vector<double>& c_test, int nx, int ny, int nz,
                             double tol = 1e-10);

void write_records_csv(const std::vector<FlowRecord>& records, const std::string& path);
std::vector<FlowRecord> read_records_csv(const std::string& path);
void write_cases_csv(const std::vector<FlowCase>& cases, const std::string& path);

/// Writes train.csv, test.csv and cases.csv into the directory.
void write_dataset_csv(const FlowDataset& ds, const std::string& directory);

}  // namespace ductsr
