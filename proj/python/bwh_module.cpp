#include <sstream>

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bwh/effective.hpp"
#include "bwh/evolution.hpp"
#include "bwh/perturbation.hpp"
#include "bwh/report.hpp"
#include "bwh/stochastic.hpp"
#include "cli.hpp"

namespace py = pybind11;
using namespace bwh;

namespace {

VecR theta_or_zero(const std::optional<VecR>& t, int dim) { return t ? *t : VecR::Zero(dim); }

py::dict critical_dict(const CriticalResult& r) {
  py::dict d;
  d["theta_star"] = r.point.theta;
  d["lambda_star"] = r.point.lambda;
  d["band"] = r.point.band;
  d["iterations"] = r.iterations;
  d["grad_norm"] = r.grad_norm;
  return d;
}

struct Series {
  CellMedium medium;
  FourierLattice lat;
  BandPoint point;
  PerturbationSeries series;
  BumpDisplacement z;
};

Series make_series(const CellMedium& m, const std::string& deformation, double eta, int cutoff) {
  DeformationConfig def = deformation_from_json(json::parse(deformation), m.dim, 0);
  FourierLattice lat = build_lattice(m.dim, cutoff);
  CellForm f = form_from_medium(m, lat);
  BandPoint p = find_critical(f, 0, VecR::Zero(m.dim)).point;
  PerturbedIdentityOptions po;
  po.cutoff = cutoff;
  po.medium = &m;
  DeformationSpec spec = build_perturbed_identity(def.z, eta, po);
  AuxiliaryFields aux = first_auxiliary(f, p);
  CorrectorFields corr = first_order_correctors(m, lat, p, aux, spec.stats);
  return {m, lat, p, quasi_perfect_series(m, lat, p, aux, corr, spec.stats), def.z};
}

}  // namespace

PYBIND11_MODULE(_bwh, mod) {
  mod.doc() = "Bloch wave homogenization studies";

  py::register_exception<ConfigError>(mod, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(mod, "NumericalError", PyExc_ArithmeticError);

  py::class_<CellMedium>(mod, "CellMedium")
      .def_readonly("dim", &CellMedium::dim)
      .def_readonly("coercivity", &CellMedium::coercivity)
      .def("shifted_V", &CellMedium::shifted_V, py::arg("c"));

  mod.def("free_medium", &free_medium, py::arg("dim"), py::arg("cutoff") = 2);
  mod.def("mathieu_medium", &mathieu_medium, py::arg("dim"), py::arg("cutoff") = 2, py::arg("v_amp") = 1.0);
  mod.def(
      "medium_from_json", [](const std::string& text) { return medium_from_json(json::parse(text)); },
      py::arg("text"));

  mod.def(
      "bands",
      [](const CellMedium& m, const VecR& theta, int cutoff, int count) {
        std::vector<double> out;
        for (const auto& b : lowest_bands(assemble_periodic(m, theta, build_lattice(m.dim, cutoff)), count))
          out.push_back(b.lambda);
        return out;
      },
      py::arg("medium"), py::arg("theta"), py::arg("cutoff") = 16, py::arg("count") = 3);

  mod.def(
      "critical",
      [](const CellMedium& m, int cutoff, int band, std::optional<VecR> theta) {
        return critical_dict(find_critical(m, build_lattice(m.dim, cutoff), band, theta_or_zero(theta, m.dim)));
      },
      py::arg("medium"), py::arg("cutoff") = 16, py::arg("band") = 0, py::arg("theta") = py::none());

  mod.def(
      "effective",
      [](const CellMedium& m, int cutoff, int band, std::optional<VecR> theta) {
        FourierLattice lat = build_lattice(m.dim, cutoff);
        CellForm f = form_from_medium(m, lat);
        BandPoint p = find_critical(f, band, theta_or_zero(theta, m.dim)).point;
        EffectiveCoefficients e = effective_coefficients(f, p, first_auxiliary(f, p));
        py::dict d;
        d["theta_star"] = e.theta_star;
        d["lambda_star"] = e.lambda_star;
        d["A_star"] = e.A_star;
        d["A_fd"] = e.A_fd;
        d["A_sac"] = e.A_sac;
        d["B"] = e.B;
        d["U_star"] = e.U_star;
        d["route_discrepancy"] = e.route_discrepancy;
        return d;
      },
      py::arg("medium"), py::arg("cutoff") = 16, py::arg("band") = 0, py::arg("theta") = py::none());

  mod.def(
      "perturbation_series",
      [](const CellMedium& m, const std::string& deformation, double eta, int cutoff) {
        Series s = make_series(m, deformation, eta, cutoff);
        py::dict d;
        d["lambda1"] = s.series.lambda1;
        d["theta1"] = s.series.theta1;
        d["A0"] = s.series.A0;
        d["A1"] = s.series.A1;
        d["U0"] = s.series.U0;
        d["U1"] = s.series.U1;
        return d;
      },
      py::arg("medium"), py::arg("deformation"), py::arg("eta") = 0.02, py::arg("cutoff") = 16);

  mod.def(
      "supercell_oracle",
      [](const CellMedium& m, const std::string& deformation, const std::vector<double>& etas, int cutoff) {
        Series s = make_series(m, deformation, *std::max_element(etas.begin(), etas.end()), cutoff);
        OracleOptions oo;
        oo.cutoff = cutoff;
        OracleTable t = supercell_oracle(m, s.z, etas, 0, s.point.theta, s.series, oo);
        std::vector<double> lam, rl, ra;
        for (const auto& r : t.rows) {
          lam.push_back(r.lambda);
          rl.push_back(r.lambda_remainder);
          ra.push_back(r.A_remainder);
        }
        py::dict d;
        d["lambda"] = lam;
        d["lambda_remainder"] = rl;
        d["A_remainder"] = ra;
        d["slope_lambda"] = t.slope_lambda;
        d["slope_A"] = t.slope_A;
        return d;
      },
      py::arg("medium"), py::arg("deformation"), py::arg("etas"), py::arg("cutoff") = 16);

  mod.def(
      "track_branches",
      [](const std::vector<std::pair<MultiIndex, MatC>>& coeffs, double lambda0, int h,
         const std::vector<VecR>& samples) {
        MatrixSeries s;
        s.d = coeffs.empty() ? 0 : static_cast<int>(coeffs.front().second.rows());
        s.nvars = coeffs.empty() ? 1 : static_cast<int>(coeffs.front().first.size());
        for (const auto& [a, A] : coeffs) s.add(a, A);
        BranchResult r = track_branches(s, lambda0, h, samples);
        std::vector<std::vector<double>> lam;
        for (const auto& x : r.samples) lam.push_back(x.lambda);
        py::dict d;
        d["lambda"] = lam;
        d["lipschitz"] = r.lipschitz;
        d["radius"] = r.radius;
        d["window"] = r.window;
        return d;
      },
      py::arg("coefficients"), py::arg("lambda0"), py::arg("multiplicity"), py::arg("samples"));

  mod.def(
      "corrector_study",
      [](const CellMedium& m, double eps, double T, double L, double sigma) {
        EvolutionConfig cfg;
        cfg.eps = eps;
        cfg.T = T;
        cfg.L = L;
        CorrectorRun r = corrector_study(m, cfg, gaussian_envelope({L / 2}, sigma));
        py::dict d;
        d["error"] = r.error;
        d["mass_drift"] = r.mass_drift;
        d["A_star"] = r.cell.A_star;
        d["U_star"] = r.cell.U_star;
        d["steps"] = r.steps;
        return d;
      },
      py::arg("medium"), py::arg("eps"), py::arg("T") = 0.05, py::arg("L") = 12.0, py::arg("sigma") = 1.0);

  mod.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
