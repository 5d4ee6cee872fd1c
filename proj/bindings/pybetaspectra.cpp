#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "betaspectra/experiments.hpp"
#include "betaspectra/gbeta.hpp"
#include "betaspectra/potential.hpp"
#include "betaspectra/prufer.hpp"
#include "betaspectra/rng.hpp"
#include "betaspectra/sde.hpp"
#include "betaspectra/statistics.hpp"

namespace py = pybind11;
using namespace betaspectra;

PYBIND11_MODULE(_betaspectra, m) {
    m.doc() = "Level statistics of 1-D random Schrodinger operators, their limit SDEs, "
              "and the Gaussian beta ensemble";

    m.attr("PI") = kPi;
    m.attr("SQRT2") = kSqrt2;

    py::class_<PotentialShape>(m, "PotentialShape")
        .def(py::init<int, double>(), py::arg("mode") = 1, py::arg("amplitude") = kSqrt2)
        .def_readwrite("mode", &PotentialShape::mode)
        .def_readwrite("amplitude", &PotentialShape::amplitude)
        .def("value", &PotentialShape::value);

    py::class_<DrivingPath>(m, "DrivingPath")
        .def_readonly("step", &DrivingPath::step)
        .def_readonly("duration", &DrivingPath::duration)
        .def_readonly("increments", &DrivingPath::increments)
        .def_readonly("positions", &DrivingPath::positions)
        .def("position_at", &DrivingPath::position_at);

    py::class_<PotentialModel>(m, "PotentialModel")
        .def_static("coupling", &PotentialModel::coupling, py::arg("alpha"), py::arg("length"),
                    py::arg("shape") = PotentialShape{})
        .def_static("decaying", &PotentialModel::decaying, py::arg("shape") = PotentialShape{})
        .def_static("decaying_reversed", &PotentialModel::decaying_reversed, py::arg("horizon"),
                    py::arg("shape") = PotentialShape{})
        .def("envelope", &PotentialModel::envelope);

    py::class_<ModelConstants>(m, "ModelConstants")
        .def_readonly("e0", &ModelConstants::e0)
        .def_readonly("kappa0", &ModelConstants::kappa0)
        .def_readonly("c_e0", &ModelConstants::c_e0)
        .def_readonly("c_0", &ModelConstants::c_0)
        .def_readonly("fg_inner", &ModelConstants::fg_inner)
        .def_readonly("beta", &ModelConstants::beta)
        .def_readonly("d_e0", &ModelConstants::d_e0)
        .def("to_json", &ModelConstants::to_json)
        .def_static("from_json", &ModelConstants::from_json);

    m.def("sample_driving_path", &sample_driving_path, py::arg("seed"), py::arg("duration"),
          py::arg("step"));
    m.def("potential_at", &potential_at, py::arg("path"), py::arg("model"), py::arg("t"));
    m.def("resolvent_coefficient", &resolvent_coefficient, py::arg("shape"), py::arg("kappa"));
    m.def("compute_constants", &compute_constants, py::arg("shape"), py::arg("e0"));
    m.def("solve_energy_for_beta", &solve_energy_for_beta, py::arg("shape"),
          py::arg("beta_target"));
    m.def("trial_seed", &trial_seed, py::arg("base_seed"), py::arg("trial_index"));

    py::class_<PruferPath>(m, "PruferPath")
        .def_readonly("kappa", &PruferPath::kappa)
        .def_readonly("mesh", &PruferPath::mesh)
        .def_readonly("theta", &PruferPath::theta)
        .def_readonly("log_r", &PruferPath::log_r);

    py::class_<SpectrumWindow>(m, "SpectrumWindow")
        .def_readonly("e0", &SpectrumWindow::e0)
        .def_readonly("length", &SpectrumWindow::length)
        .def_readonly("window", &SpectrumWindow::window)
        .def_readonly("atoms", &SpectrumWindow::atoms)
        .def_readonly("kappas", &SpectrumWindow::kappas)
        .def_readonly("boundary_phase_m", &SpectrumWindow::boundary_phase_m)
        .def_readonly("boundary_phase_phi", &SpectrumWindow::boundary_phase_phi)
        .def_readonly("theta_lo", &SpectrumWindow::theta_lo)
        .def_readonly("theta_hi", &SpectrumWindow::theta_hi)
        .def_readonly("nonmonotone_flag", &SpectrumWindow::nonmonotone_flag);

    py::class_<SecondOrderSample>(m, "SecondOrderSample")
        .def_readonly("length", &SecondOrderSample::length)
        .def_readonly("alpha", &SecondOrderSample::alpha)
        .def_readonly("half_width", &SecondOrderSample::half_width)
        .def_readonly("values", &SecondOrderSample::values)
        .def("at", &SecondOrderSample::at);

    m.def("integrate_prufer", &integrate_prufer, py::arg("path"), py::arg("model"),
          py::arg("kappa"), py::arg("horizon"));
    m.def("boundary_phase", &boundary_phase, py::arg("path"), py::arg("model"), py::arg("kappa"),
          py::arg("length"));
    m.def(
        "decompose_phase",
        [](double theta) {
            const PhaseDecomposition d = decompose_phase(theta);
            return py::make_tuple(d.multiples, d.remainder);
        },
        py::arg("theta"));
    m.def("count_eigenvalues_below", &count_eigenvalues_below, py::arg("path"), py::arg("model"),
          py::arg("kappa"), py::arg("length"));
    m.def("locate_atoms", &locate_atoms, py::arg("path"), py::arg("model"), py::arg("e0"),
          py::arg("length"), py::arg("window"));
    m.def("choose_length", &choose_length, py::arg("e0"), py::arg("m"), py::arg("beta_phase"));
    m.def("second_order_spacings", &second_order_spacings, py::arg("window"), py::arg("alpha"),
          py::arg("half_width"));
    m.def("default_mesh_step", &default_mesh_step, py::arg("kappa0"));

    py::class_<NoiseBundle>(m, "NoiseBundle")
        .def_static("sample", &NoiseBundle::sample, py::arg("seed"), py::arg("steps"),
                    py::arg("step"))
        .def_readonly("step", &NoiseBundle::step)
        .def_readonly("z_re", &NoiseBundle::z_re)
        .def_readonly("z_im", &NoiseBundle::z_im)
        .def_readonly("b", &NoiseBundle::b);

    py::enum_<SdeKind>(m, "SdeKind")
        .value("schtau", SdeKind::schtau)
        .value("carousel", SdeKind::carousel)
        .value("sinebeta", SdeKind::sinebeta);

    py::class_<SdePath>(m, "SdePath")
        .def_readonly("kind", &SdePath::kind)
        .def_readonly("parameter", &SdePath::parameter)
        .def_readonly("mesh", &SdePath::mesh)
        .def_readonly("psi", &SdePath::psi)
        .def("end_time", &SdePath::end_time)
        .def("end_value", &SdePath::end_value);

    m.def("schtau_drift_constant", &schtau_drift_constant);
    m.def(
        "simulate_schtau",
        [](const ModelConstants& constants, const std::vector<double>& cs,
           const NoiseBundle& noise, double horizon) {
            return simulate_schtau(constants, cs, noise, horizon);
        },
        py::arg("constants"), py::arg("cs"), py::arg("noise"), py::arg("horizon") = 1.0);
    m.def("schtau_atoms", &schtau_atoms, py::arg("paths"), py::arg("beta_phase"));
    m.def(
        "simulate_carousel",
        [](double d_coeff, const std::vector<double>& lambdas, const NoiseBundle& noise,
           double delta_cutoff, double h0) {
            return simulate_carousel(d_coeff, lambdas, noise, delta_cutoff, h0);
        },
        py::arg("d_coeff"), py::arg("lambdas"), py::arg("noise"),
        py::arg("delta_cutoff") = 1e-4, py::arg("h0") = 1e-3);
    m.def(
        "simulate_sine_beta",
        [](double beta, const std::vector<double>& lambdas, const NoiseBundle& noise,
           double horizon) { return simulate_sine_beta(beta, lambdas, noise, horizon); },
        py::arg("beta"), py::arg("lambdas"), py::arg("noise"), py::arg("horizon"));
    m.def("carousel_steps", &carousel_steps, py::arg("h0"), py::arg("delta_cutoff"));
    m.def("sine_beta_min_horizon", &sine_beta_min_horizon, py::arg("beta"));
    m.def("carousel_time_change", &carousel_time_change, py::arg("t"), py::arg("beta"));
    m.def("carousel_time_change_inverse", &carousel_time_change_inverse, py::arg("s"),
          py::arg("beta"));
    m.def(
        "counting_from_phase",
        [](double psi) {
            const PhaseCount pc = counting_from_phase(psi);
            return py::make_tuple(pc.count, pc.residual);
        },
        py::arg("psi_end"));
    m.def("carousel_atoms", &carousel_atoms, py::arg("d_coeff"), py::arg("lambda_max"),
          py::arg("noise"), py::arg("delta_cutoff") = 1e-4, py::arg("h0") = 1e-3);

    py::class_<TridiagonalMatrix>(m, "TridiagonalMatrix")
        .def_readonly("n", &TridiagonalMatrix::n)
        .def_readonly("diag", &TridiagonalMatrix::diag)
        .def_readonly("offdiag", &TridiagonalMatrix::offdiag);

    py::class_<BulkSample>(m, "BulkSample")
        .def_readonly("n", &BulkSample::n)
        .def_readonly("mu", &BulkSample::mu)
        .def_readonly("atoms", &BulkSample::atoms)
        .def_readonly("halved", &BulkSample::halved)
        .def_readonly("edge_warning", &BulkSample::edge_warning);

    m.def("sample_gbeta_tridiagonal", &sample_gbeta_tridiagonal, py::arg("n"), py::arg("beta"),
          py::arg("seed"));
    m.def("sturm_count_below", &sturm_count_below, py::arg("matrix"), py::arg("shift"));
    m.def("tridiagonal_eigenvalues", &tridiagonal_eigenvalues, py::arg("matrix"), py::arg("tol"));
    m.def("default_eig_tol", &default_eig_tol, py::arg("n"));
    m.def(
        "bulk_rescale",
        [](const std::vector<double>& eigs, int n, double mu) {
            return bulk_rescale(eigs, n, mu);
        },
        py::arg("eigs"), py::arg("n"), py::arg("mu"));

    py::class_<AtomBatch>(m, "AtomBatch")
        .def(py::init([](std::string source, std::vector<std::vector<double>> samples) {
                 return AtomBatch{std::move(source), std::move(samples)};
             }),
             py::arg("source"), py::arg("samples"))
        .def_readwrite("source", &AtomBatch::source)
        .def_readwrite("samples", &AtomBatch::samples);

    m.def(
        "gaps_near_zero",
        [](const AtomBatch& batch, int count) {
            const GapSample g = gaps_near_zero(batch, count);
            return py::make_tuple(g.gaps, g.skip_rate);
        },
        py::arg("batch"), py::arg("count"));
    m.def("counting", &counting, py::arg("batch"), py::arg("lambda_"));
    m.def("ks_distance", &ks_distance, py::arg("a"), py::arg("b"));
    m.def("phase_uniformity", &phase_uniformity, py::arg("phases"));

    py::class_<ExperimentConfig>(m, "ExperimentConfig")
        .def_static("defaults_for", &ExperimentConfig::defaults_for)
        .def_static("from_json", &ExperimentConfig::from_json)
        .def("to_json", &ExperimentConfig::to_json)
        .def_readwrite("experiment", &ExperimentConfig::experiment)
        .def_readwrite("trials", &ExperimentConfig::trials)
        .def_readwrite("base_seed", &ExperimentConfig::base_seed)
        .def_readwrite("workers", &ExperimentConfig::workers)
        .def_readwrite("amplitude", &ExperimentConfig::amplitude)
        .def_readwrite("out_dir", &ExperimentConfig::out_dir);

    m.def(
        "run_experiment",
        [](const ExperimentConfig& cfg) {
            const ExperimentResult r = run_experiment(cfg);
            return py::make_tuple(r.report_json, r.exit_code, r.passed, r.flag_rate);
        },
        py::arg("config"));
    m.def("emit_plotdata", &emit_plotdata, py::arg("report_json"), py::arg("out_dir"));
}
