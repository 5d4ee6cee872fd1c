#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "betaspectra/experiments.hpp"
#include "betaspectra/rng.hpp"
#include "json.hpp"

namespace bs = betaspectra;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// atoms.csv rows (seed,L,alpha,E0,atom_x,kappa) grouped by seed, in file order.
bs::AtomBatch read_atoms_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    bs::AtomBatch batch;
    batch.source = std::filesystem::path(path).stem().string();
    std::string line;
    std::getline(is, line);  // header
    std::map<std::string, std::size_t> index;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string seed, rest;
        std::getline(ss, seed, ',');
        std::vector<std::string> cols;
        while (std::getline(ss, rest, ',')) cols.push_back(rest);
        if (cols.size() < 4) continue;
        auto [it, inserted] = index.try_emplace(seed, batch.samples.size());
        if (inserted) batch.samples.emplace_back();
        batch.samples[it->second].push_back(std::stod(cols[3]));
    }
    return batch;
}

std::vector<double> read_column_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::vector<double> values;
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        values.push_back(std::stod(line));
    }
    return values;
}

int cmd_defaults(const std::string& experiment) {
    if (!experiment.empty()) {
        std::cout << bs::ExperimentConfig::defaults_for(experiment).to_json() << std::endl;
        return 0;
    }
    json out;
    for (const char* name : {"clock", "second_order", "schtau_compare", "carousel_vs_sineb",
                             "gbeta_coincidence", "phase_uniformity"}) {
        out[name] = json::parse(bs::ExperimentConfig::defaults_for(name).to_json());
    }
    std::cout << out.dump(2) << std::endl;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"betaspectra: level statistics of 1-D random Schrodinger operators, "
                 "limit SDEs, and the Gaussian beta ensemble"};
    app.require_subcommand(1);

    // ---- defaults ----
    auto* defaults_cmd = app.add_subcommand("defaults", "print experiment defaults as JSON");
    std::string defaults_experiment;
    defaults_cmd->add_option("--experiment", defaults_experiment, "single experiment to print");

    // ---- run ----
    auto* run_cmd = app.add_subcommand("run", "run a composite experiment");
    std::string run_experiment_name, run_config_path, run_out;
    long run_trials = -1;
    std::int64_t run_seed = -1;
    int run_workers = -1;
    double run_amplitude = -1.0;
    run_cmd->add_option("--experiment", run_experiment_name,
                        "clock|second_order|schtau_compare|carousel_vs_sineb|"
                        "gbeta_coincidence|phase_uniformity");
    run_cmd->add_option("--config", run_config_path, "JSON config file");
    run_cmd->add_option("--trials", run_trials, "override trial count");
    run_cmd->add_option("--seed", run_seed, "override base seed");
    run_cmd->add_option("--out", run_out, "override output directory");
    run_cmd->add_option("--workers", run_workers, "override worker count");
    run_cmd->add_option("--amplitude", run_amplitude, "override potential amplitude");

    // ---- simulate-operator ----
    auto* op_cmd = app.add_subcommand("simulate-operator",
                                      "locate xi_L atoms for the operator routes");
    std::string op_family = "coupling", op_out = "out";
    double op_alpha = 1.0, op_e0 = 1.0, op_beta_target = 0.0, op_beta_phase = 0.0;
    double op_length = 0.0, op_window = 4.0 * bs::kPi, op_h = 0.0, op_amplitude = bs::kSqrt2;
    int op_k = 1;
    long op_m = 600, op_trials = 1;
    std::uint64_t op_seed = 1;
    bool op_reversed = false;
    op_cmd->add_option("--family", op_family, "coupling|decaying")
        ->check(CLI::IsMember({"coupling", "decaying"}));
    op_cmd->add_option("--alpha", op_alpha, "coupling exponent");
    op_cmd->add_option("--e0", op_e0, "reference energy");
    op_cmd->add_option("--beta-target", op_beta_target, "solve E0 from beta when > 0");
    op_cmd->add_option("--k", op_k, "potential mode");
    op_cmd->add_option("--amplitude", op_amplitude, "potential amplitude");
    op_cmd->add_option("--m", op_m, "phase multiple for choose_length");
    op_cmd->add_option("--beta-phase", op_beta_phase, "phase offset in [0, pi)");
    op_cmd->add_option("--length", op_length, "explicit L (0: choose_length)");
    op_cmd->add_option("--window", op_window, "window half-width W");
    op_cmd->add_option("--mesh-step", op_h, "mesh step h (0: default)");
    op_cmd->add_option("--trials", op_trials, "number of seeds");
    op_cmd->add_option("--seed", op_seed, "base seed");
    op_cmd->add_option("--out", op_out, "output directory");
    op_cmd->add_flag("--reversed", op_reversed,
                     "use the reversed decaying envelope a(L - t) (diagnostic)");

    // ---- simulate-sde ----
    auto* sde_cmd = app.add_subcommand("simulate-sde", "simulate the limit SDEs");
    std::string sde_kind = "carousel", sde_out = "out";
    double sde_e0 = 1.0, sde_beta_target = 0.0, sde_h0 = 1e-3, sde_delta = 1e-4,
           sde_horizon = 0.0;
    int sde_k = 1;
    double sde_amplitude = bs::kSqrt2;
    long sde_trials = 100;
    std::uint64_t sde_seed = 1;
    std::vector<double> sde_params;
    sde_cmd->add_option("--kind", sde_kind, "schtau|carousel|sinebeta")
        ->check(CLI::IsMember({"schtau", "carousel", "sinebeta"}));
    sde_cmd->add_option("--e0", sde_e0, "reference energy");
    sde_cmd->add_option("--beta-target", sde_beta_target, "solve E0 from beta when > 0");
    sde_cmd->add_option("--k", sde_k, "potential mode");
    sde_cmd->add_option("--amplitude", sde_amplitude, "potential amplitude");
    sde_cmd->add_option("--params", sde_params, "c or lambda values")->expected(-1);
    sde_cmd->add_option("--h0", sde_h0, "base step");
    sde_cmd->add_option("--delta-cutoff", sde_delta, "carousel cutoff");
    sde_cmd->add_option("--horizon", sde_horizon, "sinebeta horizon (0: minimal + 2)");
    sde_cmd->add_option("--trials", sde_trials, "number of independent bundles");
    sde_cmd->add_option("--seed", sde_seed, "base seed");
    sde_cmd->add_option("--out", sde_out, "output directory");

    // ---- sample-gbeta ----
    auto* gb_cmd = app.add_subcommand("sample-gbeta", "sample the Gaussian beta ensemble");
    int gb_n = 400;
    double gb_beta = 2.0, gb_mu = 0.0, gb_tol = 0.0;
    long gb_trials = 100;
    std::uint64_t gb_seed = 1;
    std::string gb_out = "out";
    gb_cmd->add_option("--n", gb_n, "matrix size");
    gb_cmd->add_option("--beta", gb_beta, "ensemble beta");
    gb_cmd->add_option("--mu", gb_mu, "bulk center");
    gb_cmd->add_option("--tol", gb_tol, "eigenvalue tolerance (0: default)");
    gb_cmd->add_option("--trials", gb_trials, "number of matrices");
    gb_cmd->add_option("--seed", gb_seed, "base seed");
    gb_cmd->add_option("--out", gb_out, "output directory");

    // ---- stats ----
    auto* st_cmd = app.add_subcommand("stats", "statistics over saved samples");
    std::string st_statistic = "gaps", st_input, st_input_b, st_out = "out";
    double st_lambda = bs::kPi;
    int st_count = 2;
    st_cmd->add_option("--statistic", st_statistic, "gaps|counting|ks|phase")
        ->check(CLI::IsMember({"gaps", "counting", "ks", "phase"}));
    st_cmd->add_option("--input", st_input, "atoms.csv (or one-column csv for phase)")
        ->required();
    st_cmd->add_option("--input-b", st_input_b, "second atoms.csv for ks");
    st_cmd->add_option("--lambda", st_lambda, "counting threshold");
    st_cmd->add_option("--count", st_count, "gaps per sample");
    st_cmd->add_option("--out", st_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*defaults_cmd) return cmd_defaults(defaults_experiment);

        if (*run_cmd) {
            bs::ExperimentConfig cfg;
            if (!run_config_path.empty()) {
                cfg = bs::ExperimentConfig::from_json(read_file(run_config_path));
                if (!run_experiment_name.empty()) cfg.experiment = run_experiment_name;
            } else if (!run_experiment_name.empty()) {
                cfg = bs::ExperimentConfig::defaults_for(run_experiment_name);
            } else {
                std::cerr << "usage error: provide --experiment or --config" << std::endl;
                return 2;
            }
            if (run_trials >= 0) cfg.trials = run_trials;
            if (run_seed >= 0) cfg.base_seed = static_cast<std::uint64_t>(run_seed);
            if (!run_out.empty()) cfg.out_dir = run_out;
            if (run_workers >= 0) cfg.workers = run_workers;
            if (run_amplitude >= 0.0) cfg.amplitude = run_amplitude;
            const bs::ExperimentResult result = bs::run_experiment(cfg);
            const json rep = json::parse(result.report_json);
            for (const auto& check : rep.at("checks")) {
                std::cout << (check.at("pass").get<bool>() ? "PASS " : "FAIL ")
                          << check.at("name").get<std::string>()
                          << " value=" << check.at("value").get<double>() << std::endl;
            }
            std::cout << (result.passed ? "passed" : "not-passed")
                      << " flag_rate=" << result.flag_rate << " out=" << cfg.out_dir
                      << std::endl;
            return result.exit_code;
        }

        if (*op_cmd) {
            const bs::PotentialShape shape{op_k, op_amplitude};
            const double e0 =
                op_beta_target > 0.0 ? bs::solve_energy_for_beta(shape, op_beta_target) : op_e0;
            const double kappa0 = std::sqrt(e0);
            const double length =
                op_length > 0.0 ? op_length : bs::choose_length(e0, op_m, op_beta_phase);
            const double h = op_h > 0.0 ? op_h : bs::default_mesh_step(kappa0);
            bs::PotentialModel model =
                op_family == "coupling"
                    ? bs::PotentialModel::coupling(op_alpha, length, shape)
                    : (op_reversed ? bs::PotentialModel::decaying_reversed(length, shape)
                                   : bs::PotentialModel::decaying(shape));
            std::filesystem::create_directories(op_out);
            std::ofstream atoms(std::filesystem::path(op_out) / "atoms.csv");
            bs::write_window_csv_header(atoms);
            json sidecar;
            sidecar["windows"] = json::array();
            const double alpha_col = op_family == "coupling" ? op_alpha : 0.5;
            for (long i = 0; i < op_trials; ++i) {
                const std::uint64_t seed = bs::trial_seed(op_seed, static_cast<std::uint64_t>(i));
                const bs::DrivingPath path = bs::sample_driving_path(seed, length, h);
                const bs::SpectrumWindow win =
                    bs::locate_atoms(path, model, e0, length, op_window);
                bs::write_window_csv(atoms, seed, alpha_col, win);
                json meta;
                meta["seed"] = seed;
                meta["boundary_phase_m"] = win.boundary_phase_m;
                meta["boundary_phase_phi"] = win.boundary_phase_phi;
                meta["flags"] =
                    win.nonmonotone_flag ? json::array({"nonmonotone"}) : json::array();
                sidecar["windows"].push_back(meta);
            }
            std::ofstream side(std::filesystem::path(op_out) / "atoms_meta.json");
            side << sidecar.dump(2) << '\n';
            std::cout << "wrote " << op_out << "/atoms.csv (" << op_trials << " trials)"
                      << std::endl;
            return 0;
        }

        if (*sde_cmd) {
            const bs::PotentialShape shape{sde_k, sde_amplitude};
            const double e0 = sde_beta_target > 0.0
                                  ? bs::solve_energy_for_beta(shape, sde_beta_target)
                                  : sde_e0;
            const bs::ModelConstants constants = bs::compute_constants(shape, e0);
            if (sde_params.empty()) {
                sde_params = {bs::kTwoPi, 2.0 * bs::kTwoPi};
            }
            const double horizon = sde_horizon > 0.0
                                       ? sde_horizon
                                       : bs::sine_beta_min_horizon(constants.beta) + 2.0;
            std::filesystem::create_directories(sde_out);
            std::ofstream os(std::filesystem::path(sde_out) / "sde.csv");
            bs::write_sde_csv_header(os);
            for (long i = 0; i < sde_trials; ++i) {
                const std::uint64_t seed = bs::trial_seed(sde_seed, static_cast<std::uint64_t>(i));
                if (sde_kind == "schtau") {
                    const auto steps = static_cast<std::size_t>(std::ceil(1.0 / sde_h0)) + 1;
                    const bs::NoiseBundle noise = bs::NoiseBundle::sample(seed, steps, sde_h0);
                    const auto psi = bs::simulate_schtau_terminal(constants, sde_params, noise);
                    for (std::size_t l = 0; l < sde_params.size(); ++l) {
                        bs::write_sde_csv_row(os, seed, bs::SdeKind::schtau, sde_params[l], 1.0,
                                              psi[l]);
                    }
                } else if (sde_kind == "carousel") {
                    const std::size_t steps = bs::carousel_steps(sde_h0, sde_delta);
                    const bs::NoiseBundle noise = bs::NoiseBundle::sample(seed, steps, sde_h0);
                    const auto psi = bs::simulate_carousel_terminal(constants.d_e0, sde_params,
                                                                    noise, sde_delta, sde_h0);
                    for (std::size_t l = 0; l < sde_params.size(); ++l) {
                        bs::write_sde_csv_row(os, seed, bs::SdeKind::carousel, sde_params[l],
                                              1.0 - sde_delta, psi[l]);
                    }
                } else {
                    const auto steps =
                        static_cast<std::size_t>(std::ceil(horizon / sde_h0)) + 1;
                    const bs::NoiseBundle noise = bs::NoiseBundle::sample(seed, steps, sde_h0);
                    const auto psi = bs::simulate_sine_beta_terminal(constants.beta, sde_params,
                                                                     noise, horizon);
                    for (std::size_t l = 0; l < sde_params.size(); ++l) {
                        bs::write_sde_csv_row(os, seed, bs::SdeKind::sinebeta, sde_params[l],
                                              horizon, psi[l]);
                    }
                }
            }
            std::cout << "wrote " << sde_out << "/sde.csv" << std::endl;
            return 0;
        }

        if (*gb_cmd) {
            std::filesystem::create_directories(gb_out);
            std::ofstream os(std::filesystem::path(gb_out) / "gbeta.csv");
            bs::write_gbeta_csv_header(os);
            const double tol = gb_tol > 0.0 ? gb_tol : bs::default_eig_tol(gb_n);
            for (long i = 0; i < gb_trials; ++i) {
                const std::uint64_t seed = bs::trial_seed(gb_seed, static_cast<std::uint64_t>(i));
                const bs::TridiagonalMatrix t = bs::sample_gbeta_tridiagonal(gb_n, gb_beta, seed);
                const auto eigs = bs::tridiagonal_eigenvalues(t, tol);
                const bs::BulkSample sample = bs::bulk_rescale(eigs, gb_n, gb_mu);
                bs::write_gbeta_csv(os, seed, gb_beta, sample);
            }
            std::cout << "wrote " << gb_out << "/gbeta.csv" << std::endl;
            return 0;
        }

        if (*st_cmd) {
            std::filesystem::create_directories(st_out);
            std::string report;
            if (st_statistic == "gaps") {
                const bs::AtomBatch batch = read_atoms_csv(st_input);
                const bs::GapSample gaps = bs::gaps_near_zero(batch, st_count);
                double mean = 0.0;
                for (double g : gaps.gaps) mean += g;
                if (!gaps.gaps.empty()) mean /= static_cast<double>(gaps.gaps.size());
                report = bs::stat_report("gaps_near_zero", batch.source, "", mean, 0.0,
                                         static_cast<long>(gaps.gaps.size()),
                                         R"({"count":)" + std::to_string(st_count) + "}");
            } else if (st_statistic == "counting") {
                const bs::AtomBatch batch = read_atoms_csv(st_input);
                const auto counts = bs::counting(batch, st_lambda);
                double mean = 0.0;
                for (long c : counts) mean += static_cast<double>(c);
                if (!counts.empty()) mean /= static_cast<double>(counts.size());
                report = bs::stat_report("counting", batch.source, "", mean, 0.0,
                                         static_cast<long>(counts.size()), "{}");
            } else if (st_statistic == "ks") {
                if (st_input_b.empty()) {
                    std::cerr << "usage error: ks needs --input-b" << std::endl;
                    return 2;
                }
                const bs::AtomBatch a = read_atoms_csv(st_input);
                const bs::AtomBatch b = read_atoms_csv(st_input_b);
                const auto ga = bs::gaps_near_zero(a, st_count);
                const auto gb = bs::gaps_near_zero(b, st_count);
                const double ks = bs::ks_distance(ga.gaps, gb.gaps);
                report = bs::stat_report("ks_gaps", a.source, b.source, ks, 0.0,
                                         static_cast<long>(ga.gaps.size()), "{}");
            } else {
                const auto phases = read_column_csv(st_input);
                const double ks = bs::phase_uniformity(phases);
                report = bs::stat_report("phase_uniformity", st_input, "", ks, 0.0,
                                         static_cast<long>(phases.size()), "{}");
            }
            std::ofstream os(std::filesystem::path(st_out) / "report.json");
            os << report << '\n';
            std::cout << report << std::endl;
            return 0;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << std::endl;
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
