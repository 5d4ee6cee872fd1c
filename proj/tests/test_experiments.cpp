#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "betaspectra/experiments.hpp"
#include "betaspectra/rng.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace betaspectra;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    REQUIRE(is.good());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path scratch_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("betaspectra_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_SUITE("experiments") {
    TEST_CASE("trial seeds decorrelate path increments") {
        std::vector<DrivingPath> paths;
        for (int t = 0; t < 4; ++t) {
            paths.push_back(sample_driving_path(trial_seed(171717, t), 100.0, 1e-3));
        }
        const std::size_t n = paths[0].increments.size();
        for (int t = 0; t + 1 < 4; ++t) {
            double dot = 0.0, na = 0.0, nb = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double a = paths[static_cast<std::size_t>(t)].increments[i];
                const double b = paths[static_cast<std::size_t>(t) + 1].increments[i];
                dot += a * b;
                na += a * a;
                nb += b * b;
            }
            const double corr = dot / std::sqrt(na * nb);
            CHECK(std::abs(corr) <= 3.0 / std::sqrt(static_cast<double>(n)));
        }
    }

    TEST_CASE("config defaults, round trip, and unknown keys") {
        for (const char* name : {"clock", "second_order", "schtau_compare",
                                 "carousel_vs_sineb", "gbeta_coincidence",
                                 "phase_uniformity"}) {
            const ExperimentConfig cfg = ExperimentConfig::defaults_for(name);
            const ExperimentConfig back = ExperimentConfig::from_json(cfg.to_json());
            CHECK(back.experiment == cfg.experiment);
            CHECK(back.trials == cfg.trials);
            CHECK(back.window == cfg.window);
            CHECK(back.base_seed == cfg.base_seed);
        }
        CHECK_THROWS_AS(ExperimentConfig::defaults_for("nope"), std::invalid_argument);
        CHECK_THROWS_WITH_AS(
            ExperimentConfig::from_json(R"({"experiment":"clock","trails":3})"),
            doctest::Contains("trails"), std::invalid_argument);
    }

    TEST_CASE("worker resolution honors the environment override") {
        setenv("BETA_SPECTRA_WORKERS", "3", 1);
        CHECK(resolve_workers(1) == 3);
        unsetenv("BETA_SPECTRA_WORKERS");
        CHECK(resolve_workers(2) == 2);
        CHECK(resolve_workers(0) >= 1);
    }

    TEST_CASE("parallel_for covers every index and propagates errors") {
        std::vector<int> hits(100, 0);
        parallel_for(100, 4, [&](long i) { hits[static_cast<std::size_t>(i)] += 1; });
        for (int h : hits) CHECK(h == 1);
        CHECK_THROWS_AS(
            parallel_for(10, 3,
                         [](long i) {
                             if (i == 5) throw std::runtime_error("boom");
                         }),
            std::runtime_error);
    }

    TEST_CASE("amplitude-zero clock run reports exact pi gaps") {
        ExperimentConfig cfg = ExperimentConfig::defaults_for("clock");
        cfg.trials = 1;
        cfg.amplitude = 0.0;
        cfg.m = 50;
        cfg.workers = 1;
        cfg.out_dir = scratch_dir("clock_trivial").string();
        const ExperimentResult res = run_experiment(cfg);
        CHECK(res.exit_code == 0);
        CHECK(res.passed);
        const json rep = json::parse(res.report_json);
        CHECK(std::abs(rep.at("statistics").at("gap_mean").get<double>() - kPi) <= 1e-8);
        CHECK(rep.at("statistics").at("gap_sd").get<double>() <= 1e-8);
        CHECK(rep.at("config").at("amplitude").get<double>() == 0.0);
        CHECK(fs::exists(fs::path(cfg.out_dir) / "atoms.csv"));
        CHECK(fs::exists(fs::path(cfg.out_dir) / "sde.csv"));
        CHECK(fs::exists(fs::path(cfg.out_dir) / "report.json"));
        CHECK(fs::exists(fs::path(cfg.out_dir) / "plotdata" / "gaps_cdf.csv"));
    }

    TEST_CASE("runs are byte-identical across repeats and worker counts") {
        ExperimentConfig cfg = ExperimentConfig::defaults_for("clock");
        cfg.trials = 4;
        cfg.m = 50;
        cfg.workers = 1;
        cfg.out_dir = scratch_dir("det_a").string();
        run_experiment(cfg);

        ExperimentConfig cfg2 = cfg;
        cfg2.out_dir = scratch_dir("det_b").string();
        run_experiment(cfg2);

        ExperimentConfig cfg3 = cfg;
        cfg3.workers = 2;
        cfg3.out_dir = scratch_dir("det_c").string();
        run_experiment(cfg3);

        const std::string atoms_a = slurp(fs::path(cfg.out_dir) / "atoms.csv");
        CHECK(atoms_a == slurp(fs::path(cfg2.out_dir) / "atoms.csv"));
        CHECK(atoms_a == slurp(fs::path(cfg3.out_dir) / "atoms.csv"));

        // The config echo carries out_dir/workers, so compare the data alone.
        json ja = json::parse(slurp(fs::path(cfg.out_dir) / "report.json"));
        json jb = json::parse(slurp(fs::path(cfg2.out_dir) / "report.json"));
        json jc = json::parse(slurp(fs::path(cfg3.out_dir) / "report.json"));
        ja.erase("config");
        jb.erase("config");
        jc.erase("config");
        CHECK(ja.dump() == jb.dump());
        CHECK(ja.dump() == jc.dump());
    }

    TEST_CASE("plot data formats") {
        const fs::path dir = scratch_dir("plotdata");
        json rep;
        rep["samples"]["gaps"]["operator"] = std::vector<double>(25, kPi);
        rep["samples"]["gaps"]["sde"] = std::vector<double>{3.0, 3.1, 3.2};
        rep["samples"]["counts"]["carousel@12.57"] = std::vector<double>{3.0, 4.0, 4.0, 5.0};
        emit_plotdata(rep.dump(), dir.string());

        const std::string hist = slurp(dir / "plotdata" / "gaps_hist_operator.csv");
        CHECK(hist.substr(0, 20) == "bin_lo,bin_hi,count\n");
        CHECK(std::count(hist.begin(), hist.end(), '\n') == 2);  // header + one pi bin

        const std::string cdf = slurp(dir / "plotdata" / "gaps_cdf.csv");
        CHECK(cdf.rfind("x,cdf_operator,cdf_sde\n", 0) == 0);

        const std::string counts = slurp(dir / "plotdata" / "counts_carousel_12_57.csv");
        CHECK(counts.rfind("count,frequency\n", 0) == 0);
        CHECK(counts.find("4,2") != std::string::npos);

        json empty;
        empty["samples"]["gaps"]["operator"] = std::vector<double>{};
        emit_plotdata(empty.dump(), dir.string());
        const std::string empty_hist = slurp(dir / "plotdata" / "gaps_hist_operator.csv");
        CHECK(empty_hist == "bin_lo,bin_hi,count\n");
    }

    TEST_CASE("unknown experiment is a usage error") {
        ExperimentConfig cfg;
        cfg.experiment = "mystery";
        CHECK_THROWS_AS(run_experiment(cfg), std::invalid_argument);
    }
}
