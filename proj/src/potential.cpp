#include "betaspectra/potential.hpp"

#include <cmath>
#include <stdexcept>

#include "betaspectra/rng.hpp"
#include "json.hpp"

namespace betaspectra {

double PotentialShape::value(double x) const {
    return amplitude * std::cos(static_cast<double>(mode) * x);
}

std::size_t DrivingPath::index_at(double t) const {
    if (t < 0.0 || t > duration * (1.0 + 1e-12)) {
        throw std::out_of_range("path time outside [0, duration]");
    }
    auto idx = static_cast<std::size_t>(t / step);
    if (idx >= positions.size()) idx = positions.size() - 1;
    return idx;
}

double DrivingPath::position_at(double t) const { return positions[index_at(t)]; }

double decay_envelope(double s) {
    if (s < 1.0) return 1.0;
    return 1.0 / std::sqrt(s);
}

PotentialModel PotentialModel::coupling(double alpha, double length, PotentialShape shape) {
    if (alpha <= 0.0 || length <= 0.0) {
        throw std::invalid_argument("coupling family requires alpha > 0 and length > 0");
    }
    return PotentialModel{CouplingFamily{alpha, length}, shape};
}

PotentialModel PotentialModel::decaying(PotentialShape shape) {
    return PotentialModel{DecayingFamily{}, shape};
}

PotentialModel PotentialModel::decaying_reversed(double horizon, PotentialShape shape) {
    if (horizon <= 0.0) throw std::invalid_argument("reversed family requires horizon > 0");
    return PotentialModel{DecayingReversedFamily{horizon}, shape};
}

double PotentialModel::envelope(double t) const {
    if (const auto* c = std::get_if<CouplingFamily>(&family)) {
        return std::pow(c->length, -c->alpha);
    }
    if (std::holds_alternative<DecayingFamily>(family)) {
        return decay_envelope(t);
    }
    const auto& r = std::get<DecayingReversedFamily>(family);
    const double s = r.horizon - t;
    return decay_envelope(s > 0.0 ? s : 0.0);
}

double potential_at(const DrivingPath& path, const PotentialModel& model, double t) {
    return model.envelope(t) * model.shape.value(path.position_at(t));
}

DrivingPath sample_driving_path(std::uint64_t seed, double duration, double step) {
    if (duration <= 0.0 || step <= 0.0) {
        throw std::invalid_argument("duration and step must be positive");
    }
    if (step > duration) {
        throw std::invalid_argument("step must not exceed duration");
    }
    DrivingPath path;
    path.step = step;
    path.duration = duration;
    const auto n = static_cast<std::size_t>(std::floor(duration / step)) + 1;
    path.positions.resize(n);
    path.increments.resize(n - 1);
    Rng rng(seed);
    const double sigma = std::sqrt(step);
    double x = 0.0;
    path.positions[0] = 0.0;
    for (std::size_t j = 0; j + 1 < n; ++j) {
        const double dx = sigma * rng.gaussian();
        path.increments[j] = dx;
        x += dx;
        x -= kTwoPi * std::floor(x / kTwoPi);
        path.positions[j + 1] = x;
    }
    return path;
}

std::complex<double> resolvent_coefficient(const PotentialShape& shape, double kappa) {
    if (kappa < 0.0) throw std::invalid_argument("kappa must be >= 0");
    const double k2 = static_cast<double>(shape.mode) * static_cast<double>(shape.mode);
    if (kappa == 0.0) return {-2.0 / k2, 0.0};
    return 1.0 / std::complex<double>(-0.5 * k2, 2.0 * kappa);
}

ModelConstants compute_constants(const PotentialShape& shape, double e0) {
    if (e0 <= 0.0) throw std::invalid_argument("E0 must be positive");
    if (shape.mode < 1) throw std::invalid_argument("mode must be >= 1");
    const double k = static_cast<double>(shape.mode);
    const double half_a2 = 0.5 * shape.amplitude * shape.amplitude;  // <cos^2> weight

    ModelConstants mc;
    mc.e0 = e0;
    mc.kappa0 = std::sqrt(e0);
    mc.c_e0 = half_a2 * k * k / (0.25 * k * k * k * k + 4.0 * e0);
    mc.c_0 = half_a2 * 4.0 / (k * k);
    mc.fg_inner = half_a2 * resolvent_coefficient(shape, mc.kappa0);
    mc.beta = 8.0 * e0 / mc.c_e0;
    mc.d_e0 = std::sqrt(mc.c_e0 / (2.0 * e0));
    return mc;
}

double solve_energy_for_beta(const PotentialShape& shape, double beta_target) {
    if (beta_target <= 0.0) throw std::invalid_argument("beta_target must be positive");
    const auto beta_of = [&shape](double e) { return compute_constants(shape, e).beta; };
    double lo = 1e-300;
    double hi = 1.0;
    while (beta_of(hi) < beta_target) hi *= 2.0;
    // beta(E) is strictly increasing; bisect until the defining identity holds.
    for (int iter = 0; iter < 2000; ++iter) {
        const double mid = 0.5 * (lo + hi);
        const double b = beta_of(mid);
        if (std::abs(b - beta_target) <= 1e-10) return mid;
        (b < beta_target ? lo : hi) = mid;
        if (hi - lo <= 1e-18 * hi) break;
    }
    return 0.5 * (lo + hi);
}

std::string ModelConstants::to_json() const {
    nlohmann::json j;
    j["e0"] = e0;
    j["kappa0"] = kappa0;
    j["c_e0"] = c_e0;
    j["c_0"] = c_0;
    j["fg_inner_re"] = fg_inner.real();
    j["fg_inner_im"] = fg_inner.imag();
    j["beta"] = beta;
    j["d_e0"] = d_e0;
    return j.dump();
}

ModelConstants ModelConstants::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    ModelConstants mc;
    mc.e0 = j.at("e0").get<double>();
    mc.kappa0 = j.at("kappa0").get<double>();
    mc.c_e0 = j.at("c_e0").get<double>();
    mc.c_0 = j.at("c_0").get<double>();
    mc.fg_inner = {j.at("fg_inner_re").get<double>(), j.at("fg_inner_im").get<double>()};
    mc.beta = j.at("beta").get<double>();
    mc.d_e0 = j.at("d_e0").get<double>();
    return mc;
}

}  // namespace betaspectra
