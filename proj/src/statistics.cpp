#include "betaspectra/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace betaspectra {

GapSample gaps_near_zero(const AtomBatch& batch, int count) {
    if (count < 1) throw std::invalid_argument("count must be >= 1");
    GapSample out;
    std::size_t skipped = 0;
    for (const auto& atoms : batch.samples) {
        if (atoms.size() < static_cast<std::size_t>(count) + 1) {
            ++skipped;
            continue;
        }
        std::size_t nearest = 0;
        for (std::size_t i = 1; i < atoms.size(); ++i) {
            if (std::abs(atoms[i]) < std::abs(atoms[nearest])) nearest = i;
        }
        long start = static_cast<long>(nearest) - count / 2;
        const long max_start = static_cast<long>(atoms.size()) - 1 - count;
        start = std::clamp(start, 0L, max_start);
        for (int g = 0; g < count; ++g) {
            const auto j = static_cast<std::size_t>(start + g);
            out.gaps.push_back(atoms[j + 1] - atoms[j]);
        }
    }
    if (!batch.samples.empty()) {
        out.skip_rate = static_cast<double>(skipped) / static_cast<double>(batch.samples.size());
    }
    return out;
}

std::vector<long> counting(const AtomBatch& batch, double lambda) {
    std::vector<long> counts;
    counts.reserve(batch.samples.size());
    for (const auto& atoms : batch.samples) {
        if (!atoms.empty() && atoms.back() < lambda) {
            throw std::out_of_range("sample window ends below lambda; need a window covering " +
                                    std::to_string(lambda));
        }
        long c = 0;
        for (double a : atoms) {
            if (a >= 0.0 && a <= lambda) ++c;  // closed [0, lambda], atom at 0 counts
        }
        counts.push_back(c);
    }
    return counts;
}

std::vector<CovarianceReport> covariance_lags(const std::vector<SecondOrderSample>& samples,
                                              std::span<const int> lags) {
    const auto trials = static_cast<long>(samples.size());
    if (trials < 30) throw std::invalid_argument("need at least 30 trials");
    std::vector<CovarianceReport> reports;
    reports.reserve(lags.size());
    for (int lag : lags) {
        std::vector<double> x0(samples.size()), xl(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) {
            x0[i] = samples[i].at(0);
            xl[i] = samples[i].at(lag);
        }
        const double tn = static_cast<double>(trials);
        double s0 = 0.0, sl = 0.0, s0l = 0.0;
        for (long i = 0; i < trials; ++i) {
            s0 += x0[static_cast<std::size_t>(i)];
            sl += xl[static_cast<std::size_t>(i)];
            s0l += x0[static_cast<std::size_t>(i)] * xl[static_cast<std::size_t>(i)];
        }
        const double est = (s0l - s0 * sl / tn) / (tn - 1.0);

        // Jackknife over trials from the leave-one-out sums.
        double jk_mean = 0.0;
        std::vector<double> jk(samples.size());
        for (long i = 0; i < trials; ++i) {
            const double a = x0[static_cast<std::size_t>(i)];
            const double b = xl[static_cast<std::size_t>(i)];
            const double s0i = s0 - a, sli = sl - b, s0li = s0l - a * b;
            jk[static_cast<std::size_t>(i)] = (s0li - s0i * sli / (tn - 1.0)) / (tn - 2.0);
            jk_mean += jk[static_cast<std::size_t>(i)];
        }
        jk_mean /= tn;
        double var = 0.0;
        for (double v : jk) var += (v - jk_mean) * (v - jk_mean);
        const double se = std::sqrt((tn - 1.0) / tn * var);

        CovarianceReport r;
        r.lag = lag;
        r.estimate = est;
        r.std_error = se;
        r.trials = static_cast<int>(trials);
        r.degenerate = !(se > 0.0);
        reports.push_back(r);
    }
    return reports;
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("samples must be nonempty");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t ia = 0, ib = 0;
    double d = 0.0;
    while (ia < a.size() && ib < b.size()) {
        const double x = std::min(a[ia], b[ib]);
        while (ia < a.size() && a[ia] <= x) ++ia;
        while (ib < b.size() && b[ib] <= x) ++ib;
        d = std::max(d, std::abs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb));
    }
    return d;
}

double phase_uniformity(std::vector<double> phases) {
    if (phases.empty()) throw std::invalid_argument("phases must be nonempty");
    for (double& p : phases) {
        p -= kTwoPi * std::floor(p / kTwoPi);
        p /= kTwoPi;  // uniform on [0, 1) under the null
    }
    std::sort(phases.begin(), phases.end());
    const double n = static_cast<double>(phases.size());
    double d = 0.0;
    for (std::size_t i = 0; i < phases.size(); ++i) {
        const double u = phases[i];
        const double di = static_cast<double>(i);
        d = std::max(d, std::max((di + 1.0) / n - u, u - di / n));
    }
    return d;
}

std::string stat_report(const std::string& statistic, const std::string& source_a,
                        const std::string& source_b, double value, double std_error, long trials,
                        const std::string& params_json) {
    nlohmann::json j;
    j["statistic"] = statistic;
    j["source_a"] = source_a;
    if (!source_b.empty()) j["source_b"] = source_b;
    j["value"] = value;
    j["std_error"] = std_error;
    j["trials"] = trials;
    j["params"] = params_json.empty() ? nlohmann::json::object() : nlohmann::json::parse(params_json);
    return j.dump();
}

}  // namespace betaspectra
