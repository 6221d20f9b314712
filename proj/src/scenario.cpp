#include "robust_lt/scenario.hpp"

#include <cmath>
#include <sstream>

#include "robust_lt/errors.hpp"

namespace robust_lt {

std::string MteScenario::id() const {
    std::ostringstream os;
    os << 'k' << depth() << ':';
    if (start_indices.empty()) os << 'n';
    for (std::size_t i = 0; i < start_indices.size(); ++i) {
        os << (i == 0 ? "n" : ",") << start_indices[i];
    }
    os << ":dt" << delta_tau;
    return os.str();
}

std::vector<ScenarioViolation> validate(const MteScenario& scenario, int n_ref_segments) {
    std::vector<ScenarioViolation> out;
    for (std::size_t i = 0; i < scenario.start_indices.size(); ++i) {
        const int n = scenario.start_indices[i];
        if (n < 1 || n >= n_ref_segments) {
            std::ostringstream os;
            os << "start index " << n << " outside [1, " << n_ref_segments << ")";
            out.push_back({ScenarioViolation::Kind::IndexRange, os.str()});
        }
        if (i > 0 && n <= scenario.start_indices[i - 1]) {
            std::ostringstream os;
            os << "start index " << n << " does not exceed its predecessor "
               << scenario.start_indices[i - 1];
            out.push_back({ScenarioViolation::Kind::Ordering, os.str()});
        }
    }
    if (!scenario.start_indices.empty() && !(scenario.delta_tau > 0.0)) {
        out.push_back({ScenarioViolation::Kind::Duration, "outage duration must be positive"});
    }
    if (scenario.start_indices.empty() && !(scenario.delta_tau >= 0.0)) {
        out.push_back({ScenarioViolation::Kind::Duration, "outage duration must be non-negative"});
    }
    return out;
}

void require_valid(const MteScenario& scenario, int n_ref_segments) {
    const auto violations = validate(scenario, n_ref_segments);
    if (violations.empty()) return;
    std::string message = "invalid scenario " + scenario.id() + ":";
    for (const auto& v : violations) message += " " + v.message + ";";
    throw Error(ErrorKind::InvalidScenario, message);
}

CoverageStats sample_mte_coverage(const WeibullParams& duration, double rate, double horizon,
                                  double duration_cap, int n_samples, std::mt19937_64& rng) {
    if (n_samples < 1 || !(duration.shape > 0.0) || !(duration.scale > 0.0) || !(rate >= 0.0) ||
        !(horizon >= 0.0) || std::isnan(duration_cap)) {
        throw Error(ErrorKind::InvalidInput, "invalid MTE coverage parameters");
    }
    std::weibull_distribution<double> outage(duration.shape, duration.scale);
    const double mean_count = rate * horizon;
    std::poisson_distribution<int> events(mean_count > 0.0 ? mean_count : 1.0);

    int zero = 0, one = 0, more = 0, covered = 0;
    for (int i = 0; i < n_samples; ++i) {
        int count = 0;
        if (mean_count > 0.0) count = events(rng);
        if (count == 0) ++zero;
        else if (count == 1) ++one;
        else ++more;
        if (outage(rng) <= duration_cap) ++covered;
    }
    const double n = n_samples;
    return {zero / n, one / n, more / n, covered / n, n_samples};
}

}  // namespace robust_lt
