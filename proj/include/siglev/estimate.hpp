#pragma once

#include <optional>
#include <string>
#include <vector>

namespace siglev {

// Point estimate with optional variance estimate and provenance. A negative
// raw variance estimate is clamped to 0 for `variance_hat` but kept in
// `raw_variance_hat` with the clamped flag set. sigma^2 point values may be
// negative; they are reported as-is with `negative_value` flagged.
struct Estimate {
    double value = 0.0;
    std::optional<double> variance_hat;      // clamped at 0 when raw is negative
    std::optional<double> raw_variance_hat;  // pre-clamp value
    bool variance_clamped = false;
    bool negative_value = false;
    std::string method;
    std::optional<std::vector<std::size_t>> selection_set;
    std::optional<double> boot_cov_se;  // bootstrap covariance SE, when applicable

    void set_variance(double raw) {
        raw_variance_hat = raw;
        variance_clamped = raw < 0.0;
        variance_hat = raw < 0.0 ? 0.0 : raw;
    }
};

std::string estimate_to_json(const Estimate& e);

}  // namespace siglev
