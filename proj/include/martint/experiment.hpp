#pragma once

#include "martint/model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace martint {

struct ExperimentConfig {
    std::vector<SymbolTag> symbols{SymbolTag::Xi};
    std::vector<double> eps_grid{0.125};
    std::vector<double> lambda_grid{0.5, 0.25, 0.125};
    std::vector<double> p_values{2.0};
    int replicas = 2000;
    std::uint64_t master_seed = 1;
    double quad_step = 1e-3;
    std::string out_dir = ".";
    double alpha = 0.75;      // eh = eps^alpha
    double eh_override = 0.0; // absolute smoothing scale when > 0
    std::int64_t budget_ms = 0;
    double moll_sharpness = 6.0;
    double kernel_sharpness = 4.0;
    TestProfile profile{};
    int threads = 2;
    bool record_wall = true; // false zeroes wall_ms for byte-stable outputs
    bool quiet = false;

    double eh_for(double eps) const {
        return eh_override > 0.0 ? eh_override : std::pow(eps, alpha);
    }
    void validate() const;
};

struct ScalingRecord {
    std::string symbol;
    double eps = 0.0, lambda = 0.0, p = 2.0;
    double moment = 0.0;   // E_p estimate
    double stderr_ = 0.0;  // delta-method standard error
    bool stderr_ok = false;
    int n_replicas = 0;
    std::uint64_t seed = 0;
    std::int64_t wall_ms = 0;
    bool scaling_regime = false; // lambda >= 2 eh
};

struct FitResult {
    double slope = 0.0, intercept = 0.0, residual = 0.0;
    int points_used = 0;
    double target = 0.0, tolerance = 0.0;
    bool pass = false;
};

std::vector<ScalingRecord> run_scaling(const ExperimentConfig& cfg);

// OLS of log moment against log lambda; saturation-regime records are skipped
// unless include_saturation is set
FitResult fit_exponent(const std::vector<ScalingRecord>& records, const std::string& symbol,
                       double eps, double p, double target, double tolerance,
                       bool include_saturation = false);

struct IdentityReport {
    double decomposition_max_rel = 0.0;
    int decomposition_cases = 0;
    double diagonal_max_rel = 0.0;
    int diagonal_cases = 0;
    double renorm_max_rel = 0.0;
    int renorm_cases = 0;
};

struct IdentitySuiteParams {
    int max_n = 3;
    int n_seeds = 100;
    int diagonal_seeds = 50;
    double renorm_quad_step_factor = 1e-4; // h = factor * T
};

IdentityReport run_identity_suite(std::uint64_t seed, const IdentitySuiteParams& params = {});

void persist_records(const std::vector<ScalingRecord>& records, const std::string& path);
std::vector<ScalingRecord> parse_records(const std::string& path);
void persist_text(const std::vector<std::string>& lines, const std::string& path);

ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);

// statistics helpers shared with tests
struct MomentStat {
    double moment = 0.0;
    double se = 0.0;
    bool se_ok = false;
};
MomentStat p_moment(const std::vector<double>& samples, double p);

} // namespace martint
