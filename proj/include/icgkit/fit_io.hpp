#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "icgkit/features.hpp"
#include "icgkit/json_util.hpp"
#include "icgkit/kinetics.hpp"

namespace icgkit {

// Keys D, tau_s, tau_i_s, K, b, t0_s; throws ConfigError on unknown keys or
// invalid values.
Json params_to_json(const KineticParams& p);
KineticParams params_from_json(const Json& j);

struct FitFailure {
    CurveKey key;
    std::string error;
};

struct FitRun {
    FitTable fits;
    std::vector<FitFailure> failures;
};

// Fits every curve; curves that fail are recorded and skipped.
FitRun fit_curves(const CurveSet& curves, const FitConfig& config = {});

// One array of records sorted by curve: flat parameters plus rmse, n_iterations,
// converged and truncation_time_s; failed curves carry only an "error".
Json fits_to_json(const FitRun& run);
FitRun fits_from_json(const Json& j);
void save_fits(const std::filesystem::path& path, const FitRun& run);
FitRun load_fits(const std::filesystem::path& path);  // throws FormatError

// Per-curve and worst relative parameter drift |b - a| / |a| for curves in both.
Json fit_diff_report(const FitTable& a, const FitTable& b);

}  // namespace icgkit
