#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "icgkit/series.hpp"

namespace icgkit {

// Parameters of the second-order inflow model
//
//     tau^2 y''(t) + 2 D tau y'(t) + y(t) = K exp(-(t - t0) / tau_i),   t >= t0
//
// with y(t0) = y'(t0) = 0. The observed intensity is background + y(t);
// before the delay the curve sits at the background.
struct KineticParams {
    double damping = 1.0;     // D, dimensionless, > 0
    double tau_s = 1.0;       // tau, > 0
    double tau_i_s = 1.0;     // input decay time tau_i, > 0
    double gain = 0.0;        // K, >= 0
    double background = 0.0;  // b, >= 0
    double delay_s = 0.0;     // t0, >= 0

    void validate() const;  // throws DomainError

    friend bool operator==(const KineticParams&, const KineticParams&) = default;
};

// Order of the natural-parameter derivative columns.
enum KineticParam : int { kDamping = 0, kTau, kTauI, kGain, kBackground, kDelay, kNumKinetic };

// True when the particular-solution denominator 1 - 2 D tau/tau_i + tau^2/tau_i^2
// is within 1e-8 of zero; simulate then integrates numerically.
bool near_resonance(const KineticParams& p);

std::vector<double> uniform_grid(double start_s, double period_s, std::size_t n);

// Time grid must be strictly increasing and uniformly spaced.
TimeSeries simulate(const KineticParams& p, std::span<const double> time_grid);

struct ModelJacobian {
    std::vector<double> values;
    // d value / d (D, tau, tau_i, K, b, t0) per sample.
    std::vector<std::array<double, kNumKinetic>> d;
};

// Model values and exact forward-mode derivatives w.r.t. the natural parameters.
ModelJacobian simulate_with_jacobian(const KineticParams& p, std::span<const double> time_grid);

struct FitConfig {
    int max_iterations = 200;
    double ftol = 1e-10;
    double xtol = 1e-10;
    int n_restarts = 8;
    std::uint64_t seed = 0;
    double perturbation = 0.5;  // half-width of the log-space start perturbation
    std::optional<double> truncate_at_s;
    LandmarkConfig landmarks;
    // Replaces initial_guess, e.g. for curves without a detectable onset.
    std::optional<KineticParams> start;
};

struct FitResult {
    KineticParams params;
    double rmse = 0.0;
    int n_iterations = 0;
    bool converged = false;
    double truncation_time_s = 0.0;
};

// Heuristic start from onset/peak landmarks of the smoothed curve.
KineticParams initial_guess(const TimeSeries& series, const LandmarkConfig& config = {});

// Multi-start Levenberg-Marquardt in (log D, log tau, log tau_i, log K, b, t0).
FitResult fit(const TimeSeries& series, const FitConfig& config = {});

// Worst relative deviation between the analytic residual Jacobian and
// central finite differences with relative step 1e-6.
double jacobian_check(const KineticParams& p, std::span<const double> time_grid);

}  // namespace icgkit
