#include "icgkit/kinetics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "dual.hpp"
#include "icgkit/error.hpp"

namespace icgkit {

void KineticParams::validate() const {
    const double all[] = {damping, tau_s, tau_i_s, gain, background, delay_s};
    for (double v : all) {
        if (!std::isfinite(v)) throw DomainError("kinetic parameters must be finite");
    }
    if (!(damping > 0.0)) throw DomainError("damping D must be > 0");
    if (!(tau_s > 0.0)) throw DomainError("tau must be > 0");
    if (!(tau_i_s > 0.0)) throw DomainError("tau_i must be > 0");
    if (!(gain >= 0.0)) throw DomainError("gain K must be >= 0");
    if (!(background >= 0.0)) throw DomainError("background b must be >= 0");
    if (!(delay_s >= 0.0)) throw DomainError("delay t0 must be >= 0");
}

namespace {

using detail::Dual;
using detail::value_of;
using Dual6 = Dual<kNumKinetic>;

constexpr double kResonanceGuard = 1e-8;

double resonance_denominator(double D, double tau, double tau_i) {
    const double x = tau / tau_i;
    return 1.0 - 2.0 * D * x + x * x;
}

template <typename T>
struct Params {
    T D, tau, tau_i, K, b, t0;
};

Params<double> plain(const KineticParams& p) {
    return {p.damping, p.tau_s, p.tau_i_s, p.gain, p.background, p.delay_s};
}

Params<Dual6> seeded(const KineticParams& p) {
    return {Dual6::variable(p.damping, kDamping), Dual6::variable(p.tau_s, kTau),
            Dual6::variable(p.tau_i_s, kTauI),    Dual6::variable(p.gain, kGain),
            Dual6::variable(p.background, kBackground), Dual6::variable(p.delay_s, kDelay)};
}

// c(z) = cosh(sqrt z), f(z) = sinh(sqrt z)/sqrt z, continued to z < 0 as
// cos/sin. Both are entire in z, which removes the D = 1 regime boundary.
struct EvenOdd {
    double c, f, dc, df;
};

EvenOdd even_odd(double z) {
    EvenOdd r{};
    if (std::abs(z) <= 1.0) {
        // Taylor series; (2n)! grows fast enough that 12 terms reach rounding.
        double term_c = 1.0, term_f = 1.0;
        double zn_1 = 1.0;  // z^(n-1)
        r.c = 1.0;
        r.f = 1.0;
        r.dc = 0.0;
        r.df = 0.0;
        for (int n = 1; n <= 12; ++n) {
            if (n > 1 && std::abs(zn_1) * term_c < 1e-18) break;
            term_c /= (2.0 * n - 1.0) * (2.0 * n);
            term_f /= (2.0 * n) * (2.0 * n + 1.0);
            r.dc += n * zn_1 * term_c;
            r.df += n * zn_1 * term_f;
            zn_1 *= z;
            r.c += zn_1 * term_c;
            r.f += zn_1 * term_f;
        }
        return r;
    }
    if (z > 0.0) {
        const double s = std::sqrt(z);
        r.c = std::cosh(s);
        r.f = std::sinh(s) / s;
    } else {
        const double s = std::sqrt(-z);
        r.c = std::cos(s);
        r.f = std::sin(s) / s;
    }
    r.dc = 0.5 * r.f;
    r.df = (r.c - r.f) / (2.0 * z);
    return r;
}

double lift(const double&, double value, double) { return value; }
Dual6 lift(const Dual6& z, double value, double deriv) { return z.chain(value, deriv); }

// Per-parameter coefficients of the zero-state response, computed once per
// evaluation rather than per sample.
template <typename T>
struct Response {
    T a, sigma, amp, q, sigma_minus_a;
    bool overdamped_form = false;
    T root, beta, slow, fast;

    explicit Response(const Params<T>& p) {
        using detail::sqrt;
        a = 1.0 / p.tau_i;
        sigma = p.D / p.tau;
        const T ratio = p.tau * a;
        const T den = 1.0 - 2.0 * p.D * ratio + ratio * ratio;
        amp = p.K / den;
        q = (p.D * p.D - 1.0) / (p.tau * p.tau);
        sigma_minus_a = sigma - a;
        if (value_of(p.D) > 1.0) {
            overdamped_form = true;
            root = sqrt(p.D * p.D - 1.0);
            beta = root / p.tau;
            slow = -1.0 / (p.tau * (root + p.D));  // beta - sigma without cancellation
            fast = -(beta + sigma);
        }
    }

    // x(s) for s >= 0, background excluded.
    T operator()(const T& s) const {
        using detail::exp;
        const T z = q * s * s;
        T ec, es;  // exp(-sigma s) c(z), exp(-sigma s) s f(z)
        if (overdamped_form && value_of(z) > 400.0) {
            // Strongly overdamped: exponentials keep cosh from overflowing.
            const T e1 = exp(slow * s);
            const T e2 = exp(fast * s);
            ec = 0.5 * (e1 + e2);
            es = (e1 - e2) / (2.0 * beta);
        } else {
            const EvenOdd eo = even_odd(value_of(z));
            const T env = exp(-(sigma * s));
            ec = env * lift(z, eo.c, eo.dc);
            es = env * s * lift(z, eo.f, eo.df);
        }
        return amp * (exp(-(a * s)) - (ec + sigma_minus_a * es));
    }
};

// Classical RK4 on (x, x') with at most `h_max` per step.
template <typename T>
void integrate_rk4(const Params<T>& p, std::span<const double> grid, double h_max,
                   std::vector<T>& out) {
    using detail::exp;
    const T inv_tau2 = T(1.0) / (p.tau * p.tau);
    const T damp = T(2.0) * p.D * p.tau;
    const T a = T(1.0) / p.tau_i;
    auto accel = [&](const T& s, const T& x, const T& v) {
        return (p.K * exp(-a * s) - damp * v - x) * inv_tau2;
    };
    T x(0.0), v(0.0), s(0.0);
    out.resize(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (grid[k] <= value_of(p.t0)) {
            out[k] = p.b;
            continue;
        }
        const T target = T(grid[k]) - p.t0;
        const T span = target - s;
        const int steps = std::max(1, static_cast<int>(std::ceil(value_of(span) / h_max)));
        const T h = span / T(static_cast<double>(steps));
        const T half = T(0.5) * h;
        for (int i = 0; i < steps; ++i) {
            const T k1x = v;
            const T k1v = accel(s, x, v);
            const T k2x = v + half * k1v;
            const T k2v = accel(s + half, x + half * k1x, k2x);
            const T k3x = v + half * k2v;
            const T k3v = accel(s + half, x + half * k2x, k3x);
            const T k4x = v + h * k3v;
            const T k4v = accel(s + h, x + h * k3x, k4x);
            x += h / T(6.0) * (k1x + T(2.0) * k2x + T(2.0) * k3x + k4x);
            v += h / T(6.0) * (k1v + T(2.0) * k2v + T(2.0) * k3v + k4v);
            s += h;
        }
        out[k] = p.b + x;
    }
}

double grid_spacing(std::span<const double> grid) {
    return grid.size() > 1 ? grid[1] - grid[0] : 1.0;
}

// Model values on an increasing (not necessarily uniform) grid.
template <typename T>
std::vector<T> evaluate(const Params<T>& p, std::span<const double> grid, double rk4_step) {
    std::vector<T> out(grid.size());
    const double den =
        resonance_denominator(value_of(p.D), value_of(p.tau), value_of(p.tau_i));
    if (std::abs(den) < kResonanceGuard) {
        integrate_rk4(p, grid, rk4_step, out);
        return out;
    }
    const Response<T> response(p);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (grid[k] <= value_of(p.t0)) {
            out[k] = p.b;
        } else {
            out[k] = p.b + response(grid[k] - p.t0);
        }
    }
    return out;
}

void check_grid(std::span<const double> grid) {
    if (grid.empty()) throw DomainError("simulate: empty time grid");
    const double h = grid_spacing(grid);
    for (std::size_t k = 1; k < grid.size(); ++k) {
        const double dk = grid[k] - grid[k - 1];
        if (!(dk > 0.0)) throw DomainError("simulate: time grid must be strictly increasing");
        if (std::abs(dk - h) > 1e-9 * std::max(1.0, std::abs(grid[k]))) {
            throw DomainError("simulate: time grid must be uniformly spaced");
        }
    }
}

}  // namespace

bool near_resonance(const KineticParams& p) {
    return std::abs(resonance_denominator(p.damping, p.tau_s, p.tau_i_s)) < kResonanceGuard;
}

std::vector<double> uniform_grid(double start_s, double period_s, std::size_t n) {
    std::vector<double> g(n);
    for (std::size_t k = 0; k < n; ++k) g[k] = start_s + static_cast<double>(k) * period_s;
    return g;
}

TimeSeries simulate(const KineticParams& p, std::span<const double> time_grid) {
    p.validate();
    check_grid(time_grid);
    TimeSeries s;
    s.sample_period_s = grid_spacing(time_grid);
    s.start_time_s = time_grid.front();
    s.values = evaluate(plain(p), time_grid, s.sample_period_s / 10.0);
    s.valid.assign(s.values.size(), 1);
    return s;
}

ModelJacobian simulate_with_jacobian(const KineticParams& p, std::span<const double> time_grid) {
    p.validate();
    check_grid(time_grid);
    const auto duals = evaluate(seeded(p), time_grid, grid_spacing(time_grid) / 10.0);
    ModelJacobian mj;
    mj.values.resize(duals.size());
    mj.d.resize(duals.size());
    for (std::size_t k = 0; k < duals.size(); ++k) {
        mj.values[k] = duals[k].v;
        mj.d[k] = duals[k].d;
    }
    return mj;
}

double jacobian_check(const KineticParams& p, std::span<const double> time_grid) {
    const ModelJacobian mj = simulate_with_jacobian(p, time_grid);
    const double rk4_step = grid_spacing(time_grid) / 10.0;
    const Params<double> base = plain(p);
    const double nominal[kNumKinetic] = {base.D, base.tau, base.tau_i, base.K, base.b, base.t0};

    std::array<std::vector<double>, kNumKinetic> fd;
    double global_scale = 0.0;
    for (int j = 0; j < kNumKinetic; ++j) {
        const double h = 1e-6 * (nominal[j] != 0.0 ? std::abs(nominal[j]) : 1.0);
        double plus[kNumKinetic], minus[kNumKinetic];
        std::copy(nominal, nominal + kNumKinetic, plus);
        std::copy(nominal, nominal + kNumKinetic, minus);
        plus[j] += h;
        minus[j] -= h;
        auto as_params = [](const double* v) {
            return Params<double>{v[0], v[1], v[2], v[3], v[4], v[5]};
        };
        const auto yp = evaluate(as_params(plus), time_grid, rk4_step);
        const auto ym = evaluate(as_params(minus), time_grid, rk4_step);
        fd[j].resize(time_grid.size());
        for (std::size_t k = 0; k < time_grid.size(); ++k) {
            fd[j][k] = (yp[k] - ym[k]) / (2.0 * h);
            global_scale = std::max(global_scale, std::abs(fd[j][k]));
        }
    }
    double worst = 0.0;
    for (int j = 0; j < kNumKinetic; ++j) {
        double col_scale = 0.0, col_err = 0.0;
        for (std::size_t k = 0; k < time_grid.size(); ++k) {
            col_scale = std::max(col_scale, std::abs(fd[j][k]));
            col_err = std::max(col_err, std::abs(fd[j][k] - mj.d[k][j]));
        }
        const double denom = std::max({col_scale, 1e-6 * global_scale, 1e-300});
        worst = std::max(worst, col_err / denom);
    }
    return worst;
}

KineticParams initial_guess(const TimeSeries& series, const LandmarkConfig& config) {
    const Landmarks lm = find_landmarks(series, config);
    constexpr double kFloor = 1e-3;
    const double rise = lm.peak_time_s - lm.onset_time_s;
    KineticParams p;
    p.delay_s = std::max(0.0, lm.onset_time_s);
    p.gain = std::max(kFloor, lm.peak_value - lm.baseline_value);
    p.background = std::max(0.0, lm.baseline_value);
    p.tau_s = std::max(kFloor, rise / 2.0);
    p.tau_i_s = std::max(kFloor, rise);
    p.damping = 1.0;
    return p;
}

namespace {

using Vec6 = Eigen::Matrix<double, kNumKinetic, 1>;
using Mat6 = Eigen::Matrix<double, kNumKinetic, kNumKinetic>;

// Log-space for the positive parameters, linear for background and delay.
struct Problem {
    std::vector<double> times;
    std::vector<double> observed;
    Vec6 lo, hi;
    double rk4_step = 0.1;

    static KineticParams to_params(const Vec6& th) {
        return {std::exp(th[0]), std::exp(th[1]), std::exp(th[2]),
                std::exp(th[3]), th[4],          th[5]};
    }
    static Vec6 to_theta(const KineticParams& p) {
        Vec6 th;
        th << std::log(p.damping), std::log(p.tau_s), std::log(p.tau_i_s), std::log(p.gain),
            p.background, p.delay_s;
        return th;
    }
    Vec6 clamp(const Vec6& th) const { return th.cwiseMax(lo).cwiseMin(hi); }

    double cost(const Vec6& th) const {
        const auto y = evaluate(plain(to_params(th)), times, rk4_step);
        double c = 0.0;
        for (std::size_t k = 0; k < y.size(); ++k) {
            const double r = y[k] - observed[k];
            c += r * r;
        }
        return c;
    }

    // Returns cost; fills g = J^T r and H = J^T J in theta coordinates.
    double linearize(const Vec6& th, Vec6& g, Mat6& H) const {
        const KineticParams p = to_params(th);
        const auto y = evaluate(seeded(p), times, rk4_step);
        const double chain[kNumKinetic] = {p.damping, p.tau_s, p.tau_i_s, p.gain, 1.0, 1.0};
        g.setZero();
        H.setZero();
        double c = 0.0;
        Vec6 row;
        for (std::size_t k = 0; k < y.size(); ++k) {
            const double r = y[k].v - observed[k];
            c += r * r;
            for (int j = 0; j < kNumKinetic; ++j) row[j] = y[k].d[j] * chain[j];
            g.noalias() += r * row;
            H.noalias() += row * row.transpose();
        }
        return c;
    }
};

struct Attempt {
    Vec6 theta;
    double cost = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

Attempt levenberg_marquardt(const Problem& prob, const Vec6& start, const FitConfig& cfg) {
    Attempt at;
    at.theta = prob.clamp(start);
    Vec6 g;
    Mat6 H;
    double cost = prob.linearize(at.theta, g, H);
    if (!std::isfinite(cost)) return at;
    double lambda = 1e-3;
    while (at.iterations < cfg.max_iterations) {
        ++at.iterations;
        if (cost == 0.0) {
            at.converged = true;
            break;
        }
        const double diag_max = H.diagonal().maxCoeff();
        const double floor = 1e-12 * std::max(diag_max, 1e-300);
        bool accepted = false;
        bool stop = false;
        while (!accepted && !stop) {
            Mat6 A = H;
            for (int i = 0; i < kNumKinetic; ++i) A(i, i) += lambda * std::max(H(i, i), floor);
            const Vec6 delta = A.ldlt().solve(-g);
            const Vec6 trial = prob.clamp(at.theta + delta);
            const double step = (trial - at.theta).norm();
            if (!std::isfinite(step) ||
                step <= cfg.xtol * (at.theta.norm() + cfg.xtol)) {
                at.converged = std::isfinite(step);
                stop = true;
                break;
            }
            const double trial_cost = prob.cost(trial);
            if (std::isfinite(trial_cost) && trial_cost < cost) {
                const double rel = 1.0 - std::sqrt(trial_cost / cost);
                at.theta = trial;
                cost = prob.linearize(at.theta, g, H);
                lambda = std::max(lambda / 3.0, 1e-15);
                accepted = true;
                if (rel < cfg.ftol) {
                    at.converged = true;
                    stop = true;
                }
            } else {
                lambda *= 4.0;
                if (lambda > 1e20) stop = true;
            }
        }
        if (stop) break;
    }
    at.cost = cost;
    return at;
}

}  // namespace

FitResult fit(const TimeSeries& series, const FitConfig& config) {
    series.validate();
    const TimeSeries data =
        config.truncate_at_s ? truncate(series, *config.truncate_at_s) : series;

    Problem prob;
    for (std::size_t k = 0; k < data.size(); ++k) {
        if (!data.valid[k]) continue;
        prob.times.push_back(data.time_at(k));
        prob.observed.push_back(data.values[k]);
    }
    if (prob.times.size() < static_cast<std::size_t>(kNumKinetic)) {
        throw DomainError("fit: fewer valid samples than parameters");
    }
    if (prob.times.size() < 20) throw DomainError("fit: fewer than 20 valid samples");
    prob.rk4_step = data.sample_period_s / 10.0;

    const KineticParams guess = config.start ? *config.start : initial_guess(data, config.landmarks);
    guess.validate();
    const Peak peak = detect_peak(smooth(data, config.landmarks.smooth_window_s));
    const double t0_max = std::max({peak.time_s, guess.delay_s, 0.0});

    prob.lo << std::log(1e-3), std::log(1e-2), std::log(1e-2), std::log(1e-9), 0.0, 0.0;
    prob.hi << std::log(1e3), std::log(1e5), std::log(1e10), std::log(1e6),
        std::numeric_limits<double>::infinity(), t0_max;

    KineticParams start = guess;
    start.gain = std::max(start.gain, 1e-9);
    const Vec6 theta0 = Problem::to_theta(start);

    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> jitter(-config.perturbation, config.perturbation);

    // Multi-start on a decimated copy, then polish the two best candidates
    // on every sample. Short series skip the coarse stage.
    constexpr std::size_t kCoarseSamples = 1000;
    const std::size_t stride = (prob.times.size() + kCoarseSamples - 1) / kCoarseSamples;
    Problem coarse = prob;
    if (stride > 1) {
        coarse.times.clear();
        coarse.observed.clear();
        for (std::size_t k = 0; k < prob.times.size(); k += stride) {
            coarse.times.push_back(prob.times[k]);
            coarse.observed.push_back(prob.observed[k]);
        }
    }

    std::vector<Attempt> attempts;
    for (int r = 0; r <= config.n_restarts; ++r) {
        Vec6 th = theta0;
        if (r > 0) {
            for (int j = 0; j < 4; ++j) th[j] += jitter(rng);
        }
        attempts.push_back(levenberg_marquardt(coarse, th, config));
    }
    std::stable_sort(attempts.begin(), attempts.end(),
                     [](const Attempt& a, const Attempt& b) { return a.cost < b.cost; });

    Attempt best;
    if (stride == 1) {
        best = attempts.front();
    } else {
        const std::size_t n_polish = std::min<std::size_t>(2, attempts.size());
        for (std::size_t i = 0; i < n_polish; ++i) {
            if (!std::isfinite(attempts[i].cost)) continue;
            const Attempt at = levenberg_marquardt(prob, attempts[i].theta, config);
            if (at.cost < best.cost) best = at;
        }
    }
    if (!std::isfinite(best.cost)) {
        best.theta = prob.clamp(theta0);
        best.cost = prob.cost(best.theta);
    }

    FitResult res;
    res.params = Problem::to_params(best.theta);
    res.rmse = std::sqrt(best.cost / static_cast<double>(prob.times.size()));
    res.n_iterations = best.iterations;
    res.converged = best.converged;
    res.truncation_time_s = prob.times.back();
    return res;
}

}  // namespace icgkit
