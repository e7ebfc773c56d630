#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "eocav/spectrum.hpp"
#include "eocav/util.hpp"

// Nonlinear least squares (Levenberg-Marquardt with analytic Jacobians and
// a Marquardt diagonal damping schedule), peak detection, and transition
// timing. All solvers are deterministic: fixed damping schedule, fixed
// data-driven initialization, no randomness.

namespace eocav {

struct FitResult {
    std::vector<std::string> names;
    std::vector<double> params;
    std::vector<double> stderrs;
    double residual_norm = 0.0;  // RMS residual
    double grad_norm = 0.0;      // max |J^T r| at the final point
    bool converged = false;
    bool degenerate = false;     // two-exponential lifetimes within 5%
    int iterations = 0;

    double param(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return params[i];
        throw validation_error("fit result: unknown parameter " + name);
    }
    double stderr_of(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return stderrs[i];
        throw validation_error("fit result: unknown parameter " + name);
    }
};

struct LmOptions {
    int max_iter = 200;
    double xtol = 1e-8;       // relative parameter change
    double ftol = 1e-12;      // relative SSR decrease; catches exact-zero params
    double lambda0 = 1e-3;
    double lambda_up = 10.0;
    double lambda_down = 0.1;
    bool poisson_weights = false;  // weight residuals by 1/sqrt(max(y,1))
};

namespace detail {

// Generic LM driver. Model must provide: int np() const, eval(x,p),
// grad(x,p,out[np]) writing df/dp_k.
template <class Model>
FitResult lm_fit(const Model& model, const std::vector<double>& x,
                 const std::vector<double>& y, std::vector<double> p,
                 const LmOptions& opt) {
    const auto n = static_cast<Eigen::Index>(x.size());
    const auto m = static_cast<Eigen::Index>(p.size());
    if (n <= m) throw validation_error("fit: more parameters than data points");

    std::vector<double> w(x.size(), 1.0);
    if (opt.poisson_weights)
        for (std::size_t i = 0; i < y.size(); ++i)
            w[i] = 1.0 / std::sqrt(std::max(y[i], 1.0));

    Eigen::MatrixXd jac(n, m);
    Eigen::VectorXd res(n);
    std::vector<double> g(p.size());

    auto fill = [&](const std::vector<double>& pp) {
        double ssr = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double fx = model.eval(x[i], pp.data());
            res(i) = w[i] * (y[i] - fx);
            model.grad(x[i], pp.data(), g.data());
            for (Eigen::Index k = 0; k < m; ++k) jac(i, k) = w[i] * g[k];
            ssr += res(i) * res(i);
        }
        return ssr;
    };

    double ssr = fill(p);
    double lambda = opt.lambda0;
    FitResult out;
    int iter = 0;
    bool converged = false;

    for (; iter < opt.max_iter && !converged; ++iter) {
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd jtr = jac.transpose() * res;
        bool accepted = false;
        for (int attempt = 0; attempt < 30; ++attempt) {
            Eigen::MatrixXd a = jtj;
            for (Eigen::Index k = 0; k < m; ++k)
                a(k, k) += lambda * std::max(jtj(k, k), 1e-30);
            const Eigen::VectorXd step = a.ldlt().solve(jtr);
            std::vector<double> trial = p;
            for (Eigen::Index k = 0; k < m; ++k) trial[k] += step(k);
            const double trial_ssr = fill(trial);
            if (std::isfinite(trial_ssr) && trial_ssr <= ssr) {
                double rel = 0.0;
                for (Eigen::Index k = 0; k < m; ++k)
                    rel = std::max(rel, std::abs(step(k)) /
                                            (std::abs(p[static_cast<std::size_t>(k)]) +
                                             1e-30));
                const double drop = ssr - trial_ssr;
                p = trial;
                ssr = trial_ssr;
                lambda = std::max(lambda * opt.lambda_down, 1e-12);
                accepted = true;
                if (rel < opt.xtol || drop <= opt.ftol * ssr) converged = true;
                break;
            }
            lambda *= opt.lambda_up;
            ssr = fill(p);  // restore res/jac for the current point
        }
        if (!accepted) break;  // damping exhausted, treat as stalled
    }

    ssr = fill(p);
    out.params = p;
    out.iterations = iter;
    out.converged = converged;
    out.residual_norm = std::sqrt(ssr / static_cast<double>(n));
    out.grad_norm = (jac.transpose() * res).cwiseAbs().maxCoeff();

    // Covariance via the unit-diagonal rescaling of JtJ: parameters in Hz sit
    // ~17 decades above dimensionless ones, which the raw rank test rejects.
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const double dof = static_cast<double>(n - m);
    const double s2 = ssr / dof;
    out.stderrs.assign(p.size(), 0.0);
    Eigen::VectorXd d(m);
    bool scalable = true;
    for (Eigen::Index k = 0; k < m; ++k) {
        const double v = jtj(k, k);
        if (!(v > 0.0)) {
            scalable = false;
            break;
        }
        d(k) = 1.0 / std::sqrt(v);
    }
    if (scalable) {
        const Eigen::MatrixXd scaled = d.asDiagonal() * jtj * d.asDiagonal();
        Eigen::FullPivLU<Eigen::MatrixXd> lu(scaled);
        if (lu.isInvertible()) {
            const Eigen::MatrixXd cov = lu.inverse();
            for (Eigen::Index k = 0; k < m; ++k)
                out.stderrs[static_cast<std::size_t>(k)] =
                    d(k) * std::sqrt(std::max(0.0, cov(k, k)) * s2);
        }
    }
    return out;
}

struct LorentzianModel {
    double eval(double x, const double* p) const {
        // p: center, fwhm, amplitude, offset
        const double u = 2.0 * (x - p[0]) / p[1];
        return p[3] + p[2] / (1.0 + u * u);
    }
    void grad(double x, const double* p, double* g) const {
        const double u = 2.0 * (x - p[0]) / p[1];
        const double l = 1.0 / (1.0 + u * u);
        g[0] = p[2] * l * l * 4.0 * u / p[1];
        g[1] = p[2] * l * l * 2.0 * u * u / p[1];
        g[2] = l;
        g[3] = 1.0;
    }
};

struct GaussianModel {
    double eval(double x, const double* p) const {
        // p: center, fwhm, amplitude, offset
        const double z = (x - p[0]) / p[1];
        return p[3] + p[2] * std::exp(-kFourLn2 * z * z);
    }
    void grad(double x, const double* p, double* g) const {
        const double z = (x - p[0]) / p[1];
        const double e = std::exp(-kFourLn2 * z * z);
        g[0] = p[2] * e * 2.0 * kFourLn2 * z / p[1];
        g[1] = p[2] * e * 2.0 * kFourLn2 * z * z / p[1];
        g[2] = e;
        g[3] = 1.0;
    }
};

struct Exp1Model {
    double eval(double t, const double* p) const {
        // p: tau, amplitude, offset
        return p[2] + p[1] * std::exp(-t / p[0]);
    }
    void grad(double t, const double* p, double* g) const {
        const double e = std::exp(-t / p[0]);
        g[0] = p[1] * e * t / (p[0] * p[0]);
        g[1] = e;
        g[2] = 1.0;
    }
};

struct Exp2Model {
    double eval(double t, const double* p) const {
        // p: tau1, tau2, a1, a2, offset
        return p[4] + p[2] * std::exp(-t / p[0]) + p[3] * std::exp(-t / p[1]);
    }
    void grad(double t, const double* p, double* g) const {
        const double e1 = std::exp(-t / p[0]);
        const double e2 = std::exp(-t / p[1]);
        g[0] = p[2] * e1 * t / (p[0] * p[0]);
        g[1] = p[3] * e2 * t / (p[1] * p[1]);
        g[2] = e1;
        g[3] = e2;
        g[4] = 1.0;
    }
};

// Baseline, extremum, and half-width moments for lineshape initialization.
struct LineInit {
    double center, fwhm, amplitude, offset;
};

inline LineInit lineshape_init(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    const std::size_t edge = std::max<std::size_t>(1, n / 10);
    double base = 0.0;
    for (std::size_t i = 0; i < edge; ++i) base += y[i] + y[n - 1 - i];
    base /= static_cast<double>(2 * edge);

    std::size_t ext = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = std::abs(y[i] - base);
        if (d > best) {
            best = d;
            ext = i;
        }
    }
    const double amp = y[ext] - base;
    const double half = base + 0.5 * amp;

    // Half-maximum crossings on both sides of the extremum.
    double xl = x.front(), xr = x.back();
    for (std::size_t i = ext; i-- > 0;) {
        const bool crossed = (amp > 0.0) ? (y[i] <= half) : (y[i] >= half);
        if (crossed) {
            const double f = (half - y[i]) / (y[i + 1] - y[i]);
            xl = x[i] + f * (x[i + 1] - x[i]);
            break;
        }
    }
    for (std::size_t i = ext + 1; i < n; ++i) {
        const bool crossed = (amp > 0.0) ? (y[i] <= half) : (y[i] >= half);
        if (crossed) {
            const double f = (half - y[i - 1]) / (y[i] - y[i - 1]);
            xr = x[i - 1] + f * (x[i] - x[i - 1]);
            break;
        }
    }
    double fwhm = xr - xl;
    if (!(fwhm > 0.0)) fwhm = (x.back() - x.front()) / 4.0;
    return {x[ext], fwhm, amp, base};
}

// Log-linear slope of y - offset over [i0, i1), ignoring points within
// `floor` of the baseline: returns tau and amplitude.
inline bool loglinear_tau(const std::vector<double>& t, const std::vector<double>& y,
                          double offset, std::size_t i0, std::size_t i1, double floor_v,
                          double& tau, double& amp) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t cnt = 0;
    for (std::size_t i = i0; i < i1; ++i) {
        const double d = y[i] - offset;
        if (d <= floor_v || d <= 0.0) continue;
        const double ly = std::log(d);
        sx += t[i];
        sy += ly;
        sxx += t[i] * t[i];
        sxy += t[i] * ly;
        ++cnt;
    }
    if (cnt < 3) return false;
    const double denom = static_cast<double>(cnt) * sxx - sx * sx;
    if (denom == 0.0) return false;
    const double slope = (static_cast<double>(cnt) * sxy - sx * sy) / denom;
    const double inter = (sy - slope * sx) / static_cast<double>(cnt);
    if (!(slope < 0.0)) return false;
    tau = -1.0 / slope;
    amp = std::exp(inter);
    return true;
}

}  // namespace detail

inline void require_fit_input(const Spectrum& s, std::size_t min_points) {
    s.validate();
    if (s.size() < min_points)
        throw validation_error(
            str_printf("fit: needs at least %zu points, got %zu", min_points, s.size()));
}

inline FitResult fit_lorentzian(const Spectrum& s,
                                std::optional<std::vector<double>> init = std::nullopt,
                                const LmOptions& opt = {}) {
    require_fit_input(s, 8);
    std::vector<double> p;
    if (init) {
        if (init->size() != 4)
            throw validation_error("fit: lorentzian init needs {center,fwhm,amplitude,offset}");
        p = *init;
    } else {
        const auto li = detail::lineshape_init(s.f_hz, s.v);
        p = {li.center, li.fwhm, li.amplitude, li.offset};
    }
    if (!(s.f_hz.back() - s.f_hz.front() >= 2.0 * p[1]))
        throw validation_error("fit: scan must span at least twice the initial width");
    auto r = detail::lm_fit(detail::LorentzianModel{}, s.f_hz, s.v, p, opt);
    r.params[1] = std::abs(r.params[1]);
    r.names = {"center", "fwhm", "amplitude", "offset"};
    return r;
}

inline FitResult fit_gaussian(const Spectrum& s,
                              std::optional<std::vector<double>> init = std::nullopt,
                              const LmOptions& opt = {}) {
    require_fit_input(s, 8);
    std::vector<double> p;
    if (init) {
        if (init->size() != 4)
            throw validation_error("fit: gaussian init needs {center,fwhm,amplitude,offset}");
        p = *init;
    } else {
        const auto li = detail::lineshape_init(s.f_hz, s.v);
        p = {li.center, li.fwhm, li.amplitude, li.offset};
    }
    if (!(s.f_hz.back() - s.f_hz.front() >= 2.0 * p[1]))
        throw validation_error("fit: scan must span at least twice the initial width");
    auto r = detail::lm_fit(detail::GaussianModel{}, s.f_hz, s.v, p, opt);
    r.params[1] = std::abs(r.params[1]);
    r.names = {"center", "fwhm", "amplitude", "offset"};
    return r;
}

// n_components = 1: params {tau, amplitude, offset}.
// n_components = 2: params {tau1, tau2, a1, a2, offset}, lifetimes ascending.
inline FitResult fit_exponential(const std::vector<double>& t,
                                 const std::vector<double>& y, int n_components,
                                 std::optional<std::vector<double>> init = std::nullopt,
                                 const LmOptions& opt = {}) {
    if (t.size() != y.size() || t.size() < 8)
        throw validation_error("fit: exponential needs matched arrays, >= 8 points");
    if (n_components != 1 && n_components != 2)
        throw validation_error("fit: n_components must be 1 or 2");

    const std::size_t n = t.size();
    const std::size_t tail = std::max<std::size_t>(3, n / 20);
    double offset0 = 0.0;
    for (std::size_t i = n - tail; i < n; ++i) offset0 += y[i];
    offset0 /= static_cast<double>(tail);

    if (n_components == 1) {
        std::vector<double> p;
        if (init) {
            if (init->size() != 3)
                throw validation_error("fit: exp1 init needs {tau,amplitude,offset}");
            p = *init;
        } else {
            const double ymax = *std::max_element(y.begin(), y.end());
            const double floor_v = 0.02 * (ymax - offset0);
            double tau = 0.0, amp = 0.0;
            if (!detail::loglinear_tau(t, y, offset0, 0, n, floor_v, tau, amp)) {
                if (!detail::loglinear_tau(t, y, 0.0, 0, n, 0.0, tau, amp))
                    throw validation_error("fit: trace is not a decaying exponential");
                offset0 = 0.0;
            }
            p = {tau, amp, offset0};
        }
        if (!(t.back() - t.front() >= 3.0 * p[0]))
            throw validation_error("fit: trace must cover >= 3x the initial lifetime");
        auto r = detail::lm_fit(detail::Exp1Model{}, t, y, p, opt);
        r.names = {"tau", "amplitude", "offset"};
        return r;
    }

    std::vector<double> p;
    if (init) {
        if (init->size() != 5)
            throw validation_error("fit: exp2 init needs {tau1,tau2,a1,a2,offset}");
        p = *init;
    } else {
        // Slow component from the tail, fast from the slow-subtracted head,
        // then amplitudes by linear projection at fixed lifetimes. The tail
        // window starts past the head and its floor is relative to its own
        // first value, so traces whose slow component has decayed far below
        // the peak still yield a slope.
        double tau_s = 0.0, a_s = 0.0;
        const std::size_t third = n / 3;
        bool got_slow = false;
        for (double frac : {1.0 / 3.0, 1.0 / 10.0, 0.0}) {
            const auto i0 = static_cast<std::size_t>(static_cast<double>(n) * frac);
            if (i0 + 3 > n) continue;
            const double start = y[i0] - offset0;
            if (!(start > 0.0)) continue;
            if (detail::loglinear_tau(t, y, offset0, i0, n, 0.02 * start, tau_s, a_s)) {
                got_slow = true;
                break;
            }
        }
        if (!got_slow)
            throw validation_error("fit: trace is not a decaying exponential");
        std::vector<double> head(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(third));
        double head_max = 0.0;
        for (std::size_t i = 0; i < third; ++i) {
            head[i] -= offset0 + a_s * std::exp(-t[i] / tau_s);
            head_max = std::max(head_max, head[i]);
        }
        double tau_f = tau_s / 4.0, a_f = a_s;
        detail::loglinear_tau(t, head, 0.0, 0, third, 0.02 * head_max, tau_f, a_f);
        if (!(tau_f > 0.0) || tau_f >= tau_s) tau_f = tau_s / 4.0;

        Eigen::MatrixXd a(n, 3);
        Eigen::VectorXd b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a(static_cast<Eigen::Index>(i), 0) = std::exp(-t[i] / tau_f);
            a(static_cast<Eigen::Index>(i), 1) = std::exp(-t[i] / tau_s);
            a(static_cast<Eigen::Index>(i), 2) = 1.0;
            b(static_cast<Eigen::Index>(i)) = y[i];
        }
        const Eigen::VectorXd c = a.colPivHouseholderQr().solve(b);
        p = {tau_f, tau_s, c(0), c(1), c(2)};
    }
    if (!(t.back() - t.front() >= 3.0 * std::max(p[0], p[1])))
        throw validation_error("fit: trace must cover >= 3x the initial slow lifetime");
    auto r = detail::lm_fit(detail::Exp2Model{}, t, y, p, opt);
    if (r.params[0] > r.params[1]) {
        std::swap(r.params[0], r.params[1]);
        std::swap(r.params[2], r.params[3]);
        std::swap(r.stderrs[0], r.stderrs[1]);
        std::swap(r.stderrs[2], r.stderrs[3]);
    }
    r.degenerate =
        std::abs(r.params[1] - r.params[0]) < 0.05 * std::max(r.params[0], r.params[1]);
    r.names = {"tau1", "tau2", "a1", "a2", "offset"};
    return r;
}

struct Peak {
    double center_hz = 0.0;
    double height = 0.0;  // in the spectrum's original units
};

// Local maxima filtered by topographic prominence on range-normalized values
// (so the result is invariant under positive affine scaling), then greedily
// merged: highest first, discarding any peak within min_separation of an
// accepted one. Output sorted by frequency.
inline std::vector<Peak> detect_peaks(const Spectrum& s, double min_prominence_rel,
                                      double min_separation_hz) {
    s.validate();
    if (!(min_prominence_rel > 0.0))
        throw validation_error("peaks: prominence threshold must be positive");
    if (!(min_separation_hz >= 0.0))
        throw validation_error("peaks: separation must be >= 0");
    const std::size_t n = s.size();
    if (n < 3) return {};

    const double vmin = *std::min_element(s.v.begin(), s.v.end());
    const double vmax = *std::max_element(s.v.begin(), s.v.end());
    if (!(vmax > vmin)) return {};
    const double range = vmax - vmin;

    std::vector<std::size_t> cand;
    for (std::size_t i = 1; i + 1 < n; ++i)
        if (s.v[i] > s.v[i - 1] && s.v[i] >= s.v[i + 1]) cand.push_back(i);

    std::vector<std::size_t> keep;
    for (std::size_t i : cand) {
        double base_l = s.v[i];
        for (std::size_t j = i; j-- > 0;) {
            base_l = std::min(base_l, s.v[j]);
            if (s.v[j] > s.v[i]) break;
        }
        double base_r = s.v[i];
        for (std::size_t j = i + 1; j < n; ++j) {
            base_r = std::min(base_r, s.v[j]);
            if (s.v[j] > s.v[i]) break;
        }
        const double prominence = (s.v[i] - std::max(base_l, base_r)) / range;
        if (prominence >= min_prominence_rel) keep.push_back(i);
    }

    std::sort(keep.begin(), keep.end(), [&](std::size_t a, std::size_t b) {
        if (s.v[a] != s.v[b]) return s.v[a] > s.v[b];
        return a < b;
    });
    std::vector<std::size_t> accepted;
    for (std::size_t i : keep) {
        bool clash = false;
        for (std::size_t j : accepted)
            if (std::abs(s.f_hz[i] - s.f_hz[j]) < min_separation_hz) {
                clash = true;
                break;
            }
        if (!clash) accepted.push_back(i);
    }
    std::sort(accepted.begin(), accepted.end());

    std::vector<Peak> out;
    out.reserve(accepted.size());
    for (std::size_t i : accepted) out.push_back({s.f_hz[i], s.v[i]});
    return out;
}

// 10%-90% transition duration of a monotone trace, crossings by linear
// interpolation.
inline double estimate_switching_time(const std::vector<double>& t,
                                      const std::vector<double>& v) {
    if (t.size() != v.size() || t.size() < 2)
        throw validation_error("switch: needs matched arrays with >= 2 samples");
    const double v0 = v.front();
    const double v1 = v.back();
    if (v0 == v1) throw validation_error("switch: trace has no transition");
    const double range = std::abs(v1 - v0);
    const double dir = (v1 > v0) ? 1.0 : -1.0;
    for (std::size_t i = 1; i < t.size(); ++i) {
        if (!(t[i] > t[i - 1]))
            throw validation_error("switch: time grid must be strictly increasing");
        if (dir * (v[i] - v[i - 1]) < -1e-9 * range)
            throw validation_error("switch: trace is not monotone across the transition");
    }
    auto crossing = [&](double level) {
        for (std::size_t i = 1; i < t.size(); ++i) {
            const bool before = dir * (v[i - 1] - level) < 0.0;
            const bool after = dir * (v[i] - level) >= 0.0;
            if (before && after) {
                const double f = (level - v[i - 1]) / (v[i] - v[i - 1]);
                return t[i - 1] + f * (t[i] - t[i - 1]);
            }
        }
        return t.back();
    };
    const double l10 = v0 + 0.1 * (v1 - v0);
    const double l90 = v0 + 0.9 * (v1 - v0);
    return crossing(l90) - crossing(l10);
}

}  // namespace eocav
