#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace resonance {

// Standard normal CDF.
double normal_cdf(double x);

// Inverse of the standard normal CDF (Wichura's PPND16; accurate to
// ~1e-15 over the full double range, including far tails).
double normal_quantile(double p);

// One-sided z-score for a p-value: z such that P(Z >= z) = p.
double z_of_pvalue(double p);

// Asymptotic Kolmogorov distribution tail: P(sqrt(n)*D >= lambda).
// Uses the alternating series for large lambda and the dual theta series
// for small lambda; terms below 1e-10 are dropped.
double kolmogorov_tail(double lambda);

// One-sample KS statistic of a sorted sample against CDF values evaluated
// at the sample points (cdf_at[i] = F(sorted[i])).
double ks_statistic_from_cdf(std::span<const double> cdf_at);

// Regularized lower incomplete gamma P(a,x); Q(a,x) = 1 - P(a,x).
// Series for x < a+1, Lentz continued fraction otherwise.
double regularized_gamma_p(double a, double x);
double regularized_gamma_q(double a, double x);

// Adaptive Simpson quadrature with relative tolerance.
double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double rel_tol, int max_depth = 40);

// Fixed-order Gauss-Legendre on [a,b] (order 16).
double integrate_gl16(const std::function<double(double)>& f, double a, double b);

// Sample mean / (biased ML) variance.
double mean_of(std::span<const double> v);
double variance_of(std::span<const double> v);

// Nearest-rank empirical quantile: smallest value with at least ceil(p*n)
// observations <= it. `sorted` must be ascending.
double quantile_sorted(std::span<const double> sorted, double p);

struct NelderMeadResult {
    std::vector<double> x;
    double fmin = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct NelderMeadOptions {
    int max_iter = 2000;
    double f_tol = 1e-10;
    double x_tol = 1e-10;
};

// Derivative-free simplex minimizer (reflect/expand/contract/shrink with
// the usual 1, 2, 0.5, 0.5 coefficients). `step` sets the initial simplex
// edge along each coordinate.
NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                             std::span<const double> x0, std::span<const double> step,
                             const NelderMeadOptions& opts = {});

// Dense small-matrix helpers (row-major n*n).
// Gauss-Jordan inverse with partial pivoting; returns false if singular.
bool invert_matrix(std::vector<double>& a, int n);

// Quadratic form g^T A g for row-major A.
double quad_form(std::span<const double> a, std::span<const double> g);

}  // namespace resonance
