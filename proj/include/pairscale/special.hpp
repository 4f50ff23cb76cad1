#pragma once

namespace pairscale {

// Regularized incomplete beta I_x(a, b), a, b > 0, x in [0, 1]. Continued
// fraction (modified Lentz) on whichever tail converges fastest.
double regularized_incomplete_beta(double x, double a, double b);

// CDF of the F(df1, df2) distribution. Throws DomainError for df < 1 or
// x < 0 / NaN.
double f_cdf(double x, double df1, double df2);

// Upper tail 1 - f_cdf, evaluated without cancellation.
double f_sf(double x, double df1, double df2);

}  // namespace pairscale
