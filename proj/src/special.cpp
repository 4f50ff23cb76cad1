#include "pairscale/special.hpp"

#include <cmath>
#include <limits>

#include "pairscale/errors.hpp"

namespace pairscale {

namespace {

// Continued fraction for I_x(a, b) (Numerical Recipes betacf form).
double beta_continued_fraction(double x, double a, double b) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw DomainError("incomplete beta continued fraction did not converge");
}

double log_beta_prefactor(double x, double a, double b) {
  return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
         b * std::log1p(-x);
}

}  // namespace

double regularized_incomplete_beta(double x, double a, double b) {
  if (!(a > 0) || !(b > 0)) throw DomainError("incomplete beta needs a, b > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("incomplete beta needs x in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double front = std::exp(log_beta_prefactor(x, a, b));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(x, a, b) / a;
  return 1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b;
}

namespace {

void check_f_args(double x, double df1, double df2) {
  if (!(df1 >= 1.0) || !(df2 >= 1.0)) throw DomainError("F distribution needs df1, df2 >= 1");
  if (!(x >= 0.0)) throw DomainError("F distribution argument must be >= 0");
}

}  // namespace

double f_cdf(double x, double df1, double df2) {
  check_f_args(x, df1, df2);
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  // I_{d1 x / (d1 x + d2)}(d1/2, d2/2); the complementary form keeps
  // precision when the argument is close to 1.
  const double num = df1 * x;
  const double z = num / (num + df2);
  if (z > 0.5) return 1.0 - regularized_incomplete_beta(df2 / (num + df2), df2 / 2.0, df1 / 2.0);
  return regularized_incomplete_beta(z, df1 / 2.0, df2 / 2.0);
}

double f_sf(double x, double df1, double df2) {
  check_f_args(x, df1, df2);
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  const double num = df1 * x;
  return regularized_incomplete_beta(df2 / (num + df2), df2 / 2.0, df1 / 2.0);
}

}  // namespace pairscale
