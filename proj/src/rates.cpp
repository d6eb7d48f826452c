#include "adapart/rates.hpp"

#include <cmath>
#include <stdexcept>

namespace adapart {

void RateParams::validate() const {
  if (!(r > 0.0)) throw std::invalid_argument("r must be positive");
  if (!(A2 > 0.0)) throw std::invalid_argument("A2 must be positive");
  if (!(c1 > 0.0 && c1 < 1.0)) throw std::invalid_argument("c1 must lie in (0,1)");
  if (!(c_star > 0.0)) throw std::invalid_argument("c_star must be positive");
}

double epsilon_n(double n, double r) {
  if (!(n >= 2.0)) throw std::invalid_argument("epsilon_n requires n >= 2");
  if (!(r > 0.0)) throw std::invalid_argument("epsilon_n requires r > 0");
  return std::pow(n, -r / (2.0 * r + 1.0)) *
         std::pow(std::log(n), 2.0 + 1.0 / (2.0 * r));
}

double delta_nI(double n, double I) {
  if (!(n >= 2.0)) throw std::invalid_argument("delta_nI requires n >= 2");
  if (!(I >= 2.0)) throw std::invalid_argument("delta_nI requires I >= 2");
  return std::sqrt(I * std::log(I) * std::log(n) / n);
}

long sieve_size_schedule(double n, double r, double A2, double c1, Rounding rounding) {
  if (!(n >= 2.0)) throw std::invalid_argument("sieve_size_schedule requires n >= 2");
  RateParams{r, A2, c1, 0.0, 1.0}.validate();
  const double base = (256.0 * A2 * A2 * r / c1) * n / std::log(n);
  const double value = std::pow(base, 1.0 / (2.0 * r + 1.0));
  double rounded;
  switch (rounding) {
    case Rounding::floor: rounded = std::floor(value); break;
    case Rounding::ceil: rounded = std::ceil(value); break;
    default: rounded = std::round(value); break;
  }
  return std::max(1L, static_cast<long>(rounded));
}

double entropy_upper_bound(double eps, int I, int p, double d, double c_prime) {
  if (!(eps > 0.0 && eps <= d)) throw std::invalid_argument("requires 0 < eps <= d");
  if (I < 1 || p < 1) throw std::invalid_argument("I and p must be positive");
  return I * std::log(static_cast<double>(p)) + (I + 1.0) * std::log(I + 1.0) +
         0.5 * I * std::log(static_cast<double>(I)) + I * std::log(d / eps) + c_prime;
}

RateFit fit_rate_exponent(const std::vector<std::pair<double, double>>& curve) {
  if (curve.size() < 3)
    throw std::invalid_argument("rate fit needs at least 3 points");
  const double m = static_cast<double>(curve.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [n, err] : curve) {
    if (!(n > 0.0 && err > 0.0))
      throw std::invalid_argument("rate fit needs positive (n, error) pairs");
    const double x = std::log(n);
    const double y = std::log(err);
    sx += x; sy += y; sxx += x * x; sxy += x * y; syy += y * y;
  }
  const double varx = sxx - sx * sx / m;
  if (varx <= 1e-14) throw std::invalid_argument("rate fit is degenerate: constant n");
  RateFit fit;
  fit.slope = (sxy - sx * sy / m) / varx;
  fit.intercept = (sy - fit.slope * sx) / m;
  double ss_res = 0.0;
  const double mean_y = sy / m;
  double ss_tot = 0.0;
  for (const auto& [n, err] : curve) {
    const double x = std::log(n);
    const double y = std::log(err);
    const double resid = y - (fit.intercept + fit.slope * x);
    ss_res += resid * resid;
    ss_tot += (y - mean_y) * (y - mean_y);
  }
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  if (curve.size() > 2) {
    const double sigma_sq = ss_res / (m - 2.0);
    fit.slope_std_error = std::sqrt(sigma_sq / varx);
  }
  return fit;
}

}  // namespace adapart
