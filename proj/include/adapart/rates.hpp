#pragma once

#include <utility>
#include <vector>

namespace adapart {

/// Constants entering the closed-form rate formulas.
struct RateParams {
  double r = 1.0;       // approximation exponent, > 0
  double A2 = 1.0;      // upper approximation constant, > 0
  double c1 = 0.5;      // likelihood-ratio constant, in (0,1)
  double c_prime = 0.0; // entropy-bound additive constant
  double c_star = 1.0;  // partition-count constant, > 0

  void validate() const;
};

/// Posterior concentration radius n^{-r/(2r+1)} (log n)^{2 + 1/(2r)}.
double epsilon_n(double n, double r);

/// sqrt(I log I log n / n).
double delta_nI(double n, double I);

enum class Rounding { nearest, floor, ceil };

/// Sieve partition-size schedule ((2^8 A2^2 r / c1) n / log n)^{1/(2r+1)},
/// rounded to an integer >= 1.
long sieve_size_schedule(double n, double r, double A2, double c1,
                         Rounding rounding = Rounding::nearest);

/// Bracketing-entropy upper bound
/// I log p + (I+1) log(I+1) + (I/2) log I + I log(d/eps) + c'.
double entropy_upper_bound(double eps, int I, int p, double d, double c_prime);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double slope_std_error = 0.0;
};

/// Ordinary least squares of log(error) on log(n). The slope estimates
/// -r/(2r+1) for a power-law error curve.
RateFit fit_rate_exponent(const std::vector<std::pair<double, double>>& curve);

}  // namespace adapart
