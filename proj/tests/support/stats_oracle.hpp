#pragma once

// Reference statistics for tests: textbook formulas in long double, tail
// probabilities from Boost.Math.

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <vector>

namespace agentab::testing {

struct RefT {
  double t;
  double df;
  double p;
};

inline long double RefMean(const std::vector<double>& v) {
  long double s = 0;
  for (double x : v) s += x;
  return s / v.size();
}

inline long double RefVar(const std::vector<double>& v) {
  const long double m = RefMean(v);
  long double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / (v.size() - 1);
}

inline double RefTwoSidedT(double t, double df) {
  boost::math::students_t dist(df);
  return 2 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

inline RefT RefPooledT(const std::vector<double>& a, const std::vector<double>& b) {
  const long double na = a.size(), nb = b.size();
  const long double sp2 = ((na - 1) * RefVar(a) + (nb - 1) * RefVar(b)) / (na + nb - 2);
  const long double t = (RefMean(a) - RefMean(b)) / std::sqrt(sp2 * (1 / na + 1 / nb));
  const double df = static_cast<double>(na + nb - 2);
  return {static_cast<double>(t), df, RefTwoSidedT(static_cast<double>(t), df)};
}

inline RefT RefWelchT(const std::vector<double>& a, const std::vector<double>& b) {
  const long double na = a.size(), nb = b.size();
  const long double va = RefVar(a) / na, vb = RefVar(b) / nb;
  const long double t = (RefMean(a) - RefMean(b)) / std::sqrt(va + vb);
  const long double df = (va + vb) * (va + vb) / (va * va / (na - 1) + vb * vb / (nb - 1));
  return {static_cast<double>(t), static_cast<double>(df), RefTwoSidedT(static_cast<double>(t), static_cast<double>(df))};
}

// Pearson statistic from observed and expected cells, no continuity correction.
inline RefT RefChiSquare(long long a, long long b, long long c, long long d) {
  const long double obs[2][2] = {{static_cast<long double>(a), static_cast<long double>(b)},
                                 {static_cast<long double>(c), static_cast<long double>(d)}};
  const long double n = a + b + c + d;
  long double x2 = 0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const long double e = (obs[i][0] + obs[i][1]) * (obs[0][j] + obs[1][j]) / n;
      x2 += (obs[i][j] - e) * (obs[i][j] - e) / e;
    }
  }
  boost::math::chi_squared dist(1);
  const double x = static_cast<double>(x2);
  return {x, 1, boost::math::cdf(boost::math::complement(dist, x))};
}

}  // namespace agentab::testing
