#include "aif/math.hpp"

#include "aif/error.hpp"

namespace aif {

double bisect(const std::function<double(double)>& f, double lo, double hi, double rel_tol,
              int max_iter) {
  double f_lo = f(lo);
  const double f_hi = f(hi);
  if (f_lo == 0.0) return lo;
  if (f_hi == 0.0) return hi;
  if ((f_lo < 0.0) == (f_hi < 0.0)) throw DomainError("bisect: no sign change on bracket");
  for (int i = 0; i < max_iter; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double scale = std::abs(mid) > 0.0 ? std::abs(mid) : 1.0;
    if (hi - lo <= rel_tol * scale) return mid;
    const double f_mid = f(mid);
    if (f_mid == 0.0) return mid;
    if ((f_mid < 0.0) == (f_lo < 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace aif
