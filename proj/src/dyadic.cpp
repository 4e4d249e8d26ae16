#include "projlab/dyadic.hpp"

#include <string>

#include "projlab/error.hpp"

namespace projlab {

int level_of(double delta) {
  if (!(delta > 0.0) || delta > 1.0) {
    fail(ErrorKind::Domain, "scale must lie in (0, 1], got " + std::to_string(delta));
  }
  int exponent = 0;
  const double mantissa = std::frexp(delta, &exponent);
  if (mantissa != 0.5) {
    fail(ErrorKind::Domain, "scale is not dyadic: " + std::to_string(delta));
  }
  return 1 - exponent;
}

std::int64_t counting_cap(int levels, double exponent) {
  const double raw = std::exp2(static_cast<double>(levels) * exponent);
  const auto cap = static_cast<std::int64_t>(std::floor(raw * (1.0 + kSlack)));
  return cap < 1 ? 1 : cap;
}

}  // namespace projlab
