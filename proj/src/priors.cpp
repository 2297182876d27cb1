#include "bayesd/priors.hpp"

#include <cmath>
#include <numbers>
#include <span>

#include "bayesd/io.hpp"
#include "bayesd/special.hpp"
#include "bayesd/stats.hpp"

namespace bayesd {

double Prior::log_density(double x, double* dx, bool half) const {
  switch (kind) {
    case Kind::flat:
      if (dx) *dx = 0;
      return 0;
    case Kind::normal: {
      const double z = (x - location) / scale;
      if (dx) *dx = -z / scale;
      return -0.5 * z * z - std::log(scale) - 0.5 * std::log(2 * std::numbers::pi) + (half ? std::log(2.0) : 0.0);
    }
    case Kind::student_t: {
      const double d = x - location;
      if (dx) *dx = -(df + 1) * d / (df * scale * scale + d * d);
      return math::student_t_log_const(df) - std::log(scale) -
             0.5 * (df + 1) * std::log1p(d * d / (df * scale * scale)) + (half ? std::log(2.0) : 0.0);
    }
  }
  return 0;
}

std::string Prior::describe() const {
  switch (kind) {
    case Kind::flat: return "flat";
    case Kind::normal: return "normal(" + io::format_double(location) + ", " + io::format_double(scale) + ")";
    case Kind::student_t:
      return "student_t(" + io::format_double(df) + ", " + io::format_double(location) + ", " +
             io::format_double(scale) + ")";
  }
  return "";
}

PriorSpec default_priors(const ModelSpec&, const ModelFrame& frame) {
  PriorSpec p;
  const double m = stats::mad<double>(std::span<const double>(frame.y.data(), static_cast<std::size_t>(frame.y.size())));
  p.tau = Prior::student_t(3, 0, m > 0 ? 2.5 * m : 2.5);
  return p;
}

}  // namespace bayesd
