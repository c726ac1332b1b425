#include "netimpute/class_share.hpp"

#include <cmath>
#include <string>

#include "netimpute/error.hpp"

namespace netimpute {

std::size_t class_bin(int vehicle_class) {
  if (vehicle_class < kFirstClass || vehicle_class > kLastClass)
    throw ValidationError("vehicle class " + std::to_string(vehicle_class) + " outside 5..13");
  return static_cast<std::size_t>(vehicle_class - kFirstClass);
}

ClassShare ClassShare::from_masses(std::span<const double> masses) {
  if (masses.size() != kNumClasses)
    throw ValidationError("class share needs " + std::to_string(kNumClasses) + " components, got " +
                          std::to_string(masses.size()));
  double total = 0.0;
  for (double m : masses) {
    if (!std::isfinite(m) || m < 0.0) throw ValidationError("class mass must be finite and non-negative");
    total += m;
  }
  if (total <= 0.0) throw ValidationError("class masses sum to zero");
  Vector p{};
  for (std::size_t i = 0; i < kNumClasses; ++i) p[i] = masses[i] / total;
  return ClassShare(p);
}

ClassShare ClassShare::one_hot(int vehicle_class) {
  Vector p{};
  p[class_bin(vehicle_class)] = 1.0;
  return ClassShare(p);
}

ClassShare ClassShare::uniform() {
  Vector p;
  p.fill(1.0 / static_cast<double>(kNumClasses));
  return ClassShare(p);
}

double ClassShare::of_class(int vehicle_class) const { return p_[class_bin(vehicle_class)]; }

double ClassShare::sum() const {
  double s = 0.0;
  for (double v : p_) s += v;
  return s;
}

}  // namespace netimpute
