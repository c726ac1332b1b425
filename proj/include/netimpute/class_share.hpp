#pragma once

#include <array>
#include <cstddef>
#include <span>

namespace netimpute {

inline constexpr int kFirstClass = 5;
inline constexpr int kLastClass = 13;
inline constexpr std::size_t kNumClasses = kLastClass - kFirstClass + 1;

/// Probability vector over FHWA vehicle classes 5..13.
///
/// Always on the simplex: every constructor normalizes, so components are in
/// [0, 1] and sum to 1 within 1e-9.
class ClassShare {
 public:
  using Vector = std::array<double, kNumClasses>;

  /// Normalizes non-negative masses. Throws ValidationError on a negative or
  /// non-finite component, or a zero total.
  static ClassShare from_masses(std::span<const double> masses);
  static ClassShare one_hot(int vehicle_class);
  static ClassShare uniform();

  /// Probability of one vehicle class (5..13).
  double of_class(int vehicle_class) const;
  double operator[](std::size_t bin) const { return p_[bin]; }
  const Vector& values() const { return p_; }
  std::span<const double> span() const { return p_; }

  double sum() const;

  friend bool operator==(const ClassShare&, const ClassShare&) = default;

 private:
  explicit ClassShare(const Vector& p) : p_(p) {}
  Vector p_{};
};

std::size_t class_bin(int vehicle_class);

}  // namespace netimpute
