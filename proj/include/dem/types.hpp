#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace dem {

using real = double;

using Vec3 = Eigen::Matrix<real, 3, 1>;
using Mat3 = Eigen::Matrix<real, 3, 3>;
using Mat6 = Eigen::Matrix<real, 6, 6>;
using Vector = Eigen::Matrix<real, Eigen::Dynamic, 1>;

// Degrees of freedom per particle: 3 translational + 3 rotational.
inline constexpr int kDofs = 6;

inline Vec3 translation(const Vector& q, int particle) { return q.segment<3>(kDofs * particle); }
inline Vec3 rotation(const Vector& q, int particle) { return q.segment<3>(kDofs * particle + 3); }

// Skew-symmetric matrix [a]x such that [a]x b = a x b.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> skew(const Eigen::Matrix<Scalar, 3, 1>& a) {
  Eigen::Matrix<Scalar, 3, 3> s;
  s << Scalar(0), -a.z(), a.y(),
       a.z(), Scalar(0), -a.x(),
       -a.y(), a.x(), Scalar(0);
  return s;
}

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Two particle centres coincide; the contact normal is undefined.
struct SingularGeometry : Error {
  using Error::Error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

struct InvalidSystem : Error {
  using Error::Error;
};

}  // namespace dem
