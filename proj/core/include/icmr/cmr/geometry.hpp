#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

#include "icmr/cmr/types.hpp"

namespace icmr::cmr {

using Vec3 = std::array<double, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// P = position + row*spacing_row*row_dir + col*spacing_col*col_dir.
// Throws GeometryError when a direction is not unit length within 1e-3.
Vec3 to_patient_coords(const Point2& p, const wire::ImageHeader& h);

// Patient position of pixel (rows/2, cols/2).
Vec3 slice_center(const wire::ImageHeader& h);

// Unit normal of the image plane, row_dir x col_dir.
Vec3 plane_normal(const wire::ImageHeader& h);

}  // namespace icmr::cmr
