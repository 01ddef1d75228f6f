#include "icmr/cmr/geometry.hpp"

namespace icmr::cmr {

namespace {

Vec3 vec(const std::array<float, 3>& v) { return {v[0], v[1], v[2]}; }

Vec3 unit_checked(const std::array<float, 3>& v, const char* what) {
  Vec3 d = vec(v);
  if (std::abs(norm(d) - 1.0) > 1e-3) {
    throw GeometryError(std::string(what) + " is not a unit vector");
  }
  return d;
}

}  // namespace

Vec3 to_patient_coords(const Point2& p, const wire::ImageHeader& h) {
  Vec3 row_dir = unit_checked(h.row_dir, "row_dir");
  Vec3 col_dir = unit_checked(h.col_dir, "col_dir");
  return vec(h.position_mm) + (p.row * h.pixel_spacing_mm[0]) * row_dir +
         (p.col * h.pixel_spacing_mm[1]) * col_dir;
}

Vec3 slice_center(const wire::ImageHeader& h) {
  return to_patient_coords({static_cast<double>(h.rows / 2), static_cast<double>(h.cols / 2)}, h);
}

Vec3 plane_normal(const wire::ImageHeader& h) {
  Vec3 n = cross(unit_checked(h.row_dir, "row_dir"), unit_checked(h.col_dir, "col_dir"));
  double len = norm(n);
  if (len < 1e-6) throw GeometryError("row_dir and col_dir are parallel");
  return (1.0 / len) * n;
}

}  // namespace icmr::cmr
