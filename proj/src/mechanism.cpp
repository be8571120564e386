#include "epbrm/mechanism.hpp"

#include <cmath>

#include "epbrm/errors.hpp"

namespace epbrm {

std::string_view mechanism_name(Mechanism m) {
  switch (m) {
    case Mechanism::kTranslation:
      return "translation";
    case Mechanism::kCentering:
      return "centering";
    case Mechanism::kRotation:
      return "rotation";
    case Mechanism::kScaling:
      return "scaling";
  }
  return "translation";
}

Mechanism parse_mechanism(std::string_view name) {
  if (name == "translation") return Mechanism::kTranslation;
  if (name == "centering" || name == "center") return Mechanism::kCentering;
  if (name == "rotation") return Mechanism::kRotation;
  if (name == "scaling" || name == "scale") return Mechanism::kScaling;
  throw ConfigError("unknown mechanism '" + std::string(name) + "'");
}

std::vector<Mechanism> parse_mechanisms(std::string_view list) {
  std::vector<Mechanism> out;
  if (list.empty() || list == "none") return out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t end = std::min(list.find_first_of(",+", start), list.size());
    std::string_view item = list.substr(start, end - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    out.push_back(parse_mechanism(item));
    start = end + 1;
  }
  return out;
}

std::string format_mechanisms(const std::vector<Mechanism>& mechanisms) {
  if (mechanisms.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < mechanisms.size(); ++i) {
    if (i) out += ',';
    out += mechanism_name(mechanisms[i]);
  }
  return out;
}

int mechanism_output_width(Mechanism m) {
  switch (m) {
    case Mechanism::kTranslation:
    case Mechanism::kCentering:
      return 3;
    case Mechanism::kRotation:
      return 1;
    case Mechanism::kScaling:
      return 2;
  }
  return 3;
}

StageTransform decode_stage(Mechanism kind, std::span<const double> raw,
                            const TransformBounds& bounds) {
  if (raw.size() != static_cast<std::size_t>(mechanism_output_width(kind))) {
    throw ShapeError("stage '" + std::string(mechanism_name(kind)) + "' expects " +
                     std::to_string(mechanism_output_width(kind)) + " raw outputs");
  }
  StageTransform tr;
  tr.kind = kind;
  switch (kind) {
    case Mechanism::kTranslation:
    case Mechanism::kCentering:
      tr.offset = decode_translation({raw[0], raw[1], raw[2]}, bounds);
      break;
    case Mechanism::kRotation:
      tr.angle = decode_rotation_transform(raw[0], bounds);
      break;
    case Mechanism::kScaling: {
      const auto [sxy, sz] = decode_scale(raw[0], raw[1], bounds);
      tr.scale_xy = sxy;
      tr.scale_z = sz;
      break;
    }
  }
  return tr;
}

Point3 StageTransform::apply(const Point3& p) const {
  switch (kind) {
    case Mechanism::kTranslation:
    case Mechanism::kCentering:
      return p - offset;
    case Mechanism::kRotation:
      return rotate_z(p, -angle);
    case Mechanism::kScaling:
      return {p.x / scale_xy, p.y / scale_xy, p.z / scale_z};
  }
  return p;
}

Point3 StageTransform::unapply(const Point3& p) const {
  switch (kind) {
    case Mechanism::kTranslation:
    case Mechanism::kCentering:
      return p + offset;
    case Mechanism::kRotation:
      return rotate_z(p, angle);
    case Mechanism::kScaling:
      return {p.x * scale_xy, p.y * scale_xy, p.z * scale_z};
  }
  return p;
}

Box3D StageTransform::apply(const Box3D& box) const {
  Box3D out = box;
  out.center = apply(box.center);
  if (kind == Mechanism::kRotation) out.yaw = wrap_angle(box.yaw - angle);
  if (kind == Mechanism::kScaling) {
    out.size = {box.size.h / scale_z, box.size.w / scale_xy, box.size.l / scale_xy};
  }
  return out;
}

Box3D StageTransform::unapply(const Box3D& box) const {
  Box3D out = box;
  out.center = unapply(box.center);
  if (kind == Mechanism::kRotation) out.yaw = wrap_angle(box.yaw + angle);
  if (kind == Mechanism::kScaling) {
    out.size = {box.size.h * scale_z, box.size.w * scale_xy, box.size.l * scale_xy};
  }
  return out;
}

Point3 apply_backward(const StageTransform& tr, std::span<const double> raw,
                      const TransformBounds& bounds, const Point3& p,
                      const Point3& d_out, std::span<double> d_raw) {
  switch (tr.kind) {
    case Mechanism::kTranslation:
    case Mechanism::kCentering:
      d_raw[0] -= d_out.x * bounded_derivative(raw[0], bounds.translation.x);
      d_raw[1] -= d_out.y * bounded_derivative(raw[1], bounds.translation.y);
      d_raw[2] -= d_out.z * bounded_derivative(raw[2], bounds.translation.z);
      return d_out;
    case Mechanism::kRotation: {
      const double c = std::cos(tr.angle), s = std::sin(tr.angle);
      const Point3 q = tr.apply(p);
      // d q.x / d angle = -q.y, d q.y / d angle = q.x
      const double d_angle = -d_out.x * q.y + d_out.y * q.x;
      d_raw[0] += d_angle * bounded_derivative(raw[0], bounds.rotation);
      return {c * d_out.x + s * d_out.y, -s * d_out.x + c * d_out.y, d_out.z};
    }
    case Mechanism::kScaling: {
      const double sxy = tr.scale_xy, sz = tr.scale_z;
      const double d_sxy = -(d_out.x * p.x + d_out.y * p.y) / (sxy * sxy);
      const double d_sz = -d_out.z * p.z / (sz * sz);
      d_raw[0] += d_sxy * bounded_scale_derivative(raw[0], bounds.scale_xy);
      d_raw[1] += d_sz * bounded_scale_derivative(raw[1], bounds.scale_z);
      return {d_out.x / sxy, d_out.y / sxy, d_out.z / sz};
    }
  }
  return d_out;
}

BoxGrad apply_backward(const StageTransform& tr, std::span<const double> raw,
                       const TransformBounds& bounds, const Box3D& box,
                       const BoxGrad& d_out, std::span<double> d_raw) {
  BoxGrad d_in = d_out;
  d_in.center = apply_backward(tr, raw, bounds, box.center, d_out.center, d_raw);
  if (tr.kind == Mechanism::kRotation) {
    // yaw' = yaw - angle
    d_raw[0] -= d_out.yaw * bounded_derivative(raw[0], bounds.rotation);
  }
  if (tr.kind == Mechanism::kScaling) {
    const double sxy = tr.scale_xy, sz = tr.scale_z;
    d_in.size = {d_out.size.x / sz, d_out.size.y / sxy, d_out.size.z / sxy};
    const double d_sz = -d_out.size.x * box.size.h / (sz * sz);
    const double d_sxy =
        -(d_out.size.y * box.size.w + d_out.size.z * box.size.l) / (sxy * sxy);
    d_raw[0] += d_sxy * bounded_scale_derivative(raw[0], bounds.scale_xy);
    d_raw[1] += d_sz * bounded_scale_derivative(raw[1], bounds.scale_z);
  }
  return d_in;
}

}  // namespace epbrm
