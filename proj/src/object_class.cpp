#include "epbrm/object_class.hpp"

#include <algorithm>
#include <cctype>

#include "epbrm/errors.hpp"

namespace epbrm {

std::string_view class_name(ObjectClass c) {
  switch (c) {
    case ObjectClass::kCar:
      return "Car";
    case ObjectClass::kPedestrian:
      return "Pedestrian";
    case ObjectClass::kCyclist:
      return "Cyclist";
  }
  return "Car";
}

std::optional<ObjectClass> parse_class(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return std::tolower(ch); });
  if (lower == "car") return ObjectClass::kCar;
  if (lower == "pedestrian") return ObjectClass::kPedestrian;
  if (lower == "cyclist") return ObjectClass::kCyclist;
  return std::nullopt;
}

ObjectClass require_class(std::string_view name) {
  if (auto c = parse_class(name)) return *c;
  throw ConfigError("unknown object class '" + std::string(name) +
                    "' (expected car, pedestrian or cyclist)");
}

double default_iou_threshold(ObjectClass c) {
  return c == ObjectClass::kCar ? 0.7 : 0.5;
}

}  // namespace epbrm
