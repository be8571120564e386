#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace epbrm {

enum class ObjectClass { kCar, kPedestrian, kCyclist };

/// KITTI spelling: "Car", "Pedestrian", "Cyclist".
std::string_view class_name(ObjectClass c);

/// Case-insensitive; also accepts the KITTI spellings. Empty for other types
/// (Van, DontCare, ...).
std::optional<ObjectClass> parse_class(std::string_view name);

/// Like parse_class but throws ConfigError.
ObjectClass require_class(std::string_view name);

/// Detection IoU threshold: 0.7 for cars, 0.5 otherwise.
double default_iou_threshold(ObjectClass c);

}  // namespace epbrm
