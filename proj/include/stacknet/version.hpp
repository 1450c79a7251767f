#pragma once

namespace stacknet {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace stacknet
