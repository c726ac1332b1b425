#pragma once

namespace netimpute {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace netimpute
