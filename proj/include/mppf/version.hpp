#pragma once

namespace mppf {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace mppf
