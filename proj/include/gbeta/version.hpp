#pragma once

namespace gbeta {

inline constexpr const char* version_string = "gbeta 0.1.0";

}  // namespace gbeta
