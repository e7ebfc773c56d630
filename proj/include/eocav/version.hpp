#pragma once

namespace eocav {

inline constexpr const char* kVersion = "0.1.0";

}
