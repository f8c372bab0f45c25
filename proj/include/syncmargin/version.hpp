#pragma once

namespace syncmargin {
inline constexpr const char* kVersion = "0.1.0";
}
