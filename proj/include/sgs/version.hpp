#pragma once

namespace sgs {
inline constexpr const char* kVersion = "0.1.0";
}
