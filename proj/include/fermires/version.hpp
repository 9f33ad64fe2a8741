#pragma once

namespace fermires {

inline constexpr const char* kVersion = "1.0.0";

} // namespace fermires
