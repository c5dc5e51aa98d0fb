#pragma once

namespace portalchoice {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace portalchoice
