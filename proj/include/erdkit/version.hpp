#pragma once

namespace erdkit {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace erdkit
