#pragma once

namespace vlp {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace vlp
