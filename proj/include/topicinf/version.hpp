#pragma once

namespace topicinf {

inline constexpr const char* kVersion = "topicinf 0.1.0";

}  // namespace topicinf
