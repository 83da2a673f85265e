#pragma once

namespace w2fair {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace w2fair
