#pragma once

namespace lightrec {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace lightrec
