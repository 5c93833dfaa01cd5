#pragma once

namespace lrlab {
inline constexpr const char* version = "0.1.0";
}
