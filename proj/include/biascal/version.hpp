#pragma once

namespace biascal {
inline constexpr const char* version = "0.1.0";
}
