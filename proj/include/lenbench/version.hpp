#pragma once

namespace lenbench {

inline constexpr const char * LENBENCH_VERSION = "0.1.0";

}  // namespace lenbench
