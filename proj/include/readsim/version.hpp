#pragma once

namespace readsim {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace readsim
