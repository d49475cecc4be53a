#pragma once

namespace lattice_burgers {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace lattice_burgers
