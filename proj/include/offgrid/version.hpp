#ifndef OFFGRID_VERSION_HPP
#define OFFGRID_VERSION_HPP

namespace offgrid {

inline constexpr const char* kVersion = "0.1.0";
/// Bumped whenever a JSON output layout changes.
inline constexpr int kSchemaVersion = 1;

}  // namespace offgrid

#endif
