#pragma once

namespace redeval {

inline constexpr const char* kToolVersion = "0.1.0";

// Bumped when the result/manifest schema changes; replay requires a match.
inline constexpr int kFormatVersion = 1;

#ifndef REDEVAL_PLATFORM
#define REDEVAL_PLATFORM "unknown"
#endif

inline constexpr const char* kPlatform = REDEVAL_PLATFORM;

}  // namespace redeval
