#pragma once

namespace boicr {

inline constexpr const char* kToolName = "boicr";
inline constexpr const char* kVersion = "0.1.0";

}  // namespace boicr
