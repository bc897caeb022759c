#pragma once

namespace coinn {

inline constexpr const char* kToolName = "coinn";
inline constexpr const char* kToolVersion = "0.1.0";

// Version stamp for serialized documents (models, manifests, configs).
inline constexpr int kFormatVersion = 1;

}  // namespace coinn
