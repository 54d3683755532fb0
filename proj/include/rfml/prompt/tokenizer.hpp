#pragma once

#include <string>
#include <vector>

#include "rfml/common.hpp"

namespace rfml::prompt {

// Byte-level vocabulary: 256 byte ids plus reserved specials.
inline constexpr int kByteVocab = 256;
inline constexpr int kPadToken = 256;
inline constexpr int kBosToken = 257;
inline constexpr int kEosToken = 258;
inline constexpr int kClsToken = 259;
inline constexpr int kVocabSize = 260;

// One token per byte; specials are never emitted by plain text.
inline std::vector<int> tokenize_bytes(const std::string& text) {
    if (text.empty()) throw InvalidArgument("tokenize_bytes: empty text");
    std::vector<int> out;
    out.reserve(text.size());
    for (unsigned char c : text) out.push_back(static_cast<int>(c));
    return out;
}

}  // namespace rfml::prompt
