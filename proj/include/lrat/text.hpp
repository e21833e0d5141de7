#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace lrat {

/// Byte range [begin, end) of one token inside the original UTF-8 text.
struct TokenSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
};

namespace detail {

// Decodes one code point starting at text[pos]. Invalid sequences decode as
// U+FFFD with length 1 and are later treated as separators.
inline char32_t decode_utf8(std::string_view text, std::size_t pos, std::size_t& length) {
    const auto byte = [&](std::size_t i) { return static_cast<unsigned char>(text[i]); };
    const unsigned char lead = byte(pos);
    length = 1;
    if (lead < 0x80) return lead;
    std::size_t need = 0;
    char32_t cp = 0;
    if ((lead & 0xE0) == 0xC0) {
        need = 1;
        cp = lead & 0x1F;
    } else if ((lead & 0xF0) == 0xE0) {
        need = 2;
        cp = lead & 0x0F;
    } else if ((lead & 0xF8) == 0xF0) {
        need = 3;
        cp = lead & 0x07;
    } else {
        return 0xFFFD;
    }
    for (std::size_t i = 1; i <= need; ++i) {
        if (pos + i >= text.size() || (byte(pos + i) & 0xC0) != 0x80) return 0xFFFD;
        cp = (cp << 6) | (byte(pos + i) & 0x3F);
    }
    length = need + 1;
    return cp;
}

inline void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

// Table-driven approximation of Unicode alphanumerics without ICU: ASCII
// letters and digits, plus every non-ASCII code point outside the common
// punctuation, symbol, space and emoji blocks.
inline bool is_word_char(char32_t cp) {
    if (cp < 0x80) {
        return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
    }
    if (cp == 0xFFFD) return false;
    if (cp < 0xC0) return cp == 0xAA || cp == 0xB5 || cp == 0xBA;
    if (cp == 0xD7 || cp == 0xF7) return false;
    if (cp >= 0x2000 && cp <= 0x2BFF) return false;
    if (cp >= 0x2E00 && cp <= 0x2E7F) return false;
    if (cp >= 0x3000 && cp <= 0x303F) return false;
    if (cp >= 0xFE30 && cp <= 0xFE4F) return false;
    if (cp >= 0xFF00 && cp <= 0xFF0F) return false;
    if (cp >= 0xFF1A && cp <= 0xFF20) return false;
    if (cp >= 0xFF3B && cp <= 0xFF40) return false;
    if (cp >= 0xFF5B && cp <= 0xFF65) return false;
    if (cp >= 0x1F000 && cp <= 0x1FAFF) return false;
    return true;
}

inline char32_t fold_case(char32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 32;
    if (cp < 0x80) return cp;
    if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
    if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 0x20;
    if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;
    if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
    return cp;
}

}  // namespace detail

/// Spans of maximal word-character runs, in text order.
inline std::vector<TokenSpan> token_spans(std::string_view text) {
    std::vector<TokenSpan> spans;
    std::size_t pos = 0;
    bool in_token = false;
    std::size_t start = 0;
    while (pos < text.size()) {
        std::size_t len = 1;
        const char32_t cp = detail::decode_utf8(text, pos, len);
        const bool word = detail::is_word_char(cp);
        if (word && !in_token) {
            start = pos;
            in_token = true;
        } else if (!word && in_token) {
            spans.push_back({start, pos});
            in_token = false;
        }
        pos += len;
    }
    if (in_token) spans.push_back({start, text.size()});
    return spans;
}

inline std::string normalize_token(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    std::size_t pos = 0;
    while (pos < raw.size()) {
        std::size_t len = 1;
        const char32_t cp = detail::decode_utf8(raw, pos, len);
        detail::append_utf8(out, detail::fold_case(cp));
        pos += len;
    }
    return out;
}

/// Lowercased tokens split on non-alphanumeric runs. Deterministic; empty
/// tokens never appear.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    for (const auto& span : token_spans(text)) {
        tokens.push_back(normalize_token(text.substr(span.begin, span.end - span.begin)));
    }
    return tokens;
}

inline std::size_t count_tokens(std::string_view text) { return token_spans(text).size(); }

inline std::string_view trim(std::string_view s) {
    const auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
    while (!s.empty() && ws(s.front())) s.remove_prefix(1);
    while (!s.empty() && ws(s.back())) s.remove_suffix(1);
    return s;
}

/// Prefix of `text` that covers its first `budget` tokens. Text with at most
/// `budget` tokens comes back whole (trimmed).
inline std::string token_prefix(std::string_view text, std::size_t budget) {
    const auto spans = token_spans(text);
    if (spans.size() <= budget) return std::string(trim(text));
    if (budget == 0) return {};
    const std::size_t start = trim(text).data() - text.data();
    return std::string(text.substr(start, spans[budget - 1].end - start));
}

}  // namespace lrat
