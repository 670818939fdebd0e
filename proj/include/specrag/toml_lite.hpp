#pragma once

// Reader for the TOML subset used by service configs: [table] and
// [dotted.table] headers, bare or quoted keys, basic and literal strings,
// integers, floats, booleans and single-line arrays of those. The result is
// a JSON object with one nested object per table.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "specrag/error.hpp"
#include "specrag/text.hpp"

namespace specrag::toml {

namespace detail {

class Parser {
public:
    Parser(std::string_view src, std::string name) : s_(src), name_(std::move(name)) {}

    nlohmann::json parse() {
        nlohmann::json root = nlohmann::json::object();
        nlohmann::json* table = &root;
        while (pos_ < s_.size()) {
            skip_blank();
            if (pos_ >= s_.size()) break;
            char c = s_[pos_];
            if (c == '\n') {
                ++pos_;
                continue;
            }
            if (c == '#') {
                skip_comment();
                continue;
            }
            if (c == '[') {
                ++pos_;
                if (peek() == '[') fail("arrays of tables are not supported");
                table = &root;
                for (;;) {
                    skip_blank();
                    auto k = key();
                    auto& next = (*table)[k];
                    if (next.is_null()) next = nlohmann::json::object();
                    if (!next.is_object()) fail("'" + k + "' is not a table");
                    table = &next;
                    skip_blank();
                    if (peek() == '.') {
                        ++pos_;
                        continue;
                    }
                    break;
                }
                expect(']');
                end_of_line();
                continue;
            }
            nlohmann::json* target = table;
            std::string k = key();
            skip_blank();
            while (peek() == '.') {
                ++pos_;
                skip_blank();
                auto& next = (*target)[k];
                if (next.is_null()) next = nlohmann::json::object();
                if (!next.is_object()) fail("'" + k + "' is not a table");
                target = &next;
                k = key();
                skip_blank();
            }
            expect('=');
            skip_blank();
            if (target->contains(k)) fail("duplicate key '" + k + "'");
            (*target)[k] = value();
            end_of_line();
        }
        return root;
    }

private:
    [[noreturn]] void fail(const std::string& what) const { throw ParseError(name_, pos_, what); }

    char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }

    void expect(char c) {
        if (peek() != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    void skip_blank() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\r')) ++pos_;
    }

    void skip_comment() {
        while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
    }

    void end_of_line() {
        skip_blank();
        if (peek() == '#') skip_comment();
        if (pos_ < s_.size() && s_[pos_] != '\n') fail("unexpected text after value");
        if (pos_ < s_.size()) ++pos_;
    }

    std::string key() {
        char c = peek();
        if (c == '"') return basic_string();
        if (c == '\'') return literal_string();
        std::size_t start = pos_;
        while (pos_ < s_.size() && (text::is_token_char(s_[pos_]) || s_[pos_] == '_' || s_[pos_] == '-')) ++pos_;
        if (pos_ == start) fail("expected a key");
        return std::string(s_.substr(start, pos_ - start));
    }

    std::string basic_string() {
        expect('"');
        std::string out;
        while (true) {
            if (pos_ >= s_.size() || s_[pos_] == '\n') fail("unterminated string");
            char c = s_[pos_++];
            if (c == '"') return out;
            if (c != '\\') {
                out.push_back(c);
                continue;
            }
            if (pos_ >= s_.size()) fail("unterminated escape");
            char e = s_[pos_++];
            switch (e) {
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                case 'r': out.push_back('\r'); break;
                case '"': out.push_back('"'); break;
                case '\\': out.push_back('\\'); break;
                case 'u':
                case 'U': {
                    std::size_t n = e == 'u' ? 4 : 8;
                    if (pos_ + n > s_.size()) fail("short unicode escape");
                    std::uint32_t cp = 0;
                    for (std::size_t i = 0; i < n; ++i) {
                        char h = s_[pos_++];
                        cp <<= 4;
                        if (h >= '0' && h <= '9') cp |= static_cast<std::uint32_t>(h - '0');
                        else if (h >= 'a' && h <= 'f') cp |= static_cast<std::uint32_t>(h - 'a' + 10);
                        else if (h >= 'A' && h <= 'F') cp |= static_cast<std::uint32_t>(h - 'A' + 10);
                        else fail("bad unicode escape");
                    }
                    text::append_utf8(out, cp);
                    break;
                }
                default: fail(std::string("unknown escape \\") + e);
            }
        }
    }

    std::string literal_string() {
        expect('\'');
        std::size_t start = pos_;
        while (pos_ < s_.size() && s_[pos_] != '\'' && s_[pos_] != '\n') ++pos_;
        if (peek() != '\'') fail("unterminated string");
        std::string out(s_.substr(start, pos_ - start));
        ++pos_;
        return out;
    }

    nlohmann::json value() {
        char c = peek();
        if (c == '"') return basic_string();
        if (c == '\'') return literal_string();
        if (c == '[') {
            ++pos_;
            nlohmann::json arr = nlohmann::json::array();
            for (;;) {
                skip_blank();
                if (peek() == ']') {
                    ++pos_;
                    return arr;
                }
                arr.push_back(value());
                skip_blank();
                if (peek() == ',') {
                    ++pos_;
                    continue;
                }
                expect(']');
                return arr;
            }
        }
        std::size_t start = pos_;
        while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' && s_[pos_] != '#' && s_[pos_] != '\n' &&
               s_[pos_] != ' ' && s_[pos_] != '\t' && s_[pos_] != '\r')
            ++pos_;
        std::string tok(s_.substr(start, pos_ - start));
        if (tok == "true") return true;
        if (tok == "false") return false;
        std::string digits;
        for (char ch : tok)
            if (ch != '_') digits.push_back(ch);
        if (digits.empty()) {
            pos_ = start;
            fail("expected a value");
        }
        bool is_float = digits.find_first_of(".eE") != std::string::npos;
        try {
            std::size_t used = 0;
            if (is_float) {
                double d = std::stod(digits, &used);
                if (used == digits.size()) return d;
            } else {
                long long v = std::stoll(digits, &used, 10);
                if (used == digits.size()) return v;
            }
        } catch (const std::exception&) {
        }
        pos_ = start;
        fail("bad value '" + tok + "'");
    }

    std::string_view s_;
    std::string name_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline nlohmann::json parse(std::string_view src, std::string name = "<toml>") {
    return detail::Parser(src, std::move(name)).parse();
}

inline nlohmann::json parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
}

}  // namespace specrag::toml
