#pragma once

// Document model, cleanup, and segmentation into source-attributed chunks.

#include <cstdio>
#include <fstream>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "specrag/error.hpp"
#include "specrag/text.hpp"

namespace specrag {

struct RawSection {
    std::string section_title;
    std::vector<std::string> paragraphs;
};

struct RawDocument {
    std::string spec_id;
    std::string title;
    std::vector<RawSection> sections;
};

enum class ChunkOrigin { document, expert };

inline std::string to_string(ChunkOrigin o) { return o == ChunkOrigin::document ? "document" : "expert"; }

inline ChunkOrigin parse_origin(std::string_view s) {
    if (s == "document") return ChunkOrigin::document;
    if (s == "expert") return ChunkOrigin::expert;
    throw InvalidArgument("unknown chunk origin '" + std::string(s) + "'");
}

inline constexpr std::string_view kSourceMarker = "\nSource: ";

/// Citation string for a document section: "{spec_id} {section_title}".
inline std::string render_source(std::string_view spec_id, std::string_view section_title) {
    std::string s(spec_id);
    if (!section_title.empty()) {
        s.push_back(' ');
        s.append(section_title);
    }
    return s;
}

inline std::string render_expert_source(std::string_view expert_id) {
    return "Expert: " + std::string(expert_id);
}

struct Chunk {
    std::string chunk_id;
    std::string text;  // body + "\nSource: " + source
    std::string spec_id;
    std::string section_title;
    std::string source;
    std::size_t word_count = 0;  // whitespace tokens of `text`, suffix included
    ChunkOrigin origin = ChunkOrigin::document;

    /// Text without the trailing source line.
    std::string_view body() const noexcept {
        std::string_view t = text;
        std::string suffix = std::string(kSourceMarker) + source;
        if (text::ends_with(t, suffix)) return t.substr(0, t.size() - suffix.size());
        return t;
    }

    bool operator==(const Chunk&) const = default;
};

inline Chunk make_chunk(std::string chunk_id, std::string_view body, std::string spec_id,
                        std::string section_title, std::string source, ChunkOrigin origin) {
    Chunk c;
    c.chunk_id = std::move(chunk_id);
    c.text = std::string(body);
    c.text.append(kSourceMarker);
    c.text.append(source);
    c.spec_id = std::move(spec_id);
    c.section_title = std::move(section_title);
    c.source = std::move(source);
    c.word_count = text::count_words(c.text);
    c.origin = origin;
    return c;
}

enum class SegmentStrategy { section_aware, fixed_overlap };

inline SegmentStrategy parse_strategy(std::string_view s) {
    if (s == "section_aware") return SegmentStrategy::section_aware;
    if (s == "fixed_overlap") return SegmentStrategy::fixed_overlap;
    throw InvalidArgument("unknown segmentation strategy '" + std::string(s) + "'");
}

inline std::string to_string(SegmentStrategy s) {
    return s == SegmentStrategy::section_aware ? "section_aware" : "fixed_overlap";
}

struct SegmenterConfig {
    std::size_t n_words = 360;
    SegmentStrategy strategy = SegmentStrategy::section_aware;
    std::size_t fixed_chunk_words = 1000;
    std::size_t fixed_overlap_words = 100;

    void validate() const {
        if (n_words < 1) throw InvalidArgument("n_words must be >= 1");
        if (fixed_overlap_words >= fixed_chunk_words)
            throw InvalidArgument("fixed_overlap_words must be smaller than fixed_chunk_words");
    }
};

// ---- cleanup --------------------------------------------------------------

struct CleanupRules {
    // A line matching one of these and not ending in '.' is a caption.
    std::vector<std::regex> caption_patterns{
        std::regex(R"(^\s*(Figure|Table)\s+[A-Z]?[0-9]+([.\-][0-9]+)*[a-z]?(\s*[:.\-]\s*.*|\s+.*)?$)")};
    bool drop_code_lines = false;
    std::vector<std::regex> code_patterns{
        std::regex(R"(^\s*(#include|#define|//|/\*|\*/|\{|\}).*$)"),
        std::regex(R"(^\s*[A-Za-z_][A-Za-z0-9_:<>]*\s+[A-Za-z_][A-Za-z0-9_]*\s*\(.*\)\s*[{;]\s*$)"),
    };
    bool strip_format_chars = true;  // ZWSP/ZWNJ/ZWJ/word joiner, BOM, soft hyphen
    bool strip_private_use = true;
    bool strip_controls = true;  // C0 other than \n and \t, DEL, C1
};

namespace detail {

inline bool removable_codepoint(char32_t cp, const CleanupRules& rules) noexcept {
    if (rules.strip_controls) {
        if ((cp < 0x20 && cp != '\n' && cp != '\t') || cp == 0x7F || (cp >= 0x80 && cp <= 0x9F)) return true;
    }
    if (rules.strip_format_chars) {
        if ((cp >= 0x200B && cp <= 0x200D) || cp == 0x2060 || cp == 0xFEFF || cp == 0x00AD) return true;
    }
    if (rules.strip_private_use) {
        if ((cp >= 0xE000 && cp <= 0xF8FF) || (cp >= 0xF0000 && cp <= 0xFFFFD) || (cp >= 0x100000 && cp <= 0x10FFFD))
            return true;
    }
    return false;
}

/// Re-encodes `s` as valid UTF-8, dropping removable code points and turning
/// CR / CRLF into LF.
inline std::string strip_codepoints(std::string_view s, const CleanupRules& rules) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] == '\r') {
            out.push_back('\n');
            ++i;
            if (i < s.size() && s[i] == '\n') ++i;
            continue;
        }
        char32_t cp = text::decode_utf8(s, i);
        if (removable_codepoint(cp, rules)) continue;
        text::append_utf8(out, cp);
    }
    return out;
}

inline bool is_caption(std::string_view line, const CleanupRules& rules) {
    auto t = text::trim(line);
    if (t.empty() || t.back() == '.') return false;
    std::string s(t);
    for (const auto& re : rules.caption_patterns)
        if (std::regex_match(s, re)) return true;
    return false;
}

inline bool is_code(std::string_view line, const CleanupRules& rules) {
    if (!rules.drop_code_lines) return false;
    std::string s(text::trim(line));
    if (s.empty()) return false;
    for (const auto& re : rules.code_patterns)
        if (std::regex_match(s, re)) return true;
    return false;
}

}  // namespace detail

/// Clean a paragraph; returns an empty string if nothing survives.
inline std::string clean_paragraph(std::string_view paragraph, const CleanupRules& rules = {}) {
    std::string stripped = detail::strip_codepoints(paragraph, rules);
    std::string out;
    std::size_t start = 0;
    while (start <= stripped.size()) {
        std::size_t nl = stripped.find('\n', start);
        if (nl == std::string::npos) nl = stripped.size();
        std::string_view line(stripped.data() + start, nl - start);
        if (!detail::is_caption(line, rules) && !detail::is_code(line, rules)) {
            std::string collapsed = text::collapse_whitespace(line);
            if (!collapsed.empty()) {
                if (!out.empty()) out.push_back(' ');
                out += collapsed;
            }
        }
        start = nl + 1;
    }
    return out;
}

/// Total: never throws for any input. Sections left without paragraphs are kept
/// (they produce no chunks).
inline RawDocument preprocess(const RawDocument& doc, const CleanupRules& rules = {}) {
    RawDocument out;
    out.spec_id = text::collapse_whitespace(detail::strip_codepoints(doc.spec_id, rules));
    out.title = text::collapse_whitespace(detail::strip_codepoints(doc.title, rules));
    out.sections.reserve(doc.sections.size());
    for (const auto& sec : doc.sections) {
        RawSection s;
        s.section_title = text::collapse_whitespace(detail::strip_codepoints(sec.section_title, rules));
        for (const auto& p : sec.paragraphs) {
            auto cleaned = clean_paragraph(p, rules);
            if (!cleaned.empty()) s.paragraphs.push_back(std::move(cleaned));
        }
        out.sections.push_back(std::move(s));
    }
    return out;
}

// ---- segmentation ---------------------------------------------------------

inline bool ends_sentence(std::string_view word) noexcept {
    if (word.empty()) return false;
    char c = word.back();
    return c == '.' || c == '?' || c == '!' || c == ';';
}

/// Split a whitespace-collapsed paragraph after every word ending in . ? ! or ;
/// Joining the result with single spaces reproduces the input.
inline std::vector<std::string> split_sentences(std::string_view paragraph) {
    std::vector<std::string> out;
    std::string cur;
    for (auto w : text::split_whitespace(paragraph)) {
        if (!cur.empty()) cur.push_back(' ');
        cur.append(w);
        if (ends_sentence(w)) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

namespace detail {

inline std::string section_chunk_id(std::string_view spec_id, std::size_t section, std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "/%05zu/%03zu", section, index);
    return std::string(spec_id) + buf;
}

/// Greedy packing of whole units: a unit joins the open group unless that
/// would push the group past `budget` words. Oversized units stand alone.
inline std::vector<std::string> pack_units(const std::vector<std::string>& units, std::size_t budget,
                                           std::string_view sep) {
    std::vector<std::string> groups;
    std::string cur;
    std::size_t cur_words = 0;
    for (const auto& u : units) {
        std::size_t w = text::count_words(u);
        if (!cur.empty() && cur_words + w > budget) {
            groups.push_back(std::move(cur));
            cur.clear();
            cur_words = 0;
        }
        if (!cur.empty()) cur.append(sep);
        cur.append(u);
        cur_words += w;
    }
    if (!cur.empty()) groups.push_back(std::move(cur));
    return groups;
}

/// Section-aware bodies for one section. Paragraphs within a body are separated
/// by a blank line; pieces of a split paragraph by a single space.
inline std::vector<std::string> segment_section(const RawSection& sec, std::size_t n_words) {
    std::vector<std::string> bodies;
    std::vector<std::string> pending;
    auto flush = [&] {
        for (auto& g : pack_units(pending, n_words, "\n\n")) bodies.push_back(std::move(g));
        pending.clear();
    };
    for (const auto& p : sec.paragraphs) {
        if (text::count_words(p) > n_words) {
            flush();
            for (auto& g : pack_units(split_sentences(p), n_words, " ")) bodies.push_back(std::move(g));
        } else {
            pending.push_back(p);
        }
    }
    flush();
    return bodies;
}

inline std::vector<Chunk> segment_fixed_overlap(const RawDocument& doc, const SegmenterConfig& cfg) {
    std::vector<std::string_view> words;
    std::vector<std::size_t> word_section;
    for (std::size_t si = 0; si < doc.sections.size(); ++si)
        for (const auto& p : doc.sections[si].paragraphs)
            for (auto w : text::split_whitespace(p)) {
                words.push_back(w);
                word_section.push_back(si);
            }
    std::vector<Chunk> chunks;
    if (words.empty()) return chunks;
    const std::size_t stride = cfg.fixed_chunk_words - cfg.fixed_overlap_words;
    for (std::size_t start = 0, idx = 0;; start += stride, ++idx) {
        std::size_t end = std::min(start + cfg.fixed_chunk_words, words.size());
        std::vector<std::string_view> window(words.begin() + start, words.begin() + end);
        const auto& sec = doc.sections[word_section[start]];
        char buf[24];
        std::snprintf(buf, sizeof buf, "/w%05zu", idx);
        chunks.push_back(make_chunk(doc.spec_id + buf, text::join(window, " "), doc.spec_id, sec.section_title,
                                    render_source(doc.spec_id, sec.section_title), ChunkOrigin::document));
        if (end == words.size()) break;
    }
    return chunks;
}

}  // namespace detail

/// Segment a preprocessed document into chunks, in document order.
inline std::vector<Chunk> segment(const RawDocument& doc, const SegmenterConfig& cfg = {}) {
    cfg.validate();
    if (cfg.strategy == SegmentStrategy::fixed_overlap) return detail::segment_fixed_overlap(doc, cfg);

    std::vector<Chunk> chunks;
    for (std::size_t si = 0; si < doc.sections.size(); ++si) {
        const auto& sec = doc.sections[si];
        auto bodies = detail::segment_section(sec, cfg.n_words);
        for (std::size_t ci = 0; ci < bodies.size(); ++ci) {
            chunks.push_back(make_chunk(detail::section_chunk_id(doc.spec_id, si, ci), bodies[ci], doc.spec_id,
                                        sec.section_title, render_source(doc.spec_id, sec.section_title),
                                        ChunkOrigin::document));
        }
    }
    return chunks;
}

// ---- expert contributions -------------------------------------------------

/// Pre-identified experts allowed to contribute text.
class ExpertRegistry {
public:
    ExpertRegistry() = default;
    explicit ExpertRegistry(std::set<std::string> ids) : ids_(std::move(ids)) {}

    /// One id per line; blank lines and '#' comments ignored.
    static ExpertRegistry load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open expert registry " + path);
        std::set<std::string> ids;
        std::string line;
        while (std::getline(in, line)) {
            auto t = text::trim(line);
            if (t.empty() || t.front() == '#') continue;
            ids.emplace(t);
        }
        return ExpertRegistry(std::move(ids));
    }

    bool contains(std::string_view id) const { return ids_.count(std::string(id)) > 0; }
    void add(std::string id) { ids_.insert(std::move(id)); }
    const std::set<std::string>& ids() const noexcept { return ids_; }

private:
    std::set<std::string> ids_;
};

/// Turn an expert's contribution into chunks attributed to that expert. Text is
/// split into paragraphs on blank lines, cleaned, and packed like a section.
/// The first element is the head chunk.
inline std::vector<Chunk> add_expert_chunk(std::string_view contribution, const std::string& expert_id,
                                           const ExpertRegistry& registry, const SegmenterConfig& cfg = {},
                                           const CleanupRules& rules = {}) {
    if (text::trim(contribution).empty()) throw InvalidArgument("empty expert contribution");
    if (!registry.contains(expert_id)) throw AuthorizationError("expert '" + expert_id + "' is not registered");

    RawSection sec;
    sec.section_title = "Expert contribution";
    std::string norm = detail::strip_codepoints(contribution, rules);
    std::size_t pos = 0;
    std::string para;
    auto push_para = [&] {
        auto cleaned = clean_paragraph(para, rules);
        if (!cleaned.empty()) sec.paragraphs.push_back(std::move(cleaned));
        para.clear();
    };
    while (pos <= norm.size()) {
        std::size_t nl = norm.find('\n', pos);
        if (nl == std::string::npos) nl = norm.size();
        std::string_view line(norm.data() + pos, nl - pos);
        if (text::trim(line).empty()) {
            push_para();
        } else {
            if (!para.empty()) para.push_back('\n');
            para.append(line);
        }
        pos = nl + 1;
    }
    push_para();
    if (sec.paragraphs.empty()) throw InvalidArgument("empty expert contribution");

    const std::string source = render_expert_source(expert_id);
    const std::string id_prefix = "expert/" + expert_id + "/" + text::hex64(text::fnv1a64(contribution)) + "/";
    auto bodies = detail::segment_section(sec, cfg.n_words);
    std::vector<Chunk> out;
    for (std::size_t i = 0; i < bodies.size(); ++i) {
        char buf[8];
        std::snprintf(buf, sizeof buf, "%03zu", i);
        out.push_back(make_chunk(id_prefix + buf, bodies[i], expert_id, sec.section_title, source,
                                 ChunkOrigin::expert));
    }
    return out;
}

// ---- corpus store (JSON lines) --------------------------------------------

inline std::string chunk_to_jsonl(const Chunk& c) {
    nlohmann::ordered_json j;
    j["chunk_id"] = c.chunk_id;
    j["text"] = c.text;
    j["spec_id"] = c.spec_id;
    j["section_title"] = c.section_title;
    j["source"] = c.source;
    j["word_count"] = c.word_count;
    j["origin"] = to_string(c.origin);
    return j.dump();
}

inline Chunk chunk_from_json(const nlohmann::json& j) {
    Chunk c;
    c.chunk_id = j.at("chunk_id").get<std::string>();
    c.text = j.at("text").get<std::string>();
    c.spec_id = j.at("spec_id").get<std::string>();
    c.section_title = j.at("section_title").get<std::string>();
    c.source = j.at("source").get<std::string>();
    c.word_count = j.at("word_count").get<std::size_t>();
    c.origin = parse_origin(j.at("origin").get<std::string>());
    return c;
}

inline void write_corpus(const std::string& path, const std::vector<Chunk>& chunks) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write corpus " + path);
    for (const auto& c : chunks) out << chunk_to_jsonl(c) << '\n';
    if (!out) throw Error("write failed for " + path);
}

inline void append_corpus(const std::string& path, const std::vector<Chunk>& chunks) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw Error("cannot append to corpus " + path);
    for (const auto& c : chunks) out << chunk_to_jsonl(c) << '\n';
}

inline std::vector<Chunk> read_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open corpus " + path);
    std::vector<Chunk> chunks;
    std::string line;
    std::uint64_t offset = 0;
    while (std::getline(in, line)) {
        if (!text::trim(line).empty()) {
            try {
                chunks.push_back(chunk_from_json(nlohmann::json::parse(line)));
            } catch (const nlohmann::json::exception& e) {
                throw ParseError(path, offset, e.what());
            } catch (const InvalidArgument& e) {
                throw ParseError(path, offset, e.what());
            }
        }
        offset += line.size() + 1;
    }
    return chunks;
}

}  // namespace specrag
