#pragma once

// Text extraction from .docx packages and heading-marked plain text.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <zlib.h>

#include "specrag/corpus.hpp"
#include "specrag/error.hpp"
#include "specrag/text.hpp"

namespace specrag {

enum class DocumentFormat { docx, structured_text };

inline constexpr std::string_view kUntitledSection = "(untitled)";

// ---- zip ------------------------------------------------------------------

namespace zip {

struct Entry {
    std::string name;
    std::uint16_t method = 0;
    std::uint32_t compressed_size = 0;
    std::uint32_t uncompressed_size = 0;
    std::uint32_t local_header_offset = 0;
};

/// Read-only view of a zip archive held in memory. Supports stored and
/// deflated entries; ZIP64 and encryption are rejected.
class Archive {
public:
    Archive(std::span<const std::uint8_t> bytes, std::string file_name)
        : data_(bytes), file_(std::move(file_name)) {
        read_central_directory();
    }

    const std::vector<Entry>& entries() const noexcept { return entries_; }

    const Entry* find(std::string_view name) const noexcept {
        for (const auto& e : entries_)
            if (e.name == name) return &e;
        return nullptr;
    }

    std::string read(const Entry& e) const {
        std::size_t lh = e.local_header_offset;
        if (u32(lh) != 0x04034b50) fail(lh, "bad local header signature for " + e.name);
        std::size_t data_off = lh + 30 + u16(lh + 26) + u16(lh + 28);
        need(data_off, e.compressed_size);
        auto src = data_.subspan(data_off, e.compressed_size);
        if (e.method == 0) return std::string(reinterpret_cast<const char*>(src.data()), src.size());
        if (e.method != 8) fail(lh, "unsupported compression method " + std::to_string(e.method));
        return inflate_raw(src, e.uncompressed_size, data_off);
    }

private:
    [[noreturn]] void fail(std::uint64_t offset, const std::string& what) const {
        throw ParseError(file_, offset, what);
    }

    void need(std::size_t off, std::size_t len) const {
        if (off > data_.size() || len > data_.size() - off) fail(off, "truncated archive");
    }

    std::uint16_t u16(std::size_t off) const {
        need(off, 2);
        return static_cast<std::uint16_t>(data_[off] | (data_[off + 1] << 8));
    }

    std::uint32_t u32(std::size_t off) const {
        need(off, 4);
        return static_cast<std::uint32_t>(data_[off]) | (static_cast<std::uint32_t>(data_[off + 1]) << 8) |
               (static_cast<std::uint32_t>(data_[off + 2]) << 16) |
               (static_cast<std::uint32_t>(data_[off + 3]) << 24);
    }

    void read_central_directory() {
        if (data_.size() < 22) fail(0, "not a zip archive (too short)");
        std::size_t lowest = data_.size() > 22 + 0xFFFF ? data_.size() - 22 - 0xFFFF : 0;
        std::optional<std::size_t> eocd;
        for (std::size_t off = data_.size() - 22 + 1; off-- > lowest;) {
            if (u32(off) == 0x06054b50) {
                eocd = off;
                break;
            }
        }
        if (!eocd) fail(data_.size(), "end of central directory not found");
        std::uint16_t count = u16(*eocd + 10);
        std::uint32_t cd_offset = u32(*eocd + 16);
        if (cd_offset == 0xFFFFFFFFu || count == 0xFFFF) fail(*eocd, "ZIP64 archives are not supported");
        std::size_t off = cd_offset;
        for (std::uint16_t i = 0; i < count; ++i) {
            if (u32(off) != 0x02014b50) fail(off, "bad central directory signature");
            Entry e;
            std::uint16_t flags = u16(off + 8);
            if (flags & 0x1) fail(off, "encrypted entries are not supported");
            e.method = u16(off + 10);
            e.compressed_size = u32(off + 20);
            e.uncompressed_size = u32(off + 24);
            std::uint16_t name_len = u16(off + 28);
            std::uint16_t extra_len = u16(off + 30);
            std::uint16_t comment_len = u16(off + 32);
            e.local_header_offset = u32(off + 42);
            need(off + 46, name_len);
            e.name.assign(reinterpret_cast<const char*>(data_.data() + off + 46), name_len);
            entries_.push_back(std::move(e));
            off += 46 + name_len + extra_len + comment_len;
        }
    }

    std::string inflate_raw(std::span<const std::uint8_t> src, std::uint32_t expected, std::size_t at) const {
        std::string out(expected, '\0');
        z_stream zs{};
        if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) fail(at, "zlib init failed");
        zs.next_in = const_cast<Bytef*>(src.data());
        zs.avail_in = static_cast<uInt>(src.size());
        zs.next_out = reinterpret_cast<Bytef*>(out.data());
        zs.avail_out = static_cast<uInt>(out.size());
        int rc = inflate(&zs, Z_FINISH);
        std::size_t produced = zs.total_out;
        inflateEnd(&zs);
        if (rc != Z_STREAM_END || produced != expected) fail(at + zs.total_in, "corrupt deflate stream");
        return out;
    }

    std::span<const std::uint8_t> data_;
    std::string file_;
    std::vector<Entry> entries_;
};

}  // namespace zip

// ---- minimal XML event reader ---------------------------------------------

namespace xml {

struct Attribute {
    std::string name;
    std::string value;
};

enum class EventKind { start, end, text, done };

struct Event {
    EventKind kind = EventKind::done;
    std::string name;  // qualified tag name for start/end
    std::vector<Attribute> attrs;
    std::string text;  // decoded character data
    bool self_closing = false;
    std::size_t offset = 0;

    const std::string* attr(std::string_view n) const {
        for (const auto& a : attrs)
            if (a.name == n) return &a.value;
        return nullptr;
    }
};

/// Pull parser for the well-formed subset used by office documents: tags,
/// attributes, the predefined and numeric entities, comments, CDATA,
/// processing instructions and DOCTYPE (skipped). Tag nesting is checked.
class Reader {
public:
    Reader(std::string_view doc, std::string file_name) : s_(doc), file_(std::move(file_name)) {}

    Event next() {
        if (pending_end_) {
            Event e;
            e.kind = EventKind::end;
            e.name = std::move(*pending_end_);
            e.offset = pos_;
            pending_end_.reset();
            return e;
        }
        while (pos_ < s_.size()) {
            if (s_[pos_] != '<') return read_text();
            if (match("<?")) {
                skip_past("?>");
            } else if (match("<!--")) {
                skip_past("-->");
            } else if (match("<![CDATA[")) {
                std::size_t start = pos_ + 9;
                std::size_t end = s_.find("]]>", start);
                if (end == std::string_view::npos) fail(pos_, "unterminated CDATA");
                Event e;
                e.kind = EventKind::text;
                e.offset = pos_;
                e.text.assign(s_.substr(start, end - start));
                pos_ = end + 3;
                return e;
            } else if (match("<!")) {
                skip_past(">");
            } else if (match("</")) {
                return read_end_tag();
            } else {
                return read_start_tag();
            }
        }
        if (!stack_.empty()) fail(pos_, "unexpected end of document inside <" + stack_.back() + ">");
        return Event{};
    }

private:
    [[noreturn]] void fail(std::size_t at, const std::string& what) const { throw ParseError(file_, at, what); }

    bool match(std::string_view lit) const noexcept { return s_.substr(pos_, lit.size()) == lit; }

    void skip_past(std::string_view terminator) {
        std::size_t end = s_.find(terminator, pos_);
        if (end == std::string_view::npos) fail(pos_, "unterminated markup");
        pos_ = end + terminator.size();
    }

    static bool name_char(char c) noexcept {
        return !text::is_space(c) && c != '>' && c != '/' && c != '=' && c != '<' && c != '"' && c != '\'';
    }

    std::string read_name() {
        std::size_t start = pos_;
        while (pos_ < s_.size() && name_char(s_[pos_])) ++pos_;
        if (pos_ == start) fail(pos_, "expected a name");
        return std::string(s_.substr(start, pos_ - start));
    }

    void skip_ws() {
        while (pos_ < s_.size() && text::is_space(s_[pos_])) ++pos_;
    }

    Event read_start_tag() {
        Event e;
        e.kind = EventKind::start;
        e.offset = pos_;
        ++pos_;
        e.name = read_name();
        for (;;) {
            skip_ws();
            if (pos_ >= s_.size()) fail(e.offset, "unterminated tag <" + e.name + ">");
            if (s_[pos_] == '>') {
                ++pos_;
                break;
            }
            if (match("/>")) {
                pos_ += 2;
                e.self_closing = true;
                pending_end_ = e.name;
                return e;
            }
            Attribute a;
            a.name = read_name();
            skip_ws();
            if (pos_ >= s_.size() || s_[pos_] != '=') fail(pos_, "expected '=' after attribute " + a.name);
            ++pos_;
            skip_ws();
            if (pos_ >= s_.size() || (s_[pos_] != '"' && s_[pos_] != '\'')) fail(pos_, "expected quoted value");
            char q = s_[pos_++];
            std::size_t end = s_.find(q, pos_);
            if (end == std::string_view::npos) fail(pos_, "unterminated attribute value");
            a.value = decode_entities(s_.substr(pos_, end - pos_), pos_);
            pos_ = end + 1;
            e.attrs.push_back(std::move(a));
        }
        stack_.push_back(e.name);
        return e;
    }

    Event read_end_tag() {
        Event e;
        e.kind = EventKind::end;
        e.offset = pos_;
        pos_ += 2;
        e.name = read_name();
        skip_ws();
        if (pos_ >= s_.size() || s_[pos_] != '>') fail(pos_, "malformed end tag");
        ++pos_;
        if (stack_.empty() || stack_.back() != e.name)
            fail(e.offset, "mismatched end tag </" + e.name + ">" +
                               (stack_.empty() ? std::string() : ", expected </" + stack_.back() + ">"));
        stack_.pop_back();
        return e;
    }

    Event read_text() {
        Event e;
        e.kind = EventKind::text;
        e.offset = pos_;
        std::size_t end = s_.find('<', pos_);
        if (end == std::string_view::npos) end = s_.size();
        e.text = decode_entities(s_.substr(pos_, end - pos_), pos_);
        pos_ = end;
        return e;
    }

    std::string decode_entities(std::string_view raw, std::size_t base) const {
        std::string out;
        out.reserve(raw.size());
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (raw[i] != '&') {
                out.push_back(raw[i]);
                continue;
            }
            std::size_t semi = raw.find(';', i);
            if (semi == std::string_view::npos) fail(base + i, "unterminated entity");
            std::string_view ent = raw.substr(i + 1, semi - i - 1);
            if (ent == "amp") out.push_back('&');
            else if (ent == "lt") out.push_back('<');
            else if (ent == "gt") out.push_back('>');
            else if (ent == "quot") out.push_back('"');
            else if (ent == "apos") out.push_back('\'');
            else if (!ent.empty() && ent[0] == '#') {
                char32_t cp = 0;
                try {
                    cp = ent.size() > 1 && (ent[1] == 'x' || ent[1] == 'X')
                             ? static_cast<char32_t>(std::stoul(std::string(ent.substr(2)), nullptr, 16))
                             : static_cast<char32_t>(std::stoul(std::string(ent.substr(1)), nullptr, 10));
                } catch (const std::exception&) {
                    fail(base + i, "bad character reference");
                }
                if (cp > 0x10FFFF) fail(base + i, "character reference out of range");
                text::append_utf8(out, cp);
            } else {
                fail(base + i, "unknown entity &" + std::string(ent) + ";");
            }
            i = semi;
        }
        return out;
    }

    std::string_view s_;
    std::string file_;
    std::size_t pos_ = 0;
    std::vector<std::string> stack_;
    std::optional<std::string> pending_end_;
};

}  // namespace xml

// ---- docx -----------------------------------------------------------------

namespace detail {

inline bool is_heading_style(std::string_view style) {
    auto s = text::to_lower(style);
    return text::starts_with(s, "heading") || (s.size() == 2 && s[0] == 'h' && s[1] >= '1' && s[1] <= '9');
}

inline std::string_view local_name(std::string_view qname) noexcept {
    auto colon = qname.find(':');
    return colon == std::string_view::npos ? qname : qname.substr(colon + 1);
}

struct DocxParagraph {
    std::string text;
    std::string style;
    bool outline = false;
};

inline std::vector<DocxParagraph> read_docx_paragraphs(std::string_view document_xml, const std::string& file) {
    std::vector<DocxParagraph> out;
    xml::Reader reader(document_xml, file + ":word/document.xml");
    std::vector<DocxParagraph> open;  // nested paragraphs (text boxes) stack
    int skip_depth = 0;               // inside drawings / pictures / deleted runs
    bool in_text = false;
    for (auto ev = reader.next(); ev.kind != xml::EventKind::done; ev = reader.next()) {
        auto name = local_name(ev.name);
        if (ev.kind == xml::EventKind::start) {
            if (skip_depth > 0 || name == "drawing" || name == "pict" || name == "object" || name == "del" ||
                name == "instrText") {
                ++skip_depth;
                continue;
            }
            if (name == "p") {
                open.emplace_back();
            } else if (open.empty()) {
                continue;
            } else if (name == "t") {
                in_text = true;
            } else if (name == "tab") {
                open.back().text.push_back('\t');
            } else if (name == "br" || name == "cr") {
                open.back().text.push_back('\n');
            } else if (name == "pStyle") {
                if (auto v = ev.attr("w:val")) open.back().style = *v;
            } else if (name == "outlineLvl") {
                open.back().outline = true;
            }
        } else if (ev.kind == xml::EventKind::end) {
            if (skip_depth > 0) {
                --skip_depth;
                continue;
            }
            if (name == "t") {
                in_text = false;
            } else if (name == "p" && !open.empty()) {
                out.push_back(std::move(open.back()));
                open.pop_back();
            }
        } else if (ev.kind == xml::EventKind::text && in_text && skip_depth == 0 && !open.empty()) {
            open.back().text += ev.text;
        }
    }
    return out;
}

}  // namespace detail

/// Paragraphs styled Heading* (or carrying an outline level) open sections;
/// a Title-styled paragraph becomes the document title.
inline RawDocument extract_docx(std::span<const std::uint8_t> bytes, const std::string& file_name,
                                const std::string& spec_id) {
    if (bytes.empty()) throw ParseError(file_name, 0, "empty document");
    zip::Archive archive(bytes, file_name);
    const auto* entry = archive.find("word/document.xml");
    if (!entry) throw ParseError(file_name, 0, "word/document.xml not found in archive");
    std::string xml_text = archive.read(*entry);

    RawDocument doc;
    doc.spec_id = spec_id;
    doc.title = spec_id;
    std::vector<std::string> preamble;
    for (auto& p : detail::read_docx_paragraphs(xml_text, file_name)) {
        auto trimmed = std::string(text::trim(p.text));
        if (trimmed.empty()) continue;
        if (text::to_lower(p.style) == "title") {
            doc.title = trimmed;
        } else if (detail::is_heading_style(p.style) || p.outline) {
            doc.sections.push_back(RawSection{text::collapse_whitespace(trimmed), {}});
        } else if (doc.sections.empty()) {
            preamble.push_back(std::move(trimmed));
        } else {
            doc.sections.back().paragraphs.push_back(std::move(trimmed));
        }
    }
    if (!preamble.empty() || doc.sections.empty())
        doc.sections.insert(doc.sections.begin(), RawSection{std::string(kUntitledSection), std::move(preamble)});
    return doc;
}

/// Grammar: a line starting "## " opens a section titled by the rest of the
/// line; an optional leading "# " line is the document title; blank lines
/// separate paragraphs. Text before the first section lands in "(untitled)".
inline RawDocument extract_structured_text(std::string_view content, const std::string& file_name,
                                           const std::string& spec_id) {
    if (text::trim(content).empty()) throw ParseError(file_name, 0, "empty document");
    RawDocument doc;
    doc.spec_id = spec_id;
    doc.title = spec_id;
    std::vector<std::string> preamble;
    std::string para;
    bool seen_content = false;
    auto target = [&]() -> std::vector<std::string>& {
        return doc.sections.empty() ? preamble : doc.sections.back().paragraphs;
    };
    auto flush = [&] {
        if (!text::trim(para).empty()) target().push_back(para);
        para.clear();
    };
    std::size_t pos = 0;
    while (pos <= content.size()) {
        std::size_t nl = content.find('\n', pos);
        if (nl == std::string_view::npos) nl = content.size();
        std::string_view line = content.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos = nl + 1;
        if (text::starts_with(line, "## ")) {
            flush();
            doc.sections.push_back(RawSection{std::string(text::trim(line.substr(3))), {}});
            seen_content = true;
        } else if (!seen_content && text::starts_with(line, "# ")) {
            doc.title = std::string(text::trim(line.substr(2)));
            seen_content = true;
        } else if (text::trim(line).empty()) {
            flush();
        } else {
            if (!para.empty()) para.push_back('\n');
            para.append(line);
            seen_content = true;
        }
    }
    flush();
    if (!preamble.empty() || doc.sections.empty())
        doc.sections.insert(doc.sections.begin(), RawSection{std::string(kUntitledSection), std::move(preamble)});
    return doc;
}

inline RawDocument extract_document(std::span<const std::uint8_t> bytes, DocumentFormat format,
                                    const std::string& file_name, const std::string& spec_id) {
    if (format == DocumentFormat::docx) return extract_docx(bytes, file_name, spec_id);
    return extract_structured_text(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                                   file_name, spec_id);
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// Format by extension: .docx, otherwise structured text (.txt, .md, .spec).
inline std::optional<DocumentFormat> format_for(const std::filesystem::path& path) {
    auto ext = text::to_lower(path.extension().string());
    if (ext == ".docx") return DocumentFormat::docx;
    if (ext == ".txt" || ext == ".md" || ext == ".spec") return DocumentFormat::structured_text;
    return std::nullopt;
}

/// Identifier derived from a file name: stem with '_' read as space, so
/// "TS_R16-23.203.txt" becomes "TS R16-23.203".
inline std::string spec_id_from_path(const std::filesystem::path& path) {
    auto stem = path.stem().string();
    for (auto& c : stem)
        if (c == '_') c = ' ';
    return stem;
}

inline RawDocument extract_file(const std::filesystem::path& path) {
    auto fmt = format_for(path);
    if (!fmt) throw InvalidArgument("unsupported document type: " + path.string());
    auto bytes = read_file_bytes(path);
    return extract_document(bytes, *fmt, path.filename().string(), spec_id_from_path(path));
}

/// Every supported file directly under `dir`, sorted by file name.
inline std::vector<RawDocument> extract_directory(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && format_for(entry.path())) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::vector<RawDocument> docs;
    for (const auto& f : files) docs.push_back(extract_file(f));
    return docs;
}

}  // namespace specrag
