#pragma once

// Seeded generators for synthetic corpora and benchmarks, plus the
// segmentation invariant checker shared by unit and acceptance tests.

#include <cstdio>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "specrag/corpus.hpp"
#include "specrag/evalharness.hpp"

namespace specrag::testkit {

inline std::string pseudo_word(std::mt19937_64& rng) {
    static const char* syll[] = {"ra", "to", "mi", "ne", "ka", "lu", "se", "po", "vi", "da", "go", "re", "fa", "xu"};
    std::uniform_int_distribution<int> n_syll(1, 4), pick(0, 13);
    std::string w;
    for (int i = n_syll(rng); i > 0; --i) w += syll[pick(rng)];
    return w;
}

// ---- segmentation corpus ---------------------------------------------------------

/// Documents with random section, paragraph and sentence lengths. Some
/// paragraphs exceed 360 words, some sentences exceed it on their own, and the
/// raw text carries whitespace noise, captions and zero-width spaces.
inline std::vector<RawDocument> synthetic_documents(std::uint64_t seed, std::size_t n_docs) {
    std::mt19937_64 rng(seed);
    auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    const char* enders[] = {".", "?", "!", ";"};
    std::vector<RawDocument> docs;
    for (std::size_t d = 0; d < n_docs; ++d) {
        RawDocument doc;
        char id[32];
        std::snprintf(id, sizeof id, "SYN %04zu", d);
        doc.spec_id = id;
        doc.title = id;
        int n_sections = uni(1, 8);
        for (int s = 0; s < n_sections; ++s) {
            RawSection sec;
            sec.section_title = std::to_string(s + 1) + " " + pseudo_word(rng);
            int n_paras = uni(0, 9);
            for (int p = 0; p < n_paras; ++p) {
                int shape = uni(0, 19);
                int n_sent = shape == 0 ? uni(15, 30) : uni(1, 8);
                std::string para;
                for (int k = 0; k < n_sent; ++k) {
                    int words = (shape == 1 && k == 0) ? uni(361, 480) : uni(3, 40);
                    for (int w = 0; w < words; ++w) {
                        if (!para.empty()) para += uni(0, 15) == 0 ? "  \t " : " ";
                        para += pseudo_word(rng);
                        if (uni(0, 60) == 0) para += "\xE2\x80\x8B";
                    }
                    para += enders[uni(0, 3)];
                    if (uni(0, 10) == 0) para += "\n";
                }
                if (shape == 2) para = "Figure " + std::to_string(uni(1, 9)) + ": " + pseudo_word(rng);
                sec.paragraphs.push_back(std::move(para));
            }
            doc.sections.push_back(std::move(sec));
        }
        docs.push_back(std::move(doc));
    }
    return docs;
}

/// Section index and position encoded in a section-aware chunk id.
inline std::pair<std::size_t, std::size_t> chunk_position(const std::string& chunk_id) {
    auto last = chunk_id.rfind('/');
    auto prev = chunk_id.rfind('/', last - 1);
    return {std::stoul(chunk_id.substr(prev + 1, last - prev - 1)), std::stoul(chunk_id.substr(last + 1))};
}

/// Violations of the size, wholeness and lossless-reconstruction invariants
/// for `chunks` segmented from the preprocessed document `doc`.
inline std::vector<std::string> segmentation_violations(const RawDocument& doc, const std::vector<Chunk>& chunks,
                                                        std::size_t n_words) {
    std::vector<std::string> bad;
    std::vector<std::vector<const Chunk*>> by_section(doc.sections.size());
    std::size_t last_sec = 0, last_idx = 0;
    bool first = true;
    for (const auto& c : chunks) {
        auto [s, i] = chunk_position(c.chunk_id);
        if (s >= doc.sections.size()) {
            bad.push_back(c.chunk_id + ": section out of range");
            continue;
        }
        if (!first && (s < last_sec || (s == last_sec && i != last_idx + 1)))
            bad.push_back(c.chunk_id + ": out of document order");
        first = false;
        last_sec = s;
        last_idx = i;
        by_section[s].push_back(&c);
        if (c.source != render_source(doc.spec_id, doc.sections[s].section_title))
            bad.push_back(c.chunk_id + ": wrong source");
        if (!text::ends_with(c.text, std::string(kSourceMarker) + c.source))
            bad.push_back(c.chunk_id + ": missing source suffix");
        auto body = c.body();
        bool multi_para = body.find("\n\n") != std::string_view::npos;
        if (text::count_words(body) > n_words && (multi_para || split_sentences(body).size() != 1))
            bad.push_back(c.chunk_id + ": oversized body is not a single sentence");
    }
    for (std::size_t s = 0; s < doc.sections.size(); ++s) {
        const auto& paras = doc.sections[s].paragraphs;
        std::string expected = text::join(paras, "\n\n");
        std::size_t pos = 0;
        const auto& cs = by_section[s];
        for (std::size_t k = 0; k < cs.size(); ++k) {
            auto body = cs[k]->body();
            if (expected.compare(pos, body.size(), body) != 0) {
                bad.push_back(cs[k]->chunk_id + ": body does not continue the section text");
                break;
            }
            pos += body.size();
            if (k + 1 == cs.size()) break;
            if (expected.compare(pos, 2, "\n\n") == 0) {
                pos += 2;
            } else if (expected.compare(pos, 1, " ") == 0) {
                // Split inside a paragraph: must fall on a sentence end.
                auto words = text::split_whitespace(body);
                if (words.empty() || !ends_sentence(words.back()))
                    bad.push_back(cs[k]->chunk_id + ": paragraph split mid-sentence");
                pos += 1;
            } else {
                bad.push_back(cs[k]->chunk_id + ": chunk boundary inside a word");
                break;
            }
        }
        if (pos != expected.size() && !(cs.empty() && expected.empty()))
            bad.push_back(doc.spec_id + " section " + std::to_string(s) + ": reconstruction incomplete");
    }
    return bad;
}

// ---- retrieval fixture --------------------------------------------------------------

/// `n` chunks of random pseudo-word text; every 200th repeats its predecessor's
/// body so exact ties occur.
inline std::vector<Chunk> random_chunks(std::uint64_t seed, std::size_t n) {
    std::mt19937_64 rng(seed);
    std::vector<std::string> vocab;
    for (int i = 0; i < 4000; ++i) vocab.push_back(pseudo_word(rng) + std::to_string(i % 97));
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1), len(15, 80);
    std::vector<Chunk> out;
    std::string prev;
    for (std::size_t i = 0; i < n; ++i) {
        std::string body;
        if (i % 200 == 199) {
            body = prev;
        } else {
            for (std::size_t w = len(rng); w > 0; --w) {
                if (!body.empty()) body += ' ';
                body += vocab[pick(rng)];
            }
        }
        char id[32];
        std::snprintf(id, sizeof id, "RND/%05zu/000", i);
        out.push_back(make_chunk(id, body, "RND", "", "RND", ChunkOrigin::document));
        prev = body;
    }
    return out;
}

// ---- echo benchmark -----------------------------------------------------------------

struct EchoFixture {
    std::vector<RawDocument> documents;
    std::vector<BenchmarkItem> items;
    std::vector<bool> decoy_wins;  // per item: a decoy outranks the reference chunk
};

/// Each document has one long reference section with vocabulary unique to the
/// document, plus two short decoy sections that reuse some query words. The
/// query is the first two sentences of the reference section and the expected
/// answer is its full body. In every `strong_every`-th document the first decoy
/// repeats most of the query, so it ranks above the reference section.
inline EchoFixture echo_fixture(std::uint64_t seed, std::size_t n_docs = 30, std::size_t strong_every = 3) {
    std::mt19937_64 rng(seed);
    auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    EchoFixture fx;
    // Random letter strings, never repeated anywhere in the corpus.
    std::set<std::string> used;
    auto word = [&] {
        static const char letters[] = "bcdfghjklmnpqrstvwxz";
        for (;;) {
            std::string w;
            for (int n = uni(5, 9); n > 0; --n) w += letters[uni(0, 19)];
            if (used.insert(w).second) return w;
        }
    };
    for (std::size_t d = 0; d < n_docs; ++d) {
        std::vector<std::string> paragraphs;
        std::vector<std::string> query_words;
        std::string query;
        std::size_t total = 0, sentences = 0;
        while (total < 310) {
            std::string para;
            for (int k = 0; k < 4 && total < 310; ++k) {
                int n = uni(10, 14);
                std::string sent;
                for (int w = 0; w < n; ++w) {
                    auto t = word();
                    if (sentences < 2) query_words.push_back(t);
                    if (!sent.empty()) sent += ' ';
                    sent += t;
                }
                sent += '.';
                if (sentences < 2) query += (query.empty() ? "" : " ") + sent;
                ++sentences;
                total += static_cast<std::size_t>(n);
                para += (para.empty() ? "" : " ") + sent;
            }
            paragraphs.push_back(para);
        }
        std::shuffle(query_words.begin(), query_words.end(), rng);
        bool strong = strong_every > 0 && d % strong_every == 0;
        auto decoy = [&](std::size_t from, std::size_t shared, std::size_t fresh) {
            std::string s;
            for (std::size_t i = 0; i < shared; ++i) s += (s.empty() ? "" : " ") + query_words[from + i];
            for (std::size_t i = 0; i < fresh; ++i) s += " " + word();
            return s + ".";
        };
        RawDocument doc;
        char id[32];
        std::snprintf(id, sizeof id, "ECHO-%03zu", d);
        doc.spec_id = id;
        doc.title = id;
        doc.sections.push_back({"Reference", paragraphs});
        doc.sections.push_back({"Note A", {strong ? decoy(0, 7, 1) : decoy(0, 4, 2)}});
        doc.sections.push_back({"Note B", {decoy(10, 4, 2)}});
        fx.items.push_back({"echo-" + std::to_string(d), query, text::join(paragraphs, "\n\n"), doc.spec_id});
        fx.decoy_wins.push_back(strong);
        fx.documents.push_back(std::move(doc));
    }
    return fx;
}

}  // namespace specrag::testkit
