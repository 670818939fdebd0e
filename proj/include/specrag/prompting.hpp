#pragma once

#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "specrag/corpus.hpp"
#include "specrag/error.hpp"
#include "specrag/text.hpp"

namespace specrag {

enum class Role { system, user, assistant };

inline std::string to_string(Role r) {
    switch (r) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "user";
}

struct Message {
    Role role = Role::user;
    std::string content;

    bool operator==(const Message&) const = default;
};

struct PromptTemplate {
    std::string system_text;
    std::string context_header = "CONTEXT:";
    std::string question_header = "QUESTION:";
    std::string variant_name;
    bool approximation = false;  // text reconstructed, not taken from the original system
};

struct FewShotExample {
    std::string query;
    std::vector<std::string> context;
    std::string ideal_response;
};

struct HistoryTurn {
    std::string query;
    std::string response;
};

struct AssembledPrompt {
    std::vector<Message> messages;
    std::size_t estimated_words = 0;
    std::vector<Chunk> contexts;  // the contexts that survived budgeting, in order
    std::size_t shots_used = 0;
    std::size_t history_used = 0;
};

struct PromptConfig {
    std::size_t budget_words = 3000;
    std::size_t history_turns = 3;
};

inline constexpr std::string_view kDefaultVariant = "ngc_copilot";

/// The shipped variants. Only "ngc_copilot" carries an exact system text; the
/// other two approximate the public prompts of those systems.
inline std::map<std::string, PromptTemplate> builtin_templates() {
    std::map<std::string, PromptTemplate> t;
    t["ngc_copilot"] = PromptTemplate{
        "You are a helpful assistant. Use what you know already to answer the QUESTION. Improve the answer using "
        "the following pieces of CONTEXT. Always return the most relevant SOURCE.",
        "CONTEXT:", "QUESTION:", "ngc_copilot", false};
    t["chatgpt_enterprise"] = PromptTemplate{
        "You are ChatGPT, a large language model trained by OpenAI. Answer the user's question using the "
        "enterprise documents provided below when they are relevant.",
        "CONTEXT:", "QUESTION:", "chatgpt_enterprise", true};
    t["privategpt"] = PromptTemplate{
        "Use the following pieces of context to answer the question at the end. If you don't know the answer, "
        "just say that you don't know, don't try to make up an answer.",
        "CONTEXT:", "QUESTION:", "privategpt", true};
    return t;
}

inline PromptTemplate default_template() { return builtin_templates().at(std::string(kDefaultVariant)); }

struct PromptLibrary {
    std::map<std::string, PromptTemplate> templates = builtin_templates();
    std::vector<FewShotExample> shots;

    const PromptTemplate& get(const std::string& variant) const {
        auto it = templates.find(variant);
        if (it == templates.end()) throw InvalidArgument("unknown prompt variant '" + variant + "'");
        return it->second;
    }

    /// {"templates":[{variant_name, system_text, context_header?, question_header?}],
    ///  "shots":[{query, context:[...], ideal_response}]}. File templates
    /// override built-ins with the same name.
    static PromptLibrary load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open prompt config " + path);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path, static_cast<std::uint64_t>(e.id), e.what());
        }
        PromptLibrary lib;
        for (const auto& t : j.value("templates", nlohmann::json::array())) {
            PromptTemplate pt;
            pt.variant_name = t.at("variant_name").get<std::string>();
            pt.system_text = t.at("system_text").get<std::string>();
            pt.context_header = t.value("context_header", pt.context_header);
            pt.question_header = t.value("question_header", pt.question_header);
            pt.approximation = t.value("approximation", false);
            if (pt.system_text.empty()) throw ConfigError("template '" + pt.variant_name + "' has empty system_text");
            lib.templates[pt.variant_name] = pt;
        }
        for (const auto& s : j.value("shots", nlohmann::json::array())) {
            FewShotExample ex;
            ex.query = s.at("query").get<std::string>();
            ex.context = s.at("context").get<std::vector<std::string>>();
            ex.ideal_response = s.at("ideal_response").get<std::string>();
            if (ex.query.empty() || ex.context.empty() || ex.ideal_response.empty())
                throw ConfigError("few-shot example with empty field");
            lib.shots.push_back(std::move(ex));
        }
        return lib;
    }
};

/// "CONTEXT:\n<c1>\n\n<c2>\n\nQUESTION: <query>"
inline std::string render_user_message(const PromptTemplate& tpl, const std::vector<std::string>& contexts,
                                       std::string_view query) {
    std::string s = tpl.context_header;
    s.push_back('\n');
    s += text::join(contexts, "\n\n");
    s += "\n\n";
    s += tpl.question_header;
    s.push_back(' ');
    s.append(query);
    return s;
}

inline std::size_t count_prompt_words(const std::vector<Message>& messages) {
    std::size_t n = 0;
    for (const auto& m : messages) n += text::count_words(m.content);
    return n;
}

/// Build the message list. When over `budget_words`, drop the least similar
/// contexts first, then the oldest history turns, then few-shot examples from
/// the last one backwards. System text and the live query always stay.
inline AssembledPrompt assemble(std::string_view query, const std::vector<Chunk>& contexts,
                                const std::vector<HistoryTurn>& history, const PromptTemplate& tpl,
                                const std::vector<FewShotExample>& shots, std::size_t budget_words = 3000) {
    if (text::trim(query).empty()) throw InvalidArgument("empty query");
    if (tpl.system_text.empty()) throw InvalidArgument("template has empty system_text");

    std::size_t n_ctx = contexts.size();
    std::size_t first_turn = 0;
    std::size_t n_shots = shots.size();

    auto build = [&] {
        AssembledPrompt p;
        p.messages.push_back({Role::system, tpl.system_text});
        for (std::size_t i = 0; i < n_shots; ++i) {
            p.messages.push_back({Role::user, render_user_message(tpl, shots[i].context, shots[i].query)});
            p.messages.push_back({Role::assistant, shots[i].ideal_response});
        }
        for (std::size_t i = first_turn; i < history.size(); ++i) {
            p.messages.push_back({Role::user, history[i].query});
            p.messages.push_back({Role::assistant, history[i].response});
        }
        std::vector<std::string> texts;
        for (std::size_t i = 0; i < n_ctx; ++i) {
            texts.push_back(contexts[i].text);
            p.contexts.push_back(contexts[i]);
        }
        p.messages.push_back({Role::user, render_user_message(tpl, texts, query)});
        p.estimated_words = count_prompt_words(p.messages);
        p.shots_used = n_shots;
        p.history_used = history.size() - first_turn;
        return p;
    };

    std::vector<Message> minimal{{Role::system, tpl.system_text}, {Role::user, render_user_message(tpl, {}, query)}};
    if (count_prompt_words(minimal) > budget_words) throw InvalidArgument("budget too small");

    for (;;) {
        auto p = build();
        if (p.estimated_words <= budget_words) return p;
        if (n_ctx > 0) {
            --n_ctx;
        } else if (first_turn < history.size()) {
            ++first_turn;
        } else if (n_shots > 0) {
            --n_shots;
        } else {
            throw InvalidArgument("budget too small");
        }
    }
}

}  // namespace specrag
