#include "mara/sec.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "mara/detail/hash.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace mara {

std::string to_string(SufficiencySignal s) {
    switch (s) {
        case SufficiencySignal::Sufficient: return "Sufficient";
        case SufficiencySignal::PartiallySufficient: return "Partially Sufficient";
        case SufficiencySignal::Insufficient: return "Insufficient";
    }
    return "?";
}

std::string to_string(TemplateId id) {
    switch (id) {
        case TemplateId::sufficiency: return "sufficiency";
        case TemplateId::feedback: return "feedback";
        case TemplateId::memory_update: return "memory_update";
        case TemplateId::answer: return "answer";
    }
    return "?";
}

namespace {

// The three controller prompts, byte-for-byte. Editing them changes what
// the golden tests compare against; override via a template directory
// instead.
constexpr const char* kSufficiencyTemplate =
    R"(You are a fact-based reasoning assistant. Your goal is to assess whether the provided information is sufficient to generate an accurate and complete answer to the given question.

### User Question:
{user_question}

### Context Provided (Retrieved Passages + Memory Buffer):
{retrieved_passages}

### Instructions:

- If the provided information is **fully sufficient** to generate a factually accurate and complete answer, return: "Sufficient"

- If the information **contains some relevant content but is missing critical details**, return: "Partially Sufficient"

- If the information is **missing key facts or is entirely insufficient**, return: "Insufficient"

### Response Format (Only output one word: "Sufficient", "Partially Sufficient", or "Insufficient"):)";

constexpr const char* kFeedbackTemplate =
    R"(You are a retrieval-augmented reasoning expert. Your task is to analyze whether the provided context contains enough information to generate a complete and accurate answer. If not, generate structured feedback to guide the next retrieval step.

### User Question:
{user_question}

### Context Provided (Retrieved Passages + Memory Buffer):
{retrieved_passages}

### Sufficiency Assessment:
{previous_sufficiency_result}  # "Partially Sufficient" or "Insufficient"

### Instructions:

- Identify **missing key details** needed to fully answer the question.

- Suggest **which aspects should be retrieved in the next step** (e.g., missing facts, numerical data, explanations).

- If the context contains **irrelevant information that can be ignored**, list what should be **excluded** in the next retrieval step.

- Your response should be **concise and structured** in the following format:

### Response Format:

- **Missing Information:** [List missing aspects or facts]

- **Retrieval Guidance:** [Suggest which type of content to retrieve next]

- **Irrelevant Content:** [List any unnecessary or misleading information])";

constexpr const char* kMemoryUpdateTemplate =
    R"(You are managing a retrieval memory buffer for an adaptive reasoning system. Your task is to determine which retrieved passages should be stored in long-term memory and which should be discarded.

### User Question:
{user_question}

### Current Memory Buffer:
{current_memory}

### Newly Retrieved Passages:
{retrieved_passages}

### Instructions:

- **Keep** passages that contain **unique, critical, and factual information** necessary to answer the question.

- **Remove** passages that are **redundant, irrelevant, or contradict existing memory**.

- **Prioritize** storing passages that provide **clarifications, numerical data, or supporting evidence**.

- **If memory is full**, remove **the least relevant passage** to make space.

### Response Format:

- **Keep in Memory:** [List passages to retain]

- **Remove from Memory:** [List passages to discard])";

constexpr const char* kAnswerTemplate =
    R"(Answer the question using only the provided context.

### User Question:
{user_question}

### Context:
{retrieved_passages})";

std::string read_template_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) throw IoError("cannot read template '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string lowercase(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string trim(const std::string& s) {
    size_t begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    size_t end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

}  // namespace

PromptLibrary PromptLibrary::defaults() {
    PromptLibrary lib;
    lib.templates_[TemplateId::sufficiency] = kSufficiencyTemplate;
    lib.templates_[TemplateId::feedback] = kFeedbackTemplate;
    lib.templates_[TemplateId::memory_update] = kMemoryUpdateTemplate;
    lib.templates_[TemplateId::answer] = kAnswerTemplate;
    return lib;
}

PromptLibrary PromptLibrary::from_directory(const std::string& dir) {
    PromptLibrary lib;
    lib.templates_[TemplateId::sufficiency] = read_template_file(fs::path(dir) / "sufficiency.txt");
    lib.templates_[TemplateId::feedback] = read_template_file(fs::path(dir) / "feedback.txt");
    lib.templates_[TemplateId::memory_update] =
        read_template_file(fs::path(dir) / "memory_update.txt");
    lib.templates_[TemplateId::answer] = read_template_file(fs::path(dir) / "answer.txt");
    return lib;
}

const std::string& PromptLibrary::text(TemplateId id) const {
    auto it = templates_.find(id);
    if (it == templates_.end()) throw InvalidArgument("unknown template id");
    return it->second;
}

std::string render_prompt(const PromptLibrary& library, TemplateId id,
                          const std::map<std::string, std::string>& bindings) {
    const std::string& tpl = library.text(id);
    std::string out;
    out.reserve(tpl.size());
    size_t pos = 0;
    while (pos < tpl.size()) {
        char c = tpl[pos];
        if (c != '{') {
            out.push_back(c);
            ++pos;
            continue;
        }
        size_t name_end = pos + 1;
        while (name_end < tpl.size() &&
               (std::islower(static_cast<unsigned char>(tpl[name_end])) || tpl[name_end] == '_')) {
            ++name_end;
        }
        if (name_end > pos + 1 && name_end < tpl.size() && tpl[name_end] == '}') {
            std::string name = tpl.substr(pos + 1, name_end - pos - 1);
            auto it = bindings.find(name);
            if (it == bindings.end()) {
                throw MissingBinding("missing binding for placeholder '" + name + "'");
            }
            out += it->second;  // substituted text is never re-scanned
            pos = name_end + 1;
        } else {
            out.push_back(c);
            ++pos;
        }
    }
    return out;
}

ParsedSignal parse_signal_ex(const std::string& text, bool strict) {
    std::string norm = lowercase(trim(text));
    // "sufficient" is a substring of both other labels, so match in
    // hazard order.
    if (norm.find("partially sufficient") != std::string::npos) {
        return {SufficiencySignal::PartiallySufficient, true};
    }
    if (norm.find("insufficient") != std::string::npos) {
        return {SufficiencySignal::Insufficient, true};
    }
    if (norm.find("sufficient") != std::string::npos) {
        return {SufficiencySignal::Sufficient, true};
    }
    if (strict) {
        throw UnparseableSignal("cannot parse sufficiency signal from: '" + trim(text) + "'");
    }
    return {SufficiencySignal::Insufficient, false};
}

SufficiencySignal parse_signal(const std::string& text, bool strict) {
    return parse_signal_ex(text, strict).signal;
}

void SecConfig::validate() const {
    if (window_size < 1) throw InvalidConfig("window_size must be >= 1");
    if (stride < 0 || (stride != 0 && stride > window_size)) {
        throw InvalidConfig("stride must be in [1, window_size] (or 0 for window_size)");
    }
    if (max_memory_entries < 1) throw InvalidConfig("max_memory_entries must be >= 1");
    if (max_tokens < 1) throw InvalidConfig("max_tokens must be >= 1");
    if (temperature < 0.0) throw InvalidConfig("temperature must be >= 0");
}

SecSession::SecSession(std::string query, std::vector<Candidate> candidates, SecConfig config,
                       const PromptLibrary* library)
    : query_(std::move(query)),
      candidates_(std::move(candidates)),
      config_(config),
      library_(library) {
    config_.validate();
    if (query_.empty()) throw InvalidArgument("query must be non-empty");
    if (candidates_.empty()) throw EmptyInput("candidate list must be non-empty");
}

const PromptLibrary& SecSession::library() const {
    static const PromptLibrary defaults = PromptLibrary::defaults();
    return library_ ? *library_ : defaults;
}

std::span<const Candidate> SecSession::current_window() const {
    size_t begin = std::min(window_start_, candidates_.size());
    size_t end = std::min(begin + static_cast<size_t>(config_.window_size), candidates_.size());
    return {candidates_.data() + begin, end - begin};
}

namespace {

std::string format_passages(std::span<const Candidate> window) {
    std::string out;
    for (size_t i = 0; i < window.size(); ++i) {
        if (i) out += "\n\n";
        out += "[" + window[i].doc_id + "] " + window[i].text;
    }
    return out;
}

std::string format_memory(const std::vector<MemoryEntry>& memory) {
    std::string out;
    for (size_t i = 0; i < memory.size(); ++i) {
        if (i) out += "\n";
        out += "- " + memory[i].text;
    }
    return out;
}

std::vector<std::string> window_attachments(std::span<const Candidate> window) {
    std::vector<std::string> refs;
    for (const auto& c : window) {
        if (!c.attachment_ref.empty()) refs.push_back(c.attachment_ref);
    }
    return refs;
}

}  // namespace

// All mutation of a session happens through this helper so step() and
// run() share one implementation of the transition rules.
struct SecStepper {
    SecSession& s;
    Generator& gen;

    std::string call(TemplateId id, const std::string& prompt,
                     std::span<const Candidate> window) {
        GenerationRequest req;
        req.prompt = prompt;
        req.attachments = window_attachments(window);
        req.max_tokens = s.config_.max_tokens;
        req.temperature = s.config_.temperature;
        std::string response = gen.generate(req);
        s.transcript_.push_back(TranscriptRecord{s.steps_taken_, id,
                                                 detail::hex64(detail::fnv1a64(prompt)), response,
                                                 std::nullopt});
        return response;
    }

    // Window passages plus memory buffer, with any pending feedback trace
    // prepended — the controller's view of the current evidence.
    std::string evidence_context(std::span<const Candidate> window) const {
        std::string out;
        if (s.config_.enable_feedback && !s.feedback_log_.empty()) {
            out += "Feedback from previous step:\n" + s.feedback_log_.back() + "\n\n";
        }
        out += format_passages(window);
        if (!s.memory_.empty()) {
            out += "\n\nMemory Buffer:\n" + format_memory(s.memory_);
        }
        return out;
    }

    StepResult run_step() {
        if (s.exhausted()) throw InvalidArgument("window already exhausted");
        auto window = s.current_window();
        const std::string context = evidence_context(window);
        int calls_before = s.generator_calls();

        std::string sufficiency_prompt =
            render_prompt(s.library(), TemplateId::sufficiency,
                          {{"user_question", s.query_}, {"retrieved_passages", context}});
        std::string response = call(TemplateId::sufficiency, sufficiency_prompt, window);
        ++s.sufficiency_calls_;

        ParsedSignal parsed = parse_signal_ex(response, s.config_.strict_parse);
        s.transcript_.back().parsed_signal = parsed.signal;
        if (!parsed.recognized) {
            s.warnings_.push_back("unrecognized sufficiency response at step " +
                                  std::to_string(s.steps_taken_) + ": '" + trim(response) +
                                  "' treated as Insufficient");
        }
        s.signals_.push_back(parsed.signal);

        StepResult result;
        result.signal = parsed.signal;

        if (parsed.signal == SufficiencySignal::Sufficient) {
            std::string answer_prompt =
                render_prompt(s.library(), TemplateId::answer,
                              {{"user_question", s.query_}, {"retrieved_passages", context}});
            result.answer = call(TemplateId::answer, answer_prompt, window);
        } else {
            if (parsed.signal == SufficiencySignal::PartiallySufficient) {
                apply_memory_update(window);
            }
            if (s.config_.enable_feedback) {
                std::string feedback_prompt = render_prompt(
                    s.library(), TemplateId::feedback,
                    {{"user_question", s.query_},
                     {"retrieved_passages", context},
                     {"previous_sufficiency_result", to_string(parsed.signal)}});
                s.feedback_log_.push_back(
                    call(TemplateId::feedback, feedback_prompt, window));
            }
            s.window_start_ += static_cast<size_t>(s.config_.effective_stride());
        }

        ++s.steps_taken_;
        result.calls_in_step = s.generator_calls() - calls_before;
        result.window_start_after = s.window_start_;
        result.memory_size_after = s.memory_.size();
        return result;
    }

    void apply_memory_update(std::span<const Candidate> window) {
        std::string prompt =
            render_prompt(s.library(), TemplateId::memory_update,
                          {{"user_question", s.query_},
                           {"current_memory", format_memory(s.memory_)},
                           {"retrieved_passages", format_passages(window)}});
        std::string response = call(TemplateId::memory_update, prompt, window);

        for (auto& text : parse_keep_list(response)) {
            MemoryEntry entry;
            entry.text = std::move(text);
            entry.step_added = s.steps_taken_;
            entry.source_doc_id = "unattributed";
            for (const auto& c : window) {
                if (entry.text.find(c.doc_id) != std::string::npos) {
                    entry.source_doc_id = c.doc_id;
                    break;
                }
            }
            s.memory_.push_back(std::move(entry));
        }
        // Capacity eviction, oldest first.
        size_t cap = static_cast<size_t>(s.config_.max_memory_entries);
        if (s.memory_.size() > cap) {
            s.memory_.erase(s.memory_.begin(),
                            s.memory_.begin() + static_cast<long>(s.memory_.size() - cap));
        }
    }

    std::string final_memory_answer() {
        std::string context = "Memory Buffer:\n" + format_memory(s.memory_);
        std::string prompt =
            render_prompt(s.library(), TemplateId::answer,
                          {{"user_question", s.query_}, {"retrieved_passages", context}});
        return call(TemplateId::answer, prompt, {});
    }
};

StepResult step(SecSession& session, Generator& generator) {
    return SecStepper{session, generator}.run_step();
}

SecOutcome run(SecSession& session, Generator& generator) {
    SecStepper stepper{session, generator};
    SecOutcome outcome;

    while (!session.exhausted()) {
        StepResult r = stepper.run_step();
        if (r.answer) {
            outcome.kind = OutcomeKind::Answer;
            outcome.answer = *r.answer;
            break;
        }
    }
    if (outcome.kind != OutcomeKind::Answer) {
        if (!session.memory().empty()) {
            outcome.kind = OutcomeKind::Answer;
            outcome.answer = stepper.final_memory_answer();
            outcome.answered_from_memory = true;
        } else {
            outcome.kind = OutcomeKind::Abstain;
        }
    }

    outcome.calls_made = session.generator_calls();
    outcome.sufficiency_calls = session.sufficiency_calls();
    outcome.final_memory = session.memory();
    outcome.signals = session.signals();
    return outcome;
}

SecOutcome run(const std::string& query, std::vector<Candidate> candidates, Generator& generator,
               const SecConfig& config, const PromptLibrary* library) {
    SecSession session(query, std::move(candidates), config, library);
    return run(session, generator);
}

std::vector<std::string> parse_keep_list(const std::string& response) {
    std::string lowered = lowercase(response);
    size_t keep_pos = lowered.find("keep in memory:");
    if (keep_pos == std::string::npos) return {};
    size_t begin = keep_pos + std::string("keep in memory:").size();
    size_t end = lowered.find("remove from memory:", begin);
    std::string section = response.substr(begin, (end == std::string::npos ? response.size() : end) - begin);

    std::vector<std::string> entries;
    // Bracketed groups are the documented reply shape; fall back to
    // line-per-entry for free-form replies.
    size_t pos = 0;
    bool saw_bracket = false;
    while ((pos = section.find('[', pos)) != std::string::npos) {
        size_t close = section.find(']', pos + 1);
        if (close == std::string::npos) break;
        saw_bracket = true;
        std::string entry = trim(section.substr(pos + 1, close - pos - 1));
        if (!entry.empty()) entries.push_back(std::move(entry));
        pos = close + 1;
    }
    if (!saw_bracket) {
        std::istringstream lines(section);
        std::string line;
        while (std::getline(lines, line)) {
            std::string t = trim(line);
            while (!t.empty() && (t.front() == '-' || t.front() == '*')) t = trim(t.substr(1));
            if (!t.empty()) entries.push_back(std::move(t));
        }
    }
    return entries;
}

CallStats call_stats(const std::vector<SecOutcome>& outcomes) {
    if (outcomes.empty()) throw EmptyInput("call_stats needs at least one outcome");
    CallStats stats;
    stats.queries = outcomes.size();
    for (const auto& o : outcomes) {
        stats.total_calls += static_cast<uint64_t>(o.sufficiency_calls);
        stats.total_generator_calls += static_cast<uint64_t>(o.calls_made);
    }
    double avg = static_cast<double>(stats.total_calls) / static_cast<double>(stats.queries);
    stats.avg_calls = std::round(avg * 100.0) / 100.0;
    return stats;
}

void write_transcript(const SecSession& session, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out.good()) throw IoError("cannot open transcript '" + path + "'");
    for (const auto& rec : session.transcript()) {
        json j;
        j["step"] = rec.step;
        j["role"] = "generator";
        j["template_id"] = to_string(rec.template_id);
        j["prompt_digest"] = rec.prompt_digest;
        j["response"] = rec.response;
        j["parsed_signal"] = rec.parsed_signal ? json(to_string(*rec.parsed_signal)) : json();
        out << j.dump() << "\n";
    }
}

}  // namespace mara
