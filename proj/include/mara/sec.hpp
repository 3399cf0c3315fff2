#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mara/providers.hpp"

namespace mara {

enum class SufficiencySignal { Sufficient, PartiallySufficient, Insufficient };

std::string to_string(SufficiencySignal s);

enum class TemplateId { sufficiency, feedback, memory_update, answer };

std::string to_string(TemplateId id);

// Prompt templates with {name} placeholders. Defaults are compiled in;
// a directory of editable UTF-8 files can override them.
class PromptLibrary {
public:
    static PromptLibrary defaults();
    static PromptLibrary from_directory(const std::string& dir);

    const std::string& text(TemplateId id) const;

private:
    std::map<TemplateId, std::string> templates_;
};

// Substitutes every {placeholder} in the template from bindings. Unknown
// placeholders raise MissingBinding; nothing else in the text is touched.
std::string render_prompt(const PromptLibrary& library, TemplateId id,
                          const std::map<std::string, std::string>& bindings);

// Signal parsing: trimmed, case-folded substring match with precedence
// "partially sufficient" > "insufficient" > "sufficient". In non-strict
// mode unrecognized text degrades to Insufficient.
struct ParsedSignal {
    SufficiencySignal signal;
    bool recognized;
};

ParsedSignal parse_signal_ex(const std::string& text, bool strict);
SufficiencySignal parse_signal(const std::string& text, bool strict = false);

struct SecConfig {
    int window_size = 3;
    int stride = 0;  // 0 means "same as window_size"
    int max_memory_entries = 5;
    bool enable_feedback = false;
    bool strict_parse = false;
    int max_tokens = 512;
    double temperature = 0.0;

    int effective_stride() const { return stride == 0 ? window_size : stride; }
    void validate() const;
};

// One retrieved candidate as seen by the controller: its id, the text
// shown in prompts, and an optional attachment ref for image payloads.
struct Candidate {
    std::string doc_id;
    std::string text;
    std::string attachment_ref;
};

struct MemoryEntry {
    std::string source_doc_id;
    std::string text;
    int step_added = 0;
};

struct TranscriptRecord {
    int step = 0;
    TemplateId template_id = TemplateId::sufficiency;
    std::string prompt_digest;
    std::string response;
    std::optional<SufficiencySignal> parsed_signal;
};

class SecSession {
public:
    SecSession(std::string query, std::vector<Candidate> candidates, SecConfig config,
               const PromptLibrary* library = nullptr);

    const std::string& query() const { return query_; }
    const std::vector<Candidate>& candidates() const { return candidates_; }
    const SecConfig& config() const { return config_; }
    const PromptLibrary& library() const;

    size_t window_start() const { return window_start_; }
    bool exhausted() const { return window_start_ >= candidates_.size(); }
    std::span<const Candidate> current_window() const;

    const std::vector<MemoryEntry>& memory() const { return memory_; }
    const std::vector<SufficiencySignal>& signals() const { return signals_; }
    const std::vector<std::string>& feedback_log() const { return feedback_log_; }
    const std::vector<std::string>& warnings() const { return warnings_; }
    const std::vector<TranscriptRecord>& transcript() const { return transcript_; }

    int generator_calls() const { return static_cast<int>(transcript_.size()); }
    int sufficiency_calls() const { return sufficiency_calls_; }
    int steps_taken() const { return steps_taken_; }

private:
    friend struct SecStepper;

    std::string query_;
    std::vector<Candidate> candidates_;
    SecConfig config_;
    const PromptLibrary* library_;

    size_t window_start_ = 0;
    std::vector<MemoryEntry> memory_;
    std::vector<SufficiencySignal> signals_;
    std::vector<std::string> feedback_log_;
    std::vector<std::string> warnings_;
    std::vector<TranscriptRecord> transcript_;
    int sufficiency_calls_ = 0;
    int steps_taken_ = 0;
};

struct StepResult {
    SufficiencySignal signal;
    std::optional<std::string> answer;  // set iff signal == Sufficient
    int calls_in_step = 0;
    size_t window_start_after = 0;
    size_t memory_size_after = 0;
};

// Runs one window: a sufficiency call, then the signal-specific action
// (answer / memory update / advance), plus the optional feedback call.
StepResult step(SecSession& session, Generator& generator);

enum class OutcomeKind { Answer, Abstain };

struct SecOutcome {
    OutcomeKind kind = OutcomeKind::Abstain;
    std::string answer;  // valid iff kind == Answer
    bool answered_from_memory = false;
    int calls_made = 0;         // every generator call
    int sufficiency_calls = 0;  // sufficiency judgments only
    std::vector<MemoryEntry> final_memory;
    std::vector<SufficiencySignal> signals;
};

// Iterates step() until an answer or window exhaustion, then applies the
// fallback: answer from memory when any was kept, abstain otherwise.
SecOutcome run(SecSession& session, Generator& generator);
SecOutcome run(const std::string& query, std::vector<Candidate> candidates, Generator& generator,
               const SecConfig& config, const PromptLibrary* library = nullptr);

// Memory-update reply parsing, exposed for tests: entries are the
// bracketed groups under "Keep in Memory:"; without brackets, each
// non-empty line counts.
std::vector<std::string> parse_keep_list(const std::string& response);

struct CallStats {
    uint64_t total_calls = 0;  // sufficiency calls, the per-window loop cost
    uint64_t total_generator_calls = 0;
    uint64_t queries = 0;
    double avg_calls = 0.0;  // total_calls / queries, reported to 2 decimals
};

CallStats call_stats(const std::vector<SecOutcome>& outcomes);

// Line-delimited JSON transcript: {step, role, template_id, prompt_digest,
// response, parsed_signal}.
void write_transcript(const SecSession& session, const std::string& path);

}  // namespace mara
