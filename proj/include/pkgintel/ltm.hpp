#pragma once

// Three-stage extraction (entities, relations, verification) over a pluggable
// analyzer, plus the grounding guard and the draft-to-record bridge.

#include <filesystem>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "pkgintel/entities.hpp"
#include "pkgintel/page.hpp"
#include "pkgintel/source.hpp"

namespace pkgintel {

struct BackendReply {
    std::string text;
    int prompt_tokens = 0;
    int response_tokens = 0;
};

/// Each call is independent of earlier calls. Implementations must be safe to
/// call concurrently for different documents. Transport failures throw a
/// retryable Error (FetchError Transport/Throttle).
class AnalyzerBackend {
public:
    virtual ~AnalyzerBackend() = default;
    virtual std::string name() const = 0;
    virtual BackendReply extract(const std::string& prompt, const PageDocument& doc,
                                 const std::set<std::string>& candidates) = 0;
    virtual BackendReply relate(const std::string& prompt, const EntitySet& entities, const PageDocument& doc) = 0;
    virtual BackendReply verify(const std::string& prompt, const std::vector<RecordDraft>& drafts,
                                const PageDocument& doc) = 0;
};

struct PromptSet {
    std::string stage1;
    std::string stage2;
    std::string stage3;

    /// stage1.txt, stage2.txt, stage3.txt. Throws Error(Io).
    static PromptSet load(const std::filesystem::path& dir);
    static PromptSet load_default();
};

/// Replaces {name} placeholders; unknown placeholders are left as they are.
std::string render_prompt(const std::string& tmpl, const std::map<std::string, std::string>& values);

struct TokenUsage {
    std::string page_url;
    std::string stage;
    std::string backend;
    int prompt_tokens = 0;
    int response_tokens = 0;
};

/// Thread-safe JSONL appender for per-call token usage.
class MetricsLog {
public:
    explicit MetricsLog(std::filesystem::path path = {}) : path_(std::move(path)) {}
    void record(const TokenUsage& usage);
    std::vector<TokenUsage> entries() const;

private:
    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::vector<TokenUsage> entries_;
};

class LtmExtractor {
public:
    LtmExtractor(AnalyzerBackend& backend, PromptSet prompts, MetricsLog* metrics = nullptr)
        : backend_(backend), prompts_(std::move(prompts)), metrics_(metrics) {}

    /// One retry on an unparseable reply, then ExtractionError carrying the raw reply.
    EntitySet stage1_extract(const PageDocument& doc, const std::set<std::string>& candidates);
    /// Drafts naming packages absent from `entities` are dropped.
    std::vector<RecordDraft> stage2_relate(const EntitySet& entities, const PageDocument& doc);
    /// Falls back to the input drafts flagged unverified when the verifier's reply
    /// is unusable after the retry.
    std::vector<RecordDraft> stage3_verify(const std::vector<RecordDraft>& drafts, const PageDocument& doc);

    struct Outcome {
        EntitySet entities;
        std::vector<RecordDraft> drafts;  // verified and grounded
        std::vector<IntelRecord> records;
        std::vector<std::string> dropped;  // names removed by the grounding guard
    };
    Outcome run(const PageDocument& doc, const std::set<std::string>& candidates, const SourceDescriptor& source);

private:
    void account(const PageDocument& doc, const char* stage, const BackendReply& reply);

    AnalyzerBackend& backend_;
    PromptSet prompts_;
    MetricsLog* metrics_;
};

/// Case-insensitive whole-word occurrence of `needle` in `text`.
bool contains_word(std::string_view text, std::string_view needle);

/// Keeps drafts whose package_name occurs in the document text or the candidate
/// set (both case-insensitive). Names of removed drafts go to `dropped`.
std::vector<RecordDraft> ground_check(const std::vector<RecordDraft>& drafts, const PageDocument& doc,
                                      const std::set<std::string>& candidates,
                                      std::vector<std::string>* dropped = nullptr);

/// Ecosystem: the draft's own, else '@'-scoped means NPM, else the source's tags, else PyPI.
std::vector<IntelRecord> to_records(const std::vector<RecordDraft>& drafts, const PageDocument& doc,
                                    const SourceDescriptor& source);

/// Text the extractor sees: block text, or the markup's text when no blocks were extracted.
std::string analysis_text(const PageDocument& doc);

}  // namespace pkgintel
