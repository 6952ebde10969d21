#include "pkgintel/ltm.hpp"

#include <algorithm>
#include <fstream>

#include "pkgintel/candidates.hpp"
#include "pkgintel/html.hpp"
#include "pkgintel/http.hpp"
#include "pkgintel/log.hpp"
#include "pkgintel/strings.hpp"

namespace pkgintel {

PromptSet PromptSet::load(const std::filesystem::path& dir) {
    PromptSet p;
    p.stage1 = read_file(dir / "stage1.txt");
    p.stage2 = read_file(dir / "stage2.txt");
    p.stage3 = read_file(dir / "stage3.txt");
    return p;
}

PromptSet PromptSet::load_default() { return load(std::filesystem::path(default_data_dir()) / "prompts"); }

std::string render_prompt(const std::string& tmpl, const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            auto close = tmpl.find('}', i);
            if (close != std::string::npos) {
                auto it = values.find(tmpl.substr(i + 1, close - i - 1));
                if (it != values.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out += tmpl[i++];
    }
    return out;
}

void MetricsLog::record(const TokenUsage& u) {
    std::lock_guard lock(mutex_);
    entries_.push_back(u);
    if (path_.empty()) return;
    OrderedJson j;
    j["page_url"] = u.page_url;
    j["stage"] = u.stage;
    j["backend"] = u.backend;
    j["prompt_tokens"] = u.prompt_tokens;
    j["response_tokens"] = u.response_tokens;
    std::ofstream out(path_, std::ios::app);
    if (!out) throw Error(ErrorKind::Io, "cannot append metrics to " + path_.string());
    out << j.dump() << '\n';
}

std::vector<TokenUsage> MetricsLog::entries() const {
    std::lock_guard lock(mutex_);
    return entries_;
}

std::string analysis_text(const PageDocument& doc) {
    if (!doc.blocks.empty()) return document_text(doc);
    if (doc.raw_markup.empty()) return {};
    return html::text_content(html::parse(doc.raw_markup).root);
}

void LtmExtractor::account(const PageDocument& doc, const char* stage, const BackendReply& reply) {
    if (!metrics_) return;
    metrics_->record({doc.url, stage, backend_.name(), reply.prompt_tokens, reply.response_tokens});
}

namespace {

template <typename Call, typename Parse>
auto with_retry(const char* stage, const std::string& url, Call call, Parse parse) {
    std::string last_raw;
    std::string last_error;
    for (int attempt = 0; attempt < 2; ++attempt) {
        BackendReply reply = call();
        last_raw = reply.text;
        try {
            return parse(reply);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Schema) throw;
            last_error = e.what();
        } catch (const Json::exception& e) {
            last_error = e.what();
        }
        log::warn(std::string(stage) + " reply rejected for " + url + ": " + last_error);
    }
    throw ExtractionError(std::string(stage) + " failed after retry: " + last_error, last_raw);
}

std::string lower_key(std::string_view name) { return str::to_lower(str::trim(name)); }

void merge_into(RecordDraft& into, const RecordDraft& from) {
    for (const auto& v : from.version)
        if (std::find(into.version.begin(), into.version.end(), v) == into.version.end()) into.version.push_back(v);
    for (const auto& v : from.ioc)
        if (std::find(into.ioc.begin(), into.ioc.end(), v) == into.ioc.end()) into.ioc.push_back(v);
    auto fill = [](OptString& a, const OptString& b) {
        if (!a && b) a = b;
    };
    fill(into.discovery_date, from.discovery_date);
    fill(into.repository_url, from.repository_url);
    fill(into.attack_method, from.attack_method);
    fill(into.discoverer, from.discoverer);
    fill(into.impacted_systems, from.impacted_systems);
    fill(into.attack_vector, from.attack_vector);
    fill(into.ecosystem, from.ecosystem);
    into.unverified = into.unverified || from.unverified;
}

/// Keeps drafts whose names are in `allowed`, merging repeats of one name.
std::vector<RecordDraft> restrict_names(std::vector<RecordDraft> drafts, const std::set<std::string>& allowed,
                                        const char* stage, const std::string& url) {
    std::vector<RecordDraft> out;
    std::map<std::string, std::size_t> pos;
    for (auto& d : drafts) {
        auto key = lower_key(d.package_name);
        if (!allowed.count(key)) {
            log::info(std::string(stage) + ": dropping '" + d.package_name + "' (not among earlier names) on " + url);
            continue;
        }
        if (auto it = pos.find(key); it != pos.end()) {
            merge_into(out[it->second], d);
            continue;
        }
        pos.emplace(key, out.size());
        out.push_back(std::move(d));
    }
    return out;
}

std::string candidates_json(const std::set<std::string>& candidates) {
    return Json(std::vector<std::string>(candidates.begin(), candidates.end())).dump();
}

}  // namespace

EntitySet LtmExtractor::stage1_extract(const PageDocument& doc, const std::set<std::string>& candidates) {
    const auto prompt =
        render_prompt(prompts_.stage1, {{"text", analysis_text(doc)}, {"candidates", candidates_json(candidates)}});
    return with_retry(
        "stage1", doc.url, [&] { return backend_.extract(prompt, doc, candidates); },
        [&](const BackendReply& r) {
            auto e = entity_set_from_json(parse_reply_json(r.text));
            account(doc, "stage1", r);
            return e;
        });
}

std::vector<RecordDraft> LtmExtractor::stage2_relate(const EntitySet& entities, const PageDocument& doc) {
    if (entities.package_names().empty()) return {};
    const auto prompt =
        render_prompt(prompts_.stage2, {{"text", analysis_text(doc)}, {"entities", to_json(entities).dump(2)}});
    auto drafts = with_retry(
        "stage2", doc.url, [&] { return backend_.relate(prompt, entities, doc); },
        [&](const BackendReply& r) {
            auto d = drafts_from_json(parse_reply_json(r.text));
            account(doc, "stage2", r);
            return d;
        });
    std::set<std::string> allowed;
    for (const auto& n : entities.package_names()) allowed.insert(lower_key(n));
    return restrict_names(std::move(drafts), allowed, "stage2", doc.url);
}

std::vector<RecordDraft> LtmExtractor::stage3_verify(const std::vector<RecordDraft>& drafts, const PageDocument& doc) {
    if (drafts.empty()) return {};
    const auto prompt =
        render_prompt(prompts_.stage3, {{"text", analysis_text(doc)}, {"drafts", drafts_to_json(drafts).dump(2)}});
    std::vector<RecordDraft> verified;
    try {
        verified = with_retry(
            "stage3", doc.url, [&] { return backend_.verify(prompt, drafts, doc); },
            [&](const BackendReply& r) {
                auto d = drafts_from_json(parse_reply_json(r.text));
                account(doc, "stage3", r);
                return d;
            });
    } catch (const ExtractionError& e) {
        log::warn("verification unavailable for " + doc.url + ", keeping unverified drafts: " + e.what());
        auto out = drafts;
        for (auto& d : out) d.unverified = true;
        return out;
    }
    std::set<std::string> allowed;
    for (const auto& d : drafts) allowed.insert(lower_key(d.package_name));
    return restrict_names(std::move(verified), allowed, "stage3", doc.url);
}

LtmExtractor::Outcome LtmExtractor::run(const PageDocument& doc, const std::set<std::string>& candidates,
                                        const SourceDescriptor& source) {
    Outcome out;
    out.entities = stage1_extract(doc, candidates);
    auto drafts = stage2_relate(out.entities, doc);
    drafts = stage3_verify(drafts, doc);
    out.drafts = ground_check(drafts, doc, candidates, &out.dropped);
    out.records = to_records(out.drafts, doc, source);
    return out;
}

bool contains_word(std::string_view text, std::string_view needle) {
    auto n = str::to_lower(str::trim(needle));
    if (n.empty()) return false;
    auto t = str::to_lower(text);
    auto word = [](char c) { return str::is_alnum(c) || c == '_' || c == '-' || static_cast<unsigned char>(c) >= 0x80; };
    std::size_t pos = 0;
    while ((pos = t.find(n, pos)) != std::string::npos) {
        const std::size_t end = pos + n.size();
        const bool left = pos == 0 || !word(t[pos - 1]) || !word(n.front());
        const bool right = end >= t.size() || !word(t[end]) || !word(n.back());
        if (left && right) return true;
        ++pos;
    }
    return false;
}

std::vector<RecordDraft> ground_check(const std::vector<RecordDraft>& drafts, const PageDocument& doc,
                                      const std::set<std::string>& candidates, std::vector<std::string>* dropped) {
    const std::string text = analysis_text(doc);
    std::set<std::string> lowered;
    for (const auto& c : candidates) lowered.insert(str::to_lower(c));
    std::vector<RecordDraft> out;
    for (const auto& d : drafts) {
        if (contains_word(text, d.package_name) || lowered.count(str::to_lower(str::trim(d.package_name)))) {
            out.push_back(d);
            continue;
        }
        log::warn("grounding: dropping '" + d.package_name + "', not found in " + doc.url);
        if (dropped) dropped->push_back(d.package_name);
    }
    return out;
}

namespace {

Ecosystem infer_ecosystem(const RecordDraft& d, const SourceDescriptor& source) {
    if (d.ecosystem) return parse_ecosystem(*d.ecosystem);
    if (str::trim(d.package_name).front() == '@') return Ecosystem::NPM;
    bool npm = false, pypi = false;
    for (const auto& t : source.collection_tags) {
        if (str::iequals(t, "npm")) npm = true;
        if (str::iequals(t, "pypi")) pypi = true;
    }
    return npm && !pypi ? Ecosystem::NPM : Ecosystem::PyPI;
}

OptString clean(const OptString& s) {
    if (!s) return std::nullopt;
    auto t = str::collapse_whitespace(*s);
    if (t.empty()) return std::nullopt;
    return t;
}

}  // namespace

std::vector<IntelRecord> to_records(const std::vector<RecordDraft>& drafts, const PageDocument& doc,
                                    const SourceDescriptor& source) {
    std::vector<IntelRecord> out;
    for (const auto& d : drafts) {
        IntelRecord r;
        try {
            r.ecosystem = infer_ecosystem(d, source);
            r.name = normalize_name(d.package_name, r.ecosystem);
        } catch (const Error& e) {
            log::warn("skipping draft '" + d.package_name + "' on " + doc.url + ": " + e.what());
            continue;
        }
        if (!d.version.empty()) r.versions = VersionSet(d.version.begin(), d.version.end());
        r.collected_at = doc.fetched_at;
        if (d.discovery_date) {
            auto f = try_parse_flexible_date(*d.discovery_date);
            if (!f) {
                r.notes.push_back("unparsed discovery_date: " + *d.discovery_date);
            } else if (*f > r.collected_at.date()) {
                r.notes.push_back("discovery_date after collection: " + *d.discovery_date);
            } else {
                r.discovery_date = f;
            }
        }
        r.repo_url = clean(d.repository_url);
        r.attack_method = clean(d.attack_method);
        r.discoverer = clean(d.discoverer);
        r.impacted_systems = clean(d.impacted_systems);
        r.attack_vector = clean(d.attack_vector);
        for (const auto& c : d.ioc) {
            auto t = std::string(str::trim(c));
            if (!t.empty()) r.iocs.insert(std::move(t));
        }
        if (d.unverified) r.notes.push_back("unverified");
        r.source_id = source.source_id.empty() ? doc.source_id : source.source_id;
        r.page_url = doc.url;
        try {
            validate(r);
        } catch (const Error& e) {
            log::warn("skipping invalid record '" + r.name + "' on " + doc.url + ": " + e.what());
            continue;
        }
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace pkgintel
