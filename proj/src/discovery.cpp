#include "pkgintel/discovery.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <mutex>

#include "pkgintel/html.hpp"
#include "pkgintel/log.hpp"
#include "pkgintel/strings.hpp"
#include "pkgintel/url.hpp"

namespace pkgintel {

const std::vector<std::string>& default_common_keywords() {
    static const std::vector<std::string> kCommon{
        "package", "security", "malicious", "attacker", "account", "user", "python", "code", "software",
        "github", "malware", "repository", "dataset", "infected", "script", "vulnerability", "workflow"};
    return kCommon;
}

KeywordSet KeywordSet::make(std::vector<std::string> common, std::set<std::string> special) {
    KeywordSet ks;
    std::set<std::string> seen;
    for (auto& c : common) {
        auto k = str::to_lower(str::trim(c));
        if (k.empty()) continue;
        if (seen.insert(k).second) ks.common.push_back(k);
    }
    for (const auto& s : special) {
        auto k = str::to_lower(str::trim(s));
        if (k.empty()) continue;
        if (seen.count(k)) throw Error(ErrorKind::InvalidArgument, "keyword is both common and special: " + k);
        ks.special.insert(k);
    }
    return ks;
}

KeywordSet KeywordSet::defaults(const std::vector<std::string>& package_names) {
    std::set<std::string> special{"pypi", "npm"};
    for (const auto& n : package_names) special.insert(n);
    return make(default_common_keywords(), special);
}

std::vector<std::string> load_keyword_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot read keyword file " + path);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        auto t = str::trim(line);
        if (!t.empty()) out.push_back(str::to_lower(t));
    }
    return out;
}

std::vector<std::string> build_queries(const std::vector<std::string>& package_names, const KeywordSet& ks) {
    if (package_names.empty()) throw Error(ErrorKind::InvalidArgument, "build_queries: no package names");
    const std::string optional_terms = str::join(ks.common, " ");
    std::vector<std::string> out;
    out.reserve(package_names.size());
    for (const auto& raw : package_names) {
        auto name = str::trim(raw);
        if (name.empty()) throw Error(ErrorKind::InvalidArgument, "build_queries: blank package name");
        std::string q = "\"" + std::string(name) + "\"";
        if (!optional_terms.empty()) q += " " + optional_terms;
        out.push_back(std::move(q));
    }
    return out;
}

CannedSearchClient CannedSearchClient::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot read canned search results " + path);
    try {
        auto j = Json::parse(in);
        return CannedSearchClient(j.get<std::map<std::string, std::vector<std::string>>>());
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::Parse, path + ": " + e.what());
    }
}

std::vector<std::string> CannedSearchClient::search(const std::string& query, std::size_t) {
    auto it = results_.find(query);
    if (it == results_.end()) return {};
    return it->second;
}

WebSearchConfig WebSearchConfig::from_env() {
    WebSearchConfig c;
    if (const char* v = std::getenv("PKGINTEL_SEARCH_ENDPOINT")) c.endpoint = v;
    if (const char* v = std::getenv("PKGINTEL_SEARCH_API_KEY")) c.api_key = v;
    if (const char* v = std::getenv("PKGINTEL_SEARCH_ENGINE_ID")) c.engine_id = v;
    return c;
}

std::vector<std::string> WebSearchClient::search(const std::string& query, std::size_t limit) {
    std::vector<std::string> hits;
    for (std::size_t start = 1; hits.size() < limit; start += config_.page_size) {
        std::string url = config_.endpoint + "?key=" + url_encode(config_.api_key) + "&cx=" +
                          url_encode(config_.engine_id) + "&q=" + url_encode(query) +
                          "&num=" + std::to_string(config_.page_size) + "&start=" + std::to_string(start);
        HttpResponse resp;
        try {
            resp = http_.get(url, {{"accept", "application/json"}}, Duration(15000));
        } catch (const FetchError& e) {
            throw FetchError(ErrorKind::Transport, "search transport failure for query " + query + ": " + e.what(),
                             url);
        }
        if (resp.status == 429 || resp.status == 403)
            throw FetchError(ErrorKind::Throttle, "search quota exhausted for query " + query, url, resp.status);
        if (resp.status >= 500)
            throw FetchError(ErrorKind::Transport, "search backend error for query " + query, url, resp.status);
        if (resp.status != 200)
            throw FetchError(ErrorKind::PermanentFetch, "search rejected query " + query, url, resp.status);
        Json body;
        try {
            body = Json::parse(resp.body);
        } catch (const Json::exception& e) {
            throw FetchError(ErrorKind::Transport, "unparseable search response for " + query, url, resp.status);
        }
        if (!body.contains("items") || body["items"].empty()) break;
        for (const auto& item : body["items"])
            if (item.contains("link")) hits.push_back(item["link"].get<std::string>());
        if (body["items"].size() < config_.page_size) break;
    }
    return hits;
}

std::vector<std::string> harvest_results(const std::string& query, SearchClient& client, std::size_t limit) {
    if (limit == 0) throw Error(ErrorKind::InvalidArgument, "harvest_results: limit must be >= 1");
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (auto& url : client.search(query, limit)) {
        if (out.size() >= limit) break;
        if (seen.insert(url).second) out.push_back(url);
    }
    return out;
}

std::vector<HarvestOutcome> harvest_all(const std::vector<std::string>& queries, SearchClient& client,
                                        std::size_t limit, std::size_t parallelism) {
    std::vector<HarvestOutcome> out(queries.size());
    parallelism = std::max<std::size_t>(1, parallelism);
    auto run_one = [&](std::size_t i) {
        out[i].query = queries[i];
        try {
            out[i].urls = harvest_results(queries[i], client, limit);
        } catch (const std::exception& e) {
            out[i].error = e.what();
            log::warn("harvest failed for query " + queries[i] + ": " + e.what());
        }
    };
    for (std::size_t base = 0; base < queries.size(); base += parallelism) {
        std::vector<std::future<void>> batch;
        for (std::size_t i = base; i < std::min(queries.size(), base + parallelism); ++i)
            batch.push_back(std::async(std::launch::async, run_one, i));
        for (auto& f : batch) f.get();
    }
    return out;
}

DomainTally tally_and_filter_domains(const std::vector<std::string>& urls, std::size_t threshold) {
    DomainTally all;
    for (const auto& raw : urls) {
        auto u = parse_url(raw);
        if (!u || !u->is_http()) {
            ++all.skipped;
            log::info("skipping malformed URL: " + raw);
            continue;
        }
        ++all.counts[normalize_domain(u->host)];
    }
    DomainTally kept;
    kept.skipped = all.skipped;
    for (const auto& [domain, n] : all.counts)
        if (n > threshold) kept.counts.emplace(domain, n);
    return kept;
}

namespace {

bool is_boilerplate_container(const html::Node& n) {
    if (n.type != html::Node::Type::Element) return false;
    if (n.tag == "nav" || n.tag == "footer" || n.tag == "aside" || n.tag == "header" || n.tag == "menu")
        return true;
    if (const auto* role = n.attr("role")) {
        auto r = str::to_lower(*role);
        if (r == "navigation" || r == "banner" || r == "contentinfo" || r == "complementary" || r == "menu")
            return true;
    }
    for (std::string_view cls : {"sidebar", "nav", "navbar", "menu", "footer", "breadcrumb", "breadcrumbs"})
        if (n.has_class(cls)) return true;
    return false;
}

const html::Node* find_first(const html::Node& root, const std::function<bool(const html::Node&)>& pred) {
    const html::Node* found = nullptr;
    html::walk(root, [&](const html::Node& n, const std::vector<const html::Node*>&) {
        if (found) return false;
        if (pred(n)) {
            found = &n;
            return false;
        }
        return true;
    });
    return found;
}

}  // namespace

std::vector<std::string> extract_outbound_links(const PageDocument& page) {
    auto base = parse_url(page.url);
    if (!base) {
        log::warn("extract_outbound_links: page URL unparseable: " + page.url);
        return {};
    }
    auto doc = html::parse(page.raw_markup);
    if (!doc.warnings.empty()) log::debug("markup warnings in " + page.url + ": " + doc.warnings.front());

    const html::Node* main = find_first(doc.root, [](const html::Node& n) { return n.is_element("article"); });
    if (!main) main = find_first(doc.root, [](const html::Node& n) {
        if (n.is_element("main")) return true;
        const auto* role = n.type == html::Node::Type::Element ? n.attr("role") : nullptr;
        return role && str::iequals(*role, "main");
    });
    if (!main) main = find_first(doc.root, [](const html::Node& n) { return n.is_element("body"); });
    if (!main) main = &doc.root;

    std::vector<std::string> out;
    std::set<std::string> seen;
    html::walk(*main, [&](const html::Node& n, const std::vector<const html::Node*>&) {
        if (&n != main && is_boilerplate_container(n)) return false;
        if (n.type == html::Node::Type::Element && html::is_non_content(n.tag)) return false;
        if (n.is_element("a")) {
            if (const auto* href = n.attr("href")) {
                auto t = str::trim(*href);
                if (!t.empty() && t.front() != '#') {
                    if (auto abs = resolve_url(*base, t); abs && abs->is_http()) {
                        auto s = abs->str();
                        if (seen.insert(s).second) out.push_back(s);
                    }
                }
            }
        }
        return true;
    });
    return out;
}

std::vector<std::string> body_tokens(const PageDocument& page) {
    if (!page.blocks.empty()) return str::word_tokens(document_text(page));
    if (page.raw_markup.empty()) return {};
    auto doc = html::parse(page.raw_markup);
    return str::word_tokens(html::text_content(doc.root));
}

std::set<std::string> shingles(const std::vector<std::string>& tokens, std::size_t size) {
    std::set<std::string> out;
    if (tokens.empty()) return out;
    if (tokens.size() <= size) {
        out.insert(str::join(tokens, " "));
        return out;
    }
    for (std::size_t i = 0; i + size <= tokens.size(); ++i) {
        std::string s = tokens[i];
        for (std::size_t k = 1; k < size; ++k) s += " " + tokens[i + k];
        out.insert(std::move(s));
    }
    return out;
}

double detect_reprint(const PageDocument& a, const PageDocument& b) {
    const auto ta = body_tokens(a);
    const auto tb = body_tokens(b);
    if (ta.empty() || tb.empty()) {
        log::warn("detect_reprint: empty body (" + a.url + " vs " + b.url + ")");
        return 0.0;
    }
    const auto sa = shingles(ta);
    const auto sb = shingles(tb);
    std::size_t inter = 0;
    for (const auto& s : sa) inter += sb.count(s);
    const std::size_t uni = sa.size() + sb.size() - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

const std::set<std::string>& stopwords() {
    static const std::set<std::string> kStop{
        "a", "about", "above", "after", "again", "against", "ain", "all", "am", "an", "and", "any", "are", "aren",
        "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but", "by", "can",
        "couldn", "d", "did", "didn", "do", "does", "doesn", "doing", "don", "down", "during", "each", "few", "for",
        "from", "further", "had", "hadn", "has", "hasn", "have", "haven", "having", "he", "her", "here", "hers",
        "herself", "him", "himself", "his", "how", "i", "if", "in", "into", "is", "isn", "it", "its", "itself",
        "just", "ll", "m", "ma", "me", "mightn", "more", "most", "mustn", "my", "myself", "needn", "no", "nor",
        "not", "now", "o", "of", "off", "on", "once", "only", "or", "other", "our", "ours", "ourselves", "out",
        "over", "own", "re", "s", "same", "shan", "she", "should", "shouldn", "so", "some", "such", "t", "than",
        "that", "the", "their", "theirs", "them", "themselves", "then", "there", "these", "they", "this", "those",
        "through", "to", "too", "under", "until", "up", "ve", "very", "was", "wasn", "we", "were", "weren", "what",
        "when", "where", "which", "while", "who", "whom", "why", "will", "with", "won", "wouldn", "y", "you",
        "your", "yours", "yourself", "yourselves", "also", "would", "could", "may", "might", "must", "shall"};
    return kStop;
}

std::vector<std::string> tokenize_for_keywords(std::string_view text) {
    std::vector<std::string> out;
    for (auto& t : str::word_tokens(text)) {
        if (stopwords().count(t)) continue;
        bool numeric = std::all_of(t.begin(), t.end(), [](char c) { return str::is_digit(c); });
        if (numeric) continue;
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<std::vector<std::string>> tfidf_keywords(const std::vector<std::string>& corpus, std::size_t k) {
    if (corpus.empty()) throw Error(ErrorKind::InvalidArgument, "tfidf_keywords: empty corpus");
    std::vector<std::vector<std::string>> docs;
    docs.reserve(corpus.size());
    std::map<std::string, std::size_t> df;
    for (const auto& text : corpus) {
        docs.push_back(tokenize_for_keywords(text));
        std::set<std::string> uniq(docs.back().begin(), docs.back().end());
        for (const auto& t : uniq) ++df[t];
    }
    const double n_docs = static_cast<double>(corpus.size());
    std::vector<std::vector<std::string>> out;
    out.reserve(docs.size());
    for (const auto& tokens : docs) {
        std::map<std::string, std::size_t> tf;
        for (const auto& t : tokens) ++tf[t];
        std::vector<std::pair<double, std::string>> scored;
        const double len = static_cast<double>(tokens.size());
        for (const auto& [term, count] : tf) {
            const double idf = std::log((1.0 + n_docs) / (1.0 + static_cast<double>(df[term]))) + 1.0;
            scored.emplace_back(static_cast<double>(count) / len * idf, term);
        }
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        std::vector<std::string> top;
        for (std::size_t i = 0; i < std::min(k, scored.size()); ++i) top.push_back(scored[i].second);
        out.push_back(std::move(top));
    }
    return out;
}

std::vector<ReprintFinding> find_reprints(const std::vector<PageDocument>& pages, double threshold) {
    std::vector<ReprintFinding> out;
    for (std::size_t i = 0; i < pages.size(); ++i) {
        for (std::size_t j = i + 1; j < pages.size(); ++j) {
            const auto& a = pages[i];
            const auto& b = pages[j];
            if (a.source_id == b.source_id) continue;
            const double sim = detect_reprint(a, b);
            if (sim < threshold) continue;
            // Later publication is the copy; equal times fall back to URL order.
            const bool b_later = a.effective_published() < b.effective_published() ||
                                 (a.effective_published() == b.effective_published() && a.url < b.url);
            const auto& orig = b_later ? a : b;
            const auto& copy = b_later ? b : a;
            out.push_back({orig.url, copy.url, copy.source_id, sim});
        }
    }
    return out;
}

void mark_reprints(std::vector<SourceDescriptor>& sources, const std::vector<ReprintFinding>& findings) {
    for (const auto& f : findings) {
        for (auto& s : sources) {
            if (s.source_id != f.reprint_source_id) continue;
            s.status = SourceStatus::Reprint;
            s.note = "reprints " + f.original_url;
        }
    }
}

std::vector<SourceDescriptor> build_review_queue(const DomainTally& tally, const KeywordSet&) {
    std::vector<SourceDescriptor> out;
    for (const auto& [domain, count] : tally.counts) {
        SourceDescriptor s;
        s.source_id = domain;
        s.domain = domain;
        s.category = categorize_domain(domain);
        s.status = SourceStatus::Candidate;
        s.note = std::to_string(count) + " search hits";
        s.seed_urls = {"https://" + domain + "/"};
        out.push_back(std::move(s));
    }
    return out;
}

void review_source(std::vector<SourceDescriptor>& queue, const std::string& source_id, SourceStatus decision,
                   const std::set<std::string>& tags) {
    auto it = std::find_if(queue.begin(), queue.end(), [&](const auto& s) { return s.source_id == source_id; });
    if (it == queue.end()) throw Error(ErrorKind::InvalidArgument, "no source with id " + source_id);
    for (const auto& t : tags) it->collection_tags.insert(t);
    if (decision == SourceStatus::Approved && it->collection_tags.empty())
        throw Error(ErrorKind::InvalidArgument, "approving " + source_id + " requires at least one collection tag");
    it->status = decision;
}

}  // namespace pkgintel
