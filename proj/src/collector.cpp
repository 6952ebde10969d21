#include "pkgintel/collector.hpp"

#include <algorithm>
#include <cmath>

#include "pkgintel/csv.hpp"
#include "pkgintel/html.hpp"
#include "pkgintel/log.hpp"
#include "pkgintel/strings.hpp"
#include "pkgintel/url.hpp"

namespace pkgintel {

std::string Fetcher::pick_user_agent(const CrawlPolicy& policy) {
    std::lock_guard lock(rng_mutex_);
    std::uniform_int_distribution<std::size_t> dist(0, policy.user_agents.size() - 1);
    return policy.user_agents[dist(rng_)];
}

namespace {

std::optional<int> parse_retry_after(const HttpResponse& resp) {
    const auto* h = resp.header("retry-after");
    if (!h) return std::nullopt;
    auto t = str::trim(*h);
    if (t.empty() || !std::all_of(t.begin(), t.end(), [](char c) { return str::is_digit(c); })) return std::nullopt;
    return std::stoi(std::string(t));
}

}  // namespace

FetchResult Fetcher::fetch(const std::string& url, const CrawlPolicy& policy) {
    policy.validate();
    auto parsed = parse_url(url);
    if (!parsed || !parsed->is_http())
        throw FetchError(ErrorKind::PermanentFetch, "unsupported URL (http/https only): " + url, url);

    std::string current = parsed->str();
    int redirects = 0;
    int failures = 0;
    int attempts = 0;
    while (true) {
        auto cur = parse_url(current);
        limiter_.acquire(normalize_domain(cur->host), policy.min_interval());
        const std::string ua = pick_user_agent(policy);
        ++attempts;
        HttpResponse resp;
        try {
            resp = client_.get(current, {{"user-agent", ua}, {"accept", "text/html,*/*"}}, policy.timeout);
        } catch (const FetchError& e) {
            if (e.kind() != ErrorKind::Transport) throw;
            if (failures >= policy.retries)
                throw FetchError(ErrorKind::Transport,
                                 "fetch failed after " + std::to_string(attempts) + " attempts: " + e.what(), current);
            clock_.sleep_for(policy.backoff_base * (1 << failures));
            ++failures;
            continue;
        }

        if (resp.status >= 300 && resp.status < 400) {
            const auto* loc = resp.header("location");
            if (!loc) throw FetchError(ErrorKind::PermanentFetch, "redirect without Location", current, resp.status);
            if (++redirects > policy.max_redirects)
                throw FetchError(ErrorKind::PermanentFetch, "too many redirects", current, resp.status);
            auto next = resolve_url(*cur, *loc);
            if (!next || !next->is_http())
                throw FetchError(ErrorKind::PermanentFetch, "bad redirect target " + *loc, current, resp.status);
            current = next->str();
            continue;
        }
        if (resp.status == 429) {
            auto retry_after = parse_retry_after(resp);
            if (failures >= policy.retries)
                throw FetchError(ErrorKind::Throttle, "throttled (HTTP 429)", current, 429, retry_after);
            clock_.sleep_for(retry_after ? Duration(*retry_after * 1000) : policy.backoff_base * (1 << failures));
            ++failures;
            continue;
        }
        if (resp.status >= 500) {
            if (failures >= policy.retries)
                throw FetchError(ErrorKind::Transport, "server error HTTP " + std::to_string(resp.status), current,
                                 resp.status);
            clock_.sleep_for(policy.backoff_base * (1 << failures));
            ++failures;
            continue;
        }
        if (resp.status >= 400 || resp.status < 200)
            throw FetchError(ErrorKind::PermanentFetch, "HTTP " + std::to_string(resp.status), current, resp.status);

        FetchResult out;
        out.final_url = current;
        out.status = resp.status;
        out.attempts = attempts;
        out.user_agent = ua;
        out.doc.url = current;
        out.doc.fetched_at = clock_.wall_now();
        out.doc.published_at = extract_published_time(resp.body);
        out.doc.raw_markup = std::move(resp.body);
        return out;
    }
}

PageDocument fetch_page(const std::string& url, const CrawlPolicy& policy, HttpClient& client) {
    SystemClock clock;
    RateLimiter limiter(clock);
    Fetcher fetcher(client, limiter, clock, std::random_device{}());
    return fetcher.fetch(url, policy).doc;
}

PageCache::PageCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    auto index_path = dir_ / "index.json";
    if (!std::filesystem::exists(index_path)) return;
    try {
        auto j = Json::parse(read_file(index_path));
        for (const auto& e : j) {
            CacheEntry entry;
            entry.url = e.at("url").get<std::string>();
            entry.path = e.at("path").get<std::string>();
            entry.fetched_at = Timestamp::parse_iso(e.at("fetched_at").get<std::string>());
            entry.status = e.value("status", 200);
            entry.source_id = e.value("source_id", "");
            if (e.contains("published_at") && !e.at("published_at").is_null())
                entry.published_at = Timestamp::parse_iso(e.at("published_at").get<std::string>());
            index_.emplace(entry.url, std::move(entry));
        }
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::Parse, "corrupt cache index " + index_path.string() + ": " + e.what());
    }
}

std::optional<PageDocument> PageCache::get(const std::string& url) const {
    auto it = index_.find(url);
    if (it == index_.end()) return std::nullopt;
    PageDocument doc;
    doc.url = it->second.url;
    doc.source_id = it->second.source_id;
    doc.fetched_at = it->second.fetched_at;
    doc.published_at = it->second.published_at;
    doc.raw_markup = read_file(dir_ / it->second.path);
    return doc;
}

bool PageCache::contains(const std::string& url) const { return index_.count(url) != 0; }

void PageCache::put(const PageDocument& doc, int status) {
    CacheEntry entry;
    entry.url = doc.url;
    entry.path = sha256_hex(doc.url) + ".html";
    entry.fetched_at = doc.fetched_at;
    entry.status = status;
    entry.source_id = doc.source_id;
    entry.published_at = doc.published_at;
    write_file_atomic(dir_ / entry.path, doc.raw_markup);
    index_[doc.url] = std::move(entry);
    save_index();
}

std::vector<CacheEntry> PageCache::entries() const {
    std::vector<CacheEntry> out;
    for (const auto& [_, e] : index_) out.push_back(e);
    return out;
}

std::vector<PageDocument> PageCache::pages() const {
    std::vector<PageDocument> out;
    for (const auto& [url, _] : index_) out.push_back(*get(url));
    return out;
}

void PageCache::save_index() const {
    OrderedJson arr = OrderedJson::array();
    for (const auto& [_, e] : index_) {
        OrderedJson j;
        j["url"] = e.url;
        j["path"] = e.path;
        j["fetched_at"] = e.fetched_at.to_iso();
        j["status"] = e.status;
        j["source_id"] = e.source_id;
        j["published_at"] = e.published_at ? OrderedJson(e.published_at->to_iso()) : OrderedJson(nullptr);
        arr.push_back(std::move(j));
    }
    write_file_atomic(dir_ / "index.json", arr.dump(2) + "\n");
}

PageDocument import_rendered_page(PageCache& cache, const std::filesystem::path& markup_file, const std::string& url,
                                  const std::string& source_id, Timestamp fetched_at) {
    PageDocument doc;
    doc.url = url;
    doc.source_id = source_id;
    doc.fetched_at = fetched_at;
    doc.raw_markup = read_file(markup_file);
    doc.published_at = extract_published_time(doc.raw_markup);
    cache.put(doc);
    return doc;
}

std::optional<Timestamp> extract_published_time(std::string_view markup) {
    auto doc = html::parse(markup);
    std::optional<Timestamp> meta, time_el;
    html::walk(doc.root, [&](const html::Node& n, const std::vector<const html::Node*>&) {
        if (n.type != html::Node::Type::Element) return true;
        auto parse = [](const std::string& v) -> std::optional<Timestamp> {
            try {
                return Timestamp::parse_iso(v);
            } catch (const Error&) {
                if (auto d = try_parse_flexible_date(v)) return Timestamp::from_date(*d);
                return std::nullopt;
            }
        };
        if (n.tag == "meta" && !meta) {
            const auto* prop = n.attr("property");
            if (!prop) prop = n.attr("name");
            const auto* content = n.attr("content");
            if (prop && content && (str::iequals(*prop, "article:published_time") || str::iequals(*prop, "date")))
                meta = parse(*content);
        } else if (n.tag == "time" && !time_el) {
            if (const auto* dt = n.attr("datetime")) time_el = parse(*dt);
        }
        return true;
    });
    return meta ? meta : time_el;
}

namespace {

bool excluded_container(const html::Node& n, const std::vector<const html::Node*>& ancestors) {
    if (n.tag == "nav" || n.tag == "footer" || n.tag == "aside" || n.tag == "menu" || n.tag == "form") return true;
    if (n.tag == "header") {
        // A header inside the article body carries the title; page-level headers are chrome.
        return std::none_of(ancestors.begin(), ancestors.end(),
                            [](const html::Node* a) { return a->tag == "article" || a->tag == "main"; });
    }
    if (const auto* role = n.attr("role")) {
        auto r = str::to_lower(*role);
        if (r == "navigation" || r == "banner" || r == "contentinfo" || r == "complementary") return true;
    }
    for (std::string_view cls : {"sidebar", "navbar", "nav", "menu", "footer", "breadcrumb", "cookie-banner"})
        if (n.has_class(cls)) return true;
    return false;
}

std::string raw_text(const html::Node& n) {
    if (n.type == html::Node::Type::Text) return n.text;
    std::string out;
    for (const auto& c : n.children) {
        if (c.is_element("br")) out += '\n';
        else out += raw_text(c);
    }
    return out;
}

std::string trim_lines(std::string_view code) {
    auto lines = str::split(code, '\n');
    while (!lines.empty() && str::trim(lines.front()).empty()) lines.erase(lines.begin());
    while (!lines.empty() && str::trim(lines.back()).empty()) lines.pop_back();
    for (auto& l : lines)
        while (!l.empty() && (l.back() == ' ' || l.back() == '\t' || l.back() == '\r')) l.pop_back();
    return str::join(lines, "\n");
}

void collect_rows(const html::Node& n, std::vector<const html::Node*>& rows) {
    for (const auto& c : n.children) {
        if (c.type != html::Node::Type::Element) continue;
        if (c.tag == "table") continue;  // nested tables are their own concern
        if (c.tag == "tr") rows.push_back(&c);
        else collect_rows(c, rows);
    }
}

Cells table_cells(const html::Node& table) {
    std::vector<const html::Node*> rows;
    collect_rows(table, rows);
    Cells cells;
    for (const auto* tr : rows) {
        std::vector<std::string> row;
        for (const auto& c : tr->children) {
            if (!(c.is_element("td") || c.is_element("th"))) continue;
            row.push_back(str::collapse_whitespace(html::text_content(c)));
            int span = 1;
            if (const auto* cs = c.attr("colspan")) {
                try {
                    span = std::clamp(std::stoi(*cs), 1, 64);
                } catch (...) {
                    span = 1;
                }
            }
            for (int k = 1; k < span; ++k) row.emplace_back();
        }
        if (!row.empty()) cells.push_back(std::move(row));
    }
    csv::make_rectangular(cells);
    return cells;
}

std::string cells_text(const Cells& cells) {
    std::vector<std::string> lines;
    for (const auto& row : cells) lines.push_back(str::join(row, " | "));
    return str::join(lines, "\n");
}

void list_items(const html::Node& list, std::vector<std::string>& items) {
    for (const auto& c : list.children) {
        if (c.type != html::Node::Type::Element) continue;
        if (c.tag != "li") {
            if (c.tag == "ul" || c.tag == "ol") list_items(c, items);
            continue;
        }
        html::Node own = c;
        std::vector<const html::Node*> nested;
        own.children.clear();
        for (const auto& gc : c.children) {
            if (gc.is_element("ul") || gc.is_element("ol")) nested.push_back(&gc);
            else own.children.push_back(gc);
        }
        auto text = str::collapse_whitespace(html::text_content(own));
        if (!text.empty()) items.push_back(std::move(text));
        for (const auto* n : nested) list_items(*n, items);
    }
}

bool ends_with_csv(const Url& u) { return str::ends_with_icase(u.path, ".csv"); }

}  // namespace

ExtractResult extract_blocks(PageDocument doc, const ExtractOptions& options) {
    ExtractResult result;
    auto parsed = html::parse(doc.raw_markup);
    for (auto& w : parsed.warnings) result.warnings.push_back("markup: " + w);
    const auto base = parse_url(doc.url);

    std::vector<Block> blocks;
    html::walk(parsed.root, [&](const html::Node& n, const std::vector<const html::Node*>& ancestors) {
        if (n.type != html::Node::Type::Element) return true;
        if (html::is_non_content(n.tag) || excluded_container(n, ancestors)) return false;
        const std::string& tag = n.tag;
        if (tag == "p") {
            auto text = str::collapse_whitespace(html::text_content(n));
            if (!text.empty()) blocks.push_back({BlockKind::Paragraph, std::move(text), std::nullopt});
            return false;
        }
        if (tag == "pre" || tag == "code") {
            auto text = trim_lines(raw_text(n));
            if (!str::trim(text).empty()) blocks.push_back({BlockKind::Code, std::move(text), std::nullopt});
            return false;
        }
        if (tag == "h1" || tag == "h2" || tag == "h3") {
            auto text = str::collapse_whitespace(html::text_content(n));
            auto kind = tag == "h1" ? BlockKind::Heading1 : tag == "h2" ? BlockKind::Heading2 : BlockKind::Heading3;
            if (!text.empty()) blocks.push_back({kind, std::move(text), std::nullopt});
            return false;
        }
        if (tag == "table") {
            auto cells = table_cells(n);
            if (!cells.empty()) {
                auto text = cells_text(cells);
                blocks.push_back({BlockKind::Table, std::move(text), std::move(cells)});
            }
            return false;
        }
        if (tag == "ul" || tag == "ol") {
            std::vector<std::string> items;
            list_items(n, items);
            if (!items.empty()) blocks.push_back({BlockKind::List, str::join(items, "\n"), std::nullopt});
            return false;
        }
        if (tag == "iframe") {
            const auto* src = n.attr("src");
            if (!src || !base) return false;
            auto target = resolve_url(*base, *src);
            if (!target || !ends_with_csv(*target)) return false;
            if (!options.fetch_embedded) return false;
            std::optional<std::string> body;
            try {
                if (options.fetcher) body = options.fetcher(target->str());
            } catch (const std::exception& e) {
                result.warnings.push_back("embedded fetch failed for " + target->str() + ": " + e.what());
                return false;
            }
            if (!body) {
                result.warnings.push_back("embedded fetch failed for " + target->str());
                return false;
            }
            auto cells = csv::parse(*body);
            csv::make_rectangular(cells);
            if (cells.empty()) {
                result.warnings.push_back("embedded CSV is empty: " + target->str());
                return false;
            }
            auto text = cells_text(cells);
            blocks.push_back({BlockKind::IframeCsv, std::move(text), std::move(cells)});
            return false;
        }
        return true;
    });
    for (const auto& w : result.warnings) log::debug(doc.url + ": " + w);
    doc.blocks = std::move(blocks);
    result.doc = std::move(doc);
    return result;
}

namespace {

bool is_tag_link(const html::Node& a) {
    if (const auto* rel = a.attr("rel"))
        for (const auto& part : str::split(str::to_lower(*rel), ' '))
            if (part == "tag" || part == "category") return true;
    for (std::string_view cls : {"tag", "tags", "category", "label"})
        if (a.has_class(cls)) return true;
    return false;
}

std::string path_words(const Url& u) {
    std::string p = str::to_lower(url_decode(u.path));
    for (auto& c : p)
        if (c == '-' || c == '_' || c == '/' || c == '+') c = ' ';
    return " " + str::collapse_whitespace(p) + " ";
}

}  // namespace

std::vector<std::string> select_collection_pages(const SourceDescriptor& source, const PageDocument& index_doc) {
    if (source.status != SourceStatus::Approved || source.collection_tags.empty())
        throw Error(ErrorKind::InvalidArgument,
                    "select_collection_pages: source " + source.source_id + " is not approved with collection tags");
    auto base = parse_url(index_doc.url);
    if (!base) return {};
    std::vector<std::string> tags;
    for (const auto& t : source.collection_tags) {
        auto lt = str::to_lower(str::trim(t));
        if (!lt.empty()) tags.push_back(lt);
    }

    auto parsed = html::parse(index_doc.raw_markup);
    std::vector<std::string> out;
    std::set<std::string> seen;
    const std::string self = base->str();
    html::walk(parsed.root, [&](const html::Node& n, const std::vector<const html::Node*>& ancestors) {
        if (n.type != html::Node::Type::Element) return true;
        if (html::is_non_content(n.tag) || excluded_container(n, ancestors)) return false;
        if (!n.is_element("a")) return true;
        if (is_tag_link(n)) return false;
        const auto* href = n.attr("href");
        if (!href || str::trim(*href).empty() || str::trim(*href).front() == '#') return false;
        auto target = resolve_url(*base, *href);
        if (!target || !target->is_http()) return false;
        const std::string url = target->str();
        if (url == self || seen.count(url)) return false;

        const std::string anchor = str::to_lower(html::text_content(n));
        const std::string words = path_words(*target);
        std::string context;
        for (auto it = ancestors.rbegin(); it != ancestors.rend(); ++it) {
            const auto& tag = (*it)->tag;
            if (tag == "article" || tag == "li" || tag == "tr") {
                context = str::to_lower(html::text_content(**it));
                break;
            }
        }
        for (const auto& tag : tags) {
            std::string spaced = tag;
            for (auto& c : spaced)
                if (c == '-' || c == '_') c = ' ';
            if (str::icontains(anchor, tag) || words.find(" " + spaced + " ") != std::string::npos ||
                words.find(spaced) != std::string::npos || (!context.empty() && str::icontains(context, tag))) {
                seen.insert(url);
                out.push_back(url);
                break;
            }
        }
        return false;
    });
    return out;
}

}  // namespace pkgintel
