#include "pkgintel/config.hpp"

#include <set>

#include "pkgintel/candidates.hpp"
#include "pkgintel/strings.hpp"

extern char** environ;

namespace pkgintel {

std::string to_string(BackendChoice b) { return b == BackendChoice::Deterministic ? "deterministic" : "remote"; }

BackendChoice parse_backend_choice(std::string_view text) {
    if (str::iequals(text, "deterministic")) return BackendChoice::Deterministic;
    if (str::iequals(text, "remote")) return BackendChoice::Remote;
    throw Error(ErrorKind::InvalidArgument, "backend must be deterministic or remote, got " + std::string(text));
}

std::filesystem::path PipelineConfig::dictionary_path() const {
    return dictionary.empty() ? std::filesystem::path(default_data_dir()) / "dictionary.txt" : dictionary;
}

std::filesystem::path PipelineConfig::prompts_path() const {
    return prompts_dir.empty() ? std::filesystem::path(default_data_dir()) / "prompts" : prompts_dir;
}

void PipelineConfig::validate() const {
    auto bad = [](const std::string& m) { throw Error(ErrorKind::InvalidArgument, "config: " + m); };
    if (!(reprint_threshold > 0.0 && reprint_threshold <= 1.0)) bad("reprint_threshold must be in (0, 1]");
    if (search_limit == 0) bad("search_limit must be positive");
    if (search_parallelism == 0 || extract_parallelism == 0 || mirror_parallelism == 0)
        bad("parallelism budgets must be at least 1");
    if (min_candidate_length == 0) bad("min_candidate_length must be positive");
    policy.validate();
    if (!std::filesystem::exists(dictionary_path())) bad("dictionary not found: " + dictionary_path().string());
    for (const auto& p : {common_keywords, special_keywords})
        if (!p.empty() && !std::filesystem::exists(p)) bad("keyword file not found: " + p.string());
    if (backend == BackendChoice::Remote && !std::filesystem::exists(prompts_path()))
        bad("prompt directory not found: " + prompts_path().string());
}

OrderedJson to_json(const PipelineConfig& c) {
    OrderedJson j;
    j["store_dir"] = c.store_dir.string();
    j["cache_dir"] = c.cache_dir.string();
    j["sources_file"] = c.sources_file.string();
    j["dictionary"] = c.dictionary_path().string();
    j["common_keywords"] = c.common_keywords.string();
    j["special_keywords"] = c.special_keywords.string();
    j["prompts_dir"] = c.prompts_path().string();
    j["mirrors_file"] = c.mirrors_file.string();
    j["metrics_log"] = c.metrics_log.string();
    j["backend"] = to_string(c.backend);
    j["min_common"] = c.min_common;
    j["reprint_threshold"] = c.reprint_threshold;
    j["domain_threshold"] = c.domain_threshold;
    j["search_limit"] = c.search_limit;
    j["min_candidate_length"] = c.min_candidate_length;
    j["policy"] = to_json(c.policy);
    j["search_parallelism"] = c.search_parallelism;
    j["extract_parallelism"] = c.extract_parallelism;
    j["mirror_parallelism"] = c.mirror_parallelism;
    j["offline"] = c.offline;
    return j;
}

PipelineConfig apply_config_json(PipelineConfig c, const Json& j) {
    if (!j.is_object()) throw Error(ErrorKind::Parse, "config must be a JSON object");
    static const std::set<std::string> known = {
        "store_dir",   "cache_dir",         "sources_file",     "dictionary",         "common_keywords",
        "special_keywords", "prompts_dir",  "mirrors_file",     "metrics_log",        "backend",
        "min_common",  "reprint_threshold", "domain_threshold", "search_limit",       "min_candidate_length",
        "policy",      "search_parallelism", "extract_parallelism", "mirror_parallelism", "offline"};
    for (const auto& [k, _] : j.items())
        if (!known.count(k)) throw Error(ErrorKind::Parse, "unknown config key '" + k + "'");
    try {
        auto path = [&](const char* key, std::filesystem::path& into) {
            if (j.contains(key)) into = j.at(key).get<std::string>();
        };
        path("store_dir", c.store_dir);
        path("cache_dir", c.cache_dir);
        path("sources_file", c.sources_file);
        path("dictionary", c.dictionary);
        path("common_keywords", c.common_keywords);
        path("special_keywords", c.special_keywords);
        path("prompts_dir", c.prompts_dir);
        path("mirrors_file", c.mirrors_file);
        path("metrics_log", c.metrics_log);
        if (j.contains("backend")) c.backend = parse_backend_choice(j.at("backend").get<std::string>());
        c.min_common = j.value("min_common", c.min_common);
        c.reprint_threshold = j.value("reprint_threshold", c.reprint_threshold);
        c.domain_threshold = j.value("domain_threshold", c.domain_threshold);
        c.search_limit = j.value("search_limit", c.search_limit);
        c.min_candidate_length = j.value("min_candidate_length", c.min_candidate_length);
        if (j.contains("policy")) c.policy = crawl_policy_from_json(j.at("policy"));
        c.search_parallelism = j.value("search_parallelism", c.search_parallelism);
        c.extract_parallelism = j.value("extract_parallelism", c.extract_parallelism);
        c.mirror_parallelism = j.value("mirror_parallelism", c.mirror_parallelism);
        c.offline = j.value("offline", c.offline);
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("config: ") + e.what());
    }
    return c;
}

PipelineConfig load_config_file(const std::filesystem::path& path, PipelineConfig base) {
    auto j = Json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) throw Error(ErrorKind::Parse, "config file is not JSON: " + path.string());
    return apply_config_json(std::move(base), j);
}

PipelineConfig apply_environment(PipelineConfig c, const std::map<std::string, std::string>& env) {
    auto get = [&](const char* k) -> const std::string* {
        auto it = env.find(k);
        return it == env.end() || it->second.empty() ? nullptr : &it->second;
    };
    if (auto v = get("PKGINTEL_STORE_DIR")) c.store_dir = *v;
    if (auto v = get("PKGINTEL_CACHE_DIR")) c.cache_dir = *v;
    if (auto v = get("PKGINTEL_SOURCES")) c.sources_file = *v;
    if (auto v = get("PKGINTEL_DICTIONARY")) c.dictionary = *v;
    if (auto v = get("PKGINTEL_BACKEND")) c.backend = parse_backend_choice(*v);
    try {
        if (auto v = get("PKGINTEL_MIN_COMMON")) c.min_common = std::stoul(*v);
        if (auto v = get("PKGINTEL_RATE")) c.policy.max_requests_per_second = std::stod(*v);
    } catch (const std::exception&) {
        throw Error(ErrorKind::InvalidArgument, "malformed numeric PKGINTEL_* environment value");
    }
    if (auto v = get("PKGINTEL_OFFLINE")) c.offline = *v == "1" || str::iequals(*v, "true") || str::iequals(*v, "yes");
    return c;
}

std::map<std::string, std::string> current_environment() {
    std::map<std::string, std::string> env;
    for (char** e = environ; e && *e; ++e) {
        std::string_view kv(*e);
        auto eq = kv.find('=');
        if (eq == std::string_view::npos) continue;
        auto key = kv.substr(0, eq);
        if (key.rfind("PKGINTEL_", 0) == 0) env.emplace(key, kv.substr(eq + 1));
    }
    return env;
}

}  // namespace pkgintel
