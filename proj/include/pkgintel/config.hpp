#pragma once

// Effective run configuration: defaults, then a config file, then PKGINTEL_*
// environment variables, then command-line flags.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "pkgintel/http.hpp"

namespace pkgintel {

enum class BackendChoice { Deterministic, Remote };
std::string to_string(BackendChoice b);
BackendChoice parse_backend_choice(std::string_view text);

struct PipelineConfig {
    std::filesystem::path store_dir = "pkgintel-data/store";
    std::filesystem::path cache_dir = "pkgintel-data/cache";
    std::filesystem::path sources_file = "pkgintel-data/sources.jsonl";
    std::filesystem::path dictionary;       // empty: bundled list
    std::filesystem::path common_keywords;  // empty: built-in common keywords
    std::filesystem::path special_keywords; // empty: "pypi", "npm"
    std::filesystem::path prompts_dir;      // empty: bundled templates
    std::filesystem::path mirrors_file = "pkgintel-data/mirrors.json";
    std::filesystem::path metrics_log;      // empty: no token log

    BackendChoice backend = BackendChoice::Deterministic;
    std::size_t min_common = 3;
    double reprint_threshold = 0.8;
    std::size_t domain_threshold = 10;
    std::size_t search_limit = 100;
    std::size_t min_candidate_length = 3;

    CrawlPolicy policy;
    std::size_t search_parallelism = 4;
    std::size_t extract_parallelism = 4;
    std::size_t mirror_parallelism = 4;
    bool offline = false;

    /// Thresholds in range (reprint in (0,1], min_common >= 0, parallelism >= 1) and
    /// configured input files present. Throws Error(InvalidArgument).
    void validate() const;

    std::filesystem::path dictionary_path() const;
    std::filesystem::path prompts_path() const;
};

OrderedJson to_json(const PipelineConfig& c);
/// Keys absent from `j` keep the values already in `base`. Throws Error(Parse) on unknown keys.
PipelineConfig apply_config_json(PipelineConfig base, const Json& j);
PipelineConfig load_config_file(const std::filesystem::path& path, PipelineConfig base = {});
/// PKGINTEL_STORE_DIR, PKGINTEL_CACHE_DIR, PKGINTEL_SOURCES, PKGINTEL_DICTIONARY,
/// PKGINTEL_BACKEND, PKGINTEL_MIN_COMMON, PKGINTEL_OFFLINE, PKGINTEL_RATE.
PipelineConfig apply_environment(PipelineConfig base, const std::map<std::string, std::string>& env);
std::map<std::string, std::string> current_environment();

}  // namespace pkgintel
