#pragma once

// Command-line front end: one subcommand per pipeline stage plus run-all and serve.

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "pkgintel/http.hpp"

namespace pkgintel {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Injection points for tests. Null members fall back to the real network,
/// the system clock and the process environment.
struct CliServices {
    HttpClient* http = nullptr;
    Clock* clock = nullptr;
    std::ostream* out = nullptr;
    std::ostream* err = nullptr;
    const std::map<std::string, std::string>* env = nullptr;
};

/// `args` excludes the program name.
int run_subcommand(const std::vector<std::string>& args, const CliServices& services);
int run_subcommand(int argc, char** argv);

}  // namespace pkgintel
