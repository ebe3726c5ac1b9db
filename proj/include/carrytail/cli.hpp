#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace carrytail::cli {

enum ExitCode : int { kOk = 0, kInputError = 1, kAllWindowsFailed = 2 };

struct RunConfig {
    std::string command;
    std::string input;
    std::string exclusions;
    std::string fits;
    std::string td;
    std::string out = ".";
    int horizon = 126;
    std::string model = "cfg";
    int stride = 21;
    std::uint64_t seed = 20130531;
    std::string adjust_rule = "product";
    std::string k_grid;  // lo:hi:n
    unsigned threads = 1;
    bool zero_td = false;
    // simulate
    int currencies = 25;
    int years = 3;
    std::string copula = "cfg";  // cfg, independence, or a JSON spec file
    std::string start = "2010-01-04";
    double margin_k = 2.0;
    double margin_b = 0.006;

    /// Options that change results, in a fixed order; hashed into provenance lines.
    std::string canonical() const;
};

std::vector<double> parse_k_grid(const std::string& spec);

int run(int argc, char** argv);
int run(const std::vector<std::string>& args);

}  // namespace carrytail::cli
