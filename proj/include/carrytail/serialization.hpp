#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "carrytail/copula.hpp"
#include "carrytail/estimation.hpp"
#include "carrytail/marginals.hpp"
#include "carrytail/tail_dependence.hpp"

namespace carrytail::io {

using nlohmann::json;

json to_json(const copula::CopulaSpec& s);          // {"family":"clayton","rho":2.0}
json to_json(const copula::MixtureSpec& m);         // {"mixture":[{"family":..,"rho":..,"lambda":..}]}
json to_json(const marginals::LggdParams& p);
json to_json(const estimation::WindowFit& f);

copula::CopulaSpec copula_from_json(const json& j);
/// Accepts either a mixture object or a single copula object.
copula::MixtureSpec mixture_from_json(const json& j);
marginals::LggdParams lggd_from_json(const json& j);
estimation::WindowFit window_fit_from_json(const json& j);

/// FNV-1a 64 over the text, printed as 16 hex digits.
std::string config_hash(const std::string& canonical_config);

/// "# provenance tool=carrytail command=<cmd> config_hash=<hash>"
std::string provenance_line(const std::string& command, const std::string& hash);

/// Reads a fits JSON-lines file; a leading {"provenance":...} record is skipped.
std::vector<estimation::WindowFit> read_fits_jsonl(const std::filesystem::path& path);

void write_td_csv(std::ostream& out, const std::vector<td::TailDependenceSeries>& series);
/// Returns one series per basket label in the file, each sorted by date.
std::vector<td::TailDependenceSeries> read_td_csv(const std::filesystem::path& path);

/// Shortest representation that round-trips.
std::string fmt(double x);

}  // namespace carrytail::io
