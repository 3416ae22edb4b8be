#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "psilab/chain.hpp"

namespace psilab {

/// Parse failures surface as Errc::config.
nlohmann::json load_json_file(const std::filesystem::path& path);

/// Chain description: {"states": [...], "order": m, "transition": rows}.
/// Order 1 takes a row matrix; higher orders take an object keyed by the
/// concatenated history symbols.
MarkovSource chain_from_json(const nlohmann::json& j);
nlohmann::json chain_to_json(const MarkovSource& src);

/// Deterministic number formatting for CSV output ('%.12g').
std::string fmt(double v);
std::string fmt(long v);
std::string fmt(int v);

/// Writes lines joined with LF; parent directories are created.
void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

/// One CSV from a header and preformatted rows.
void write_csv(const std::filesystem::path& path, const std::string& header,
               const std::vector<std::string>& rows);

/// Run manifest describing exactly how an output directory was produced.
/// The timestamp is the only field allowed to differ between identical runs.
void write_manifest(const std::filesystem::path& out_dir, const std::string& subcommand,
                    const std::string& config_desc, std::uint64_t seed,
                    const nlohmann::json& params, const std::vector<std::string>& outputs);

}  // namespace psilab
