#include "psilab/io.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace psilab {

nlohmann::json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::config, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::config, "invalid JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

MarkovSource chain_from_json(const nlohmann::json& j) {
  try {
    std::vector<std::string> states = j.at("states").get<std::vector<std::string>>();
    const int order = j.value("order", 1);
    if (states.empty()) fail(Errc::config, "chain needs at least one state");
    if (order < 1) fail(Errc::config, "chain order must be >= 1");
    const auto& tr = j.at("transition");
    if (order == 1 && tr.is_array()) {
      auto rows = tr.get<std::vector<std::vector<double>>>();
      if (rows.size() != states.size()) fail(Errc::config, "need one transition row per state");
      return MarkovSource::first_order(std::move(states), rows);
    }
    if (!tr.is_object()) fail(Errc::config, "order-m transition must be history-keyed");
    // History keys are the concatenated state symbols, e.g. "01".
    const int S = static_cast<int>(states.size());
    const long hist =
        ipow_checked(S, order, 1L << 20, Errc::alphabet_too_large, "history space too large");
    std::vector<std::vector<double>> rows(hist);
    std::vector<int> digits(order, 0);
    for (long h = 0; h < hist; ++h) {
      long v = h;
      for (int i = order - 1; i >= 0; --i) {
        digits[i] = static_cast<int>(v % S);
        v /= S;
      }
      std::string key;
      for (int d : digits) key += states[d];
      if (!tr.contains(key)) fail(Errc::config, "missing transition row for history \"" + key + "\"");
      rows[h] = tr.at(key).get<std::vector<double>>();
    }
    return MarkovSource::order_m(std::move(states), order, rows);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::config, std::string("bad chain description: ") + e.what());
  }
}

nlohmann::json chain_to_json(const MarkovSource& src) {
  nlohmann::json j;
  j["states"] = src.symbols();
  j["order"] = src.order();
  if (src.order() == 1) {
    std::vector<std::vector<double>> rows(src.alphabet_size());
    for (int i = 0; i < src.alphabet_size(); ++i) {
      rows[i].assign(src.transition_row(i).begin(), src.transition_row(i).end());
    }
    j["transition"] = rows;
  } else {
    nlohmann::json tr = nlohmann::json::object();
    const int S = src.alphabet_size();
    std::vector<int> digits(src.order(), 0);
    for (long h = 0; h < src.history_count(); ++h) {
      long v = h;
      for (int i = src.order() - 1; i >= 0; --i) {
        digits[i] = static_cast<int>(v % S);
        v /= S;
      }
      std::string key;
      for (int d : digits) key += src.symbols()[d];
      tr[key] = std::vector<double>(src.transition_row(h).begin(), src.transition_row(h).end());
    }
    j["transition"] = tr;
  }
  return j;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string fmt(long v) { return std::to_string(v); }
std::string fmt(int v) { return std::to_string(v); }

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::config, "cannot write " + path.string());
  out << content;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::config, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_csv(const std::filesystem::path& path, const std::string& header,
               const std::vector<std::string>& rows) {
  std::string content = header;
  content += '\n';
  for (const std::string& r : rows) {
    content += r;
    content += '\n';
  }
  write_text_file(path, content);
}

void write_manifest(const std::filesystem::path& out_dir, const std::string& subcommand,
                    const std::string& config_desc, std::uint64_t seed,
                    const nlohmann::json& params, const std::vector<std::string>& outputs) {
  nlohmann::json m;
  m["subcommand"] = subcommand;
  m["config"] = config_desc;
  m["seed"] = seed;
  m["out_dir"] = out_dir.string();
  m["version"] = "0.1.0";
  const auto now = std::chrono::system_clock::now();
  m["timestamp"] = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count();
  m["params"] = params;
  m["outputs"] = outputs;
  write_text_file(out_dir / "manifest.json", m.dump(2) + "\n");
}

}  // namespace psilab
