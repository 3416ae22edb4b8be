#include "psilab/cli.hpp"

#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "psilab/bounds.hpp"
#include "psilab/codesim.hpp"
#include "psilab/io.hpp"
#include "psilab/mixing.hpp"
#include "psilab/rng.hpp"
#include "psilab/simulate.hpp"

namespace psilab {

namespace {

namespace fs = std::filesystem;

struct GlobalOpts {
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  long cap = 1L << 20;
  EnumerationCaps caps() const {
    EnumerationCaps c;
    c.max_states = cap;
    return c;
  }
};

MarkovSource load_chain(const std::string& path) {
  return chain_from_json(load_json_file(path));
}

std::string flags_string(const SlotFlags& flags) {
  std::string s;
  for (auto f : flags.flags) s += f ? '1' : '0';
  return s;
}

std::string sequence_line(const MarkovSource& src, const Word& w) {
  std::string line;
  for (size_t i = 0; i < w.size(); ++i) {
    if (i) line += ' ';
    line += src.symbols()[w[i]];
  }
  return line;
}

std::string schedule_header(const SlotSchedule& sched, double lambda, std::uint64_t seed,
                            const SlotFlags& flags) {
  std::string h = "# T=" + fmt(sched.T) + " tau=" + fmt(sched.tau) + " k=" + fmt(sched.k) +
                  " lambda=" + fmt(lambda) + " seed=" + std::to_string(seed) +
                  " flags=" + flags_string(flags);
  return h;
}

int cmd_psi(const GlobalOpts& g, const std::string& chain_path, int tau_max,
            const std::vector<int>& brute, int decomp_t, int decomp_tau, int decomp_T) {
  const MarkovSource src = load_chain(chain_path);
  const MixingProfile prof = lambda_profile(src, tau_max);
  std::vector<std::string> rows;
  std::string header = "tau,lambda";
  const bool with_brute = brute.size() == 2;
  if (with_brute) header += ",brute";
  for (int tau = 0; tau <= tau_max; ++tau) {
    std::string row = fmt(tau) + "," + fmt(prof.lambdas[tau]);
    if (with_brute) row += "," + fmt(psi_brute_force(src, tau, brute[0], brute[1], g.caps()));
    rows.push_back(std::move(row));
  }
  const fs::path out = fs::path(g.out_dir) / "psi.csv";
  write_csv(out, header, rows);
  std::vector<std::string> outputs{"psi.csv"};

  if (decomp_t > 0) {
    std::vector<std::string> drows;
    const auto reports = verify_decomposition(src, decomp_t, decomp_tau, decomp_T, g.caps());
    for (const auto& rep : reports) {
      std::string prefix;
      for (int s : rep.prefix) prefix += src.symbols()[s];
      drows.push_back(fmt(rep.t) + "," + fmt(rep.tau) + "," + fmt(rep.T) + "," + prefix + "," +
                      (rep.skipped ? "skipped" : fmt(rep.max_identity_error)));
    }
    write_csv(fs::path(g.out_dir) / "decomposition.csv", "t,tau,T,prefix,max_error", drows);
    outputs.push_back("decomposition.csv");
  }

  nlohmann::json params{{"tau_max", tau_max}};
  if (with_brute) params["brute"] = brute;
  if (decomp_t > 0) params["decomposition"] = {decomp_t, decomp_tau, decomp_T};
  write_manifest(g.out_dir, "psi", chain_path, g.seed, params, outputs);
  return 0;
}

int cmd_simulate(const GlobalOpts& g, const std::string& chain_path, int T, int tau, int k,
                 bool exact_check, long codebook) {
  const MarkovSource src = load_chain(chain_path);
  const SlotSchedule sched = build_schedule(T, tau, k);
  const double lambda = psi_markov(src, tau);
  const SlotFlags flags = draw_flags(k, lambda, g.seed);
  std::vector<std::string> outputs;

  const std::string header = schedule_header(sched, lambda, g.seed, flags);
  {
    const Word x = simulate_sequence(src, sched, flags, g.seed, g.caps());
    write_text_file(fs::path(g.out_dir) / "sequence.txt", header + "\n" + sequence_line(src, x) + "\n");
    outputs.push_back("sequence.txt");
  }
  if (codebook > 0) {
    const std::vector<Word> book = generate_codebook(src, sched, flags, codebook, g.seed, g.caps());
    std::string content = header + "\n";
    for (const Word& w : book) content += sequence_line(src, w) + "\n";
    write_text_file(fs::path(g.out_dir) / "codebook.txt", content);
    outputs.push_back("codebook.txt");
  }
  double tv = -1.0;
  if (exact_check) {
    const CylinderLaw simulated = exact_simulated_law(src, sched, g.caps());
    const CylinderLaw truth = marginal_law(src, sched.n, g.caps());
    tv = simulated.total_variation(truth);
    write_csv(fs::path(g.out_dir) / "exact_check.csv", "n,tv",
              {fmt(sched.n) + "," + fmt(tv)});
    outputs.push_back("exact_check.csv");
    std::cout << "exact-check tv=" << fmt(tv) << "\n";
  }
  nlohmann::json params{{"T", T}, {"tau", tau}, {"k", k}, {"lambda", lambda}};
  if (codebook > 0) params["codebook"] = codebook;
  if (exact_check) params["tv"] = tv;
  write_manifest(g.out_dir, "simulate", chain_path, g.seed, params, outputs);
  return 0;
}

int cmd_rd(const GlobalOpts& g, const std::string& chain_path, int T, std::optional<double> D,
           int curve_points) {
  const MarkovSource src = load_chain(chain_path);
  const DistortionMeasure d = DistortionMeasure::hamming(src.alphabet_size());
  std::vector<std::string> rows;
  const std::string header = "T,D_per_letter,R_bits_per_letter,slope,iterations";
  if (curve_points > 0) {
    const CylinderLaw law = marginal_law(src, T, g.caps());
    const DistortionMeasure dT = block_measure(d, T);
    for (const RDPoint& p : rd_curve(law.probabilities(), dT, curve_points)) {
      rows.push_back(fmt(T) + "," + fmt(p.target_distortion / T) + "," + fmt(p.rate_bits / T) +
                     "," + fmt(p.slope) + "," + fmt(p.iterations));
    }
  } else {
    const RDPoint p = rd_vector_source(src, T, *D, d, {}, g.caps());
    rows.push_back(fmt(T) + "," + fmt(p.target_distortion) + "," + fmt(p.rate_bits) + "," +
                   fmt(p.slope) + "," + fmt(p.iterations));
  }
  write_csv(fs::path(g.out_dir) / "rd.csv", header, rows);
  nlohmann::json params{{"T", T}};
  if (D) params["D"] = *D;
  if (curve_points > 0) params["curve"] = curve_points;
  write_manifest(g.out_dir, "rd", chain_path, g.seed, params, {"rd.csv"});
  return 0;
}

std::string bound_row(const BoundReport& r) {
  std::string row = fmt(r.T) + "," + fmt(r.tau) + "," + fmt(r.beta) + "," + fmt(r.lambda) + "," +
                    fmt(r.D) + ",";
  if (!r.feasible) {
    row += "nan,nan,nan,nan,nan,nan,nan,0";
    return row;
  }
  row += fmt(r.Dprime) + "," + fmt(r.R_bound_bits) + "," + fmt(r.T1) + "," + fmt(r.T2) + "," +
         fmt(r.T3) + "," + fmt(r.T4) + "," + fmt(r.gap_bound) + ",1";
  return row;
}

constexpr const char* kBoundHeader =
    "T,tau,beta,lambda_tau,D,Dprime,R_bound_bits,T1,T2,T3,T4,gap_bound,feasible";

int cmd_bound(const GlobalOpts& g, const std::string& chain_path, double D, int T, int tau,
              double beta, int proxy_T) {
  const MarkovSource src = load_chain(chain_path);
  const DistortionMeasure d = DistortionMeasure::hamming(src.alphabet_size());
  const BoundReport rep =
      term_decomposition(src, D, T, tau, beta, proxy_T > 0 ? proxy_T : T, d, {}, g.caps());
  write_csv(fs::path(g.out_dir) / "bound.csv", kBoundHeader, {bound_row(rep)});
  write_manifest(g.out_dir, "bound", chain_path, g.seed,
                 {{"D", D}, {"T", T}, {"tau", tau}, {"beta", beta}, {"proxy_T", rep.proxy_T}},
                 {"bound.csv"});
  return 0;
}

int cmd_sweep(const GlobalOpts& g, const std::string& chain_path, double D,
              const std::vector<int>& T_list, const std::vector<int>& tau_list,
              const std::vector<double>& beta_list) {
  const MarkovSource src = load_chain(chain_path);
  const DistortionMeasure d = DistortionMeasure::hamming(src.alphabet_size());
  const auto reports = convergence_sweep(src, D, T_list, tau_list, beta_list, d, {}, g.caps());
  std::vector<std::string> rows;
  for (const auto& r : reports) rows.push_back(bound_row(r));
  write_csv(fs::path(g.out_dir) / "sweep.csv", kBoundHeader, rows);
  write_manifest(g.out_dir, "sweep", chain_path, g.seed,
                 {{"D", D}, {"T_list", T_list}, {"tau_list", tau_list}, {"beta_list", beta_list}},
                 {"sweep.csv"});
  return 0;
}

int cmd_codesim(const GlobalOpts& g, const std::string& config_path) {
  const nlohmann::json j = load_json_file(config_path);
  MarkovSource src = [&] {
    const auto& s = j.at("source");
    if (s.is_string()) {
      fs::path p = s.get<std::string>();
      if (p.is_relative()) p = fs::path(config_path).parent_path() / p;
      return chain_from_json(load_json_file(p));
    }
    return chain_from_json(s);
  }();
  MemorylessChannel chan = [&] {
    const auto& c = j.at("channel");
    if (c.is_object() && c.contains("bsc")) return MemorylessChannel::bsc(c.at("bsc").get<double>());
    auto rows = c.get<std::vector<std::vector<double>>>();
    const int nx = static_cast<int>(rows.size());
    const int ny = nx ? static_cast<int>(rows[0].size()) : 0;
    std::vector<double> flat;
    for (const auto& r : rows) {
      if (static_cast<int>(r.size()) != ny) fail(Errc::config, "ragged channel matrix");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    return MemorylessChannel(nx, ny, std::move(flat));
  }();
  DistortionMeasure d = [&]() -> DistortionMeasure {
    if (!j.contains("distortion")) return DistortionMeasure::hamming(src.alphabet_size());
    auto rows = j.at("distortion").get<std::vector<std::vector<double>>>();
    std::vector<double> flat;
    const int nx = static_cast<int>(rows.size());
    const int ny = nx ? static_cast<int>(rows[0].size()) : 0;
    for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
    return DistortionMeasure(nx, ny, std::move(flat));
  }();

  CodesimConfig cfg;
  try {
    cfg.T = j.at("T").get<int>();
    cfg.tau = j.at("tau").get<int>();
    cfg.beta = j.at("beta").get<double>();
    cfg.D = j.at("D").get<double>();
    cfg.rate_bits = j.at("rate").get<double>();
    cfg.trials = j.at("trials").get<long>();
    cfg.seed = j.value("seed", 1);
    cfg.batch = j.value("batch", 100);
    cfg.codebook_cap = j.value("codebook_cap", 1L << 16);
    cfg.min_distortion = j.value("decoder", std::string("threshold")) == "min-distortion";
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::config, std::string("bad experiment config: ") + e.what());
  }
  const std::vector<long> k_list = j.at("k_list").get<std::vector<long>>();

  const auto rows = error_curve(src, chan, d, cfg, k_list, true, g.caps());
  std::vector<std::string> lines;
  for (const auto& r : rows) {
    lines.push_back(fmt(r.k) + "," + fmt(r.n) + "," + fmt(r.N_good) + "," + fmt(r.trials) + "," +
                    fmt(r.correct) + "," + fmt(r.erasure) + "," + fmt(r.confusion) + "," +
                    fmt(r.error_rate) + "," + fmt(r.ci_low) + "," + fmt(r.ci_high));
  }
  write_csv(fs::path(g.out_dir) / "results.csv",
            "k,n,N_good,trials,correct,erasure,confusion,error_rate,ci_low,ci_high", lines);
  write_manifest(g.out_dir, "codesim", config_path, cfg.seed, j, {"results.csv"});
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args) {
  CLI::App app{"Numerical laboratory for mixing sources, slot-based simulation, "
               "rate-distortion bounds, and random-coding experiments"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand

  GlobalOpts g;
  app.add_option("--seed", g.seed, "root seed for all derived streams");
  app.add_option("--out-dir", g.out_dir, "output directory");
  app.add_option("--cap", g.cap, "enumeration cap on |X|^n");

  // psi
  std::string chain_path;
  int tau_max = 3;
  std::vector<int> brute;
  int decomp_t = 0, decomp_tau = 0, decomp_T = 1;
  auto* psi = app.add_subcommand("psi", "mixing profile of a chain");
  psi->add_option("--chain", chain_path, "chain JSON file")->required();
  psi->add_option("--tau-max", tau_max, "largest gap");
  psi->add_option("--brute", brute, "add a brute-force column with window widths t T")->expected(2);
  psi->add_option("--decomposition", decomp_t, "also emit decomposition.csv for prefixes of this width");
  psi->add_option("--decomposition-tau", decomp_tau, "gap for --decomposition");
  psi->add_option("--decomposition-T", decomp_T, "horizon for --decomposition");

  // simulate
  int sim_T = 2, sim_tau = 1, sim_k = 2;
  bool exact_check = false;
  long codebook = 0;
  auto* sim = app.add_subcommand("simulate", "slot-based source simulation");
  sim->add_option("--chain", chain_path, "chain JSON file")->required();
  sim->add_option("--T", sim_T, "A-slot width")->required();
  sim->add_option("--tau", sim_tau, "B-slot width")->required();
  sim->add_option("--k", sim_k, "number of slot pairs")->required();
  sim->add_flag("--exact-check", exact_check, "verify the simulated law against the window law");
  sim->add_option("--codebook", codebook, "also emit a codebook with this many sequences");

  // rd
  int rd_T = 1;
  double rd_D = 0.0;
  int curve_points = 0;
  auto* rd = app.add_subcommand("rd", "rate-distortion of the T-block source (Hamming)");
  rd->add_option("--chain", chain_path, "chain JSON file")->required();
  rd->add_option("--T", rd_T, "block width");
  auto* rd_d_opt = rd->add_option("--D", rd_D, "per-letter distortion");
  auto* rd_curve_opt = rd->add_option("--curve", curve_points, "emit a curve with this many points");
  rd_d_opt->excludes(rd_curve_opt);

  // bound
  double b_D = 0.0, b_beta = 0.05;
  int b_T = 4, b_tau = 1, proxy_T = 0;
  auto* bound = app.add_subcommand("bound", "achievable-rate bound with term decomposition");
  bound->add_option("--chain", chain_path, "chain JSON file")->required();
  bound->add_option("--D", b_D, "per-letter distortion")->required();
  bound->add_option("--T", b_T, "A-slot width")->required();
  bound->add_option("--tau", b_tau, "gap")->required();
  bound->add_option("--beta", b_beta, "slack parameter")->required();
  bound->add_option("--proxy-T", proxy_T, "block width of the limit proxy (defaults to T)");

  // sweep
  std::vector<int> T_list, tau_list;
  std::vector<double> beta_list;
  double s_D = 0.0;
  auto* sweep = app.add_subcommand("sweep", "bound convergence sweep over (T, tau, beta)");
  sweep->add_option("--chain", chain_path, "chain JSON file")->required();
  sweep->add_option("--D", s_D, "per-letter distortion")->required();
  sweep->add_option("--T-list", T_list, "A-slot widths")->required()->delimiter(',');
  sweep->add_option("--tau-list", tau_list, "gaps")->required()->delimiter(',');
  sweep->add_option("--beta-list", beta_list, "slack values")->required()->delimiter(',');

  // codesim
  std::string config_path;
  auto* codesim = app.add_subcommand("codesim", "random-coding channel experiment");
  codesim->add_option("--config", config_path, "experiment JSON")->required();

  std::vector<std::string> argv_storage(args.begin(), args.end());
  std::vector<const char*> argv;
  argv.push_back("psilab");
  for (const auto& s : argv_storage) argv.push_back(s.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (psi->parsed()) return cmd_psi(g, chain_path, tau_max, brute, decomp_t, decomp_tau, decomp_T);
    if (sim->parsed()) return cmd_simulate(g, chain_path, sim_T, sim_tau, sim_k, exact_check, codebook);
    if (rd->parsed()) {
      if (curve_points <= 0 && rd_d_opt->count() == 0)
        fail(Errc::config, "rd needs --D or --curve");
      return cmd_rd(g, chain_path, rd_T,
                    rd_d_opt->count() ? std::optional<double>(rd_D) : std::nullopt, curve_points);
    }
    if (bound->parsed()) return cmd_bound(g, chain_path, b_D, b_T, b_tau, b_beta, proxy_T);
    if (sweep->parsed()) return cmd_sweep(g, chain_path, s_D, T_list, tau_list, beta_list);
    if (codesim->parsed()) return cmd_codesim(g, config_path);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace psilab
