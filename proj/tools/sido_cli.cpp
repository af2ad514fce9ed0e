// sido: command-line front end for the analytics pipeline.
//
// Exit codes: 0 success, 2 validation failure, 3 convergence-gate failure
// (with --strict), 4 I/O error, 1 anything else.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "sido/analysis.hpp"
#include "sido/baselines.hpp"
#include "sido/config.hpp"
#include "sido/data.hpp"
#include "sido/demo.hpp"
#include "sido/fit_io.hpp"
#include "sido/inference.hpp"
#include "sido/metametrics.hpp"
#include "sido/models.hpp"
#include "sido/pipeline.hpp"
#include "sido/report.hpp"
#include "sido/scores.hpp"
#include "sido/synth.hpp"

namespace fs = std::filesystem;
using namespace sido;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitConvergence = 3;
constexpr int kExitIo = 4;

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "sido_out";
  bool strict = false;
  std::string role, server, phase, stat, scope;
};

config::KeyValues load_config(const Globals& g) {
  config::KeyValues kv;
  if (!g.config_path.empty()) {
    std::ifstream in(g.config_path);
    if (!in) throw IoError("cannot open config " + g.config_path);
    kv = config::KeyValues::parse(in);
  }
  if (g.seed) kv.set("seed", std::to_string(*g.seed));
  if (!g.role.empty()) kv.set("roles", g.role);
  if (!g.server.empty()) kv.set("servers", g.server);
  if (!g.phase.empty()) kv.set("phases", g.phase);
  if (!g.stat.empty()) kv.set("stats", g.stat);
  return kv;
}

template <class E>
E require_enum(const std::string& text, const char* what) {
  auto v = parse_enum<E>(text);
  if (!v) throw ValidationError("ARGS", std::string("--") + what + " is required (got '" + text + "')");
  return *v;
}

std::string slurp(const std::string& path) { return report::read_file(path); }

void write_out(const Globals& g, const std::string& name, const std::string& content) {
  report::write_file(fs::path(g.out) / name, content);
  std::cout << "wrote " << (fs::path(g.out) / name).string() << "\n";
}

void print_diagnostics(const infer::PosteriorFit& fit, const infer::ConvergenceGate& gate) {
  const auto d = infer::diagnostics(fit, gate);
  std::cout << fit.identity.label() << ": " << fit.n_accounts() << " accounts, " << fit.n_champions()
            << " champions, " << fit.n_chains << "x" << fit.n_draws << " draws\n";
  for (std::size_t p : {fit.intercept_param(), fit.tau_param(), fit.phi_param(), fit.sigma_param()}) {
    const auto s = infer::summarize_draws(fit.pooled(p));
    std::cout << "  " << fit.param_names[p] << " mean " << csv::format_fixed(s.mean, 4) << " sd "
              << csv::format_fixed(s.sd, 4) << " rhat " << csv::format_fixed(d.per_param[p].rhat, 3) << " ess "
              << csv::format_fixed(d.per_param[p].ess, 0) << "\n";
  }
  std::cout << "  convergence gate: " << (d.converged ? "met" : "NOT met") << "\n";
}

// ---------------------------------------------------------------------------

int cmd_ingest(const Globals& g, const std::string& games) {
  auto kv = load_config(g);
  if (!games.empty()) kv.set("games", games);
  auto cfg = pipeline::PipelineConfig::from(kv);
  if (cfg.games_path.empty()) throw ValidationError("ARGS", "--games is required");
  const auto in = pipeline::ingest(cfg.games_path, cfg);
  std::ostringstream clean;
  demo::write_games(clean, in.games);
  write_out(g, "games.ndjson", clean.str());
  std::ostringstream issues;
  issues << "line,code,message\n";
  for (const auto& i : in.issues) csv::write_row(issues, {std::to_string(i.line), i.code, i.message});
  write_out(g, "ingest_issues.csv", issues.str());
  report::RunManifest m;
  m.seed = cfg.seed;
  m.inputs.push_back(in.digest);
  m.stages = in.stages;
  write_out(g, "ingest_manifest.json", m.to_json().dump(2) + "\n");
  for (const auto& s : in.stages) {
    std::cout << s.name << ": " << s.input << " -> " << s.output;
    for (const auto& [k, v] : s.exclusions) std::cout << " " << k << "=" << v;
    std::cout << "\n";
  }
  return in.issues.empty() ? kExitOk : kExitValidation;
}

int cmd_simulate(const Globals& g, bool demo_games) {
  const auto kv = load_config(g);
  if (demo_games) {
    const auto dc = demo::DemoConfig::from(kv);
    const auto d = demo::generate(dc);
    std::ostringstream games, roster;
    demo::write_games(games, d.games);
    demo::write_roster(roster, d.roster);
    write_out(g, "games.ndjson", games.str());
    write_out(g, "roster.csv", roster.str());
    return kExitOk;
  }
  const auto sc = synth::SynthConfig::from(kv);
  const auto truth = synth::generate_truth(sc, sc.seed);
  const auto pattern = synth::make_pattern(sc, sc.seed);
  const auto table = synth::compact(synth::generate_observations(truth, pattern, sc.seed));
  std::ostringstream t, acc, ch;
  data::write_table_csv(t, table);
  acc << "account_index,account_id,effect\n";
  for (std::size_t i = 0; i < table.account_ids.size(); ++i) {
    const auto it = std::lower_bound(truth.account_ids.begin(), truth.account_ids.end(), table.account_ids[i]);
    acc << i << ',' << table.account_ids[i] << ','
        << csv::format_double(truth.account_effects[static_cast<std::size_t>(it - truth.account_ids.begin())]) << '\n';
  }
  ch << "champion_index,champion_id,effect\n";
  for (std::size_t j = 0; j < table.champion_ids.size(); ++j) {
    const auto it = std::lower_bound(truth.champion_ids.begin(), truth.champion_ids.end(), table.champion_ids[j]);
    ch << j << ',' << table.champion_ids[j] << ','
       << csv::format_double(truth.champion_effects[static_cast<std::size_t>(it - truth.champion_ids.begin())])
       << '\n';
  }
  write_out(g, "table.csv", t.str());
  write_out(g, "truth_accounts.csv", acc.str());
  write_out(g, "truth_champions.csv", ch.str());
  std::cout << table.rows.size() << " rows, " << table.n_accounts() << " accounts, " << table.n_champions()
            << " champions\n";
  return kExitOk;
}

int cmd_fit(const Globals& g, const std::string& table_path, const std::string& games) {
  auto kv = load_config(g);
  if (!games.empty()) kv.set("games", games);
  auto cfg = pipeline::PipelineConfig::from(kv);
  std::vector<infer::PosteriorFit> fits;
  if (!table_path.empty()) {
    CellKey key{};
    if (!g.stat.empty()) key.stat = require_enum<Stat>(g.stat, "stat");
    std::istringstream in(slurp(table_path));
    const auto table = data::read_table_csv(in, key);
    auto mc = cfg.model;
    mc.seed = cfg.seed;
    mc.has_covariate = table.has_covariate;
    fits.push_back(infer::fit_hierarchical(table, mc, cfg.gate));
  } else {
    if (cfg.games_path.empty()) throw ValidationError("ARGS", "fit needs --table or --games");
    const CellKey key{require_enum<Role>(g.role, "role"), require_enum<Server>(g.server, "server"),
                      require_enum<Phase>(g.phase, "phase"), require_enum<Stat>(g.stat, "stat"),
                      g.scope.empty() ? Scope::PLAYER : require_enum<Scope>(g.scope, "scope")};
    if (key.scope != Scope::PLAYER && key.scope != Scope::ALLY && key.scope != Scope::ENEMY) {
      throw ValidationError("ARGS", "fit --scope must be PLAYER, ALLY or ENEMY");
    }
    const auto in = pipeline::ingest(cfg.games_path, cfg);
    const auto sg = data::filter_server(in.games, key.server);
    const auto focal = data::select_focal(sg, key.role, cfg.min_games, cfg.min_accounts);
    const auto fg = data::games_with_focal(sg, focal);
    CellKey player_key = key;
    player_key.scope = Scope::PLAYER;
    auto mc = cfg.model;
    if (key.scope == Scope::PLAYER) {
      mc.seed = pipeline::derive_seed(cfg.seed, "fit:" + player_key.label());
      fits.push_back(models::fit_player_model(data::build_observation_table(fg, player_key, &focal), mc, cfg.gate));
    } else {
      mc.seed = pipeline::derive_seed(cfg.seed, "expanded:" + player_key.label());
      const auto expanded = models::fit_expanded_models(fg, player_key, mc, cfg.gate);
      const auto rt = models::build_residual_table(fg, expanded, key.scope, focal, player_key);
      mc.seed = pipeline::derive_seed(cfg.seed, "fit:" + key.label());
      fits.push_back(models::fit_residual_model(rt, key.scope, mc, cfg.gate));
    }
  }
  bool converged = true;
  for (const auto& f : fits) {
    print_diagnostics(f, cfg.gate);
    converged = converged && f.warnings.empty();
    const auto path = infer::save_fit_to_dir(f, g.out);
    std::cout << "wrote " << path.string() << "\n";
  }
  return (!converged && g.strict) ? kExitConvergence : kExitOk;
}

int cmd_scores(const Globals& g, const std::vector<std::string>& fit_paths, const std::string& games,
               bool baselines_only) {
  std::vector<ScoreRecord> scores;
  std::size_t gate_failures = 0;
  if (!fit_paths.empty() && !baselines_only) {
    for (const auto& p : fit_paths) {
      const auto fit = infer::load_fit(p);
      if (!fit.warnings.empty()) ++gate_failures;
      const auto recs = models::scores_from_fit(fit, fit.identity.scope);
      scores.insert(scores.end(), recs.begin(), recs.end());
    }
  } else {
    auto kv = load_config(g);
    if (!games.empty()) kv.set("games", games);
    auto cfg = pipeline::PipelineConfig::from(kv);
    if (cfg.games_path.empty()) throw ValidationError("ARGS", "--games or --fit is required");
    if (baselines_only) cfg.fit_models = false;
    const auto in = pipeline::ingest(cfg.games_path, cfg);
    auto run = pipeline::compute_scores(in.games, cfg);
    for (const auto& w : run.warnings) std::cerr << "warning: " << w << "\n";
    gate_failures = run.gate_failures;
    for (auto& s : run.scores) {
      const bool is_baseline = s.key.scope == Scope::BA || s.key.scope == Scope::PM_OFF || s.key.scope == Scope::PM_DEF;
      if (!g.scope.empty()) {
        if (std::string(to_string(s.key.scope)) != g.scope) continue;
      } else if (baselines_only && !is_baseline) {
        continue;
      }
      scores.push_back(std::move(s));
    }
  }
  std::ostringstream os;
  write_scores_csv(os, scores);
  write_out(g, baselines_only ? "baselines.csv" : "scores.csv", os.str());
  return (gate_failures > 0 && g.strict) ? kExitConvergence : kExitOk;
}

std::vector<ScoreRecord> read_scores(const std::string& path) {
  std::istringstream in(slurp(path));
  return read_scores_csv(in);
}

std::vector<CellKey> cells_of(std::span<const ScoreRecord> scores) {
  std::set<CellKey> cells;
  for (const auto& s : scores) {
    CellKey k = s.key;
    k.scope = Scope::PLAYER;
    cells.insert(k);
  }
  return {cells.begin(), cells.end()};
}

void write_meta_split(const Globals& g, const std::string& stem, const std::vector<report::MetaRow>& rows) {
  for (Stat stat : all_values<Stat>()) {
    std::vector<report::MetaRow> part;
    for (const auto& r : rows) {
      if (r.stat == stat) part.push_back(r);
    }
    if (part.empty()) continue;
    std::ostringstream os;
    report::write_meta_csv(os, part);
    std::string name(to_string(stat));
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
    write_out(g, stem + "_" + name + ".csv", os.str());
  }
}

int cmd_metametrics(const Globals& g, const std::string& scores_path, const std::string& followup_path) {
  if (scores_path.empty()) throw ValidationError("ARGS", "--scores is required");
  const auto scores = read_scores(scores_path);
  const auto cells = cells_of(scores);
  std::vector<Stat> stats;
  for (Stat s : all_values<Stat>()) stats.push_back(s);
  write_meta_split(g, "discrimination", pipeline::discrimination_rows(scores, cells));
  write_meta_split(g, "independence", pipeline::independence_rows(scores, cells, stats));
  if (!followup_path.empty()) {
    const auto later = read_scores(followup_path);
    const auto st = pipeline::stability_rows(scores, later, cells);
    write_meta_split(g, "stability", st.concordance);
    write_meta_split(g, "stability_categorized", st.categorized);
    write_meta_split(g, "stability_overlap", st.overlap);
  }
  return kExitOk;
}

int cmd_compare(const Globals& g, const std::string& scores_path, const std::string& roster_path) {
  if (scores_path.empty() || roster_path.empty()) throw ValidationError("ARGS", "--scores and --roster are required");
  const auto scores = read_scores(scores_path);
  std::istringstream rin(slurp(roster_path));
  std::set<std::string> pros;
  for (const auto& [id, e] : data::read_roster(rin)) {
    if (e.league != League::NONE) pros.insert(id);
  }
  std::set<Scope> scopes = analysis::default_comparison_scopes();
  if (!g.scope.empty()) scopes = {require_enum<Scope>(g.scope, "scope")};
  const auto cmp = analysis::compare_groups(scores, pros, scopes);
  std::ostringstream os;
  report::write_comparisons_csv(os, cmp);
  write_out(g, "comparisons.csv", os.str());
  return kExitOk;
}

int cmd_report(const Globals& g, const std::string& games, const std::string& roster, const std::string& followup) {
  auto kv = load_config(g);
  if (!games.empty()) kv.set("games", games);
  if (!roster.empty()) kv.set("roster", roster);
  if (!followup.empty()) kv.set("followup_games", followup);
  const auto cfg = pipeline::PipelineConfig::from(kv);
  const auto st = pipeline::run_pipeline(cfg);
  pipeline::emit_reports(st, g.out);
  std::cout << "report written to " << g.out << " (" << st.run.scores.size() << " scores, "
            << st.run.gate_failures << " fits below the convergence gate)\n";
  if (!st.manifest.balanced()) std::cerr << "warning: manifest row counts do not balance\n";
  return (st.run.gate_failures > 0 && g.strict) ? kExitConvergence : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sido: hierarchical player-impact scores, baselines and meta-metrics"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "key = value configuration file");
  app.add_option("--seed", g.seed, "root seed (overrides the config)");
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_flag("--strict", g.strict, "exit 3 when any fit misses the convergence gate");
  app.add_option("--role", g.role, "TOP|JGL|MID|BOT|SUP");
  app.add_option("--server", g.server, "NA|EUW|KR");
  app.add_option("--phase", g.phase, "P0_7|P7_15|P15_25");
  app.add_option("--stat", g.stat, "GOLD|DMG");
  app.add_option("--scope", g.scope, "PLAYER|ALLY|ENEMY|ALLY_PLUS_PLAYER|BA|PM_OFF|PM_DEF");
  // Options are accepted before or after the subcommand.
  app.fallthrough();

  std::string games, table, roster, scores_path, followup, followup_scores;
  std::vector<std::string> fit_paths;
  bool demo_games = false;

  auto* ingest = app.add_subcommand("ingest", "validate a game file and apply the disconnect filter");
  ingest->add_option("--games", games, "newline-delimited JSON game file")->required();

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic observation table (or demo games)");
  simulate->add_flag("--games", demo_games, "write demo game and roster files instead of a table");

  auto* fit = app.add_subcommand("fit", "fit one cell and save its posterior");
  fit->add_option("--table", table, "observation table CSV");
  fit->add_option("--games", games, "game file (with --role --server --phase --stat [--scope])");

  auto* scores = app.add_subcommand("scores", "SIDO scores from saved fits or from a game file");
  scores->add_option("--fit", fit_paths, "saved fit files");
  scores->add_option("--games", games, "game file");

  auto* base = app.add_subcommand("baselines", "BA and Plus-Minus scores from a game file");
  base->add_option("--games", games, "game file");

  auto* metam = app.add_subcommand("metametrics", "discrimination, independence and stability of a score file");
  metam->add_option("--scores", scores_path, "score CSV")->required();
  metam->add_option("--followup-scores", followup_scores, "score CSV from a later period");

  auto* compare = app.add_subcommand("compare", "pro versus non-pro comparisons");
  compare->add_option("--scores", scores_path, "score CSV")->required();
  compare->add_option("--roster", roster, "roster CSV")->required();

  auto* rep = app.add_subcommand("report", "run the full pipeline and write every report");
  rep->add_option("--games", games, "game file (overrides the config)");
  rep->add_option("--roster", roster, "roster CSV (overrides the config)");
  rep->add_option("--followup", followup, "second-period game file for stability");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*ingest) return cmd_ingest(g, games);
    if (*simulate) return cmd_simulate(g, demo_games);
    if (*fit) return cmd_fit(g, table, games);
    if (*scores) return cmd_scores(g, fit_paths, games, false);
    if (*base) return cmd_scores(g, {}, games, true);
    if (*metam) return cmd_metametrics(g, scores_path, followup_scores);
    if (*compare) return cmd_compare(g, scores_path, roster);
    if (*rep) return cmd_report(g, games, roster, followup);
  } catch (const ValidationError& e) {
    std::cerr << "validation error [" << e.code() << "]: " << e.what() << "\n";
    return kExitValidation;
  } catch (const DegenerateError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ConvergenceError& e) {
    std::cerr << "convergence error: " << e.what() << "\n";
    return kExitConvergence;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
