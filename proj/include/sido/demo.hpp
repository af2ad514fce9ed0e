#pragma once

// Synthetic ladder games in the game-file schema, for demos and end-to-end
// tests. Every account carries a latent skill that raises its own phase
// statistics and an assist skill that raises its teammates'. The first
// `pros_per_role` accounts of each (server, role) pool are rostered pros
// with both skills shifted up by `pro_shift`.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "sido/config.hpp"
#include "sido/data.hpp"
#include "sido/rng.hpp"
#include "sido/types.hpp"

namespace sido::demo {

struct DemoConfig {
  std::vector<Server> servers{Server::NA};
  int games_per_server = 1500;
  int accounts_per_role = 60;
  int champions_per_role = 12;
  int pros_per_role = 6;
  double pro_shift = 0.5;
  double skill_sd = 0.3;
  double disconnect_rate = 0.02;
  std::uint64_t seed = 7;

  static DemoConfig from(const config::KeyValues& kv) {
    DemoConfig c;
    if (kv.contains("demo_servers")) {
      c.servers.clear();
      std::string list = kv.get_string("demo_servers", "");
      std::size_t start = 0;
      while (start <= list.size()) {
        const auto end = std::min(list.find(',', start), list.size());
        auto s = parse_enum<Server>(list.substr(start, end - start));
        if (!s) throw ValidationError("CONFIG", "unknown server in demo_servers: " + list);
        c.servers.push_back(*s);
        start = end + 1;
      }
    }
    c.games_per_server = static_cast<int>(kv.get_int("demo_games_per_server", c.games_per_server));
    c.accounts_per_role = static_cast<int>(kv.get_int("demo_accounts_per_role", c.accounts_per_role));
    c.champions_per_role = static_cast<int>(kv.get_int("demo_champions_per_role", c.champions_per_role));
    c.pros_per_role = static_cast<int>(kv.get_int("demo_pros_per_role", c.pros_per_role));
    c.pro_shift = kv.get_double("demo_pro_shift", c.pro_shift);
    c.skill_sd = kv.get_double("demo_skill_sd", c.skill_sd);
    c.disconnect_rate = kv.get_double("demo_disconnect_rate", c.disconnect_rate);
    c.seed = kv.get_u64("seed", c.seed);
    return c;
  }
};

inline std::string account_name(Server s, Role r, int k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%s_%03d", std::string(to_string(s)).c_str(), std::string(to_string(r)).c_str(), k);
  return buf;
}

inline std::string champion_name(Role r, int k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_ch%02d", std::string(to_string(r)).c_str(), k);
  return buf;
}

inline League league_of(Server s) {
  switch (s) {
    case Server::NA:
      return League::LCS;
    case Server::EUW:
      return League::LEC;
    case Server::KR:
      return League::LCK;
  }
  return League::NONE;
}

struct DemoData {
  std::vector<data::GameRecord> games;
  std::vector<data::RosterLabel> roster;
};

inline DemoData generate(const DemoConfig& cfg) {
  if (cfg.accounts_per_role < 2 || cfg.champions_per_role < 1 || cfg.games_per_server < 1) {
    throw ValidationError("CONFIG", "demo needs >= 2 accounts and >= 1 champion per role");
  }
  DemoData out;
  // Per-phase base rates (gold, damage) and the damage-taken base at 7'.
  static constexpr std::array<double, 3> kGold{2600.0, 3600.0, 5200.0};
  static constexpr std::array<double, 3> kDmg{1500.0, 3000.0, 5500.0};
  static constexpr std::array<double, 5> kRoleGold{1.05, 0.85, 1.05, 1.15, 0.7};
  static constexpr std::array<double, 5> kRoleDmg{1.0, 0.8, 1.2, 1.2, 0.6};
  const auto roles = all_values<Role>();
  for (Server server : cfg.servers) {
    const auto sidx = static_cast<std::uint64_t>(server);
    rng::Philox gen(cfg.seed, rng::Purpose::kDemoGames, sidx);
    struct Account {
      std::string id;
      double skill, assist, activity;
      int main_champion;
    };
    std::array<std::vector<Account>, 5> pools;
    std::array<std::vector<double>, 5> champ_effect;
    for (std::size_t r = 0; r < roles.size(); ++r) {
      for (int k = 0; k < cfg.accounts_per_role; ++k) {
        const bool pro = k < cfg.pros_per_role;
        Account a{account_name(server, roles[r], k), cfg.skill_sd * gen.normal() + (pro ? cfg.pro_shift : 0.0),
                  cfg.skill_sd * gen.normal() + (pro ? cfg.pro_shift : 0.0), 0.5 + gen.uniform(),
                  static_cast<int>(gen.below(static_cast<std::uint64_t>(cfg.champions_per_role)))};
        if (pro) {
          out.roster.push_back({a.id, "pro_" + a.id, league_of(server), true});
        }
        pools[r].push_back(std::move(a));
      }
      for (int c = 0; c < cfg.champions_per_role; ++c) champ_effect[r].push_back(0.2 * gen.normal());
    }
    auto pick = [&](std::size_t r, int exclude) {
      double total = 0.0;
      for (int k = 0; k < static_cast<int>(pools[r].size()); ++k) {
        if (k != exclude) total += pools[r][static_cast<std::size_t>(k)].activity;
      }
      double u = gen.uniform() * total;
      for (int k = 0; k < static_cast<int>(pools[r].size()); ++k) {
        if (k == exclude) continue;
        u -= pools[r][static_cast<std::size_t>(k)].activity;
        if (u <= 0.0) return k;
      }
      return exclude == static_cast<int>(pools[r].size()) - 1 ? static_cast<int>(pools[r].size()) - 2
                                                               : static_cast<int>(pools[r].size()) - 1;
    };
    for (int gi = 0; gi < cfg.games_per_server; ++gi) {
      data::GameRecord g;
      char id[48];
      std::snprintf(id, sizeof(id), "%s-%06d", std::string(to_string(server)).c_str(), gi);
      g.game_id = id;
      g.server = server;
      g.patch = gi < cfg.games_per_server / 2 ? "13.6" : "13.7";
      g.duration_min = std::round((18.0 + 22.0 * gen.uniform()) * 10.0) / 10.0;
      std::array<std::array<int, 5>, 2> who{};
      std::array<std::array<int, 5>, 2> champ{};
      for (std::size_t r = 0; r < roles.size(); ++r) {
        who[0][r] = pick(r, -1);
        who[1][r] = pick(r, who[0][r]);
        for (int t = 0; t < 2; ++t) {
          const auto& a = pools[r][static_cast<std::size_t>(who[t][r])];
          champ[t][r] = gen.uniform() < 0.6 ? a.main_champion
                                            : static_cast<int>(gen.below(static_cast<std::uint64_t>(cfg.champions_per_role)));
        }
      }
      const bool disconnect = gen.uniform() < cfg.disconnect_rate;
      std::array<double, 2> assist{};
      for (int t = 0; t < 2; ++t) {
        for (std::size_t r = 0; r < roles.size(); ++r) assist[t] += pools[r][static_cast<std::size_t>(who[t][r])].assist;
      }
      std::array<double, 2> strength{};
      for (int t = 0; t < 2; ++t) {
        for (std::size_t r = 0; r < roles.size(); ++r) {
          const auto& a = pools[r][static_cast<std::size_t>(who[t][r])];
          const double own = a.skill + champ_effect[r][static_cast<std::size_t>(champ[t][r])];
          const double from_allies = assist[t] - a.assist;
          const bool dc = disconnect && t == 1 && r == 0;
          data::PlayerRow p;
          p.account_id = a.id;
          p.team = t == 0 ? Team::BLUE : Team::RED;
          p.role = roles[r];
          p.champion_id = champion_name(roles[r], champ[t][r]);
          std::array<double, 3> gold{}, dmg{}, taken{};
          for (int ph = 0; ph < 3; ++ph) {
            const double lift = 1.0 + 0.10 * own + 0.03 * from_allies;
            gold[ph] = std::max(0.0, kGold[ph] * kRoleGold[r] * (lift + 0.12 * gen.normal()));
            dmg[ph] = std::max(0.0, kDmg[ph] * kRoleDmg[r] * (lift + 0.25 * gen.normal()));
            taken[ph] = std::max(0.0, kDmg[ph] * (0.9 + 0.2 * gen.normal()));
            strength[t] += gold[ph];
          }
          if (dc) taken[0] = 150.0 * gen.uniform();
          p.at7 = {gold[0], dmg[0], taken[0]};
          p.at15 = {gold[0] + gold[1], dmg[0] + dmg[1], taken[0] + taken[1]};
          if (g.duration_min >= 25.0) {
            p.at25 = data::Snapshot{p.at15.gold + gold[2], p.at15.dmg + dmg[2], p.at15.dmg_taken + taken[2]};
          }
          for (auto* s : {&p.at7, &p.at15}) {
            s->gold = std::round(s->gold);
            s->dmg = std::round(s->dmg);
            s->dmg_taken = std::round(s->dmg_taken);
          }
          if (p.at25) {
            p.at25->gold = std::round(p.at25->gold);
            p.at25->dmg = std::round(p.at25->dmg);
            p.at25->dmg_taken = std::round(p.at25->dmg_taken);
          }
          g.players.push_back(std::move(p));
        }
      }
      const double edge = (strength[0] - strength[1]) / 4000.0;
      g.winner = gen.uniform() < 1.0 / (1.0 + std::exp(-edge)) ? Team::BLUE : Team::RED;
      for (auto& p : g.players) p.win = p.team == g.winner;
      out.games.push_back(std::move(g));
    }
  }
  return out;
}

inline void write_games(std::ostream& os, std::span<const data::GameRecord> games) {
  for (const auto& g : games) os << data::game_to_json(g).dump() << '\n';
}

inline void write_roster(std::ostream& os, std::span<const data::RosterLabel> roster) {
  os << "account_id,player_name,league\n";
  for (const auto& r : roster) {
    csv::write_row(os, {r.account_id, r.player_name, std::string(to_string(r.league))});
  }
}

}  // namespace sido::demo
