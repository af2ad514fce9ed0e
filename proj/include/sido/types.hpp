#pragma once

// Enumerations shared across modules, with their canonical text forms.

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace sido {

enum class Server { NA, EUW, KR };
enum class Team { BLUE, RED };
enum class Role { TOP, JGL, MID, BOT, SUP };
enum class Phase { P0_7, P7_15, P15_25 };
enum class Stat { GOLD, DMG };
enum class League { LCS, LEC, LCK, LPL, NONE };
enum class Scope { PLAYER, ALLY, ENEMY, ALLY_PLUS_PLAYER, BA, PM_OFF, PM_DEF };

template <class E>
struct EnumNames;

template <>
struct EnumNames<Server> {
  static constexpr std::array<std::string_view, 3> names{"NA", "EUW", "KR"};
};
template <>
struct EnumNames<Team> {
  static constexpr std::array<std::string_view, 2> names{"BLUE", "RED"};
};
template <>
struct EnumNames<Role> {
  static constexpr std::array<std::string_view, 5> names{"TOP", "JGL", "MID", "BOT", "SUP"};
};
template <>
struct EnumNames<Phase> {
  static constexpr std::array<std::string_view, 3> names{"P0_7", "P7_15", "P15_25"};
};
template <>
struct EnumNames<Stat> {
  static constexpr std::array<std::string_view, 2> names{"GOLD", "DMG"};
};
template <>
struct EnumNames<League> {
  static constexpr std::array<std::string_view, 5> names{"LCS", "LEC", "LCK", "LPL", "NONE"};
};
template <>
struct EnumNames<Scope> {
  static constexpr std::array<std::string_view, 7> names{"PLAYER", "ALLY",  "ENEMY", "ALLY_PLUS_PLAYER",
                                                         "BA",     "PM_OFF", "PM_DEF"};
};

template <class E>
constexpr std::string_view to_string(E value) {
  return EnumNames<E>::names[static_cast<std::size_t>(value)];
}

template <class E>
constexpr std::optional<E> parse_enum(std::string_view text) {
  const auto& names = EnumNames<E>::names;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == text) return static_cast<E>(i);
  }
  return std::nullopt;
}

template <class E>
constexpr auto all_values() {
  std::array<E, EnumNames<E>::names.size()> out{};
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<E>(i);
  return out;
}

/// Human-readable phase label used in report tables ("0-7 min").
constexpr std::string_view time_label(Phase phase) {
  switch (phase) {
    case Phase::P0_7:
      return "0-7 min";
    case Phase::P7_15:
      return "7-15 min";
    case Phase::P15_25:
      return "15-25 min";
  }
  return "";
}

constexpr Team opponent(Team team) { return team == Team::BLUE ? Team::RED : Team::BLUE; }

/// Identity of one modelling cell.
struct CellKey {
  Role role = Role::TOP;
  Server server = Server::NA;
  Phase phase = Phase::P0_7;
  Stat stat = Stat::GOLD;
  Scope scope = Scope::PLAYER;

  std::string label() const {
    std::string out;
    for (std::string_view part : {to_string(role), to_string(server), to_string(phase), to_string(stat),
                                  to_string(scope)}) {
      if (!out.empty()) out += '_';
      out += part;
    }
    return out;
  }

  friend auto operator<=>(const CellKey&, const CellKey&) = default;
};

}  // namespace sido
