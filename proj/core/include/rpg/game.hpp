#pragma once
// Two-player general-sum normal-form games, optionally iterated for a fixed
// horizon with per-step discounting. Payoffs are exact row-major matrices.

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rpg {

struct PayoffGame {
  std::string name;
  int rows = 0;  // player 1 action count
  int cols = 0;  // player 2 action count
  std::vector<double> payoff1;  // rows x cols, row-major
  std::vector<double> payoff2;
  int horizon = 1;       // 1 = one-shot
  double discount = 0.95;

  double p1(int r, int c) const { return payoff1[static_cast<size_t>(r * cols + c)]; }
  double p2(int r, int c) const { return payoff2[static_cast<size_t>(r * cols + c)]; }
  double payoff(int player, int r, int c) const { return player == 1 ? p1(r, c) : p2(r, c); }

  bool common_payoff() const;
  bool zero_sum() const;

  // Throws std::invalid_argument when shapes or horizon are inconsistent.
  void validate() const;
};

// The built-in instances used across experiments; exact payoff values are
// part of the public interface.
const std::vector<PayoffGame>& builtin_games();
const PayoffGame* find_builtin(std::string_view name);

// Text format: `key = value` lines, '#' comments. payoff2 accepts "common",
// "zerosum", or a row-major number list. Parse errors carry line numbers.
PayoffGame parse_game_text(const std::string& text);
PayoffGame load_game_file(const std::string& path);
std::string serialize_game(const PayoffGame& game);

}  // namespace rpg
