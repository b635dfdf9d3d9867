#include "rpg/game.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rpg {

bool PayoffGame::common_payoff() const { return payoff1 == payoff2; }

bool PayoffGame::zero_sum() const {
  for (size_t k = 0; k < payoff1.size(); ++k)
    if (payoff1[k] != -payoff2[k]) return false;
  return true;
}

void PayoffGame::validate() const {
  const size_t n = static_cast<size_t>(rows) * static_cast<size_t>(cols);
  if (rows < 1 || cols < 1) throw std::invalid_argument("game '" + name + "': empty action set");
  if (payoff1.size() != n || payoff2.size() != n)
    throw std::invalid_argument("game '" + name + "': payoff shape mismatch");
  if (horizon < 1) throw std::invalid_argument("game '" + name + "': horizon must be >= 1");
  if (discount < 0.0 || discount > 1.0)
    throw std::invalid_argument("game '" + name + "': discount outside [0, 1]");
  for (double v : payoff1)
    if (!std::isfinite(v)) throw std::invalid_argument("game '" + name + "': non-finite payoff");
  for (double v : payoff2)
    if (!std::isfinite(v)) throw std::invalid_argument("game '" + name + "': non-finite payoff");
}

namespace {

PayoffGame common(std::string name, int rows, int cols, std::vector<double> payoff) {
  PayoffGame g;
  g.name = std::move(name);
  g.rows = rows;
  g.cols = cols;
  g.payoff1 = payoff;
  g.payoff2 = std::move(payoff);
  return g;
}

PayoffGame general(std::string name, int rows, int cols, std::vector<double> payoff1,
                   std::vector<double> payoff2) {
  PayoffGame g;
  g.name = std::move(name);
  g.rows = rows;
  g.cols = cols;
  g.payoff1 = std::move(payoff1);
  g.payoff2 = std::move(payoff2);
  return g;
}

std::vector<PayoffGame> make_builtins() {
  std::vector<PayoffGame> out;
  // Victim rows A,B vs adversary columns C,D,E; E is the sabotage column.
  out.push_back(common("fig2_coop", 2, 3, {1, 0, -1, 0, 1, -1}));
  // Diversity sabotage game: D and E are strictly dominated by C and F.
  out.push_back(common("appB_sabotage", 2, 4, {1, 0.9, -1, 0, 0, -1, 0.9, 1}));
  // Mixed-motive coordination with a sabotage column.
  out.push_back(general("fig10_bach", 2, 3, {3, 0, -1, 1, 2, -1}, {2, 0, -1, 1, 3, -1}));
  // Column E pays 1 against every row: the only rational column action.
  out.push_back(common("fig11_coop", 2, 3, {0.9, 0, 1, 0, 0.9, 1}));
  out.push_back(general("fig12_chicken", 2, 2, {0, -1, 1, -10}, {0, 1, -1, -10}));
  out.push_back(general("fig13_rps", 3, 3, {0, -1, 1, 1, 0, -1, -1, 1, 0},
                        {0, 1, -1, -1, 0, 1, 1, -1, 0}));
  for (PayoffGame& g : out) g.validate();
  return out;
}

}  // namespace

const std::vector<PayoffGame>& builtin_games() {
  static const std::vector<PayoffGame> games = make_builtins();
  return games;
}

const PayoffGame* find_builtin(std::string_view name) {
  for (const PayoffGame& g : builtin_games())
    if (g.name == name) return &g;
  return nullptr;
}

namespace {

std::vector<double> parse_numbers(const std::string& text, int line_no) {
  std::istringstream ss(text);
  std::vector<double> out;
  double v;
  while (ss >> v) out.push_back(v);
  std::string rest;
  if (ss.clear(), ss >> rest)
    throw std::invalid_argument("game file line " + std::to_string(line_no) +
                                ": expected numbers, got '" + rest + "'");
  return out;
}

std::string trim(const std::string& s) {
  const size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

PayoffGame parse_game_text(const std::string& text) {
  PayoffGame g;
  std::string payoff2_mode;
  bool have_rows = false, have_cols = false, have_p1 = false, have_p2 = false;

  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("game file line " + std::to_string(line_no) +
                                  ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "name") {
      g.name = value;
    } else if (key == "rows") {
      g.rows = std::stoi(value);
      have_rows = true;
    } else if (key == "cols") {
      g.cols = std::stoi(value);
      have_cols = true;
    } else if (key == "payoff1") {
      g.payoff1 = parse_numbers(value, line_no);
      have_p1 = true;
    } else if (key == "payoff2") {
      if (value == "common" || value == "zerosum")
        payoff2_mode = value;
      else
        g.payoff2 = parse_numbers(value, line_no);
      have_p2 = true;
    } else if (key == "horizon") {
      g.horizon = std::stoi(value);
    } else if (key == "discount") {
      g.discount = std::stod(value);
    } else {
      throw std::invalid_argument("game file line " + std::to_string(line_no) +
                                  ": unknown field '" + key + "'");
    }
  }

  if (!have_rows || !have_cols || !have_p1 || !have_p2)
    throw std::invalid_argument("game file: missing required field (rows, cols, payoff1, payoff2)");
  if (payoff2_mode == "common") {
    g.payoff2 = g.payoff1;
  } else if (payoff2_mode == "zerosum") {
    g.payoff2.clear();
    g.payoff2.reserve(g.payoff1.size());
    for (double v : g.payoff1) g.payoff2.push_back(-v);
  }
  g.validate();
  return g;
}

PayoffGame load_game_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open game file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_game_text(ss.str());
}

std::string serialize_game(const PayoffGame& g) {
  std::ostringstream out;
  out.precision(17);
  out << "name = " << g.name << "\n";
  out << "rows = " << g.rows << "\n";
  out << "cols = " << g.cols << "\n";
  out << "payoff1 =";
  for (double v : g.payoff1) out << " " << v;
  out << "\n";
  if (g.common_payoff()) {
    out << "payoff2 = common\n";
  } else if (g.zero_sum()) {
    out << "payoff2 = zerosum\n";
  } else {
    out << "payoff2 =";
    for (double v : g.payoff2) out << " " << v;
    out << "\n";
  }
  out << "horizon = " << g.horizon << "\n";
  out << "discount = " << g.discount << "\n";
  return out.str();
}

}  // namespace rpg
