#include "rpg/crossplay.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "rpg/rng.hpp"

namespace rpg {

namespace {

std::vector<double> seat_probs(const PolicyCheckpoint& ckpt, Seat seat, const PayoffGame& game) {
  const std::vector<double>* logits = ckpt.seat_logits(seat);
  if (logits == nullptr) return {};
  const int want = seat == Seat::row ? game.rows : game.cols;
  if (static_cast<int>(logits->size()) != want)
    throw std::invalid_argument("checkpoint '" + ckpt.agent_id + "' " +
                                (seat == Seat::row ? "row" : "col") + " seat has " +
                                std::to_string(logits->size()) + " logits, game " + game.name +
                                " needs " + std::to_string(want));
  return softmax<double>(*logits);
}

// mean over both players of the expected (or sampled) reward for one seating
double seating_value(const PayoffGame& game, std::span<const double> row,
                     std::span<const double> col, int episodes, Rng rng) {
  if (episodes <= 0) {
    return 0.5 * (exact_utility(game, row, col, 1) + exact_utility(game, row, col, 2));
  }
  SeatPolicy r{std::vector<double>(row.begin(), row.end()), {}};
  SeatPolicy c{std::vector<double>(col.begin(), col.end()), {}};
  double sum = 0.0;
  for (int e = 0; e < episodes; ++e) {
    Trajectory t = sample_episode(game, r, c, rng);
    double disc = 1.0;
    for (const StepRecord& s : t.steps) {
      sum += disc * 0.5 * (s.reward_row + s.reward_col);
      disc *= game.discount;
    }
  }
  return sum / episodes;
}

}  // namespace

CrossPlayGrid crossplay_eval(std::span<const PolicyCheckpoint> checkpoints,
                             const PayoffGame& game, int episodes_per_cell, uint64_t seed) {
  if (checkpoints.empty()) throw std::invalid_argument("crossplay_eval: no checkpoints");
  const size_t n = checkpoints.size();
  CrossPlayGrid grid;
  grid.episodes_per_cell = episodes_per_cell;
  grid.mean.assign(n * n, std::nan(""));
  grid.seat_ij.assign(n * n, std::nan(""));
  grid.seat_ji.assign(n * n, std::nan(""));

  std::vector<std::vector<double>> rows(n), cols(n);
  for (size_t i = 0; i < n; ++i) {
    grid.labels.push_back(checkpoints[i].agent_id);
    rows[i] = seat_probs(checkpoints[i], Seat::row, game);
    cols[i] = seat_probs(checkpoints[i], Seat::col, game);
  }

  Rng root = Rng::seeded(seed).fork("crossplay");
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      const size_t cell = i * n + j;
      double sum = 0.0;
      int seatings = 0;
      if (!rows[i].empty() && !cols[j].empty()) {
        grid.seat_ij[cell] = seating_value(game, rows[i], cols[j], episodes_per_cell,
                                           root.fork(cell * 2));
        sum += grid.seat_ij[cell];
        ++seatings;
      }
      if (i != j && !rows[j].empty() && !cols[i].empty()) {
        grid.seat_ji[cell] = seating_value(game, rows[j], cols[i], episodes_per_cell,
                                           root.fork(cell * 2 + 1));
        sum += grid.seat_ji[cell];
        ++seatings;
      }
      if (seatings == 0)
        throw std::invalid_argument("crossplay_eval: no seat-compatible rollout between '" +
                                    checkpoints[i].agent_id + "' and '" +
                                    checkpoints[j].agent_id + "'");
      grid.mean[cell] = sum / seatings;
    }
  }
  return grid;
}

std::string grid_csv(const CrossPlayGrid& grid) {
  std::ostringstream out;
  out.precision(10);
  const size_t n = grid.labels.size();
  out << "# schema=rpg-grid-v1\n";
  out << "# episodes_per_cell=" << grid.episodes_per_cell << " (0 = exact)\n";
  auto matrix = [&](const char* title, const std::vector<double>& m) {
    out << "# " << title << "\n";
    out << "label";
    for (const std::string& l : grid.labels) out << "," << l;
    out << "\n";
    for (size_t i = 0; i < n; ++i) {
      out << grid.labels[i];
      for (size_t j = 0; j < n; ++j) out << "," << m[i * n + j];
      out << "\n";
    }
  };
  matrix("mean", grid.mean);
  matrix("seat: row label vs col label", grid.seat_ij);
  matrix("seat: col label vs row label", grid.seat_ji);
  return out.str();
}

bool AuditReport::all_rational() const {
  for (const AuditVerdict& v : verdicts)
    if (!v.rational) return false;
  return true;
}

std::string AuditReport::text() const {
  std::ostringstream out;
  out.precision(4);
  for (const AuditVerdict& v : verdicts) {
    out << "agent " << v.agent << " seat " << (v.seat == Seat::row ? "row" : "col") << ": ";
    if (v.rational) {
      out << "rational, witness co-strategy";
      for (double w : v.witness) out << " " << w;
    } else {
      out << "IRRATIONAL (no co-strategy makes its support a best response)";
    }
    out << "\n";
  }
  return out.str();
}

AuditReport sabotage_audit(std::span<const PolicyCheckpoint> checkpoints, const PayoffGame& game,
                           double grid_delta, double support_tol) {
  AuditReport report;
  for (const PolicyCheckpoint& ckpt : checkpoints) {
    for (Seat seat : {Seat::row, Seat::col}) {
      std::vector<double> probs = seat_probs(ckpt, seat, game);
      if (probs.empty()) continue;
      RationalityReport r =
          rationality_check(game, probs, seat == Seat::row ? 1 : 2, grid_delta, support_tol);
      AuditVerdict v;
      v.agent = ckpt.agent_id;
      v.seat = seat;
      v.rational = r.rational;
      v.probs = std::move(probs);
      v.witness = std::move(r.witness);
      report.verdicts.push_back(std::move(v));
    }
  }
  return report;
}

}  // namespace rpg
