#include "rpg/policy.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rpg {

std::vector<double> policy_probs(const PolicyParams& policy) {
  return softmax<double>(policy.logits);
}

std::vector<Value> lift_logits(Tape& tape, std::span<const double> logits, bool trainable) {
  std::vector<Value> out;
  out.reserve(logits.size());
  for (double v : logits) out.push_back(trainable ? tape.leaf(v) : tape.constant(v));
  return out;
}

Value policy_log_prob(std::span<const Value> logits, int action) {
  if (action < 0 || action >= static_cast<int>(logits.size()))
    throw std::invalid_argument("policy_log_prob: action out of range");
  return log_softmax(logits)[static_cast<size_t>(action)];
}

Value entropy_bonus(std::span<const Value> logits) { return entropy(logits); }

const std::vector<double>* PolicyCheckpoint::seat_logits(Seat s) const {
  for (const SeatLogits& sl : seats)
    if (sl.seat == s) return &sl.logits;
  return nullptr;
}

namespace {
const char* role_name(Role r) { return r == Role::base ? "base" : "manipulator"; }
const char* seat_name(Seat s) { return s == Seat::row ? "row" : "col"; }
}  // namespace

void save_checkpoint(const std::string& path, const PolicyCheckpoint& ckpt) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.precision(17);
  out << "rpg-checkpoint v1\n";
  out << "agent " << ckpt.agent_id << "\n";
  out << "role " << role_name(ckpt.role) << "\n";
  out << "trainable " << (ckpt.trainable ? 1 : 0) << "\n";
  for (const PolicyCheckpoint::SeatLogits& sl : ckpt.seats) {
    out << "seat " << seat_name(sl.seat) << " " << sl.logits.size();
    for (double v : sl.logits) out << " " << v;
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed for checkpoint: " + path);
}

PolicyCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string header;
  std::getline(in, header);
  if (header != "rpg-checkpoint v1")
    throw std::runtime_error("bad checkpoint header in " + path + ": '" + header + "'");

  PolicyCheckpoint ckpt;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "agent") {
      ss >> ckpt.agent_id;
    } else if (key == "role") {
      std::string r;
      ss >> r;
      if (r == "base")
        ckpt.role = Role::base;
      else if (r == "manipulator")
        ckpt.role = Role::manipulator;
      else
        throw std::runtime_error("bad role '" + r + "' in " + path);
    } else if (key == "trainable") {
      int t = 1;
      ss >> t;
      ckpt.trainable = t != 0;
    } else if (key == "seat") {
      std::string s;
      size_t n = 0;
      ss >> s >> n;
      PolicyCheckpoint::SeatLogits sl;
      sl.seat = s == "row" ? Seat::row : Seat::col;
      if (s != "row" && s != "col") throw std::runtime_error("bad seat '" + s + "' in " + path);
      sl.logits.resize(n);
      for (size_t k = 0; k < n; ++k)
        if (!(ss >> sl.logits[k]))
          throw std::runtime_error("truncated logits in checkpoint " + path);
      ckpt.seats.push_back(std::move(sl));
    } else {
      throw std::runtime_error("unknown checkpoint field '" + key + "' in " + path);
    }
  }
  if (ckpt.agent_id.empty() || ckpt.seats.empty())
    throw std::runtime_error("incomplete checkpoint: " + path);
  return ckpt;
}

}  // namespace rpg
