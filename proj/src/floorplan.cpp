#include "adlgen/floorplan.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace adlgen {

FloorplanGraph::FloorplanGraph(const SensorVocabulary& vocab,
                               std::map<std::string, std::string> room_of,
                               std::set<std::pair<std::string, std::string>> room_adjacency,
                               std::map<std::string, std::string> label_of)
    : n_(vocab.size()),
      sensors_(vocab.ids()),
      room_of_(std::move(room_of)),
      label_of_(std::move(label_of)) {
  std::vector<std::string> missing;
  for (const auto& id : sensors_)
    if (!room_of_.count(id)) missing.push_back(id);
  if (!missing.empty()) {
    std::string msg = "floorplan: sensors missing from spec:";
    for (const auto& id : missing) msg += " " + id;
    throw std::invalid_argument(msg);
  }

  auto norm = [](std::string a, std::string b) {
    if (b < a) std::swap(a, b);
    return std::make_pair(a, b);
  };
  std::set<std::pair<std::string, std::string>> adj;
  for (const auto& [a, b] : room_adjacency) adj.insert(norm(a, b));

  a_map_.assign((n_ + 1) * (n_ + 1), 0);
  for (std::size_t i = 1; i <= n_; ++i) {
    const std::string& ri = room_of_.at(sensors_[i - 1]);
    for (std::size_t j = i; j <= n_; ++j) {
      const std::string& rj = room_of_.at(sensors_[j - 1]);
      const bool connected = i == j || ri == rj || adj.count(norm(ri, rj)) != 0;
      a_map_[i * (n_ + 1) + j] = a_map_[j * (n_ + 1) + i] = connected ? 1 : 0;
    }
  }
}

bool FloorplanGraph::adjacent(int i, int j) const {
  if (i < 1 || j < 1 || i > static_cast<int>(n_) || j > static_cast<int>(n_))
    throw std::out_of_range("floorplan: sensor index out of range");
  return a_map_[static_cast<std::size_t>(i) * (n_ + 1) + static_cast<std::size_t>(j)] != 0;
}

bool FloorplanGraph::has_sensor(const std::string& sensor_id) const {
  return room_of_.count(sensor_id) != 0;
}

const std::string& FloorplanGraph::room_of(const std::string& sensor_id) const {
  auto it = room_of_.find(sensor_id);
  if (it == room_of_.end())
    throw std::out_of_range("floorplan: unknown sensor: " + sensor_id);
  return it->second;
}

const std::string& FloorplanGraph::location_phrase(const std::string& sensor_id) const {
  auto it = label_of_.find(sensor_id);
  if (it != label_of_.end()) return it->second;
  return room_of(sensor_id);
}

namespace {

// Reads an optionally quoted phrase starting at `pos`; consumes to end of line.
std::string read_phrase(const std::string& line, std::size_t pos) {
  while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
  if (pos < line.size() && line[pos] == '"') {
    const auto close = line.find('"', pos + 1);
    if (close == std::string::npos)
      throw std::invalid_argument("floorplan: unterminated quote: " + line);
    return line.substr(pos + 1, close - pos - 1);
  }
  auto end = line.find_last_not_of(" \t");
  return line.substr(pos, end == std::string::npos ? std::string::npos : end - pos + 1);
}

}  // namespace

FloorplanGraph load_floorplan(const std::string& spec_text, const SensorVocabulary& vocab) {
  std::map<std::string, std::string> room_of;
  std::map<std::string, std::string> label_of;
  std::set<std::pair<std::string, std::string>> adjacency;
  std::set<std::string> rooms;

  std::istringstream in(spec_text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream is(line);
    std::string kw;
    if (!(is >> kw) || kw[0] == '#') continue;
    if (kw == "sensor") {
      std::string id, roomkw, room;
      if (!(is >> id >> roomkw >> room) || roomkw != "room")
        throw std::invalid_argument("floorplan: bad sensor line: " + line);
      if (room_of.count(id))
        throw std::invalid_argument("floorplan: duplicate sensor: " + id);
      room_of[id] = room;
      rooms.insert(room);
      std::string labelkw;
      if (is >> labelkw) {
        if (labelkw != "label" || is.tellg() == std::istringstream::pos_type(-1))
          throw std::invalid_argument("floorplan: bad sensor attribute: " + line);
        label_of[id] = read_phrase(line, static_cast<std::size_t>(is.tellg()));
      }
    } else if (kw == "adjacent") {
      std::string a, b;
      if (!(is >> a >> b))
        throw std::invalid_argument("floorplan: bad adjacent line: " + line);
      adjacency.insert({a, b});
    } else {
      throw std::invalid_argument("floorplan: unknown directive: " + kw);
    }
  }

  for (const auto& [a, b] : adjacency) {
    if (!rooms.count(a)) throw std::invalid_argument("floorplan: unknown room: " + a);
    if (!rooms.count(b)) throw std::invalid_argument("floorplan: unknown room: " + b);
  }
  return FloorplanGraph(vocab, std::move(room_of), std::move(adjacency), std::move(label_of));
}

bool validate_transition(SignedToken prev, SignedToken cand, const FloorplanGraph& g) {
  return g.adjacent(cand.index(), prev.index());
}

ValidityRate validity_rate(const std::vector<ActivitySequence>& corpus,
                           const FloorplanGraph& g) {
  if (corpus.empty()) throw std::invalid_argument("validity_rate: empty corpus");
  std::size_t valid_seqs = 0, valid_trans = 0, total_trans = 0;
  for (const auto& seq : corpus) {
    bool all_valid = true;
    for (std::size_t i = 1; i < seq.tokens.size(); ++i) {
      ++total_trans;
      if (validate_transition(seq.tokens[i - 1], seq.tokens[i], g)) {
        ++valid_trans;
      } else {
        all_valid = false;
      }
    }
    if (all_valid) ++valid_seqs;
  }
  ValidityRate r;
  r.sequence_level = static_cast<double>(valid_seqs) / static_cast<double>(corpus.size());
  r.transition_level =
      total_trans == 0 ? 1.0 : static_cast<double>(valid_trans) / static_cast<double>(total_trans);
  return r;
}

}  // namespace adlgen
