#include "mpmdp/io.hpp"

#include <fstream>

namespace mpmdp {

json rational_json(const Rational& r) { return to_string(r); }

Rational rational_from_json(const json& j) {
  if (j.is_string()) return parse_rational(j.get<std::string>());
  if (j.is_number_integer()) return Rational(Integer(std::to_string(j.get<long long>())));
  throw ModelError("expected a rational as \"p/q\" string, got " + j.dump());
}

json vector_json(const std::vector<Rational>& v) {
  json a = json::array();
  for (const auto& x : v) a.push_back(rational_json(x));
  return a;
}

Mdp mdp_from_json(const json& j) {
  try {
    Mdp m;
    m.dimension = j.at("dimension").get<std::size_t>();
    for (const auto& s : j.at("states")) {
      std::string owner = s.at("owner").get<std::string>();
      if (owner != "controller" && owner != "random") throw ModelError("unknown owner '" + owner + "'");
      m.add_state(s.at("id").get<std::string>(), owner == "random" ? Owner::Random : Owner::Controller);
    }
    m.finalize();
    for (const auto& e : j.at("edges")) {
      std::size_t from = m.state_index(e.at("from").get<std::string>());
      std::size_t to = m.state_index(e.at("to").get<std::string>());
      Weight w = e.at("weight").get<Weight>();
      Rational p(0);
      if (m.is_random(from)) {
        if (!e.contains("prob")) throw ModelError("edge " + e.at("id").dump() + " leaves a random state but has no prob");
        p = rational_from_json(e.at("prob"));
      } else if (e.contains("prob")) {
        throw ModelError("edge " + e.at("id").dump() + " leaves a controller state but has a prob");
      }
      m.add_edge(e.at("id").get<std::int64_t>(), from, to, std::move(w), p);
    }
    if (j.contains("initial")) m.initial = m.state_index(j.at("initial").get<std::string>());
    m.finalize();
    return m;
  } catch (const json::exception& ex) {
    throw ModelError(std::string("malformed MDP JSON: ") + ex.what());
  }
}

json mdp_to_json(const Mdp& mdp) {
  json j;
  j["dimension"] = mdp.dimension;
  j["states"] = json::array();
  for (const auto& s : mdp.states)
    j["states"].push_back({{"id", s.id}, {"owner", s.owner == Owner::Random ? "random" : "controller"}});
  j["edges"] = json::array();
  for (const auto& e : mdp.edges) {
    json je = {{"id", e.id}, {"from", mdp.states[e.from].id}, {"to", mdp.states[e.to].id}, {"weight", e.weight}};
    if (mdp.is_random(e.from)) je["prob"] = rational_json(e.prob);
    j["edges"].push_back(je);
  }
  if (mdp.initial) j["initial"] = mdp.states[*mdp.initial].id;
  return j;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& ex) {
    throw ModelError(path + ": " + ex.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ModelError("cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace mpmdp
