#pragma once

#include <json.hpp>
#include <string>

#include "mpmdp/model.hpp"

namespace mpmdp {

using json = nlohmann::json;

Mdp mdp_from_json(const json& j);  // throws ModelError on malformed input
json mdp_to_json(const Mdp& mdp);

json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& j);

json rational_json(const Rational& r);
Rational rational_from_json(const json& j);
json vector_json(const std::vector<Rational>& v);

}  // namespace mpmdp
