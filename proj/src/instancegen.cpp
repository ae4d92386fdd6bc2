#include "cfld/instancegen.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace cfld {

using nlohmann::json;

SplitMix64 make_stream(std::uint64_t seed, GenStream stream) noexcept {
  // Decorrelate neighbouring seeds and streams by running the pair through
  // one finalizer round before use.
  SplitMix64 mixer(seed ^ (0xD1B54A32D192ED03ULL * (static_cast<std::uint64_t>(stream) + 1)));
  return SplitMix64(mixer.next());
}

void GenConfig::validate() const {
  if (n_zones < 1 || n_candidates < 1 || n_competitors < 1)
    throw InvalidInstance("zone, candidate and competitor counts must all be >= 1");
  if (level_values.empty()) throw InvalidInstance("at least one level value is required");
  for (std::size_t r = 0; r < level_values.size(); ++r) {
    if (!(level_values[r] > 0.0)) throw InvalidInstance("level values must be > 0");
    if (r > 0 && !(level_values[r] > level_values[r - 1]))
      throw InvalidInstance("level values must be strictly ascending");
  }
  if (!(square_side > 0.0)) throw InvalidInstance("square side must be > 0");
  if (!(level_cost_multiplier >= 0.0)) throw InvalidInstance("level cost multiplier must be >= 0");
  if (!(fixed_cost >= 0.0)) throw InvalidInstance("fixed cost must be >= 0");
  if (!(buying_power_lo >= 0.0 && buying_power_hi >= buying_power_lo))
    throw InvalidInstance("buying power range is invalid");
  if (!(attractiveness_lo > 0.0 && attractiveness_hi >= attractiveness_lo))
    throw InvalidInstance("competitor attractiveness range is invalid");
}

namespace {

Point2 draw_point(SplitMix64& rng, double side) {
  // x before y.
  const double x = rng.uniform(0.0, side);
  const double y = rng.uniform(0.0, side);
  return {x, y};
}

/// Draws a facility location that keeps every zone at least kMinDistance away.
Point2 draw_facility(SplitMix64& rng, double side, const std::vector<Zone>& zones, const char* what, std::size_t index) {
  for (int attempt = 0; attempt < kMaxResampleAttempts; ++attempt) {
    const Point2 p = draw_point(rng, side);
    bool ok = true;
    for (const auto& z : zones)
      if (euclidean(*z.location, p) < kMinDistance) {
        ok = false;
        break;
      }
    if (ok) return p;
  }
  throw GenerationError(std::string("could not place ") + what + " " + std::to_string(index + 1) +
                        " clear of the distance floor after " + std::to_string(kMaxResampleAttempts) + " attempts");
}

}  // namespace

Instance generate(const GenConfig& config) {
  config.validate();
  const double side = config.square_side;

  std::vector<Zone> zones(config.n_zones);
  std::vector<CandidateSite> candidates(config.n_candidates);
  std::vector<Competitor> competitors(config.n_competitors);

  auto zone_rng = make_stream(config.seed, GenStream::ZoneLocations);
  for (std::size_t i = 0; i < zones.size(); ++i) {
    zones[i].id = "Z" + std::to_string(i + 1);
    zones[i].location = draw_point(zone_rng, side);
  }
  auto cand_rng = make_stream(config.seed, GenStream::CandidateLocations);
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    candidates[j].id = "S" + std::to_string(j + 1);
    candidates[j].fixed_cost = config.fixed_cost;
    candidates[j].location = draw_facility(cand_rng, side, zones, "candidate", j);
  }
  auto comp_rng = make_stream(config.seed, GenStream::CompetitorLocations);
  for (std::size_t k = 0; k < competitors.size(); ++k) {
    competitors[k].id = "K" + std::to_string(k + 1);
    competitors[k].location = draw_facility(comp_rng, side, zones, "competitor", k);
  }
  auto power_rng = make_stream(config.seed, GenStream::BuyingPower);
  for (auto& z : zones) z.buying_power = power_rng.uniform(config.buying_power_lo, config.buying_power_hi);
  auto attr_rng = make_stream(config.seed, GenStream::CompetitorAttractiveness);
  for (auto& c : competitors) c.attractiveness = attr_rng.uniform(config.attractiveness_lo, config.attractiveness_hi);

  const auto nr = config.level_values.size();
  Matrix costs(static_cast<Eigen::Index>(config.n_candidates), static_cast<Eigen::Index>(nr));
  for (Eigen::Index j = 0; j < costs.rows(); ++j)
    for (std::size_t r = 0; r < nr; ++r)
      costs(j, static_cast<Eigen::Index>(r)) = config.level_cost_multiplier * config.level_values[r];

  return Instance::from_locations(std::move(zones), std::move(candidates), std::move(competitors), config.level_values,
                                  std::move(costs));
}

// ---------------------------------------------------------------------------
// Canonical file format
// ---------------------------------------------------------------------------

namespace {

json location_json(const std::optional<Point2>& p) {
  if (!p) return nullptr;
  return json::array({p->x, p->y});
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

const json& field(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw FormatError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw FormatError(path + "." + key, "missing field");
  return *it;
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw FormatError(path, "expected a number");
  return v.get<double>();
}

std::string text(const json& v, const std::string& path) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw FormatError(path, "expected a string id");
}

const json& array(const json& v, const std::string& path) {
  if (!v.is_array()) throw FormatError(path, "expected an array");
  return v;
}

std::optional<Point2> location(const json& obj, const std::string& path) {
  auto it = obj.find("location");
  if (it == obj.end() || it->is_null()) return std::nullopt;
  const auto& a = array(*it, path + ".location");
  if (a.size() != 2) throw FormatError(path + ".location", "expected [x, y]");
  return Point2{number(a[0], path + ".location[0]"), number(a[1], path + ".location[1]")};
}

Matrix read_matrix(const json& v, std::size_t rows, std::size_t cols, const std::string& path) {
  const auto& a = array(v, path);
  if (a.size() != rows) throw FormatError(path, "expected " + std::to_string(rows) + " rows");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    const std::string rp = path + "[" + std::to_string(i) + "]";
    const auto& row = array(a[i], rp);
    if (row.size() != cols) throw FormatError(rp, "expected " + std::to_string(cols) + " columns");
    for (std::size_t j = 0; j < cols; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = number(row[j], rp + "[" + std::to_string(j) + "]");
  }
  return m;
}

std::string line_context(const std::string& src, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t p = 0; p < byte && p < src.size(); ++p) {
    if (src[p] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

std::string instance_to_json(const Instance& inst) {
  json doc;
  doc["schema"] = kInstanceSchema;
  doc["levels"] = inst.levels();
  json zones = json::array();
  for (const auto& z : inst.zones())
    zones.push_back({{"id", z.id}, {"buying_power", z.buying_power}, {"location", location_json(z.location)}});
  doc["zones"] = std::move(zones);
  json cands = json::array();
  for (std::size_t j = 0; j < inst.num_candidates(); ++j) {
    const auto& c = inst.candidates()[j];
    std::vector<double> costs(inst.num_levels());
    for (std::size_t r = 0; r < costs.size(); ++r) costs[r] = inst.level_cost(j, r);
    cands.push_back({{"id", c.id}, {"fixed_cost", c.fixed_cost}, {"level_costs", costs}, {"location", location_json(c.location)}});
  }
  doc["candidates"] = std::move(cands);
  json comps = json::array();
  for (const auto& c : inst.competitors())
    comps.push_back({{"id", c.id}, {"attractiveness", c.attractiveness}, {"location", location_json(c.location)}});
  doc["competitors"] = std::move(comps);
  doc["dist_candidates"] = matrix_json(inst.dist_candidates());
  doc["dist_competitors"] = matrix_json(inst.dist_competitors());
  return doc.dump(1) + "\n";
}

Instance instance_from_json(const std::string& src) {
  json doc;
  try {
    doc = json::parse(src);
  } catch (const json::parse_error& e) {
    throw FormatError(line_context(src, e.byte == 0 ? 0 : e.byte - 1), "malformed JSON (" + std::string(e.what()) + ")");
  }
  if (!doc.is_object()) throw FormatError("$", "expected a JSON object");
  const auto& schema = field(doc, "schema", "$");
  if (!schema.is_string()) throw FormatError("$.schema", "expected a string");
  if (schema.get<std::string>() != kInstanceSchema)
    throw SchemaVersionError("unsupported instance schema '" + schema.get<std::string>() + "', expected '" +
                             kInstanceSchema + "'");

  std::vector<double> levels;
  for (std::size_t r = 0; const auto& v : array(field(doc, "levels", "$"), "$.levels"))
    levels.push_back(number(v, "$.levels[" + std::to_string(r++) + "]"));

  std::vector<Zone> zones;
  for (const auto& z : array(field(doc, "zones", "$"), "$.zones")) {
    const std::string p = "$.zones[" + std::to_string(zones.size()) + "]";
    zones.push_back({text(field(z, "id", p), p + ".id"), number(field(z, "buying_power", p), p + ".buying_power"),
                     location(z, p)});
  }

  std::vector<CandidateSite> cands;
  Matrix costs;
  const auto& cand_json = array(field(doc, "candidates", "$"), "$.candidates");
  costs.resize(static_cast<Eigen::Index>(cand_json.size()), static_cast<Eigen::Index>(levels.size()));
  for (const auto& c : cand_json) {
    const std::string p = "$.candidates[" + std::to_string(cands.size()) + "]";
    const auto& lc = array(field(c, "level_costs", p), p + ".level_costs");
    if (lc.size() != levels.size()) throw FormatError(p + ".level_costs", "expected one cost per level");
    for (std::size_t r = 0; r < lc.size(); ++r)
      costs(static_cast<Eigen::Index>(cands.size()), static_cast<Eigen::Index>(r)) =
          number(lc[r], p + ".level_costs[" + std::to_string(r) + "]");
    cands.push_back({text(field(c, "id", p), p + ".id"), number(field(c, "fixed_cost", p), p + ".fixed_cost"), location(c, p)});
  }

  std::vector<Competitor> comps;
  for (const auto& c : array(field(doc, "competitors", "$"), "$.competitors")) {
    const std::string p = "$.competitors[" + std::to_string(comps.size()) + "]";
    comps.push_back({text(field(c, "id", p), p + ".id"), number(field(c, "attractiveness", p), p + ".attractiveness"),
                     location(c, p)});
  }

  const bool has_dc = doc.contains("dist_candidates"), has_dk = doc.contains("dist_competitors");
  if (has_dc != has_dk) throw FormatError("$", "dist_candidates and dist_competitors must be given together");
  if (!has_dc) {
    return Instance::from_locations(std::move(zones), std::move(cands), std::move(comps), std::move(levels),
                                    std::move(costs));
  }
  Matrix dc = read_matrix(doc["dist_candidates"], zones.size(), cands.size(), "$.dist_candidates");
  Matrix dk = read_matrix(doc["dist_competitors"], zones.size(), comps.size(), "$.dist_competitors");
  return Instance(std::move(zones), std::move(cands), std::move(comps), std::move(levels), std::move(costs), std::move(dc),
                  std::move(dk));
}

void save_instance(const Instance& instance, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << instance_to_json(instance);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Instance load_instance(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return instance_from_json(buf.str());
}

}  // namespace cfld
