#include "pgdcrnn/distance.hpp"

#include <cmath>
#include <numbers>

#include "httplib.h"
#include "json.hpp"
#include "pgdcrnn/csv.hpp"
#include "pgdcrnn/error.hpp"

namespace pgdcrnn {

double haversine_miles(double lat1, double lon1, double lat2, double lon2) {
  constexpr double kEarthRadiusMiles = 3958.8;
  constexpr double kRad = std::numbers::pi / 180.0;
  const double dlat = (lat2 - lat1) * kRad;
  const double dlon = (lon2 - lon1) * kRad;
  const double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(lat1 * kRad) * std::cos(lat2 * kRad) * std::sin(dlon / 2) *
                       std::sin(dlon / 2);
  return 2.0 * kEarthRadiusMiles * std::asin(std::min(1.0, std::sqrt(a)));
}

HaversineDistance::HaversineDistance(std::vector<SensorMeta> nodes) : nodes_(std::move(nodes)) {}

double HaversineDistance::distance(std::size_t i, std::size_t j) const {
  if (i == j) return 0.0;
  const auto &a = nodes_.at(i);
  const auto &b = nodes_.at(j);
  return haversine_miles(a.latitude, a.longitude, b.latitude, b.longitude);
}

void TableDistance::set(std::size_t i, std::size_t j, double miles) {
  if (i >= n_ || j >= n_) throw_config("TableDistance: node index out of range");
  if (!(miles >= 0.0) || !std::isfinite(miles)) throw_data("distance must be finite and nonnegative");
  table_[{i, j}] = miles;
}

void TableDistance::set_symmetric(std::size_t i, std::size_t j, double miles) {
  set(i, j, miles);
  set(j, i, miles);
}

double TableDistance::distance(std::size_t i, std::size_t j) const {
  if (i == j) return 0.0;
  auto it = table_.find({i, j});
  if (it == table_.end()) {
    throw_data("no distance for pair (" + std::to_string(i) + "," + std::to_string(j) + ")");
  }
  return it->second;
}

TableDistance TableDistance::from_csv(const std::string &path, const NodeIndex &index) {
  const csv::Table t = csv::read_file(path);
  const std::size_t c_from = t.column("from_id");
  const std::size_t c_to = t.column("to_id");
  const std::size_t c_miles = t.column("miles");
  TableDistance out(index.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto &row = t.rows[r];
    const std::string where = path + ":" + std::to_string(t.lines[r]);
    if (!index.contains(row[c_from]) || !index.contains(row[c_to])) {
      continue;  // rows for sensors outside this dataset are ignored
    }
    const double miles = csv::parse_double(row[c_miles], where + " miles");
    if (miles < 0.0) throw_data(where + ": negative distance");
    out.set(index.index(row[c_from]), index.index(row[c_to]), miles);
  }
  return out;
}

RoutingClientDistance::RoutingClientDistance(std::string host, int port,
                                             std::vector<SensorMeta> nodes,
                                             std::string path,
                                             std::chrono::milliseconds timeout)
    : host_(std::move(host)),
      port_(port),
      nodes_(std::move(nodes)),
      path_(std::move(path)),
      timeout_(timeout) {}

double RoutingClientDistance::distance(std::size_t i, std::size_t j) const {
  if (i == j) return 0.0;
  const auto &a = nodes_.at(i);
  const auto &b = nodes_.at(j);
  // One client per call keeps the provider stateless across threads.
  httplib::Client client(host_, port_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  const std::string query = path_ + "?src_lat=" + csv::format_double(a.latitude) +
                            "&src_lon=" + csv::format_double(a.longitude) +
                            "&dst_lat=" + csv::format_double(b.latitude) +
                            "&dst_lon=" + csv::format_double(b.longitude);
  auto res = client.Get(query);
  const std::string what = "routing query " + a.sensor_id + "->" + b.sensor_id;
  if (!res) throw_data(what + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw_data(what + " returned HTTP " + std::to_string(res->status));
  double miles = 0.0;
  try {
    const auto body = nlohmann::json::parse(res->body);
    miles = body.is_object() ? body.at("miles").get<double>() : body.get<double>();
  } catch (const nlohmann::json::exception &) {
    throw_data(what + ": unparsable body '" + res->body + "'");
  }
  if (!std::isfinite(miles) || miles < 0.0) throw_data(what + ": invalid distance");
  return miles;
}

}  // namespace pgdcrnn
