#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pgdcrnn/graph.hpp"

namespace pgdcrnn {

/// Great-circle distance in miles.
double haversine_miles(double lat1, double lon1, double lat2, double lon2);

/// Source of driving distances between nodes, in miles. May be asymmetric.
/// Implementations must be safe to call concurrently.
class DistanceProvider {
 public:
  virtual ~DistanceProvider() = default;
  /// Distance from node i to node j. Throws on failure; never returns a
  /// placeholder value.
  virtual double distance(std::size_t i, std::size_t j) const = 0;
};

/// Great-circle distance between the nodes' coordinates.
class HaversineDistance final : public DistanceProvider {
 public:
  explicit HaversineDistance(std::vector<SensorMeta> nodes);
  double distance(std::size_t i, std::size_t j) const override;

 private:
  std::vector<SensorMeta> nodes_;
};

/// Explicit table of directed distances; pairs not in the table are errors
/// (except i == j, which is 0).
class TableDistance final : public DistanceProvider {
 public:
  explicit TableDistance(std::size_t n_nodes) : n_(n_nodes) {}

  void set(std::size_t i, std::size_t j, double miles);
  /// Sets both directions.
  void set_symmetric(std::size_t i, std::size_t j, double miles);
  double distance(std::size_t i, std::size_t j) const override;

  /// Reads `from_id,to_id,miles` rows; ids resolved through `index`.
  static TableDistance from_csv(const std::string &path, const NodeIndex &index);

 private:
  std::size_t n_;
  std::map<std::pair<std::size_t, std::size_t>, double> table_;
};

/// Queries a routing service over HTTP:
///   GET <path>?src_lat=..&src_lon=..&dst_lat=..&dst_lon=..
/// The body is either a bare number or a JSON object with a "miles" field.
/// Connection failures, timeouts, non-200 statuses and unparsable bodies
/// all throw.
class RoutingClientDistance final : public DistanceProvider {
 public:
  RoutingClientDistance(std::string host, int port, std::vector<SensorMeta> nodes,
                        std::string path = "/distance",
                        std::chrono::milliseconds timeout = std::chrono::milliseconds(5000));
  double distance(std::size_t i, std::size_t j) const override;

 private:
  std::string host_;
  int port_;
  std::vector<SensorMeta> nodes_;
  std::string path_;
  std::chrono::milliseconds timeout_;
};

}  // namespace pgdcrnn
