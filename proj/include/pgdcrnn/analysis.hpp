#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pgdcrnn/data.hpp"
#include "pgdcrnn/tensor.hpp"

namespace pgdcrnn {

struct Checkpoint;

struct CovResult {
  std::vector<double> cov;          // 0 where invalid
  std::vector<bool> valid;
  std::vector<std::string> errors;  // empty string where valid
};

/// Population sigma / mean per node over non-missing ticks. Nodes with a
/// zero mean (or no observations) are flagged, not fatal.
CovResult coefficient_of_variation(const TimeSeriesPanel &panel, const std::string &feature);

/// 0: [0, 1), 1: [1, 3), 2: [3, 5), 3: [5, inf).
int bin_mae(double mae);

struct ErrorRecord {
  std::string node_id;
  double mae = 0.0;
  int mae_class = 0;
  std::string sensor_type;
  std::string district;
  std::string lane_type;
  double cov = 0.0;
};

void write_error_records_csv(const std::string &path, const std::vector<ErrorRecord> &records);

struct CartFeature {
  std::string name;
  bool categorical = false;
  std::vector<std::string> categories;  // codes index this list
};

/// Row-major feature matrix; categorical cells hold category codes.
struct CartDataset {
  std::vector<CartFeature> features;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
};

/// Features in order: cov (numeric), district, sensor_type, lane_type.
CartDataset records_to_dataset(const std::vector<ErrorRecord> &records);

struct CartNode {
  bool leaf = true;
  std::size_t feature = 0;
  double threshold = 0.0;  // numeric: x <= threshold goes left
  int category = -1;       // categorical: x == category goes left
  std::size_t left = 0, right = 0;
  std::vector<std::size_t> class_counts;
  int prediction = 0;
  std::size_t depth = 0;
};

class CartTree {
 public:
  int predict(const std::vector<double> &row) const;
  std::size_t depth() const;
  const std::vector<CartNode> &nodes() const noexcept { return nodes_; }

 private:
  friend class CartBuilder;
  std::vector<CartNode> nodes_;
};

struct CartOptions {
  std::size_t max_depth = 8;
  double train_fraction = 0.8;
  std::uint64_t seed = 1;
  std::size_t min_samples_split = 2;
};

struct CartResult {
  CartTree tree;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;  // NaN when the test split is empty
  std::vector<std::string> feature_names;
  /// Normalized total Gini decrease per feature; all 0 without splits.
  std::vector<double> importances;
  std::size_t n_train = 0, n_test = 0;
};

/// Greedy Gini CART on a seeded train/test split.
CartResult train_cart(const CartDataset &data, const CartOptions &options = {});
/// Trains on the given rows only (no split); accuracy is on those rows.
CartResult fit_cart(const CartDataset &data, const std::vector<std::size_t> &rows,
                    std::size_t max_depth, std::size_t min_samples_split = 2);

/// True when (speed, flow) lies within `tolerance` (relative, on both axes)
/// of some point on the triangular speed-flow curve.
bool fd_envelope_contains(const FundamentalDiagram &fd, double speed, double flow, double tolerance);

struct FdRow {
  std::string node_id;
  std::int64_t timestamp = 0;  // target tick
  std::size_t step = 0;        // 1-based horizon step
  double speed = 0.0;
  double flow = 0.0;
};

/// Forecast (speed, flow) pairs of owned nodes, one row per forecast tick.
/// `predictions` is [S x T x N x Q] in original units for `windows`.
/// Throws "flow not forecast" unless the checkpoint outputs speed and flow.
std::vector<FdRow> emit_fundamental_diagram(const Checkpoint &ckpt, const WindowedDataset &windows,
                                            const Tensor &predictions);
void write_fd_csv(const std::string &path, const std::vector<FdRow> &rows);

struct BoxStats {
  std::size_t n = 0;
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
  double lower_whisker = 0.0, upper_whisker = 0.0;
  std::vector<double> outliers;  // ascending
};

/// Quartiles by linear interpolation between order statistics; whiskers
/// reach the most extreme values within 1.5 IQR of the box.
BoxStats mae_distribution_stats(std::vector<double> values);
void write_box_csv(const std::string &path, const std::vector<std::string> &labels,
                   const std::vector<BoxStats> &stats);

}  // namespace pgdcrnn
