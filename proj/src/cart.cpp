#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "pgdcrnn/analysis.hpp"
#include "pgdcrnn/error.hpp"

namespace pgdcrnn {

CartDataset records_to_dataset(const std::vector<ErrorRecord> &records) {
  CartDataset d;
  d.features = {{"cov", false, {}}, {"district", true, {}}, {"sensor_type", true, {}},
                {"lane_type", true, {}}};
  std::vector<std::map<std::string, int>> codes(4);
  auto code = [&](std::size_t f, const std::string &value) {
    auto [it, inserted] = codes[f].emplace(value, static_cast<int>(codes[f].size()));
    if (inserted) d.features[f].categories.push_back(value);
    return static_cast<double>(it->second);
  };
  for (const auto &r : records) {
    d.rows.push_back({r.cov, code(1, r.district), code(2, r.sensor_type), code(3, r.lane_type)});
    d.labels.push_back(r.mae_class);
  }
  return d;
}

int CartTree::predict(const std::vector<double> &row) const {
  if (nodes_.empty()) throw_config("empty decision tree");
  std::size_t i = 0;
  while (!nodes_[i].leaf) {
    const CartNode &n = nodes_[i];
    const double x = row.at(n.feature);
    const bool left = n.category >= 0 ? static_cast<int>(x) == n.category : x <= n.threshold;
    i = left ? n.left : n.right;
  }
  return nodes_[i].prediction;
}

std::size_t CartTree::depth() const {
  std::size_t d = 0;
  for (const auto &n : nodes_) d = std::max(d, n.depth);
  return d;
}

namespace {

double gini(const std::vector<std::size_t> &counts, std::size_t total) {
  if (total == 0) return 0.0;
  double s = 1.0;
  for (std::size_t c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    s -= p * p;
  }
  return s;
}

struct Split {
  double gain = 0.0;
  std::size_t feature = 0;
  double threshold = 0.0;
  int category = -1;
};

}  // namespace

class CartBuilder {
 public:
  CartBuilder(const CartDataset &data, std::size_t n_classes, std::size_t max_depth,
              std::size_t min_split)
      : data_(data), n_classes_(n_classes), max_depth_(max_depth), min_split_(min_split),
        gain_(data.features.size(), 0.0) {}

  CartTree build(std::vector<std::size_t> rows) {
    CartTree tree;
    grow(tree, std::move(rows), 0);
    return tree;
  }

  const std::vector<double> &gains() const { return gain_; }

 private:
  std::vector<std::size_t> counts(const std::vector<std::size_t> &rows) const {
    std::vector<std::size_t> c(n_classes_, 0);
    for (std::size_t r : rows) ++c[static_cast<std::size_t>(data_.labels[r])];
    return c;
  }

  Split best_split(const std::vector<std::size_t> &rows, const std::vector<std::size_t> &parent) const {
    const std::size_t n = rows.size();
    const double base = static_cast<double>(n) * gini(parent, n);
    Split best;
    for (std::size_t f = 0; f < data_.features.size(); ++f) {
      if (data_.features[f].categorical) {
        std::map<int, std::vector<std::size_t>> by_cat;
        for (std::size_t r : rows) {
          auto &c = by_cat[static_cast<int>(data_.rows[r][f])];
          if (c.empty()) c.assign(n_classes_, 0);
          ++c[static_cast<std::size_t>(data_.labels[r])];
        }
        if (by_cat.size() < 2) continue;
        for (const auto &[cat, left] : by_cat) {
          std::size_t nl = 0;
          std::vector<std::size_t> right(n_classes_);
          for (std::size_t k = 0; k < n_classes_; ++k) {
            nl += left[k];
            right[k] = parent[k] - left[k];
          }
          const double g = base - static_cast<double>(nl) * gini(left, nl) -
                           static_cast<double>(n - nl) * gini(right, n - nl);
          if (g > best.gain + 1e-12) best = {g, f, 0.0, cat};
        }
      } else {
        std::vector<std::size_t> order = rows;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
          return data_.rows[a][f] < data_.rows[b][f] || (data_.rows[a][f] == data_.rows[b][f] && a < b);
        });
        std::vector<std::size_t> left(n_classes_, 0), right = parent;
        for (std::size_t i = 0; i + 1 < n; ++i) {
          const auto lab = static_cast<std::size_t>(data_.labels[order[i]]);
          ++left[lab];
          --right[lab];
          const double x = data_.rows[order[i]][f], next = data_.rows[order[i + 1]][f];
          if (x == next) continue;
          const std::size_t nl = i + 1;
          const double g = base - static_cast<double>(nl) * gini(left, nl) -
                           static_cast<double>(n - nl) * gini(right, n - nl);
          if (g > best.gain + 1e-12) best = {g, f, x + (next - x) / 2.0, -1};
        }
      }
    }
    return best;
  }

  std::size_t grow(CartTree &tree, std::vector<std::size_t> rows, std::size_t depth) {
    const std::size_t id = tree.nodes_.size();
    tree.nodes_.emplace_back();
    CartNode node;
    node.depth = depth;
    node.class_counts = counts(rows);
    node.prediction = static_cast<int>(std::max_element(node.class_counts.begin(), node.class_counts.end()) -
                                       node.class_counts.begin());
    const bool pure = gini(node.class_counts, rows.size()) == 0.0;
    Split s;
    if (!pure && depth < max_depth_ && rows.size() >= min_split_) s = best_split(rows, node.class_counts);
    if (s.gain <= 0.0) {
      tree.nodes_[id] = std::move(node);
      return id;
    }
    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) {
      const double x = data_.rows[r][s.feature];
      const bool l = s.category >= 0 ? static_cast<int>(x) == s.category : x <= s.threshold;
      (l ? left : right).push_back(r);
    }
    gain_[s.feature] += s.gain;
    node.leaf = false;
    node.feature = s.feature;
    node.threshold = s.threshold;
    node.category = s.category;
    tree.nodes_[id] = node;
    const std::size_t l = grow(tree, std::move(left), depth + 1);
    const std::size_t r = grow(tree, std::move(right), depth + 1);
    tree.nodes_[id].left = l;
    tree.nodes_[id].right = r;
    return id;
  }

  const CartDataset &data_;
  std::size_t n_classes_;
  std::size_t max_depth_;
  std::size_t min_split_;
  std::vector<double> gain_;
};

namespace {

void check_dataset(const CartDataset &data) {
  if (data.rows.size() != data.labels.size()) throw_config("CART rows and labels differ in length");
  for (const auto &r : data.rows) {
    if (r.size() != data.features.size()) throw_config("CART row width does not match features");
  }
  for (int l : data.labels) {
    if (l < 0) throw_config("CART labels must be nonnegative");
  }
}

double accuracy(const CartTree &tree, const CartDataset &data, const std::vector<std::size_t> &rows) {
  if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t ok = 0;
  for (std::size_t r : rows) ok += tree.predict(data.rows[r]) == data.labels[r];
  return static_cast<double>(ok) / static_cast<double>(rows.size());
}

CartResult fit_rows(const CartDataset &data, const std::vector<std::size_t> &train,
                    const std::vector<std::size_t> &test, std::size_t max_depth,
                    std::size_t min_split) {
  check_dataset(data);
  if (train.empty()) throw_data("no rows to train the decision tree");
  int max_label = 0;
  for (int l : data.labels) max_label = std::max(max_label, l);
  CartBuilder builder(data, static_cast<std::size_t>(max_label) + 1, max_depth, std::max<std::size_t>(min_split, 2));
  CartResult res;
  res.tree = builder.build(train);
  const double total = std::accumulate(builder.gains().begin(), builder.gains().end(), 0.0);
  for (double g : builder.gains()) res.importances.push_back(total > 0.0 ? g / total : 0.0);
  for (const auto &f : data.features) res.feature_names.push_back(f.name);
  res.train_accuracy = accuracy(res.tree, data, train);
  res.test_accuracy = accuracy(res.tree, data, test);
  res.n_train = train.size();
  res.n_test = test.size();
  return res;
}

}  // namespace

CartResult fit_cart(const CartDataset &data, const std::vector<std::size_t> &rows,
                    std::size_t max_depth, std::size_t min_samples_split) {
  return fit_rows(data, rows, {}, max_depth, min_samples_split);
}

CartResult train_cart(const CartDataset &data, const CartOptions &options) {
  if (!(options.train_fraction > 0.0) || options.train_fraction > 1.0) {
    throw_config("train_fraction must lie in (0, 1]");
  }
  std::vector<std::size_t> idx(data.rows.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(options.seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  auto n_train = static_cast<std::size_t>(std::llround(options.train_fraction * static_cast<double>(idx.size())));
  n_train = std::clamp<std::size_t>(n_train, std::min<std::size_t>(1, idx.size()), idx.size());
  std::vector<std::size_t> train(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  return fit_rows(data, train, test, options.max_depth, options.min_samples_split);
}

}  // namespace pgdcrnn
