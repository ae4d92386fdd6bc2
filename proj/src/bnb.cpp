#include "cfld/bnb.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <queue>
#include <stdexcept>

namespace cfld {

Solution round_incumbent(const FractionalPoint& point) {
  const auto& y = point.y();
  std::vector<int> levels(static_cast<std::size_t>(y.rows()), Solution::kClosed);
  for (Eigen::Index j = 0; j < y.rows(); ++j) {
    if (y.row(j).sum() < 0.5) continue;
    Eigen::Index best = 0;
    for (Eigen::Index r = 1; r < y.cols(); ++r)
      if (y(j, r) > y(j, best)) best = r;
    levels[static_cast<std::size_t>(j)] = static_cast<int>(best);
  }
  return Solution(std::move(levels));
}

namespace {

constexpr double kFractional = 1e-9;

struct Node {
  NodeFixings fixings;
  Matrix point;
  double bound = 0.0;
  std::uint32_t depth = 0;
  std::uint64_t seq = 0;
};

struct NodeOrder {
  // Max-heap comparator: "a is served after b".
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.seq > b.seq;
  }
};

/// Splits the allowed levels of facility j into two contiguous halves so that
/// each side keeps part of the fractional mass when there is any.
std::pair<LevelMask, LevelMask> split_levels(LevelMask levels, const Matrix& y, Eigen::Index j) {
  std::vector<std::size_t> pos;
  for (std::size_t r = 0; r < kMaxLevels; ++r)
    if (has_level(levels, r)) pos.push_back(r);
  double total = 0.0;
  for (auto r : pos) total += y(j, static_cast<Eigen::Index>(r));

  std::size_t best_t = pos.size() / 2;
  double best_score = std::numeric_limits<double>::infinity();
  double left = 0.0;
  for (std::size_t t = 1; t < pos.size(); ++t) {
    left += y(j, static_cast<Eigen::Index>(pos[t - 1]));
    const double right = total - left;
    if (left <= kFractional || right <= kFractional) continue;
    const double score = std::abs(left - 0.5 * total);
    if (score < best_score) {
      best_score = score;
      best_t = t;
    }
  }
  LevelMask lo = 0, hi = 0;
  for (std::size_t t = 0; t < pos.size(); ++t) (t < best_t ? lo : hi) |= LevelMask{1} << pos[t];
  return {lo, hi};
}

class BranchAndBound {
 public:
  BranchAndBound(const Instance& inst, const DerivedCoefficients& c, const BnBOptions& opt)
      : inst_(inst), c_(c), opt_(opt), nr_(inst.num_levels()) {}

  BnBReport run() {
    const auto start = std::chrono::steady_clock::now();
    const auto nj = inst_.num_candidates();

    offer(Solution::all_closed(nj));
    NodeFixings root_fix(nj, nr_);
    Node root;
    root.fixings = root_fix;
    if (evaluate(root, nullptr)) open_.push(std::move(root));

    while (!open_.empty()) {
      if (explored_ >= opt_.node_cap) break;
      Node node = open_.top();
      open_.pop();
      if (node.bound >= prune_level()) {
        pruned_min_ = std::min(pruned_min_, node.bound);
        continue;
      }
      for (auto& child : branch(node)) {
        if (explored_ >= opt_.node_cap) {
          // Unexplored children inherit the parent's bound.
          child.bound = node.bound;
          open_.push(std::move(child));
          continue;
        }
        if (evaluate(child, &node.point)) open_.push(std::move(child));
      }
    }

    BnBReport rep;
    rep.best_solution = best_;
    rep.best_profit = profit(inst_, c_, best_);
    rep.upper_bound = ub_;
    double lb = std::min(ub_, pruned_min_);
    if (!open_.empty()) lb = std::min(lb, open_.top().bound);
    rep.lower_bound = lb;
    rep.proven_gap = std::max(0.0, (ub_ - lb) / (1.0 + std::abs(ub_)));
    rep.proven = open_.empty() && rep.proven_gap <= opt_.rel_tol;
    rep.nodes_explored = explored_;
    rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
  }

 private:
  double prune_level() const { return ub_ - opt_.rel_tol * (1.0 + std::abs(ub_)); }

  void offer(const Solution& s) {
    const double v = min_objective(inst_, c_, s);
    if (v < ub_ || (v == ub_ && lex_less_y(s, best_))) {
      ub_ = v;
      best_ = s;
    }
  }

  /// Solves the node relaxation; returns false when the node is pruned.
  bool evaluate(Node& node, const Matrix* parent_point) {
    ++explored_;
    if (node.fixings.is_leaf()) {
      std::vector<int> lv(node.fixings.num_candidates(), Solution::kClosed);
      for (std::size_t j = 0; j < lv.size(); ++j)
        if (node.fixings[j].status == FacilityStatus::Open) lv[j] = std::countr_zero(node.fixings[j].levels);
      Solution s(std::move(lv));
      node.bound = min_objective(inst_, c_, s);
      if (opt_.on_node) opt_.on_node(node.fixings, node.bound);
      offer(s);
      pruned_min_ = std::min(pruned_min_, node.bound);
      return false;
    }

    const double comb = disjunction_bound(node.fixings);
    if (comb >= prune_level()) {
      node.bound = comb;
      if (opt_.on_node) opt_.on_node(node.fixings, node.bound);
      pruned_min_ = std::min(pruned_min_, node.bound);
      return false;
    }

    RelaxationOptions ro;
    ro.tol_gap = opt_.node_gap_tol;
    ro.max_iterations = opt_.node_max_iterations;
    ro.cutoff = prune_level();
    if (parent_point) ro.warm_start = *parent_point;
    auto res = solve_relaxation(inst_, c_, node.fixings, ro);
    node.bound = std::max(res.lower_bound, comb);
    if (opt_.on_node) opt_.on_node(node.fixings, node.bound);
    offer(round_incumbent(res.point));
    node.point = res.point.y();
    if (node.bound >= prune_level()) {
      pruned_min_ = std::min(pruned_min_, node.bound);
      return false;
    }
    return true;
  }

  /// Integer-valid bound from the disjunction "every free facility closes"
  /// or "some free facility opens": forced facilities pay their cheapest
  /// allowed cost, and capture is bounded by their highest allowed level.
  double disjunction_bound(const NodeFixings& fx) const {
    const auto nz = inst_.num_zones();
    const auto nj = fx.num_candidates();
    std::vector<double> z_forced(nz, 1.0), z_all(nz, 1.0);
    double forced_cost = 0.0;
    double cheapest_free = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < nj; ++j) {
      double cost = std::numeric_limits<double>::infinity();
      int top = -1;
      for (std::size_t r = 0; r < nr_; ++r) {
        if (!fx.allows_level(j, r)) continue;
        cost = std::min(cost, inst_.fixed_cost(j) + inst_.level_cost(j, r));
        top = static_cast<int>(r);
      }
      if (top < 0) continue;
      const bool forced = !fx.allows_closed(j);
      for (std::size_t i = 0; i < nz; ++i) {
        const double b = c_.b_at(i, j, static_cast<std::size_t>(top));
        z_all[i] += b;
        if (forced) z_forced[i] += b;
      }
      if (forced)
        forced_cost += cost;
      else
        cheapest_free = std::min(cheapest_free, cost);
    }
    double closed = forced_cost, opened = forced_cost + cheapest_free;
    for (std::size_t i = 0; i < nz; ++i) {
      const double a = inst_.zones()[i].buying_power;
      closed += a / z_forced[i];
      opened += a / z_all[i];
    }
    return std::min(closed, opened);
  }

  Node make_child(const Node& parent) {
    Node n;
    n.fixings = parent.fixings;
    n.depth = parent.depth + 1;
    n.seq = ++seq_;
    return n;
  }

  std::vector<Node> branch(const Node& node) {
    const auto& y = node.point;
    const auto& fx = node.fixings;
    const auto nj = static_cast<Eigen::Index>(fx.num_candidates());
    std::vector<Node> kids;

    // Facility branching on the most fractional opening mass.
    Eigen::Index pick = -1;
    double best = kFractional;
    for (Eigen::Index j = 0; j < nj; ++j) {
      if (fx[static_cast<std::size_t>(j)].status != FacilityStatus::Free) continue;
      const double s = y.row(j).sum();
      const double frac = std::min(s, 1.0 - s);
      if (frac > best) {
        best = frac;
        pick = j;
      }
    }
    if (pick >= 0) {
      const auto j = static_cast<std::size_t>(pick);
      kids.push_back(make_child(node));
      kids.back().fixings.close(j);
      kids.push_back(make_child(node));
      kids.back().fixings.open(j, fx[j].levels);
      return kids;
    }

    // Level branching on the facility with the most mass off its top level.
    best = kFractional;
    for (Eigen::Index j = 0; j < nj; ++j) {
      const auto& f = fx[static_cast<std::size_t>(j)];
      if (f.status == FacilityStatus::Closed || std::popcount(f.levels) < 2) continue;
      const double off = y.row(j).sum() - y.row(j).maxCoeff();
      if (off > best) {
        best = off;
        pick = j;
      }
    }
    if (pick < 0) {
      // Integral relaxation point that still could not be pruned: refine
      // the first facility with options left.
      for (Eigen::Index j = 0; j < nj && pick < 0; ++j) {
        const auto& f = fx[static_cast<std::size_t>(j)];
        if (f.status == FacilityStatus::Free || (f.status == FacilityStatus::Open && std::popcount(f.levels) > 1))
          pick = j;
      }
      const auto j = static_cast<std::size_t>(pick);
      if (fx[j].status == FacilityStatus::Free) {
        kids.push_back(make_child(node));
        kids.back().fixings.close(j);
        kids.push_back(make_child(node));
        kids.back().fixings.open(j, fx[j].levels);
        return kids;
      }
    }
    const auto j = static_cast<std::size_t>(pick);
    const auto [lo, hi] = split_levels(fx[j].levels, y, pick);
    if (fx[j].status == FacilityStatus::Free) {
      kids.push_back(make_child(node));
      kids.back().fixings.close(j);
    }
    kids.push_back(make_child(node));
    kids.back().fixings.open(j, lo);
    kids.push_back(make_child(node));
    kids.back().fixings.open(j, hi);
    return kids;
  }

  const Instance& inst_;
  const DerivedCoefficients& c_;
  const BnBOptions& opt_;
  std::size_t nr_;
  std::priority_queue<Node, std::vector<Node>, NodeOrder> open_;
  Solution best_;
  double ub_ = std::numeric_limits<double>::infinity();
  double pruned_min_ = std::numeric_limits<double>::infinity();
  std::uint64_t explored_ = 0;
  std::uint64_t seq_ = 0;
};

}  // namespace

BnBReport solve_bnb(const Instance& instance, const DerivedCoefficients& coeffs, const BnBOptions& options) {
  if (!(options.rel_tol > 0.0)) throw std::invalid_argument("rel_tol must be > 0");
  if (instance.num_levels() > kMaxLevels) throw std::invalid_argument("at most 64 attractiveness levels are supported");
  return BranchAndBound(instance, coeffs, options).run();
}

}  // namespace cfld
