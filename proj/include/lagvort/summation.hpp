#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lagvort/kernel.hpp"
#include "lagvort/vec2.hpp"

namespace lagvort {

enum class SummationKind { Direct, Treecode };

struct SummationStrategy {
  SummationKind kind = SummationKind::Direct;
  double theta = 0.5;  // accept a cell when radius < theta * (distance - delta)
  int order = 8;       // multipole truncation order
  int leaf_size = 32;

  static SummationStrategy direct() { return {}; }
  static SummationStrategy treecode(double theta = 0.5, int order = 8) {
    return {SummationKind::Treecode, theta, order, 32};
  }
  void validate() const;
  std::string name() const;
};

// Point sources in structure-of-arrays layout. On the disk the image sources (strength -gamma at
// R^2 y / |y|^2) are appended after the physical ones.
struct SourceSet {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> gamma;

  std::size_t size() const { return x.size(); }
  void push(Vec2 p, double g) {
    x.push_back(p.x);
    y.push_back(p.y);
    gamma.push_back(g);
  }
  static SourceSet build(const Domain& domain, std::span<const Vec2> positions, std::span<const double> circulation);
};

// sum_j gamma_j K_delta(target - y_j) over the plane kernel. Exact coincidences contribute nothing.
Vec2 direct_sum(const SourceSet& sources, double delta, Vec2 target);
Vec2 direct_sum(const double* xs, const double* ys, const double* gs, std::size_t n, double delta2, Vec2 target);

// Barnes-Hut quadtree with complex multipole expansions of the blob kernel
// conj(w) / (|w|^2 + delta^2). The unregularized part is an ordinary Laurent series; the
// delta-dependent remainder is expanded in (s, conj s) to an order chosen per interaction so that
// its truncation stays below the main series' error.
class TreeCode {
 public:
  TreeCode(const SourceSet& sources, double delta, double theta, int order, int leaf_size);

  Vec2 evaluate(Vec2 target) const;
  // Targets are grouped into small clusters that share one traversal; far-field expansions are
  // then evaluated for the whole cluster at once.
  void evaluate(std::span<const Vec2> targets, std::span<Vec2> out) const;
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    double cx = 0.0, cy = 0.0;
    double radius = 0.0;
    std::uint32_t begin = 0, end = 0;
    std::int32_t child[4] = {-1, -1, -1, -1};
    bool leaf = true;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end, Box box, int depth, std::vector<std::uint32_t>& idx,
                     std::vector<std::uint32_t>& scratch, const SourceSet& src);
  void compute_moments(std::size_t node);
  int remainder_order(const Node& node, double abs_w) const;
  std::complex<double> far_field(std::size_t node_index, double wx, double wy, int pg) const;
  struct Workspace;
  void evaluate_cluster(const double* tx, const double* ty, std::size_t n, Workspace& ws) const;
  void far_field_cluster(std::size_t node_index, const Node& node, const double* tx, const double* ty, std::size_t n,
                         int pg, Workspace& ws) const;
  std::size_t moment_index(int a, int b) const { return (tri_offset_[a] + b); }

  double delta_;
  double delta2_;
  double theta_;
  int order_;
  int leaf_size_;
  int correction_max_;  // highest (a + b) with b > 0 stored in the moment table
  std::vector<Node> nodes_;
  std::vector<double> xs_, ys_, gs_;
  std::vector<std::size_t> tri_offset_;
  std::vector<std::vector<double>> binom_;
  std::size_t moments_per_node_ = 0;
  std::vector<std::complex<double>> moments_;
};

// u(x) = sum_j gamma_j K_delta(x, y_j) for a fixed source configuration.
class VelocityField {
 public:
  VelocityField(const Domain& domain, double delta, std::span<const Vec2> positions,
                std::span<const double> circulation, const SummationStrategy& strategy);

  Vec2 operator()(Vec2 x) const;
  // Parallel over targets; throws DomainError for targets outside the closed domain.
  void evaluate(std::span<const Vec2> targets, std::span<Vec2> out) const;
  std::vector<Vec2> evaluate(std::span<const Vec2> targets) const;

  const Domain& domain() const { return domain_; }

 private:
  Domain domain_;
  double delta_;
  SourceSet sources_;
  std::unique_ptr<TreeCode> tree_;
};

}  // namespace lagvort
