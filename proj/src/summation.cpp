#include "lagvort/summation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#ifdef __AVX512F__
#include <immintrin.h>
#endif

#include <fmt/format.h>

#include "lagvort/errors.hpp"
#include "lagvort/parallel.hpp"

namespace lagvort {

namespace {
constexpr double kInvTwoPi = 0.5 / std::numbers::pi;
constexpr int kMaxDepth = 60;
constexpr int kMaxOrder = 20;
// Rough far-field costs in units of one direct pair interaction; cheaper cells are summed directly.
constexpr double kFarCostPairs = 8.0;
constexpr double kCorrectionCostPairs = 2.0;
}  // namespace

void SummationStrategy::validate() const {
  if (kind == SummationKind::Direct) return;
  if (!(theta > 0.0 && theta < 1.0)) throw ConfigError(fmt::format("treecode theta must lie in (0, 1), got {}", theta));
  if (order < 1 || order > kMaxOrder) {
    throw ConfigError(fmt::format("treecode order must lie in [1, {}], got {}", kMaxOrder, order));
  }
  if (leaf_size < 1) throw ConfigError("treecode leaf size must be positive");
}

std::string SummationStrategy::name() const { return kind == SummationKind::Direct ? "direct" : "treecode"; }

SourceSet SourceSet::build(const Domain& domain, std::span<const Vec2> positions, std::span<const double> circulation) {
  if (positions.size() != circulation.size()) throw Error("source positions and circulations differ in length");
  SourceSet s;
  const std::size_t n = positions.size();
  const std::size_t cap = domain.is_disk() ? 2 * n : n;
  s.x.reserve(cap);
  s.y.reserve(cap);
  s.gamma.reserve(cap);
  for (std::size_t j = 0; j < n; ++j) s.push(positions[j], circulation[j]);
  if (domain.is_disk()) {
    for (std::size_t j = 0; j < n; ++j) {
      if (circulation[j] == 0.0) continue;
      if (auto img = image_point(positions[j], domain.radius())) s.push(*img, -circulation[j]);
    }
  }
  return s;
}

Vec2 direct_sum(const double* xs, const double* ys, const double* gs, std::size_t n, double delta2, Vec2 target) {
#ifdef __AVX512F__
  // 1/r2 from the 14-bit reciprocal estimate and two Newton steps, accurate to about one ulp.
  const __m512d tx = _mm512_set1_pd(target.x);
  const __m512d ty = _mm512_set1_pd(target.y);
  const __m512d d2 = _mm512_set1_pd(delta2);
  const __m512d two = _mm512_set1_pd(2.0);
  const __m512d zero = _mm512_setzero_pd();
  __m512d su = zero;
  __m512d sv = zero;
  for (std::size_t j = 0; j < n; j += 8) {
    const __mmask8 live = n - j >= 8 ? __mmask8(0xff) : __mmask8((1u << (n - j)) - 1u);
    const __m512d dx = _mm512_sub_pd(tx, _mm512_maskz_loadu_pd(live, xs + j));
    const __m512d dy = _mm512_sub_pd(ty, _mm512_maskz_loadu_pd(live, ys + j));
    const __m512d r2 = _mm512_fmadd_pd(dx, dx, _mm512_fmadd_pd(dy, dy, d2));
    __m512d inv = _mm512_rcp14_pd(r2);
    inv = _mm512_mul_pd(inv, _mm512_fnmadd_pd(r2, inv, two));
    inv = _mm512_mul_pd(inv, _mm512_fnmadd_pd(r2, inv, two));
    const __mmask8 use = _mm512_mask_cmp_pd_mask(live, r2, zero, _CMP_GT_OQ);
    const __m512d f = _mm512_maskz_mul_pd(use, _mm512_maskz_loadu_pd(live, gs + j), inv);
    su = _mm512_fnmadd_pd(dy, f, su);
    sv = _mm512_fmadd_pd(dx, f, sv);
  }
  return {kInvTwoPi * _mm512_reduce_add_pd(su), kInvTwoPi * _mm512_reduce_add_pd(sv)};
#else
  double su = 0.0;
  double sv = 0.0;
  const double tx = target.x;
  const double ty = target.y;
#pragma omp simd reduction(+ : su, sv)
  for (std::size_t j = 0; j < n; ++j) {
    const double dx = tx - xs[j];
    const double dy = ty - ys[j];
    const double r2 = dx * dx + dy * dy + delta2;
    const double f = r2 > 0.0 ? gs[j] / r2 : 0.0;
    su -= dy * f;
    sv += dx * f;
  }
  return {kInvTwoPi * su, kInvTwoPi * sv};
#endif
}

Vec2 direct_sum(const SourceSet& sources, double delta, Vec2 target) {
  return direct_sum(sources.x.data(), sources.y.data(), sources.gamma.data(), sources.size(), delta * delta, target);
}

// ---------------------------------------------------------------------------------------------

TreeCode::TreeCode(const SourceSet& src, double delta, double theta, int order, int leaf_size)
    : delta_(delta), delta2_(delta * delta), theta_(theta), order_(order), leaf_size_(leaf_size) {
  correction_max_ = delta > 0.0 ? order_ : 0;
  tri_offset_.resize(order_ + 2);
  std::size_t off = 0;
  for (int a = 0; a <= order_; ++a) {
    tri_offset_[a] = off;
    off += static_cast<std::size_t>(order_ - a + 1);
  }
  tri_offset_[order_ + 1] = off;
  moments_per_node_ = off;
  binom_.assign(order_ + 1, std::vector<double>(order_ + 1, 0.0));
  for (int a = 0; a <= order_; ++a) {
    binom_[a][0] = 1.0;
    for (int k = 1; k <= a; ++k) binom_[a][k] = binom_[a - 1][k - 1] + (k <= a - 1 ? binom_[a - 1][k] : 0.0);
  }

  const std::size_t n = src.size();
  if (n == 0) return;
  Box box{{src.x[0], src.y[0]}, {src.x[0], src.y[0]}};
  for (std::size_t j = 1; j < n; ++j) box = merge(box, Box{{src.x[j], src.y[j]}, {src.x[j], src.y[j]}});
  const double side = std::max({box.width(), box.height(), 1e-300});
  box.hi = {box.lo.x + side, box.lo.y + side};

  std::vector<std::uint32_t> idx(n), scratch(n);
  for (std::size_t j = 0; j < n; ++j) idx[j] = static_cast<std::uint32_t>(j);
  nodes_.reserve(2 * n / std::max(1, leaf_size_) + 16);
  build(0, static_cast<std::uint32_t>(n), box, 0, idx, scratch, src);

  xs_.resize(n);
  ys_.resize(n);
  gs_.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    xs_[j] = src.x[idx[j]];
    ys_[j] = src.y[idx[j]];
    gs_[j] = src.gamma[idx[j]];
  }
  moments_.assign(nodes_.size() * moments_per_node_, {0.0, 0.0});
  // Children are stored after their parent, so a reverse sweep sees every child first.
  for (std::size_t i = nodes_.size(); i-- > 0;) compute_moments(i);
}

std::int32_t TreeCode::build(std::uint32_t begin, std::uint32_t end, Box box, int depth,
                             std::vector<std::uint32_t>& idx, std::vector<std::uint32_t>& scratch,
                             const SourceSet& src) {
  const auto self = static_cast<std::int32_t>(nodes_.size());
  nodes_.emplace_back();
  Node node;
  node.begin = begin;
  node.end = end;
  double sx = 0.0, sy = 0.0;
  for (std::uint32_t j = begin; j < end; ++j) {
    sx += src.x[idx[j]];
    sy += src.y[idx[j]];
  }
  const double count = static_cast<double>(end - begin);
  node.cx = sx / count;
  node.cy = sy / count;
  double r2 = 0.0;
  for (std::uint32_t j = begin; j < end; ++j) {
    const double dx = src.x[idx[j]] - node.cx;
    const double dy = src.y[idx[j]] - node.cy;
    r2 = std::max(r2, dx * dx + dy * dy);
  }
  node.radius = std::sqrt(r2);

  if (static_cast<int>(end - begin) > leaf_size_ && depth < kMaxDepth && node.radius > 0.0) {
    node.leaf = false;
    const double mx = 0.5 * (box.lo.x + box.hi.x);
    const double my = 0.5 * (box.lo.y + box.hi.y);
    // Stable four-way partition by quadrant: 0 = (lo,lo), 1 = (hi,lo), 2 = (lo,hi), 3 = (hi,hi).
    std::uint32_t counts[4] = {0, 0, 0, 0};
    auto quadrant = [&](std::uint32_t j) {
      return (src.x[j] >= mx ? 1 : 0) + (src.y[j] >= my ? 2 : 0);
    };
    for (std::uint32_t j = begin; j < end; ++j) ++counts[quadrant(idx[j])];
    std::uint32_t starts[5];
    starts[0] = begin;
    for (int q = 0; q < 4; ++q) starts[q + 1] = starts[q] + counts[q];
    std::uint32_t cursor[4] = {starts[0], starts[1], starts[2], starts[3]};
    for (std::uint32_t j = begin; j < end; ++j) scratch[cursor[quadrant(idx[j])]++] = idx[j];
    std::copy(scratch.begin() + begin, scratch.begin() + end, idx.begin() + begin);
    for (int q = 0; q < 4; ++q) {
      if (counts[q] == 0) continue;
      Box cb;
      cb.lo = {(q & 1) ? mx : box.lo.x, (q & 2) ? my : box.lo.y};
      cb.hi = {(q & 1) ? box.hi.x : mx, (q & 2) ? box.hi.y : my};
      node.child[q] = build(starts[q], starts[q + 1], cb, depth + 1, idx, scratch, src);
    }
  }
  nodes_[self] = node;
  return self;
}

void TreeCode::compute_moments(std::size_t i) {
  const Node& node = nodes_[i];
  std::complex<double>* m = moments_.data() + i * moments_per_node_;
  std::complex<double> sp[kMaxOrder + 1], sbp[kMaxOrder + 1];
  auto powers = [&](std::complex<double> s) {
    sp[0] = 1.0;
    sbp[0] = 1.0;
    for (int k = 1; k <= order_; ++k) {
      sp[k] = sp[k - 1] * s;
      sbp[k] = sbp[k - 1] * std::conj(s);
    }
  };
  if (node.leaf) {
    for (std::uint32_t j = node.begin; j < node.end; ++j) {
      powers({xs_[j] - node.cx, ys_[j] - node.cy});
      const double g = gs_[j];
      for (int a = 0; a <= order_; ++a) {
        const std::complex<double> ga = g * sp[a];
        const int bmax = std::min(order_ - a, correction_max_);
        for (int b = 0; b <= bmax; ++b) m[moment_index(a, b)] += ga * sbp[b];
      }
    }
    return;
  }
  // Shift child moments: s_parent = s_child + d with d = child centre - parent centre.
  for (std::int32_t c : node.child) {
    if (c < 0) continue;
    const Node& child = nodes_[c];
    const std::complex<double>* mc = moments_.data() + static_cast<std::size_t>(c) * moments_per_node_;
    powers({child.cx - node.cx, child.cy - node.cy});
    for (int a = 0; a <= order_; ++a) {
      const int bmax = std::min(order_ - a, correction_max_);
      for (int b = 0; b <= bmax; ++b) {
        std::complex<double> acc(0.0, 0.0);
        for (int i2 = 0; i2 <= a; ++i2) {
          std::complex<double> inner(0.0, 0.0);
          for (int j2 = 0; j2 <= b; ++j2) inner += binom_[b][j2] * sbp[b - j2] * mc[moment_index(i2, j2)];
          acc += binom_[a][i2] * sp[a - i2] * inner;
        }
        m[moment_index(a, b)] += acc;
      }
    }
  }
}

int TreeCode::remainder_order(const Node& node, double abs_w) const {
  if (delta2_ == 0.0) return -1;
  // Remainder g = f - 1/w is O(delta^2 / |w|^2) relative: take the smallest order m with
  // (m+2)^2 kappa^2 rho^(m+1) below a tenth of the Laurent truncation rho^(order+1).
  const double kappa = delta_ / abs_w;
  const double rho = node.radius / (abs_w - delta_);
  if (rho <= 0.0) return 0;
  const double target = 0.1 * std::pow(rho, order_ + 1);
  double est = kappa * kappa * rho;
  int pg = -1;
  while (pg < order_ && (pg + 2) * (pg + 2) * est > target) {
    ++pg;
    est *= rho;
  }
  return pg;
}

std::complex<double> TreeCode::far_field(std::size_t node_index, double wx, double wy, int pg) const {
  const std::complex<double>* m = moments_.data() + node_index * moments_per_node_;
  const std::complex<double> w(wx, wy);
  const std::complex<double> inv_w = 1.0 / w;

  // Laurent part: sum_a M_a0 / w^(a+1).
  std::complex<double> acc = m[moment_index(order_, 0)];
  for (int a = order_ - 1; a >= 0; --a) acc = acc * inv_w + m[moment_index(a, 0)];
  std::complex<double> total = acc * inv_w;

  if (pg < 0) return total;
  const double abs_w2 = wx * wx + wy * wy;
  const double q = 1.0 / (abs_w2 + delta2_);
  const double lambda = abs_w2 * q;
  const double one_minus_lambda = delta2_ * q;
  const std::complex<double> wb = std::conj(w);

  // b = 0: M_a0 w^-(a+1) (lambda^(a+1) - 1), with lambda^n - 1 = -(1-lambda) sum_{i<n} lambda^i.
  std::complex<double> inv_pow = inv_w;
  double geo = 1.0;
  double lam_pow = 1.0;
  for (int a = 0; a <= pg; ++a) {
    total += m[moment_index(a, 0)] * inv_pow * (-one_minus_lambda * geo);
    inv_pow *= inv_w;
    lam_pow *= lambda;
    geo += lam_pow;
  }
  if (pg == 0) return total;

  // b >= 1: Taylor coefficients of q = 1/(w wb + delta^2) from q (w wb + delta^2) = 1, then f = wb q.
  std::complex<double> qc[kMaxOrder + 1][kMaxOrder + 1];
  const std::complex<double> qd(q, 0.0);
  qc[0][0] = qd;
  for (int n = 1; n <= pg; ++n) {
    for (int i = 0; i <= n; ++i) {
      const int j = n - i;
      std::complex<double> acc2(0.0, 0.0);
      if (i > 0) acc2 += wb * qc[i - 1][j];
      if (j > 0) acc2 += w * qc[i][j - 1];
      if (i > 0 && j > 0) acc2 += qc[i - 1][j - 1];
      qc[i][j] = -q * acc2;
    }
  }
  for (int a = 0; a < pg; ++a) {
    for (int b = 1; a + b <= pg; ++b) {
      const std::complex<double> f = wb * qc[a][b] + qc[a][b - 1];
      const std::complex<double> term = m[moment_index(a, b)] * f;
      total += ((a + b) % 2 == 0) ? term : -term;
    }
  }
  return total;
}

Vec2 TreeCode::evaluate(Vec2 target) const {
  if (nodes_.empty()) return {};
  std::complex<double> far(0.0, 0.0);
  double su = 0.0, sv = 0.0;
  std::int32_t stack[4 * kMaxDepth + 8];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const std::int32_t ni = stack[--top];
    const Node& node = nodes_[ni];
    const double wx = target.x - node.cx;
    const double wy = target.y - node.cy;
    const double dist = std::sqrt(wx * wx + wy * wy);
    const std::uint32_t count = node.end - node.begin;
    bool use_far = false;
    int pg = -1;
    if (node.radius < theta_ * (dist - delta_)) {
      pg = remainder_order(node, dist);
      use_far = static_cast<double>(count) > kFarCostPairs + kCorrectionCostPairs * (pg + 1) * (pg + 1);
    }
    if (use_far) {
      far += far_field(static_cast<std::size_t>(ni), wx, wy, pg);
    } else if (node.leaf || node.radius < theta_ * (dist - delta_)) {
      const Vec2 v = direct_sum(xs_.data() + node.begin, ys_.data() + node.begin, gs_.data() + node.begin,
                                node.end - node.begin, delta2_, target);
      su += v.x;
      sv += v.y;
    } else {
      for (int q = 3; q >= 0; --q) {
        if (node.child[q] >= 0) stack[top++] = node.child[q];
      }
    }
  }
  // u - i v = S / (2 pi i)
  return {su + kInvTwoPi * far.imag(), sv + kInvTwoPi * far.real()};
}

namespace {

constexpr std::size_t kClusterSize = 32;

// Quadtree partition of target indices into leaves of at most kClusterSize points.
void cluster_targets(std::span<const Vec2> pts, std::vector<std::uint32_t>& idx, std::uint32_t begin,
                     std::uint32_t end, Box box, int depth, std::vector<std::pair<std::uint32_t, std::uint32_t>>& out) {
  if (end - begin <= kClusterSize || depth >= kMaxDepth) {
    out.emplace_back(begin, end);
    return;
  }
  const double mx = 0.5 * (box.lo.x + box.hi.x);
  const double my = 0.5 * (box.lo.y + box.hi.y);
  auto first = idx.begin() + begin;
  auto last = idx.begin() + end;
  auto split_y = std::partition(first, last, [&](std::uint32_t j) { return pts[j].y < my; });
  auto split_lo = std::partition(first, split_y, [&](std::uint32_t j) { return pts[j].x < mx; });
  auto split_hi = std::partition(split_y, last, [&](std::uint32_t j) { return pts[j].x < mx; });
  const std::uint32_t s[5] = {begin, static_cast<std::uint32_t>(split_lo - idx.begin()),
                              static_cast<std::uint32_t>(split_y - idx.begin()),
                              static_cast<std::uint32_t>(split_hi - idx.begin()), end};
  const Box quads[4] = {Box{box.lo, {mx, my}}, Box{{mx, box.lo.y}, {box.hi.x, my}},
                        Box{{box.lo.x, my}, {mx, box.hi.y}}, Box{{mx, my}, box.hi}};
  for (int q = 0; q < 4; ++q) {
    if (s[q + 1] > s[q]) cluster_targets(pts, idx, s[q], s[q + 1], quads[q], depth + 1, out);
  }
}

}  // namespace

struct TreeCode::Workspace {
  std::vector<double> u, v, fr, fi;
  std::vector<double> wx, wy, q, qr, qi;
  double cx = 0.0, cy = 0.0, radius = 0.0;
};

void TreeCode::evaluate(std::span<const Vec2> targets, std::span<Vec2> out) const {
  if (out.size() != targets.size()) throw Error("velocity output size mismatch");
  if (targets.empty()) return;
  if (nodes_.empty()) {
    std::fill(out.begin(), out.end(), Vec2{});
    return;
  }
  std::vector<std::uint32_t> idx(targets.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<std::uint32_t>(i);
  Box box{targets[0], targets[0]};
  for (const Vec2& t : targets) box = merge(box, Box{t, t});
  const double side = std::max({box.width(), box.height(), 1e-300});
  box.hi = {box.lo.x + side, box.lo.y + side};
  std::vector<std::pair<std::uint32_t, std::uint32_t>> clusters;
  cluster_targets(targets, idx, 0, static_cast<std::uint32_t>(idx.size()), box, 0, clusters);

  parallel_blocks(clusters.size(), [&](std::size_t cb, std::size_t ce) {
    Workspace ws;
    const std::size_t tri = static_cast<std::size_t>(order_ + 1) * (order_ + 2) / 2;
    for (auto* vec : {&ws.u, &ws.v, &ws.fr, &ws.fi, &ws.wx, &ws.wy, &ws.q}) vec->resize(kClusterSize);
    ws.qr.resize(tri * kClusterSize);
    ws.qi.resize(tri * kClusterSize);
    double tx[kClusterSize], ty[kClusterSize];
    for (std::size_t c = cb; c < ce; ++c) {
      const auto [begin, end] = clusters[c];
      const std::size_t n = end - begin;
      for (std::size_t k = 0; k < n; ++k) {
        tx[k] = targets[idx[begin + k]].x;
        ty[k] = targets[idx[begin + k]].y;
      }
      evaluate_cluster(tx, ty, n, ws);
      for (std::size_t k = 0; k < n; ++k) {
        out[idx[begin + k]] = {ws.u[k] + kInvTwoPi * ws.fi[k], ws.v[k] + kInvTwoPi * ws.fr[k]};
      }
    }
  });
}

void TreeCode::evaluate_cluster(const double* tx, const double* ty, std::size_t n, Workspace& ws) const {
  double sx = 0.0, sy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sx += tx[k];
    sy += ty[k];
  }
  const double cx = sx / static_cast<double>(n);
  const double cy = sy / static_cast<double>(n);
  double r2 = 0.0;
  for (std::size_t k = 0; k < n; ++k) r2 = std::max(r2, (tx[k] - cx) * (tx[k] - cx) + (ty[k] - cy) * (ty[k] - cy));
  const double rt = std::sqrt(r2);
  std::fill_n(ws.u.begin(), n, 0.0);
  std::fill_n(ws.v.begin(), n, 0.0);
  std::fill_n(ws.fr.begin(), n, 0.0);
  std::fill_n(ws.fi.begin(), n, 0.0);

  std::int32_t stack[4 * kMaxDepth + 8];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const std::int32_t ni = stack[--top];
    const Node& node = nodes_[ni];
    // Closest possible target distance; every target then satisfies the single-target criterion.
    const double dmin = std::hypot(cx - node.cx, cy - node.cy) - rt;
    const std::uint32_t count = node.end - node.begin;
    const bool accepted = node.radius < theta_ * (dmin - delta_);
    if (accepted) {
      const int pg = remainder_order(node, dmin);
      if (static_cast<double>(count) > kFarCostPairs + kCorrectionCostPairs * (pg + 1) * (pg + 1)) {
        far_field_cluster(static_cast<std::size_t>(ni), node, tx, ty, n, pg, ws);
        continue;
      }
    }
    if (accepted || node.leaf) {
      for (std::size_t k = 0; k < n; ++k) {
        const Vec2 v = direct_sum(xs_.data() + node.begin, ys_.data() + node.begin, gs_.data() + node.begin, count,
                                  delta2_, {tx[k], ty[k]});
        ws.u[k] += v.x;
        ws.v[k] += v.y;
      }
    } else {
      for (int q = 3; q >= 0; --q) {
        if (node.child[q] >= 0) stack[top++] = node.child[q];
      }
    }
  }
}

void TreeCode::far_field_cluster(std::size_t node_index, const Node& node, const double* tx, const double* ty,
                                 std::size_t n, int pg, Workspace& ws) const {
  const std::complex<double>* m = moments_.data() + node_index * moments_per_node_;
  double mr[kMaxOrder + 1], mi[kMaxOrder + 1];
  for (int a = 0; a <= order_; ++a) {
    mr[a] = m[moment_index(a, 0)].real();
    mi[a] = m[moment_index(a, 0)].imag();
  }
  const int p = order_;
  const double d2 = delta2_;
  const double ncx = node.cx, ncy = node.cy;
  double* fr = ws.fr.data();
  double* fi = ws.fi.data();
  double* wxs = ws.wx.data();
  double* wys = ws.wy.data();
  double* qs = ws.q.data();

#pragma omp simd
  for (std::size_t k = 0; k < n; ++k) {
    const double wx = tx[k] - ncx;
    const double wy = ty[k] - ncy;
    const double aw2 = wx * wx + wy * wy;
    const double iwr = wx / aw2;
    const double iwi = -wy / aw2;
    double ar = mr[p], ai = mi[p];
    for (int a = p - 1; a >= 0; --a) {
      const double nr = ar * iwr - ai * iwi + mr[a];
      ai = ar * iwi + ai * iwr + mi[a];
      ar = nr;
    }
    double tr = ar * iwr - ai * iwi;
    double ti = ar * iwi + ai * iwr;
    if (pg >= 0) {
      const double q = 1.0 / (aw2 + d2);
      const double lambda = aw2 * q;
      const double oml = d2 * q;
      double pr = iwr, pi = iwi;
      double geo = 1.0, lp = 1.0;
      for (int a = 0; a <= pg; ++a) {
        const double c = -oml * geo;
        tr += c * (mr[a] * pr - mi[a] * pi);
        ti += c * (mr[a] * pi + mi[a] * pr);
        const double npr = pr * iwr - pi * iwi;
        pi = pr * iwi + pi * iwr;
        pr = npr;
        lp *= lambda;
        geo += lp;
      }
      qs[k] = q;
    }
    wxs[k] = wx;
    wys[k] = wy;
    fr[k] += tr;
    fi[k] += ti;
  }
  if (pg < 1) return;

  // Taylor coefficients of q = 1/(w wb + delta^2), stored by total degree, targets innermost.
  double* qr = ws.qr.data();
  double* qi = ws.qi.data();
  auto slot = [n](int i, int j) { return (static_cast<std::size_t>(i + j) * (i + j + 1) / 2 + i) * n; };
  for (std::size_t k = 0; k < n; ++k) {
    qr[k] = qs[k];
    qi[k] = 0.0;
  }
  for (int deg = 1; deg <= pg; ++deg) {
    const double sign = (deg % 2 == 0) ? 1.0 : -1.0;
    for (int i = 0; i <= deg; ++i) {
      const int j = deg - i;
      double* cr = qr + slot(i, j);
      double* ci = qi + slot(i, j);
      const double* ar = i > 0 ? qr + slot(i - 1, j) : nullptr;
      const double* ai = i > 0 ? qi + slot(i - 1, j) : nullptr;
      const double* br = j > 0 ? qr + slot(i, j - 1) : nullptr;
      const double* bi = j > 0 ? qi + slot(i, j - 1) : nullptr;
      if (i > 0 && j > 0) {
        const double* dr = qr + slot(i - 1, j - 1);
        const double* di = qi + slot(i - 1, j - 1);
#pragma omp simd
        for (std::size_t k = 0; k < n; ++k) {
          // wb * A + w * B + D with wb = (x, -y), w = (x, y)
          const double x = wxs[k], y = wys[k];
          const double sr = x * ar[k] + y * ai[k] + x * br[k] - y * bi[k] + dr[k];
          const double si = x * ai[k] - y * ar[k] + x * bi[k] + y * br[k] + di[k];
          cr[k] = -qs[k] * sr;
          ci[k] = -qs[k] * si;
        }
      } else if (i > 0) {
#pragma omp simd
        for (std::size_t k = 0; k < n; ++k) {
          const double x = wxs[k], y = wys[k];
          cr[k] = -qs[k] * (x * ar[k] + y * ai[k]);
          ci[k] = -qs[k] * (x * ai[k] - y * ar[k]);
        }
      } else {
#pragma omp simd
        for (std::size_t k = 0; k < n; ++k) {
          const double x = wxs[k], y = wys[k];
          cr[k] = -qs[k] * (x * br[k] - y * bi[k]);
          ci[k] = -qs[k] * (x * bi[k] + y * br[k]);
        }
      }
      if (j == 0) continue;
      // f_ij = wb q_ij + q_i,j-1, weighted by (-1)^(i+j) M_ij.
      const std::complex<double> mij = sign * m[moment_index(i, j)];
      const double gr = mij.real(), gi = mij.imag();
#pragma omp simd
      for (std::size_t k = 0; k < n; ++k) {
        const double x = wxs[k], y = wys[k];
        const double f_r = x * cr[k] + y * ci[k] + br[k];
        const double f_i = x * ci[k] - y * cr[k] + bi[k];
        fr[k] += gr * f_r - gi * f_i;
        fi[k] += gr * f_i + gi * f_r;
      }
    }
  }
}

// ---------------------------------------------------------------------------------------------

VelocityField::VelocityField(const Domain& domain, double delta, std::span<const Vec2> positions,
                             std::span<const double> circulation, const SummationStrategy& strategy)
    : domain_(domain), delta_(delta), sources_(SourceSet::build(domain, positions, circulation)) {
  strategy.validate();
  if (strategy.kind == SummationKind::Treecode) {
    tree_ = std::make_unique<TreeCode>(sources_, delta, strategy.theta, strategy.order, strategy.leaf_size);
  }
}

Vec2 VelocityField::operator()(Vec2 x) const {
  return tree_ ? tree_->evaluate(x) : direct_sum(sources_, delta_, x);
}

void VelocityField::evaluate(std::span<const Vec2> targets, std::span<Vec2> out) const {
  if (out.size() != targets.size()) throw Error("velocity output size mismatch");
  for (const Vec2& t : targets) {
    if (!domain_.contains(t)) {
      throw DomainError(fmt::format("velocity target ({}, {}) lies outside the {}", t.x, t.y, domain_.name()));
    }
  }
  if (tree_) {
    tree_->evaluate(targets, out);
    return;
  }
  // Source chunks sized for the L2 cache; each target sums its chunks in a fixed order.
  constexpr std::size_t kChunk = 4096;
  constexpr std::size_t kTargetBlock = 64;
  const std::size_t ns = sources_.size();
  const double d2 = delta_ * delta_;
  parallel_blocks(targets.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t b0 = begin; b0 < end; b0 += kTargetBlock) {
      const std::size_t b1 = std::min(end, b0 + kTargetBlock);
      for (std::size_t i = b0; i < b1; ++i) out[i] = {};
      for (std::size_t c = 0; c < ns; c += kChunk) {
        const std::size_t len = std::min(kChunk, ns - c);
        for (std::size_t i = b0; i < b1; ++i) {
          out[i] += direct_sum(sources_.x.data() + c, sources_.y.data() + c, sources_.gamma.data() + c, len, d2, targets[i]);
        }
      }
    }
  });
}

std::vector<Vec2> VelocityField::evaluate(std::span<const Vec2> targets) const {
  std::vector<Vec2> out(targets.size());
  evaluate(targets, out);
  return out;
}

}  // namespace lagvort
