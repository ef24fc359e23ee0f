#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "panograph/errors.hpp"
#include "panograph/pose2.hpp"
#include "panograph/rng.hpp"

namespace panograph {

// Raw pose-decoder output: rotation vector is not necessarily unit length.
struct PosePrediction {
  Vec2 r_hat{1.0, 0.0};
  Vec2 t_hat{0.0, 0.0};
};

struct LossWeights {
  double beta_r = 0.1;  // relative vs. global node loss
  double beta_ac = 1.0;
  double beta_b = 1.0;
  double beta_cv = 1.0;
};

enum class Reduction { Sum, Mean };

using PredMap = std::map<std::string, PosePrediction>;

// Gradient containers mirror the prediction containers: grad.at(id).r_hat is
// d(loss)/d(r_hat of id), etc.
struct NodeLossResult {
  double value = 0.0;
  PredMap grad;
};

struct RowsLossResult {
  double value = 0.0;
  std::vector<std::vector<double>> grad;
};

namespace detail {

inline void check_same_nodes(const PredMap& pred, const PoseMap& gt) {
  if (pred.size() != gt.size()) throw ShapeError("losses: node sets differ in size");
  for (const auto& [id, unused] : pred) {
    if (!gt.count(id)) throw ShapeError("losses: node '" + id + "' missing from ground truth");
  }
}

inline void check_same_shape(const std::vector<std::vector<double>>& a,
                             const std::vector<std::vector<double>>& b, const char* what) {
  if (a.size() != b.size()) throw ShapeError(std::string(what) + ": row counts differ");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) {
      throw ShapeError(std::string(what) + ": row " + std::to_string(i) + " lengths differ");
    }
  }
}

}  // namespace detail

// Squared pose error in the shared frame, summed over non-origin nodes.
inline NodeLossResult global_node_loss(const PredMap& pred, const PoseMap& gt,
                                       const std::string& origin) {
  detail::check_same_nodes(pred, gt);
  NodeLossResult out;
  for (const auto& [id, p] : pred) {
    PosePrediction g;  // zero gradient rows for the origin
    g.r_hat.setZero();
    g.t_hat.setZero();
    if (id != origin) {
      const Pose2& truth = gt.at(id);
      const Vec2 dr = p.r_hat - truth.r.vec();
      const Vec2 dt = p.t_hat - truth.t;
      out.value += dr.squaredNorm() + dt.squaredNorm();
      g.r_hat = 2.0 * dr;
      g.t_hat = 2.0 * dt;
    }
    out.grad[id] = g;
  }
  return out;
}

// Squared error of predicted relative poses over all ordered pairs. Predicted
// relatives come from the normalized predicted globals, so the gradient flows
// through the normalization.
inline NodeLossResult relative_node_loss(const PredMap& pred, const PoseMap& gt) {
  detail::check_same_nodes(pred, gt);
  NodeLossResult out;
  std::map<std::string, Vec2> unit;  // normalized rotation vectors
  std::map<std::string, double> norm;
  for (const auto& [id, p] : pred) {
    const double n = p.r_hat.norm();
    if (n < 1e-9) throw DegenerateError("relative_node_loss: r_hat of '" + id + "' is ~zero");
    unit[id] = p.r_hat / n;
    norm[id] = n;
    out.grad[id] = PosePrediction{Vec2::Zero(), Vec2::Zero()};
  }
  std::map<std::string, Vec2> grad_unit;
  for (const auto& [id, unused] : pred) grad_unit[id] = Vec2::Zero();

  for (const auto& [i, pi] : pred) {
    for (const auto& [j, pj] : pred) {
      if (i == j) continue;
      const Vec2& ni = unit.at(i);
      const Vec2& nj = unit.at(j);
      const double a = ni.x(), b = ni.y();
      // Predicted relative rotation vector and translation.
      const Vec2 u(a * nj.x() + b * nj.y(), a * nj.y() - b * nj.x());
      const Vec2 dt = pj.t_hat - pi.t_hat;
      const Vec2 v(a * dt.x() + b * dt.y(), -b * dt.x() + a * dt.y());

      const Pose2 truth = relative(gt.at(i), gt.at(j));
      const Vec2 du = u - truth.r.vec();
      const Vec2 dv = v - truth.t;
      out.value += du.squaredNorm() + dv.squaredNorm();

      const Vec2 gu = 2.0 * du;
      const Vec2 gv = 2.0 * dv;
      // d u / d n_i = [[nj.x, nj.y], [nj.y, -nj.x]] and its transpose acts on gu.
      grad_unit.at(i) += Vec2(nj.x() * gu.x() + nj.y() * gu.y(),
                              nj.y() * gu.x() - nj.x() * gu.y());
      // d u / d n_j = [[a, b], [-b, a]]^T applied to gu.
      grad_unit.at(j) += Vec2(a * gu.x() - b * gu.y(), b * gu.x() + a * gu.y());
      // d v / d n_i = [[dt.x, dt.y], [dt.y, -dt.x]]^T applied to gv.
      grad_unit.at(i) += Vec2(dt.x() * gv.x() + dt.y() * gv.y(),
                              dt.y() * gv.x() - dt.x() * gv.y());
      // d v / d t_j = R^T, d v / d t_i = -R^T; transpose of R^T is R.
      const Vec2 r_gv(a * gv.x() - b * gv.y(), b * gv.x() + a * gv.y());
      out.grad.at(j).t_hat += r_gv;
      out.grad.at(i).t_hat -= r_gv;
    }
  }
  // Through the normalization: d n / d r_hat = (I - n n^T) / |r_hat|.
  for (const auto& [id, g] : grad_unit) {
    const Vec2& n = unit.at(id);
    const Vec2 projected = g - n * n.dot(g);
    out.grad.at(id).r_hat += projected / norm.at(id);
  }
  return out;
}

inline double node_loss(const PredMap& pred, const PoseMap& gt, const std::string& origin,
                        const LossWeights& weights = {}) {
  return global_node_loss(pred, gt, origin).value +
         weights.beta_r * relative_node_loss(pred, gt).value;
}

// L1 over all rows and columns (one row per ordered pair).
inline RowsLossResult boundary_loss(const std::vector<std::vector<double>>& pred,
                                    const std::vector<std::vector<double>>& gt,
                                    Reduction reduction = Reduction::Sum) {
  detail::check_same_shape(pred, gt, "boundary_loss");
  RowsLossResult out;
  std::size_t count = 0;
  out.grad.resize(pred.size());
  for (std::size_t r = 0; r < pred.size(); ++r) {
    out.grad[r].resize(pred[r].size(), 0.0);
    for (std::size_t k = 0; k < pred[r].size(); ++k) {
      const double d = pred[r][k] - gt[r][k];
      out.value += std::abs(d);
      out.grad[r][k] = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
      ++count;
    }
  }
  if (reduction == Reduction::Mean && count > 0) {
    out.value /= static_cast<double>(count);
    for (auto& row : out.grad) {
      for (double& g : row) g /= static_cast<double>(count);
    }
  }
  return out;
}

// L1 on angular correspondence, masked to ground-truth co-visible columns
// (alpha has no target outside the overlap).
inline RowsLossResult ac_loss(const std::vector<std::vector<double>>& pred,
                              const std::vector<std::vector<double>>& gt,
                              const std::vector<std::vector<double>>& covis_mask,
                              Reduction reduction = Reduction::Sum) {
  detail::check_same_shape(pred, gt, "ac_loss");
  detail::check_same_shape(pred, covis_mask, "ac_loss mask");
  RowsLossResult out;
  std::size_t count = 0;
  out.grad.resize(pred.size());
  for (std::size_t r = 0; r < pred.size(); ++r) {
    out.grad[r].resize(pred[r].size(), 0.0);
    for (std::size_t k = 0; k < pred[r].size(); ++k) {
      if (covis_mask[r][k] == 0.0) continue;
      const double d = pred[r][k] - gt[r][k];
      out.value += std::abs(d);
      out.grad[r][k] = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
      ++count;
    }
  }
  if (reduction == Reduction::Mean && count > 0) {
    out.value /= static_cast<double>(count);
    for (auto& row : out.grad) {
      for (double& g : row) g /= static_cast<double>(count);
    }
  }
  return out;
}

inline constexpr double kBceEps = 1e-7;

// Binary cross entropy per column, predictions clamped to [eps, 1-eps].
inline RowsLossResult covis_loss(const std::vector<std::vector<double>>& pred,
                                 const std::vector<std::vector<double>>& gt,
                                 Reduction reduction = Reduction::Sum) {
  detail::check_same_shape(pred, gt, "covis_loss");
  RowsLossResult out;
  std::size_t count = 0;
  out.grad.resize(pred.size());
  for (std::size_t r = 0; r < pred.size(); ++r) {
    out.grad[r].resize(pred[r].size(), 0.0);
    for (std::size_t k = 0; k < pred[r].size(); ++k) {
      const double p = gt[r][k];
      const double q = std::clamp(pred[r][k], kBceEps, 1.0 - kBceEps);
      out.value += -(p * std::log(q) + (1.0 - p) * std::log(1.0 - q));
      const bool clamped = pred[r][k] < kBceEps || pred[r][k] > 1.0 - kBceEps;
      out.grad[r][k] = clamped ? 0.0 : (q - p) / (q * (1.0 - q));
      ++count;
    }
  }
  if (reduction == Reduction::Mean && count > 0) {
    out.value /= static_cast<double>(count);
    for (auto& row : out.grad) {
      for (double& g : row) g /= static_cast<double>(count);
    }
  }
  return out;
}

// Weighted combination of the dense edge losses.
inline double edge_loss(double ac, double boundary, double covis,
                        const LossWeights& weights = {}) {
  return weights.beta_ac * ac + weights.beta_b * boundary + weights.beta_cv * covis;
}

// ---------------------------------------------------------------------------
// Finite-difference verification harness (drives the loss-check command).

struct FdCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  int instances = 0;
};

namespace detail {

inline double fd_rel_err(const std::function<double(double)>& shift, double analytic,
                         double step = 1e-6) {
  const double fd = (shift(step) - shift(-step)) / (2.0 * step);
  return std::abs(fd - analytic) / std::max({1.0, std::abs(fd), std::abs(analytic)});
}

}  // namespace detail

// Max relative error between analytic gradients and central differences over
// seeded random instances, one entry per loss.
inline std::vector<FdCheckEntry> losses_fd_report(std::uint64_t seed, int instances = 100) {
  Rng rng(seed);
  std::vector<FdCheckEntry> report = {{"global_node_loss", 0.0, instances},
                                      {"relative_node_loss", 0.0, instances},
                                      {"boundary_loss", 0.0, instances},
                                      {"ac_loss", 0.0, instances},
                                      {"covis_loss", 0.0, instances}};
  for (int inst = 0; inst < instances; ++inst) {
    const int n = 3 + rng.uniform_int(3);
    PredMap pred;
    PoseMap gt;
    std::vector<std::string> ids;
    for (int k = 0; k < n; ++k) {
      const std::string id = "n" + std::to_string(k);
      ids.push_back(id);
      pred[id] = PosePrediction{{rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)},
                                {rng.uniform(-3, 3), rng.uniform(-3, 3)}};
      if (pred[id].r_hat.norm() < 0.1) pred[id].r_hat = {1.0, 0.2};
      gt[id] = Pose2::from_angle(rng.uniform(-kPi, kPi),
                                 {rng.uniform(-3, 3), rng.uniform(-3, 3)});
    }
    const std::string origin = ids[0];

    const auto check_node_loss = [&](FdCheckEntry& entry, auto&& loss) {
      const auto base = loss(pred);
      for (const auto& id : ids) {
        for (int c = 0; c < 4; ++c) {
          const auto shift = [&](double eps) {
            PredMap moved = pred;
            if (c < 2) {
              moved[id].r_hat[c] += eps;
            } else {
              moved[id].t_hat[c - 2] += eps;
            }
            return loss(moved).value;
          };
          const double analytic =
              c < 2 ? base.grad.at(id).r_hat[c] : base.grad.at(id).t_hat[c - 2];
          entry.max_rel_err = std::max(entry.max_rel_err, detail::fd_rel_err(shift, analytic));
        }
      }
    };
    check_node_loss(report[0], [&](const PredMap& p) { return global_node_loss(p, gt, origin); });
    check_node_loss(report[1], [&](const PredMap& p) { return relative_node_loss(p, gt); });

    const int rows = 2, width = 8;
    std::vector<std::vector<double>> phi_pred(rows), phi_gt(rows), alpha_pred(rows),
        alpha_gt(rows), mask(rows), p_pred(rows), p_gt(rows);
    for (int r = 0; r < rows; ++r) {
      for (int k = 0; k < width; ++k) {
        phi_pred[r].push_back(rng.uniform(0.1, 1.4));
        phi_gt[r].push_back(rng.uniform(0.1, 1.4));
        alpha_pred[r].push_back(rng.uniform(-3.0, 3.0));
        alpha_gt[r].push_back(rng.uniform(-3.0, 3.0));
        mask[r].push_back(rng.uniform() < 0.7 ? 1.0 : 0.0);
        p_pred[r].push_back(rng.uniform(0.05, 0.95));
        p_gt[r].push_back(rng.uniform() < 0.5 ? 0.0 : 1.0);
      }
    }
    const auto check_rows_loss = [&](FdCheckEntry& entry, std::vector<std::vector<double>>& rows_pred,
                                     auto&& loss) {
      const auto base = loss(rows_pred);
      for (std::size_t r = 0; r < rows_pred.size(); ++r) {
        for (std::size_t k = 0; k < rows_pred[r].size(); ++k) {
          const auto shift = [&](double eps) {
            const double orig = rows_pred[r][k];
            rows_pred[r][k] = orig + eps;
            const double v = loss(rows_pred).value;
            rows_pred[r][k] = orig;
            return v;
          };
          entry.max_rel_err =
              std::max(entry.max_rel_err, detail::fd_rel_err(shift, base.grad[r][k]));
        }
      }
    };
    check_rows_loss(report[2], phi_pred,
                    [&](const auto& p) { return boundary_loss(p, phi_gt); });
    check_rows_loss(report[3], alpha_pred,
                    [&](const auto& p) { return ac_loss(p, alpha_gt, mask); });
    check_rows_loss(report[4], p_pred, [&](const auto& p) { return covis_loss(p, p_gt); });
  }
  return report;
}

}  // namespace panograph
