#include "emap/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace emap {
namespace {

void check_labels(std::span<const float> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw ArgumentError("scores and labels differ in length (" + std::to_string(scores.size()) + " vs " +
                        std::to_string(labels.size()) + ")");
  for (const int l : labels)
    if (l != 0 && l != 1) throw ArgumentError("labels must be 0 or 1");
}

std::vector<double> gaussian_window(std::size_t n, double sigma) {
  std::vector<double> g(n);
  const double c = (static_cast<double>(n) - 1.0) / 2.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(i) - c;
    g[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += g[i];
  }
  for (auto& v : g) v /= sum;
  return g;
}

// Valid-mode separable filtering of an h x w image: (h-n+1) x (w-n+1).
std::vector<double> filter_valid(const std::vector<double>& x, std::size_t h, std::size_t w,
                                 const std::vector<double>& g) {
  const std::size_t n = g.size(), oh = h - n + 1, ow = w - n + 1;
  std::vector<double> rows(h * ow, 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x0 = 0; x0 < ow; ++x0) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += g[k] * x[y * w + x0 + k];
      rows[y * ow + x0] = acc;
    }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t y0 = 0; y0 < oh; ++y0)
    for (std::size_t x0 = 0; x0 < ow; ++x0) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += g[k] * rows[(y0 + k) * ow + x0];
      out[y0 * ow + x0] = acc;
    }
  return out;
}

}  // namespace

RocCurve roc_auc(std::span<const float> scores, std::span<const int> labels) {
  check_labels(scores, labels);
  const std::size_t P = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t N = labels.size() - P;
  if (P == 0 || N == 0) throw ArgumentError("ROC needs both classes present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  double area2 = 0.0;  // twice the area in units of one positive-negative pair
  for (std::size_t i = 0; i < order.size();) {
    const float s = scores[order[i]];
    const std::size_t tp0 = tp, fp0 = fp;
    for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] == 1 ? tp : fp) += 1;
    area2 += static_cast<double>(fp - fp0) * static_cast<double>(tp + tp0);
    curve.points.push_back({s, static_cast<double>(fp) / static_cast<double>(N),
                            static_cast<double>(tp) / static_cast<double>(P)});
  }
  curve.auc = area2 / (2.0 * static_cast<double>(P) * static_cast<double>(N));
  return curve;
}

double accuracy(std::span<const float> scores, std::span<const int> labels) {
  check_labels(scores, labels);
  if (scores.empty()) throw ArgumentError("accuracy of an empty set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) correct += (scores[i] > 0.0f) == (labels[i] == 1);
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

std::vector<double> min_max_normalize(std::span<const float> x) {
  std::vector<double> out(x.size(), 0.5);
  if (x.empty()) return out;
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  const double l = *lo, range = static_cast<double>(*hi) - l;
  if (range > 0.0)
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - l) / range;
  return out;
}

double ssim(std::span<const float> a, std::span<const float> b, std::size_t h, std::size_t w, const SsimOptions& opt) {
  if (a.size() != h * w || b.size() != h * w)
    throw ShapeError("ssim needs two " + std::to_string(h) + "x" + std::to_string(w) + " images");
  if (h < opt.window || w < opt.window)
    throw ShapeError("ssim window " + std::to_string(opt.window) + " larger than the image");
  std::vector<double> x, y;
  if (opt.normalize) {
    x = min_max_normalize(a);
    y = min_max_normalize(b);
  } else {
    x.assign(a.begin(), a.end());
    y.assign(b.begin(), b.end());
  }
  std::vector<double> xx(x.size()), yy(y.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto g = gaussian_window(opt.window, opt.sigma);
  const auto mx = filter_valid(x, h, w, g), my = filter_valid(y, h, w, g);
  const auto sxx = filter_valid(xx, h, w, g), syy = filter_valid(yy, h, w, g), sxy = filter_valid(xy, h, w, g);
  const double c1 = std::pow(opt.k1 * opt.dynamic_range, 2), c2 = std::pow(opt.k2 * opt.dynamic_range, 2);
  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cxy = sxy[i] - mx[i] * my[i];
    total += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cxy + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.size());
}

std::size_t top_k_count(std::size_t pixels, double top_fraction) {
  if (!(top_fraction > 0.0 && top_fraction <= 1.0)) throw ArgumentError("top_fraction must be in (0, 1]");
  // guard against products like 0.07 * 100 landing just above an integer
  const double k = std::ceil(top_fraction * static_cast<double>(pixels) * (1.0 - 1e-12));
  return std::clamp<std::size_t>(static_cast<std::size_t>(k), 1, pixels);
}

double overlap_top_k(std::span<const float> map, std::span<const float> mask, double top_fraction) {
  if (map.size() != mask.size()) throw ShapeError("map and mask differ in size");
  if (std::none_of(mask.begin(), mask.end(), [](float v) { return v != 0.0f; }))
    throw ArgumentError("overlap needs a mask with at least one nonzero pixel");
  const std::size_t k = top_k_count(map.size(), top_fraction);
  std::vector<std::size_t> idx(map.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) { return map[a] > map[b] || (map[a] == map[b] && a < b); });
  std::size_t hit = 0;
  for (std::size_t i = 0; i < k; ++i) hit += mask[idx[i]] != 0.0f;
  return 100.0 * static_cast<double>(hit) / static_cast<double>(k);
}

std::vector<HistogramBin> positive_pixel_histogram(std::span<const float> normal_maps,
                                                   std::span<const float> abnormal_maps, std::size_t bins) {
  if (bins == 0) throw ArgumentError("histogram needs at least one bin");
  float hi = 0.0f;
  for (const float v : normal_maps) hi = std::max(hi, v);
  for (const float v : abnormal_maps) hi = std::max(hi, v);
  if (!(hi > 0.0f)) return {};
  std::vector<HistogramBin> out(bins);
  const double top = hi;
  for (std::size_t k = 0; k < bins; ++k) {
    out[k].lo = top * static_cast<double>(k) / static_cast<double>(bins);
    out[k].hi = top * static_cast<double>(k + 1) / static_cast<double>(bins);
  }
  auto place = [&](float v) {
    const double pos = std::ceil(static_cast<double>(v) / top * static_cast<double>(bins));
    return std::min<std::size_t>(static_cast<std::size_t>(std::max(pos, 1.0)) - 1, bins - 1);
  };
  for (const float v : normal_maps)
    if (v > 0.0f) ++out[place(v)].count_normal;
  for (const float v : abnormal_maps)
    if (v > 0.0f) ++out[place(v)].count_abnormal;
  return out;
}

std::array<double, 2> positive_mass(const std::vector<HistogramBin>& hist) {
  std::array<double, 2> m{0.0, 0.0};
  for (const auto& b : hist) {
    const double centre = 0.5 * (b.lo + b.hi);
    m[0] += centre * static_cast<double>(b.count_normal);
    m[1] += centre * static_cast<double>(b.count_abnormal);
  }
  return m;
}

std::vector<std::pair<std::string, double>> MetricsReport::rows() const {
  return {{"accuracy", accuracy},
          {"sensitivity", sensitivity},
          {"specificity", specificity},
          {"auc", auc},
          {"blackbox_accuracy", blackbox_accuracy},
          {"blackbox_auc", blackbox_auc},
          {"estimation_mse", estimation_mse},
          {"estimation_mae", estimation_mae},
          {"mean_overlap", mean_overlap},
          {"tp", static_cast<double>(tp)},
          {"tn", static_cast<double>(tn)},
          {"fp", static_cast<double>(fp)},
          {"fn", static_cast<double>(fn)}};
}

MetricsReport summarize(std::span<const float> t, std::span<const float> t_hat, std::span<const int> labels,
                        std::span<const double> overlaps) {
  check_labels(t_hat, labels);
  if (t.size() != t_hat.size()) throw ArgumentError("t and t-hat differ in length");
  if (!overlaps.empty() && overlaps.size() != t.size()) throw ArgumentError("one overlap value per image is required");
  MetricsReport r;
  double se = 0.0, ae = 0.0, overlap_sum = 0.0;
  std::size_t overlap_n = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    ImageRecord rec{i, labels[i], t[i], t_hat[i], t_hat[i] > 0.0f ? 1 : 0};
    if (!overlaps.empty()) rec.overlap = overlaps[i];
    if (rec.prediction == 1) (rec.label == 1 ? r.tp : r.fp) += 1;
    else (rec.label == 0 ? r.tn : r.fn) += 1;
    const double d = static_cast<double>(t[i]) - t_hat[i];
    se += d * d;
    ae += std::abs(d);
    if (!std::isnan(rec.overlap)) {
      overlap_sum += rec.overlap;
      ++overlap_n;
    }
    r.records.push_back(rec);
  }
  const double n = static_cast<double>(t.size());
  r.accuracy = static_cast<double>(r.tp + r.tn) / n;
  r.sensitivity = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
  r.specificity = static_cast<double>(r.tn) / static_cast<double>(r.tn + r.fp);
  r.auc = roc_auc(t_hat, labels).auc;
  r.blackbox_accuracy = accuracy(t, labels);
  r.blackbox_auc = roc_auc(t, labels).auc;
  r.estimation_mse = se / n;
  r.estimation_mae = ae / n;
  if (overlap_n > 0) r.mean_overlap = overlap_sum / static_cast<double>(overlap_n);
  return r;
}

}  // namespace emap
