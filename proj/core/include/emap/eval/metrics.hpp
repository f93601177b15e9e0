#pragma once

#include <array>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "emap/tensor/tensor.hpp"

namespace emap {

struct RocPoint {
  double threshold = 0.0;  // predict abnormal when score >= threshold
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  double auc = 0.0;
  std::vector<RocPoint> points;  // from (0,0) at +inf to (1,1)
};

/// Sweeps every unique score as a threshold; AUC by the trapezoid rule.
/// Throws ArgumentError unless both classes are present.
RocCurve roc_auc(std::span<const float> scores, std::span<const int> labels);

/// Fraction of decisions t > 0 that match the labels.
double accuracy(std::span<const float> scores, std::span<const int> labels);

struct SsimOptions {
  bool normalize = true;  // min-max each image to [0,1] first; constants become 0.5
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

/// Mean SSIM over every position where the Gaussian window fits inside the
/// h x w image. Throws ShapeError for images smaller than the window.
double ssim(std::span<const float> a, std::span<const float> b, std::size_t h, std::size_t w,
            const SsimOptions& opt = {});

/// Min-max normalization with the constant-image rule (all 0.5).
std::vector<double> min_max_normalize(std::span<const float> x);

/// Percentage of the ceil(top_fraction * n) largest map values that fall on
/// nonzero mask pixels. Ties at the cut are taken in raster order.
double overlap_top_k(std::span<const float> map, std::span<const float> mask, double top_fraction = 0.01);

/// Number of pixels selected by overlap_top_k.
std::size_t top_k_count(std::size_t pixels, double top_fraction);

struct HistogramBin {
  double lo = 0.0, hi = 0.0;
  std::size_t count_normal = 0, count_abnormal = 0;
};

/// Histogram of positive values only, on shared edges spanning (0, max positive].
/// Values equal to an upper edge fall in the bin below it. No positives -> no bins.
std::vector<HistogramBin> positive_pixel_histogram(std::span<const float> normal_maps,
                                                   std::span<const float> abnormal_maps, std::size_t bins = 50);

/// Count-weighted sum of positive values per class: {normal, abnormal}.
std::array<double, 2> positive_mass(const std::vector<HistogramBin>& hist);

struct ImageRecord {
  std::size_t index = 0;
  int label = 0;
  float t = 0.0f;      // black-box statistic (teacher)
  float t_hat = 0.0f;  // interpretable statistic; equals t when only a black-box is evaluated
  int prediction = 0;  // t_hat > 0
  double overlap = std::numeric_limits<double>::quiet_NaN();  // top-k overlap, abnormal images with masks
};

struct MetricsReport {
  double accuracy = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double auc = 0.0;
  double blackbox_accuracy = 0.0;
  double blackbox_auc = 0.0;
  double estimation_mse = 0.0;
  double estimation_mae = 0.0;
  double mean_overlap = std::numeric_limits<double>::quiet_NaN();
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::vector<ImageRecord> records;

  /// (metric, value) rows in a fixed order.
  std::vector<std::pair<std::string, double>> rows() const;
};

/// Builds the report from per-image t, t-hat, labels and optional overlaps.
MetricsReport summarize(std::span<const float> t, std::span<const float> t_hat, std::span<const int> labels,
                        std::span<const double> overlaps = {});

}  // namespace emap
