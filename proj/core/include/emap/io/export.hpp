#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "emap/eval/studies.hpp"
#include "emap/training/zeropad.hpp"

namespace emap {

/// Writes base.f32t (raw values), base.pgm (16-bit, min-max normalized,
/// constant maps mid-gray) and base.meta (min, max, sum, image_index).
/// `emap` is one map, (1, 1, S, S).
void export_emap(const Tensor& emap, std::size_t image_index, const std::filesystem::path& base);

struct EmapMeta {
  float min = 0.0f, max = 0.0f, sum = 0.0f;
  std::size_t image_index = 0;
};
EmapMeta read_emap_meta(const std::filesystem::path& path);

/// Shortest text that parses back to the same double.
std::string format_number(double v);

void write_metrics_csv(const std::filesystem::path& path, const std::vector<std::pair<std::string, double>>& rows);
void write_roc_csv(const std::filesystem::path& path, const RocCurve& curve);
void write_overlap_csv(const std::filesystem::path& path, const OverlapStudy& study);
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);
void write_stability_csv(const std::filesystem::path& path, const StabilityResult& result);
void write_histogram_csv(const std::filesystem::path& path, const std::vector<HistogramBin>& hist);
void write_zeropad_csv(const std::filesystem::path& path, const ZeroPadReport& report);
void write_records_csv(const std::filesystem::path& path, const MetricsReport& report);

/// base.csv (epoch,train_loss,val_loss) and base.json (summary incl. wall time).
void write_train_report(const std::filesystem::path& base, const TrainReport& report);

/// Writes text to a file, throwing IoError with the path on failure.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace emap
