#include "emap/io/export.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "emap/data/image_io.hpp"
#include "emap/eval/metrics.hpp"
#include "emap/tensor/f32t.hpp"

namespace emap {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

void export_emap(const Tensor& emap, std::size_t image_index, const std::filesystem::path& base) {
  if (emap.rank() != 4 || emap.dim(0) != 1 || emap.dim(1) != 1)
    throw ShapeError("export_emap expects one (1, 1, S, S) map, got " + to_string(emap.shape()));
  const std::size_t h = emap.dim(2), w = emap.dim(3);
  write_f32t(base.string() + ".f32t", emap);
  const auto norm = min_max_normalize(emap.data());
  const std::vector<float> px(norm.begin(), norm.end());
  write_pgm(base.string() + ".pgm", px.data(), h, w, 65535);
  const auto [lo, hi] = std::minmax_element(emap.data().begin(), emap.data().end());
  std::ostringstream meta;
  meta << "min=" << format_number(*lo) << "\nmax=" << format_number(*hi)
       << "\nsum=" << format_number(raster_sum<float>(emap.data())) << "\nimage_index=" << image_index << "\n";
  write_text(base.string() + ".meta", meta.str());
}

EmapMeta read_emap_meta(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  EmapMeta m;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    if (key == "image_index") m.image_index = std::stoul(val);
    else if (key == "min") m.min = std::stof(val);
    else if (key == "max") m.max = std::stof(val);
    else if (key == "sum") m.sum = std::stof(val);
  }
  return m;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<std::pair<std::string, double>>& rows) {
  std::string out = "metric,value\n";
  for (const auto& [k, v] : rows) out += k + "," + format_number(v) + "\n";
  write_text(path, out);
}

void write_roc_csv(const std::filesystem::path& path, const RocCurve& curve) {
  std::string out = "threshold,fpr,tpr\n";
  for (const auto& p : curve.points)
    out += (std::isinf(p.threshold) ? std::string("inf") : format_number(p.threshold)) + "," + format_number(p.fpr) +
           "," + format_number(p.tpr) + "\n";
  write_text(path, out);
}

void write_overlap_csv(const std::filesystem::path& path, const OverlapStudy& study) {
  std::string out = "image_index,method,percent\n";
  for (const auto& r : study.rows)
    out += std::to_string(r.image_index) + "," + to_string(r.method) + "," + format_number(r.percent) + "\n";
  write_text(path, out);
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  std::string out = "arm,blackbox_acc,distilled_acc\n";
  for (const auto& r : rows) out += r.arm + "," + format_number(r.blackbox_acc) + "," + format_number(r.distilled_acc) + "\n";
  write_text(path, out);
}

void write_stability_csv(const std::filesystem::path& path, const StabilityResult& result) {
  std::string out = "arm_i,arm_j,mean_ssim\n";
  for (std::size_t i = 0; i < result.arms.size(); ++i)
    for (std::size_t j = 0; j < result.arms.size(); ++j)
      out += result.arms[i] + "," + result.arms[j] + "," + format_number(result.mean_ssim[i][j]) + "\n";
  write_text(path, out);
}

void write_histogram_csv(const std::filesystem::path& path, const std::vector<HistogramBin>& hist) {
  std::string out = "bin_lo,bin_hi,count_normal,count_abnormal\n";
  for (const auto& b : hist)
    out += format_number(b.lo) + "," + format_number(b.hi) + "," + std::to_string(b.count_normal) + "," +
           std::to_string(b.count_abnormal) + "\n";
  write_text(path, out);
}

void write_zeropad_csv(const std::filesystem::path& path, const ZeroPadReport& report) {
  std::string out = "sigma,mean_ssim,mean_overlap,distilled_acc\n";
  for (const auto& r : report.rows)
    out += format_number(r.sigma) + "," + format_number(r.mean_ssim) + "," + format_number(r.mean_overlap) + "," +
           format_number(r.distilled_acc) + "\n";
  write_text(path, out);
}

void write_records_csv(const std::filesystem::path& path, const MetricsReport& report) {
  std::string out = "image_index,label,t,t_hat,prediction,overlap\n";
  for (const auto& r : report.records)
    out += std::to_string(r.index) + "," + std::to_string(r.label) + "," + format_number(r.t) + "," +
           format_number(r.t_hat) + "," + std::to_string(r.prediction) + "," + format_number(r.overlap) + "\n";
  write_text(path, out);
}

void write_train_report(const std::filesystem::path& base, const TrainReport& report) {
  std::string csv = "epoch,train_loss,val_loss\n";
  for (const auto& e : report.epochs)
    csv += std::to_string(e.epoch) + "," + format_number(e.train_loss) + "," + format_number(e.val_loss) + "\n";
  write_text(base.string() + ".csv", csv);

  nlohmann::json j{{"stop_epoch", report.stop_epoch},
                   {"early_stopped", report.early_stopped},
                   {"best_epoch", report.best_epoch},
                   {"best_val_loss", report.best_val_loss},
                   {"wall_seconds", report.wall_seconds}};
  nlohmann::json metrics = nlohmann::json::object();
  for (const auto& [k, v] : report.final_metrics) metrics[k] = v;
  j["final_metrics"] = metrics;
  write_text(base.string() + ".json", j.dump(2) + "\n");
}

}  // namespace emap
