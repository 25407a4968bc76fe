#include "parknet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <stdexcept>

namespace parknet {

namespace fs = std::filesystem;

std::vector<std::array<double, 2>> resample_arc_length(const Trajectory& traj, int k) {
  if (traj.empty()) throw std::invalid_argument("resample: empty trajectory");
  if (k < 1) throw std::invalid_argument("resample: k must be >= 1");
  const auto& pts = traj.points;
  std::vector<double> cum(pts.size(), 0.0);
  for (size_t i = 1; i < pts.size(); ++i) {
    cum[i] = cum[i - 1] + std::hypot(pts[i].x - pts[i - 1].x, pts[i].y - pts[i - 1].y);
  }
  const double total = cum.back();
  std::vector<std::array<double, 2>> out(static_cast<size_t>(k));
  if (total <= 0.0) {
    for (auto& p : out) p = {pts[0].x, pts[0].y};
    return out;
  }
  size_t seg = 0;
  for (int i = 0; i < k; ++i) {
    const double s = k == 1 ? 0.0 : total * static_cast<double>(i) / static_cast<double>(k - 1);
    while (seg + 1 < pts.size() - 1 && cum[seg + 1] < s) ++seg;
    const double len = cum[seg + 1] - cum[seg];
    const double a = len > 0.0 ? (s - cum[seg]) / len : 0.0;
    out[static_cast<size_t>(i)] = {pts[seg].x + a * (pts[seg + 1].x - pts[seg].x),
                                   pts[seg].y + a * (pts[seg + 1].y - pts[seg].y)};
  }
  return out;
}

double l2_distance(const Trajectory& pred, const Trajectory& gt) {
  if (pred.empty() || gt.empty()) throw std::invalid_argument("l2_distance: empty trajectory");
  const auto a = resample_arc_length(pred, kResamplePoints);
  const auto b = resample_arc_length(gt, kResamplePoints);
  double acc = 0.0;
  for (int i = 0; i < kResamplePoints; ++i) {
    acc += std::hypot(a[i][0] - b[i][0], a[i][1] - b[i][1]);
  }
  return acc / static_cast<double>(kResamplePoints);
}

double hausdorff(const Trajectory& a, const Trajectory& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("hausdorff: empty trajectory");
  auto directed = [](const Trajectory& from, const Trajectory& to) {
    double worst = 0.0;
    for (const auto& p : from.points) {
      double best = 1e300;
      for (const auto& q : to.points) {
        best = std::min(best, std::hypot(p.x - q.x, p.y - q.y));
      }
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(directed(a, b), directed(b, a));
}

namespace {

// in-place iterative radix-2 FFT; n must be a power of two
void fft(std::vector<std::complex<double>>& a) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

std::vector<double> descriptor(const Trajectory& traj) {
  const auto pts = resample_arc_length(traj, kResamplePoints);
  std::vector<std::complex<double>> z(pts.size());
  for (size_t i = 0; i < pts.size(); ++i) z[i] = {pts[i][0], pts[i][1]};
  fft(z);
  std::vector<double> desc(kFourierDescriptors);
  for (int i = 0; i < kFourierDescriptors; ++i) desc[static_cast<size_t>(i)] = std::abs(z[static_cast<size_t>(i)]);
  return desc;
}

}  // namespace

double fourier_diff(const Trajectory& a, const Trajectory& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("fourier_diff: empty trajectory");
  const auto da = descriptor(a);
  const auto db = descriptor(b);
  double acc = 0.0;
  for (size_t i = 0; i < da.size(); ++i) {
    const double d = da[i] - db[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

MetricReport compare_trajectories(const Trajectory& pred, const Trajectory& gt) {
  return MetricReport{l2_distance(pred, gt), hausdorff(pred, gt), fourier_diff(pred, gt)};
}

void batch_evaluate(const std::string& pred_dir, const std::string& gt_dir,
                    const std::string& out_csv) {
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(pred_dir)) {
    if (entry.path().extension() == ".csv") {
      names.push_back(entry.path().filename().string());
    }
  }
  std::sort(names.begin(), names.end());
  if (names.empty()) throw std::runtime_error("batch_evaluate: no .csv files in " + pred_dir);

  std::ofstream os(out_csv, std::ios::trunc);
  if (!os) throw std::runtime_error("batch_evaluate: cannot open " + out_csv);
  os << "id,l2,hausdorff,fourier_diff\n" << std::setprecision(12);
  double sl2 = 0, sh = 0, sf = 0;
  for (const auto& name : names) {
    const std::string gt_path = gt_dir + "/" + name;
    if (!fs::exists(gt_path)) {
      throw std::runtime_error("batch_evaluate: missing ground truth for " + name);
    }
    const Trajectory pred = read_trajectory_csv(pred_dir + "/" + name);
    const Trajectory gt = read_trajectory_csv(gt_path);
    const MetricReport r = compare_trajectories(pred, gt);
    os << name << "," << r.l2 << "," << r.hausdorff << "," << r.fourier_diff << "\n";
    sl2 += r.l2;
    sh += r.hausdorff;
    sf += r.fourier_diff;
  }
  const double n = static_cast<double>(names.size());
  os << "mean," << sl2 / n << "," << sh / n << "," << sf / n << "\n";
}

}  // namespace parknet
