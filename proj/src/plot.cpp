#include "hindsight/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

namespace hindsight {
namespace {

constexpr double kWidth = 760, kHeight = 460;
constexpr double kLeft = 70, kRight = 210, kTop = 40, kBottom = 56;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string tick_label(double v) {
  char buf[32];
  if (std::abs(v) >= 1000) std::snprintf(buf, sizeof buf, "%gk", v / 1000.0);
  else std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::map<std::string, std::string> read_config_map(const std::filesystem::path& csv) {
  const auto path = csv.parent_path() / "config.txt";
  if (!std::filesystem::exists(path)) return {};
  return load_config(path).to_map();
}

struct RunInfo {
  std::string mode, label;
  std::vector<MetricsRow> rows;
};

}  // namespace

double interpolate(const Curve& c, double at) {
  if (c.x.empty() || c.x.size() != c.y.size()) throw std::invalid_argument("interpolate: malformed curve");
  if (at < c.x.front() || at > c.x.back()) throw std::out_of_range("interpolate: outside curve range");
  auto hi = std::lower_bound(c.x.begin(), c.x.end(), at);
  const auto j = static_cast<std::size_t>(hi - c.x.begin());
  if (c.x[j] == at || j == 0) return c.y[j];
  const double t = (at - c.x[j - 1]) / (c.x[j] - c.x[j - 1]);
  return c.y[j - 1] + t * (c.y[j] - c.y[j - 1]);
}

std::vector<double> common_grid(std::span<const Curve> curves) {
  if (curves.empty()) throw std::invalid_argument("common_grid: no curves");
  double lo = -INFINITY, hi = INFINITY;
  for (const auto& c : curves) {
    if (c.x.empty()) throw std::invalid_argument("common_grid: empty curve");
    lo = std::max(lo, c.x.front());
    hi = std::min(hi, c.x.back());
  }
  std::set<double> grid;
  for (const auto& c : curves)
    for (double x : c.x)
      if (x >= lo && x <= hi) grid.insert(x);
  return {grid.begin(), grid.end()};
}

Band aggregate(std::string label, std::span<const Curve> curves) {
  Band b;
  b.label = std::move(label);
  b.runs = curves.size();
  b.x = common_grid(curves);
  const double n = static_cast<double>(curves.size());
  for (double x : b.x) {
    double sum = 0.0;
    std::vector<double> ys;
    for (const auto& c : curves) ys.push_back(interpolate(c, x));
    for (double y : ys) sum += y;
    const double mean = sum / n;
    double ss = 0.0;
    for (double y : ys) ss += (y - mean) * (y - mean);
    b.mean.push_back(mean);
    b.stderr_mean.push_back(curves.size() > 1 ? std::sqrt(ss / (n - 1.0)) / std::sqrt(n) : 0.0);
  }
  return b;
}

double normalized_auc(const Curve& c) {
  if (c.x.size() != c.y.size() || c.x.empty()) throw std::invalid_argument("normalized_auc: malformed curve");
  if (c.x.size() == 1) return c.y[0];
  double area = 0.0;
  for (std::size_t i = 1; i < c.x.size(); ++i) area += 0.5 * (c.y[i] + c.y[i - 1]) * (c.x[i] - c.x[i - 1]);
  return area / (c.x.back() - c.x.front());
}

std::string render_svg(const std::string& title, const std::string& y_label, std::span<const Band> bands) {
  double x_lo = INFINITY, x_hi = -INFINITY;
  for (const auto& b : bands)
    if (!b.x.empty()) {
      x_lo = std::min(x_lo, b.x.front());
      x_hi = std::max(x_hi, b.x.back());
    }
  if (!std::isfinite(x_lo)) x_lo = 0, x_hi = 1;
  if (x_hi <= x_lo) x_hi = x_lo + 1;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - std::clamp(y, 0.0, 1.0)) * ph; };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
       "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" + escape(title) +
       "</text>\n";
  for (int i = 0; i <= 5; ++i) {
    const double y = i / 5.0;
    s += "<line x1=\"" + num(kLeft) + "\" x2=\"" + num(kLeft + pw) + "\" y1=\"" + num(py(y)) + "\" y2=\"" +
         num(py(y)) + "\" stroke=\"#e0e0e0\"/>\n";
    s += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(py(y) + 4) + "\" text-anchor=\"end\">" + tick_label(y) +
         "</text>\n";
  }
  for (int i = 0; i <= 5; ++i) {
    const double x = x_lo + (x_hi - x_lo) * i / 5.0;
    s += "<line x1=\"" + num(px(x)) + "\" x2=\"" + num(px(x)) + "\" y1=\"" + num(kTop + ph) + "\" y2=\"" +
         num(kTop + ph + 5) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num(px(x)) + "\" y=\"" + num(kTop + ph + 19) + "\" text-anchor=\"middle\">" +
         tick_label(std::round(x)) + "</text>\n";
  }
  s += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
       "\" fill=\"none\" stroke=\"black\"/>\n";
  s += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kHeight - 12) +
       "\" text-anchor=\"middle\">environment steps</text>\n";
  s += "<text transform=\"translate(18," + num(kTop + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
       escape(y_label) + "</text>\n";

  for (std::size_t k = 0; k < bands.size(); ++k) {
    const auto& b = bands[k];
    const std::string color = kPalette[k % std::size(kPalette)];
    if (b.runs > 1 && !b.x.empty()) {
      std::string pts;
      for (std::size_t i = 0; i < b.x.size(); ++i) pts += num(px(b.x[i])) + "," + num(py(b.mean[i] + b.stderr_mean[i])) + " ";
      for (std::size_t i = b.x.size(); i-- > 0;) pts += num(px(b.x[i])) + "," + num(py(b.mean[i] - b.stderr_mean[i])) + " ";
      pts.pop_back();
      s += "<polygon points=\"" + pts + "\" fill=\"" + color + "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    }
    std::string line;
    for (std::size_t i = 0; i < b.x.size(); ++i) line += num(px(b.x[i])) + "," + num(py(b.mean[i])) + " ";
    if (!line.empty()) line.pop_back();
    s += "<polyline points=\"" + line + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    const double ly = kTop + 10 + 20.0 * static_cast<double>(k);
    s += "<line x1=\"" + num(kLeft + pw + 12) + "\" x2=\"" + num(kLeft + pw + 36) + "\" y1=\"" + num(ly) +
         "\" y2=\"" + num(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + num(kLeft + pw + 42) + "\" y=\"" + num(ly + 4) + "\">" + escape(b.label) + " (n=" +
         std::to_string(b.runs) + ")</text>\n";
  }
  s += "</svg>\n";
  return s;
}

std::vector<std::filesystem::path> plot_metrics(std::span<const std::filesystem::path> csvs,
                                                const std::filesystem::path& out_dir) {
  if (csvs.empty()) throw std::invalid_argument("plot_metrics: no input files");
  // mode -> label -> runs, both ordered for stable output
  std::map<std::string, std::map<std::string, std::vector<RunInfo>>> groups;
  for (const auto& path : csvs) {
    RunInfo run;
    run.rows = read_metrics(path);
    if (run.rows.empty()) throw std::runtime_error(path.string() + ": no metrics rows");
    const auto cfg = read_config_map(path);
    if (cfg.empty()) {
      run.mode = "unknown";
      run.label = path.parent_path().filename().string();
      if (run.label.empty()) run.label = path.stem().string();
    } else {
      run.mode = cfg.at("mode");
      run.label = cfg.at("method");
      if (cfg.at("method") != "lcsac") run.label += "-" + cfg.at("strategy");
      run.label += " " + cfg.at("repr");
    }
    groups[run.mode][run.label].push_back(std::move(run));
  }

  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  for (const auto& [mode, by_label] : groups) {
    std::vector<Band> success, accuracy;
    for (const auto& [label, runs] : by_label) {
      std::vector<Curve> s, train, val;
      for (const auto& run : runs) {
        Curve cs, ct, cv;
        for (const auto& r : run.rows) {
          const auto x = static_cast<double>(r.env_steps);
          cs.x.push_back(x);
          cs.y.push_back(r.success_rate);
          if (r.hipss_train_acc) ct.x.push_back(x), ct.y.push_back(*r.hipss_train_acc);
          if (r.hipss_val_acc) cv.x.push_back(x), cv.y.push_back(*r.hipss_val_acc);
        }
        s.push_back(std::move(cs));
        if (!ct.x.empty()) train.push_back(std::move(ct));
        if (!cv.x.empty()) val.push_back(std::move(cv));
      }
      success.push_back(aggregate(label, s));
      if (!train.empty()) accuracy.push_back(aggregate(label + " train", train));
      if (!val.empty()) accuracy.push_back(aggregate(label + " validation", val));
    }
    auto emit = [&](const std::string& stem, const std::string& title, const std::string& ylabel,
                    const std::vector<Band>& bands) {
      const auto path = out_dir / (stem + "_" + mode + ".svg");
      std::ofstream(path) << render_svg(title, ylabel, bands);
      written.push_back(path);
    };
    emit("success", "Success rate, " + mode + " mode", "success rate", success);
    if (!accuracy.empty()) emit("hipss_accuracy", "Hindsight instruction word accuracy, " + mode + " mode",
                                "word accuracy", accuracy);
  }
  return written;
}

}  // namespace hindsight
