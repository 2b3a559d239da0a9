#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "phasecast/error.hpp"
#include "phasecast/harness/experiment.hpp"

namespace phasecast::harness {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
                                    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#ad494a"};

std::string colour(int phase) {
  constexpr std::size_t n = sizeof(kPalette) / sizeof(kPalette[0]);
  return kPalette[static_cast<std::size_t>(phase) % n];
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

void emit_timeline(const synth::Window& window, const metrics::SampleSet& samples,
                   std::span<const std::string> phase_names, Rng& rng, const std::filesystem::path& path,
                   const std::string& title) {
  const auto tp = static_cast<double>(window.past_labels.size());
  const auto tf = static_cast<double>(window.future_labels.size());
  if (tp == 0 || tf == 0) throw ValidationError("emit_timeline: window needs past and future labels");
  for (const auto& s : samples)
    if (s.size() != window.future_labels.size()) throw ShapeError("emit_timeline: sample length differs from horizon");

  // Up to three samples, chosen uniformly without replacement.
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::min<std::size_t>(3, idx.size()));

  const double left = 140, right = 20, width = 800, plot_w = width - left - right;
  const double band_h = 22, gap = 10, top = 40;
  auto x = [&](double t) { return left + (t + tp) / (tp + tf) * plot_w; };
  const double axis_y = top + (band_h + gap) * static_cast<double>(1 + idx.size()) + 4;
  const double legend_y = axis_y + 40;
  const double height = legend_y + 18.0 * static_cast<double>(phase_names.size()) + 10;

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
         "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"" + num(width) + "\" height=\"" + num(height) + "\" fill=\"white\"/>\n";
  if (!title.empty()) svg += "<text x=\"" + num(left) + "\" y=\"20\">" + escape(title) + "</text>\n";

  auto bar = [&](double t_begin, double y, int phase, const char* cls) {
    svg += "<rect class=\"" + std::string(cls) + "\" x=\"" + num(x(t_begin)) + "\" y=\"" + num(y) + "\" width=\"" +
           num(x(t_begin + 1) - x(t_begin)) + "\" height=\"" + num(band_h) + "\" fill=\"" + colour(phase) + "\"/>\n";
  };

  double y = top;
  svg += "<text x=\"10\" y=\"" + num(y + 15) + "\">Ground truth</text>\n";
  for (std::size_t i = 0; i < window.past_labels.size(); ++i) bar(static_cast<double>(i) - tp, y, window.past_labels[i], "gt");
  for (std::size_t k = 0; k < window.future_labels.size(); ++k) bar(static_cast<double>(k), y, window.future_labels[k], "gt");
  for (std::size_t s = 0; s < idx.size(); ++s) {
    y += band_h + gap;
    svg += "<text x=\"10\" y=\"" + num(y + 15) + "\">Sample " + std::to_string(idx[s]) + "</text>\n";
    const auto& seq = samples[idx[s]];
    for (std::size_t k = 0; k < seq.size(); ++k) bar(static_cast<double>(k), y, seq[k], "sample");
  }

  svg += "<line x1=\"" + num(x(-tp)) + "\" y1=\"" + num(axis_y) + "\" x2=\"" + num(x(tf)) + "\" y2=\"" + num(axis_y) +
         "\" stroke=\"black\"/>\n";
  const int step = tp + tf > 60 ? 10 : 5;
  for (int t = -static_cast<int>(tp); t <= static_cast<int>(tf); ++t) {
    if (t % step != 0 && t != -static_cast<int>(tp) && t != static_cast<int>(tf)) continue;
    svg += "<line x1=\"" + num(x(t)) + "\" y1=\"" + num(axis_y) + "\" x2=\"" + num(x(t)) + "\" y2=\"" +
           num(axis_y + 5) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + num(x(t)) + "\" y=\"" + num(axis_y + 18) + "\" text-anchor=\"middle\">" + std::to_string(t) +
           "</text>\n";
  }
  svg += "<text x=\"" + num(x(tf)) + "\" y=\"" + num(axis_y + 32) + "\" text-anchor=\"end\">seconds</text>\n";
  svg += "<line class=\"now\" x1=\"" + num(x(0)) + "\" y1=\"" + num(top - 6) + "\" x2=\"" + num(x(0)) + "\" y2=\"" +
         num(axis_y) + "\" stroke=\"#00bcd4\" stroke-width=\"3\"/>\n";

  for (std::size_t q = 0; q < phase_names.size(); ++q) {
    const double ly = legend_y + 18.0 * static_cast<double>(q);
    svg += "<rect x=\"" + num(left) + "\" y=\"" + num(ly) + "\" width=\"12\" height=\"12\" fill=\"" +
           colour(static_cast<int>(q)) + "\"/>\n";
    svg += "<text x=\"" + num(left + 18) + "\" y=\"" + num(ly + 10) + "\">" + escape(phase_names[q]) + "</text>\n";
  }
  svg += "</svg>\n";

  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream f(path);
  if (!f) throw IoError("emit_timeline: cannot write " + path.string());
  f << svg;
  if (!f) throw IoError("emit_timeline: write failed for " + path.string());
}

}  // namespace phasecast::harness
