#include "mpd/bench/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace fs = std::filesystem;

namespace mpd::bench {

Aggregate aggregate(const std::vector<RunRecord>& records) {
  Aggregate a;
  if (records.empty()) return a;
  a.seeds = records.size();
  a.min = std::numeric_limits<double>::infinity();
  a.max = -std::numeric_limits<double>::infinity();
  double sum = 0.0, succ = 0.0;
  for (const auto& r : records) {
    sum += r.average_optimize_step;
    succ += r.success_rate;
    a.min = std::min(a.min, r.average_optimize_step);
    a.max = std::max(a.max, r.average_optimize_step);
    a.failed += r.failed ? 1 : 0;
  }
  a.mean = sum / static_cast<double>(records.size());
  a.success_rate = succ / static_cast<double>(records.size());
  return a;
}

std::vector<RunRecord> select(const std::vector<RunRecord>& records, const std::string& variant,
                              const Scenario& scenario) {
  std::vector<RunRecord> out;
  for (const auto& r : records)
    if (r.variant == variant && r.scenario == scenario) out.push_back(r);
  std::sort(out.begin(), out.end(), [](const RunRecord& a, const RunRecord& b) { return a.seed < b.seed; });
  return out;
}

namespace {

std::string num(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void close_out(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

const char* kAblationHeader = "configuration,seeds,failed_runs,mean_optimize_step,min_optimize_step,max_optimize_step,verdict\n";

void ablation_row(std::ostream& out, const std::string& label, const std::vector<RunRecord>& rs) {
  const auto a = aggregate(rs);
  out << label << ',' << a.seeds << ',' << a.failed << ',';
  if (rs.empty()) {
    out << ",,,\n";
  } else {
    out << num(a.mean) << ',' << num(a.min) << ',' << num(a.max) << ",\n";
  }
}

struct Ordering {
  std::string check;
  bool gated;
  std::function<bool()> holds;
  std::vector<const std::vector<RunRecord>*> needs;
};

Verdict judge(const std::string& table, std::ostream& out, const Ordering& o) {
  std::string v;
  for (const auto* n : o.needs)
    if (n->empty()) v = "MISSING";
  if (v.empty()) v = o.gated ? (o.holds() ? "PASS" : "FAIL") : "INFO";
  out << "check: " << o.check << ",,,,,," << v << '\n';
  return {table, o.check, v};
}

double mean_of(const std::vector<RunRecord>& rs) { return aggregate(rs).mean; }

}  // namespace

std::vector<Verdict> write_tables(const std::vector<RunRecord>& records, const Scenario& ablation,
                                  const fs::path& out_dir) {
  if (records.empty()) throw std::invalid_argument("write_tables: no run records");
  const auto dir = out_dir / "aggregate";
  std::vector<Verdict> verdicts;

  // Table V: every (variant, scenario) present, in a stable order.
  std::map<std::tuple<std::string, std::size_t, double, double>, Scenario> groups;
  for (const auto& r : records) {
    groups.emplace(std::make_tuple(r.variant, std::numeric_limits<std::size_t>::max() - r.scenario.steps,
                                   -r.scenario.width, -r.scenario.thickness),
                   r.scenario);
  }
  {
    const auto path = dir / "tableV.csv";
    auto out = open_out(path);
    out << "variant,scenario,width_target,thickness_target,steps_per_episode,seeds,failed_runs,mean_optimize_step,"
           "min_optimize_step,max_optimize_step,success_rate\n";
    for (const auto& [key, sc] : groups) {
      const auto& variant = std::get<0>(key);
      const auto a = aggregate(select(records, variant, sc));
      out << variant << ',' << sc.name() << ',' << num(sc.width) << ',' << num(sc.thickness) << ',' << sc.steps << ','
          << a.seeds << ',' << a.failed << ',' << num(a.mean) << ',' << num(a.min) << ',' << num(a.max) << ','
          << num(a.success_rate) << '\n';
    }
    close_out(out, path);
  }

  const auto mpd = select(records, ppo::kVariantMpdPpo, ablation);
  {
    const auto single = select(records, ppo::kVariantSingleNet, ablation);
    const auto multi = select(records, ppo::kVariantMultiBranchUniform, ablation);
    const auto path = dir / "tableVI.csv";
    auto out = open_out(path);
    out << kAblationHeader;
    ablation_row(out, ppo::kVariantSingleNet, single);
    ablation_row(out, ppo::kVariantMultiBranchUniform, multi);
    ablation_row(out, ppo::kVariantMpdPpo, mpd);
    verdicts.push_back(judge("VI", out,
                             {"ppo-single-net worst of the three", true,
                              [&] { return mean_of(single) >= mean_of(multi) && mean_of(single) >= mean_of(mpd); },
                              {&single, &multi, &mpd}}));
    verdicts.push_back(judge("VI", out,
                             {"mpd-ppo < ppo-single-net", true, [&] { return mean_of(mpd) < mean_of(single); },
                              {&mpd, &single}}));
    close_out(out, path);
  }
  {
    const auto uniform = select(records, ppo::kVariantMpdUniform, ablation);
    const auto path = dir / "tableVII.csv";
    auto out = open_out(path);
    out << kAblationHeader;
    ablation_row(out, ppo::kVariantMpdUniform, uniform);
    ablation_row(out, ppo::kVariantMpdPpo, mpd);
    verdicts.push_back(judge("VII", out,
                             {"mpd-ppo < mpd-ppo-uniform-clip", true, [&] { return mean_of(mpd) < mean_of(uniform); },
                              {&mpd, &uniform}}));
    close_out(out, path);
  }
  {
    const auto r1 = select(records, "reward-1", ablation);
    const auto r2 = select(records, "reward-2", ablation);
    const auto r3 = select(records, "reward-3", ablation);
    // reward-4 is the mpd-ppo configuration; its own runs are used when present.
    auto r4 = select(records, "reward-4", ablation);
    if (r4.empty()) r4 = mpd;
    const auto path = dir / "tableVIII.csv";
    auto out = open_out(path);
    out << kAblationHeader;
    ablation_row(out, "reward-1", r1);
    ablation_row(out, "reward-2", r2);
    ablation_row(out, "reward-3", r3);
    ablation_row(out, "reward-4", r4);
    verdicts.push_back(
        judge("VIII", out, {"reward-4 <= reward-3", true, [&] { return mean_of(r4) <= mean_of(r3); }, {&r4, &r3}}));
    verdicts.push_back(judge("VIII", out, {"reward-1 vs reward-2 ordering", false, [] { return true; }, {&r1, &r2}}));
    close_out(out, path);
  }
  return verdicts;
}

namespace {

struct Box {
  double x0, y0, w, h;
};

/// Series padded to a common length by holding each final value; an
/// episode that ended early keeps its last reading.
std::vector<std::vector<double>> pad(const std::vector<std::vector<double>>& series) {
  std::size_t n = 0;
  for (const auto& s : series) n = std::max(n, s.size());
  std::vector<std::vector<double>> out;
  for (const auto& s : series) {
    if (s.empty()) continue;
    auto p = s;
    p.resize(n, s.back());
    out.push_back(std::move(p));
  }
  return out;
}

std::string fixed3(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(3) << v;
  return s.str();
}

void panel(std::ostream& svg, const Box& box, const std::string& title, const std::vector<std::vector<double>>& raw,
           double target, double tolerance, const std::string& x_label) {
  const auto series = pad(raw);
  svg << "<g class=\"panel\">\n";
  svg << "<text x=\"" << fixed3(box.x0) << "\" y=\"" << fixed3(box.y0 - 6) << "\" font-size=\"13\">" << title
      << "</text>\n";
  svg << "<rect x=\"" << fixed3(box.x0) << "\" y=\"" << fixed3(box.y0) << "\" width=\"" << fixed3(box.w)
      << "\" height=\"" << fixed3(box.h) << "\" fill=\"none\" stroke=\"#444\"/>\n";
  if (series.empty()) {
    svg << "<text x=\"" << fixed3(box.x0 + 10) << "\" y=\"" << fixed3(box.y0 + 20) << "\">no data</text>\n</g>\n";
    return;
  }
  const std::size_t n = series.front().size();
  std::vector<double> lo(n), hi(n), mean(n);
  for (std::size_t t = 0; t < n; ++t) {
    lo[t] = hi[t] = series.front()[t];
    double s = 0.0;
    for (const auto& v : series) {
      lo[t] = std::min(lo[t], v[t]);
      hi[t] = std::max(hi[t], v[t]);
      s += v[t];
    }
    mean[t] = s / static_cast<double>(series.size());
  }
  double ymin = *std::min_element(lo.begin(), lo.end());
  double ymax = *std::max_element(hi.begin(), hi.end());
  const bool guides = std::isfinite(target);
  if (guides) {
    ymin = std::min(ymin, target - tolerance);
    ymax = std::max(ymax, target + tolerance);
  }
  if (ymax - ymin < 1e-12) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  const double pad_y = 0.05 * (ymax - ymin);
  ymin -= pad_y;
  ymax += pad_y;
  const double xmax = n > 1 ? static_cast<double>(n - 1) : 1.0;
  auto X = [&](double i) { return box.x0 + box.w * i / xmax; };
  auto Y = [&](double v) { return box.y0 + box.h * (1.0 - (v - ymin) / (ymax - ymin)); };

  svg << "<!-- seeds: " << series.size() << " -->\n<!-- mean:";
  for (double m : mean) svg << ' ' << num(m);
  svg << " -->\n";
  svg << "<polygon class=\"band\" fill=\"#9ecae1\" fill-opacity=\"0.5\" stroke=\"none\" points=\"";
  for (std::size_t t = 0; t < n; ++t) svg << fixed3(X(static_cast<double>(t))) << ',' << fixed3(Y(hi[t])) << ' ';
  for (std::size_t t = n; t-- > 0;) svg << fixed3(X(static_cast<double>(t))) << ',' << fixed3(Y(lo[t])) << ' ';
  svg << "\"/>\n";
  if (guides) {
    auto hline = [&](double v, const char* cls, const char* dash) {
      svg << "<line class=\"" << cls << "\" x1=\"" << fixed3(box.x0) << "\" y1=\"" << fixed3(Y(v)) << "\" x2=\""
          << fixed3(box.x0 + box.w) << "\" y2=\"" << fixed3(Y(v)) << "\" stroke=\"#d62728\"" << dash << "/>\n";
    };
    hline(target, "target", "");
    hline(target - tolerance, "tolerance", " stroke-dasharray=\"4 3\"");
    hline(target + tolerance, "tolerance", " stroke-dasharray=\"4 3\"");
  }
  svg << "<polyline class=\"mean\" fill=\"none\" stroke=\"#08519c\" stroke-width=\"1.5\" points=\"";
  for (std::size_t t = 0; t < n; ++t) svg << fixed3(X(static_cast<double>(t))) << ',' << fixed3(Y(mean[t])) << ' ';
  svg << "\"/>\n";
  svg << "<text x=\"" << fixed3(box.x0 - 4) << "\" y=\"" << fixed3(box.y0 + 10) << "\" font-size=\"10\" "
      << "text-anchor=\"end\">" << num(ymax) << "</text>\n";
  svg << "<text x=\"" << fixed3(box.x0 - 4) << "\" y=\"" << fixed3(box.y0 + box.h) << "\" font-size=\"10\" "
      << "text-anchor=\"end\">" << num(ymin) << "</text>\n";
  svg << "<text x=\"" << fixed3(box.x0 + box.w) << "\" y=\"" << fixed3(box.y0 + box.h + 14) << "\" font-size=\"10\" "
      << "text-anchor=\"end\">" << x_label << ' ' << n << "</text>\n";
  svg << "</g>\n";
}

void write_svg(const fs::path& path, double height, const std::string& body) {
  auto out = open_out(path);
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"680\" height=\"" << fixed3(height) << "\" viewBox=\"0 0 680 "
      << fixed3(height) << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << body << "</svg>\n";
  close_out(out, path);
}

}  // namespace

std::vector<fs::path> write_plots(const std::vector<RunRecord>& records, const env::EpisodeConfig& episode,
                                  const fs::path& out_dir) {
  if (records.empty()) throw std::invalid_argument("write_plots: no run records");
  std::map<std::pair<std::string, std::string>, Scenario> groups;
  for (const auto& r : records) groups.emplace(std::make_pair(r.scenario.name(), r.variant), r.scenario);

  std::vector<fs::path> written;
  for (const auto& [key, sc] : groups) {
    const auto rs = select(records, key.second, sc);
    std::vector<std::vector<double>> widths, thicknesses, curves;
    std::ostringstream seeds;
    for (const auto& r : rs) {
      if (r.failed) continue;
      widths.push_back(r.trace_width);
      thicknesses.push_back(r.trace_thickness);
      std::vector<double> c;
      for (const auto& e : r.curve) c.push_back(static_cast<double>(e.optimize_step));
      curves.push_back(std::move(c));
      seeds << ' ' << r.seed;
    }
    const std::string stem = key.first + "__" + key.second;
    const std::string header = "<!-- variant: " + key.second + " scenario: " + key.first + " seed ids:" + seeds.str() +
                               " -->\n";
    {
      std::ostringstream body;
      body << header;
      panel(body, {70, 40, 590, 200}, "width (mm), " + key.second + ", " + key.first, widths, sc.width,
            episode.width_tolerance, "step");
      panel(body, {70, 300, 590, 200}, "thickness (mm), " + key.second + ", " + key.first, thicknesses, sc.thickness,
            episode.thickness_tolerance, "step");
      const auto path = out_dir / "plots" / (stem + "__trajectory.svg");
      write_svg(path, 530, body.str());
      written.push_back(path);
    }
    {
      std::ostringstream body;
      body << header;
      panel(body, {70, 40, 590, 240}, "optimize step per training episode, " + key.second + ", " + key.first, curves,
            std::numeric_limits<double>::quiet_NaN(), 0.0, "episode");
      const auto path = out_dir / "plots" / (stem + "__curve.svg");
      write_svg(path, 310, body.str());
      written.push_back(path);
    }
  }
  return written;
}

}  // namespace mpd::bench
