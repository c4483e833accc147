#include "report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "irispad/error.hpp"

namespace irispad::cli {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream s(line);
  while (std::getline(s, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

[[noreturn]] void bad_row(std::size_t line_no, const std::string& what) {
  throw Error(ErrorKind::parse, "scores line " + std::to_string(line_no) + ": " + what);
}

double parse_double(const std::string& text, std::size_t line_no) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    bad_row(line_no, "not a number: '" + text + "'");
  }
  if (used != text.size() || !std::isfinite(v)) bad_row(line_no, "not a number: '" + text + "'");
  return v;
}

nlohmann::ordered_json per_pai_json(const std::map<PaiClass, double>& m) {
  auto j = nlohmann::ordered_json::object();
  for (const auto& [pai, v] : m) j[std::string(to_string(pai))] = v;
  return j;
}

nlohmann::ordered_json operating_point_json(const metrics::OperatingPoint& op) {
  nlohmann::ordered_json j;
  j["apcer_per_pai"] = per_pai_json(op.apcer_per_pai);
  j["apcer_worst"] = op.apcer_worst;
  j["apcer_worst_pai"] = std::string(to_string(op.worst_pai));
  j["apcer_pooled"] = op.apcer_pooled;
  j["bpcer"] = op.bpcer;
  j["acer"] = op.acer;
  return j;
}

std::optional<metrics::KdeCurve> kde_of(const ScoreTable& table, bool attacks) {
  std::vector<double> scores;
  for (const auto& r : table.rows) {
    if (is_attack(r.pai) == attacks) scores.push_back(r.stage1_bf_score);
  }
  if (scores.empty()) return std::nullopt;
  return metrics::kde(scores);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_scores_csv(std::ostream& out, const ScoreTable& table) {
  out << "id,true_label,pai,stage1_bf_score";
  for (const auto& name : table.label_names) out << ",stage2_" << name;
  out << ",verdict,species\n";
  for (const auto& r : table.rows) {
    if (r.stage2_probs.size() != table.label_names.size()) {
      throw Error(ErrorKind::shape, "score row '" + r.id + "' has the wrong number of stage-2 columns");
    }
    out << r.id << ',' << r.true_label << ',' << to_string(r.pai) << ',' << format_double(r.stage1_bf_score);
    for (double p : r.stage2_probs) out << ',' << format_double(p);
    out << ',' << to_string(r.verdict) << ',' << (r.species ? to_string(*r.species) : "") << '\n';
  }
}

ScoreTable read_scores_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::parse, "scores file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_line(line);
  const std::size_t n = header.size();
  if (n < 7 || header[0] != "id" || header[1] != "true_label" || header[2] != "pai" ||
      header[3] != "stage1_bf_score" || header[n - 2] != "verdict" || header[n - 1] != "species") {
    throw Error(ErrorKind::parse, "unexpected scores header: " + line);
  }
  ScoreTable table;
  for (std::size_t i = 4; i + 2 < n; ++i) {
    if (header[i].rfind("stage2_", 0) != 0) throw Error(ErrorKind::parse, "bad stage-2 column " + header[i]);
    table.label_names.push_back(header[i].substr(7));
  }
  const int n_labels = static_cast<int>(table.label_names.size());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_line(line);
    if (f.size() != n) bad_row(line_no, "expected " + std::to_string(n) + " fields");
    ScoreRow r;
    r.id = f[0];
    if (r.id.empty()) bad_row(line_no, "empty id");
    const double label = parse_double(f[1], line_no);
    if (label != std::floor(label) || label < -1 || label >= n_labels) bad_row(line_no, "bad true_label");
    r.true_label = static_cast<int>(label);
    const auto pai = parse_pai(f[2]);
    if (!pai) bad_row(line_no, "unknown pai '" + f[2] + "'");
    r.pai = *pai;
    r.stage1_bf_score = parse_double(f[3], line_no);
    for (std::size_t i = 4; i + 2 < n; ++i) r.stage2_probs.push_back(parse_double(f[i], line_no));
    if (f[n - 2] == "bona_fide") {
      r.verdict = Verdict::bona_fide;
    } else if (f[n - 2] == "attack") {
      r.verdict = Verdict::attack;
    } else {
      bad_row(line_no, "unknown verdict '" + f[n - 2] + "'");
    }
    if (!f[n - 1].empty()) {
      r.species = parse_pai(f[n - 1]);
      if (!r.species) bad_row(line_no, "unknown species '" + f[n - 1] + "'");
    }
    if (r.species.has_value() != (r.verdict == Verdict::attack)) {
      bad_row(line_no, "species must be present iff the verdict is attack");
    }
    table.rows.push_back(std::move(r));
  }
  return table;
}

std::vector<metrics::ScoredSample> stage1_samples(const ScoreTable& table) {
  std::vector<metrics::ScoredSample> out;
  for (const auto& r : table.rows) {
    out.push_back({r.id, is_attack(r.pai), is_attack(r.pai) ? std::optional(r.pai) : std::nullopt,
                   r.stage1_bf_score});
    metrics::validate(out.back());
  }
  return out;
}

std::vector<metrics::ScoredSample> verdict_samples(const ScoreTable& table) {
  auto out = stage1_samples(table);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].bf_score = table.rows[i].verdict == Verdict::bona_fide ? 1.0 : 0.0;
  }
  return out;
}

nlohmann::ordered_json build_report(const ScoreTable& table, double tau1, std::size_t failed) {
  using nlohmann::ordered_json;
  const auto s1 = stage1_samples(table);
  const auto verdicts = verdict_samples(table);

  ordered_json j;
  j["report_version"] = 1;
  std::size_t n_attack = 0;
  std::map<PaiClass, std::size_t> counts;
  for (const auto& r : table.rows) {
    ++counts[r.pai];
    if (is_attack(r.pai)) ++n_attack;
  }
  j["n_samples"] = table.rows.size();
  j["n_bona_fide"] = table.rows.size() - n_attack;
  j["n_attack"] = n_attack;
  j["n_failed"] = failed;
  auto pai_counts = ordered_json::object();
  for (const auto& [pai, c] : counts) pai_counts[std::string(to_string(pai))] = c;
  j["pai_counts"] = pai_counts;

  const auto cascade = metrics::evaluate_at(verdicts, 0.5);
  const auto cascade_json = operating_point_json(cascade);
  for (const auto& [k, v] : cascade_json.items()) j[k] = v;

  const auto det = metrics::det_curve(s1, metrics::DetApcer::pooled);
  const auto det_worst = metrics::det_curve(s1, metrics::DetApcer::worst_case);
  j["eer"] = det.eer;
  j["eer_worst_case"] = det_worst.eer;

  auto stage1 = operating_point_json(metrics::evaluate_at(s1, tau1));
  stage1["tau1"] = tau1;
  stage1["eer"] = det.eer;
  j["stage1"] = stage1;

  const int k = static_cast<int>(table.label_names.size());
  std::vector<int> truth, predicted;
  std::map<PaiClass, std::map<std::string, std::size_t>> unmapped;
  for (const auto& r : table.rows) {
    const int pred = static_cast<int>(std::max_element(r.stage2_probs.begin(), r.stage2_probs.end()) -
                                      r.stage2_probs.begin());
    if (r.true_label >= 0) {
      truth.push_back(r.true_label);
      predicted.push_back(pred);
    } else {
      ++unmapped[r.pai][table.label_names[static_cast<std::size_t>(pred)]];
    }
  }
  ordered_json confusion;
  confusion["labels"] = table.label_names;
  confusion["matrix"] = metrics::confusion_matrix(truth, predicted, k);
  j["confusion"] = confusion;
  auto um = ordered_json::object();
  for (const auto& [pai, m] : unmapped) {
    auto row = ordered_json::object();
    for (const auto& [name, c] : m) row[name] = c;
    um[std::string(to_string(pai))] = row;
  }
  j["unmapped_predictions"] = um;

  auto det_points = ordered_json::array();
  for (const auto& p : det.points) {
    det_points.push_back({{"threshold", p.threshold}, {"apcer", p.apcer}, {"bpcer", p.bpcer}});
  }
  j["det"] = det_points;

  const auto kb = kde_of(table, false), ka = kde_of(table, true);
  j["kde"] = {{"bona_fide_bandwidth", kb->bandwidth}, {"attack_bandwidth", ka->bandwidth}};
  return j;
}

void write_det_csv(std::ostream& out, const metrics::DetCurve& curve) {
  out << "threshold,apcer,bpcer\n";
  for (const auto& p : curve.points) {
    out << format_double(p.threshold) << ',' << format_double(p.apcer) << ',' << format_double(p.bpcer)
        << '\n';
  }
}

void write_kde_csv(std::ostream& out, const std::optional<metrics::KdeCurve>& bona_fide,
                   const std::optional<metrics::KdeCurve>& attack) {
  out << "score,bona_fide,attack\n";
  for (int i = 0; i < metrics::kKdeGridPoints; ++i) {
    const double x = static_cast<double>(i) / (metrics::kKdeGridPoints - 1);
    out << format_double(x) << ',';
    if (bona_fide) out << format_double(bona_fide->density[static_cast<std::size_t>(i)]);
    out << ',';
    if (attack) out << format_double(attack->density[static_cast<std::size_t>(i)]);
    out << '\n';
  }
}

namespace {

// Plot frame with a title and axis labels; callers add the polylines.
struct Panel {
  double x0, y0, w, h;
  std::string svg;

  double px(double fx) const { return x0 + fx * w; }
  double py(double fy) const { return y0 + (1.0 - fy) * h; }

  void frame(const std::string& title, const std::string& xlabel, const std::string& ylabel) {
    svg += "<rect x=\"" + fmt(x0) + "\" y=\"" + fmt(y0) + "\" width=\"" + fmt(w) + "\" height=\"" + fmt(h) +
           "\" fill=\"none\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + fmt(x0 + w / 2) + "\" y=\"" + fmt(y0 - 10) + "\" text-anchor=\"middle\">" + title +
           "</text>\n";
    svg += "<text x=\"" + fmt(x0 + w / 2) + "\" y=\"" + fmt(y0 + h + 36) + "\" text-anchor=\"middle\">" +
           xlabel + "</text>\n";
    svg += "<text x=\"" + fmt(x0 - 48) + "\" y=\"" + fmt(y0 + h / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 " +
           fmt(x0 - 48) + ' ' + fmt(y0 + h / 2) + ")\">" + ylabel + "</text>\n";
  }

  void tick_x(double fx, const std::string& label) {
    svg += "<line x1=\"" + fmt(px(fx)) + "\" y1=\"" + fmt(y0 + h) + "\" x2=\"" + fmt(px(fx)) + "\" y2=\"" +
           fmt(y0 + h + 5) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + fmt(px(fx)) + "\" y=\"" + fmt(y0 + h + 18) + "\" text-anchor=\"middle\" font-size=\"11\">" +
           label + "</text>\n";
  }

  void tick_y(double fy, const std::string& label) {
    svg += "<line x1=\"" + fmt(x0 - 5) + "\" y1=\"" + fmt(py(fy)) + "\" x2=\"" + fmt(x0) + "\" y2=\"" + fmt(py(fy)) +
           "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + fmt(x0 - 8) + "\" y=\"" + fmt(py(fy) + 4) + "\" text-anchor=\"end\" font-size=\"11\">" +
           label + "</text>\n";
  }

  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& color) {
    if (pts.empty()) return;
    svg += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [fx, fy] : pts) svg += fmt(px(fx)) + ',' + fmt(py(fy)) + ' ';
    svg += "\"/>\n";
  }
};

std::string svg_document(double width, double height, const std::string& body) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width) + "\" height=\"" + fmt(height) +
         "\" font-family=\"sans-serif\" font-size=\"13\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" +
         body + "</svg>\n";
}

}  // namespace

std::string det_svg(const metrics::DetCurve& curve) {
  // error rates in percent on log axes from 0.1 to 100; zero rates sit on the floor
  constexpr double lo = -1.0, hi = 2.0;
  auto f = [&](double pct) { return (std::log10(std::clamp(pct, 0.1, 100.0)) - lo) / (hi - lo); };
  Panel p{70, 40, 400, 400, {}};
  p.frame("DET", "APCER (%)", "BPCER (%)");
  for (int e = -1; e <= 2; ++e) {
    const std::string label = e < 0 ? "0.1" : std::to_string(static_cast<int>(std::pow(10, e)));
    p.tick_x((e - lo) / (hi - lo), label);
    p.tick_y((e - lo) / (hi - lo), label);
  }
  std::vector<std::pair<double, double>> pts;
  for (const auto& pt : curve.points) pts.emplace_back(f(pt.apcer), f(pt.bpcer));
  p.polyline(pts, "#1f77b4");
  p.polyline({{0.0, 0.0}, {1.0, 1.0}}, "#bbbbbb");
  p.svg += "<text x=\"" + fmt(p.px(0.03)) + "\" y=\"" + fmt(p.py(0.95)) + "\">EER " + fmt(curve.eer) + "%</text>\n";
  return svg_document(520, 500, p.svg);
}

std::string kde_svg(const std::optional<metrics::KdeCurve>& bona_fide,
                    const std::optional<metrics::KdeCurve>& attack) {
  double peak = 1e-12;
  for (const auto* c : {&bona_fide, &attack}) {
    if (*c) peak = std::max(peak, *std::max_element((*c)->density.begin(), (*c)->density.end()));
  }
  std::string body;
  for (int panel = 0; panel < 2; ++panel) {
    const bool log_scale = panel == 1;
    Panel p{70.0 + panel * 480.0, 40, 400, 300, {}};
    p.frame(log_scale ? "Score density (log)" : "Score density", "bona fide score", "density");
    for (int t = 0; t <= 4; ++t) p.tick_x(t / 4.0, fmt(t / 4.0));
    // log panel spans five decades below the peak
    const double top = std::log10(peak), bottom = top - 5.0;
    auto fy = [&](double d) {
      if (!log_scale) return d / peak;
      return (std::log10(std::max(d, std::pow(10.0, bottom))) - bottom) / (top - bottom);
    };
    for (int t = 0; t <= 4; ++t) {
      const double frac = t / 4.0;
      p.tick_y(frac, log_scale ? "1e" + fmt(bottom + frac * (top - bottom)) : fmt(frac * peak));
    }
    const std::pair<const std::optional<metrics::KdeCurve>*, const char*> curves[] = {
        {&bona_fide, "#2ca02c"}, {&attack, "#d62728"}};
    for (const auto& [c, color] : curves) {
      if (!*c) continue;
      std::vector<std::pair<double, double>> pts;
      for (std::size_t i = 0; i < (*c)->grid.size(); ++i) pts.emplace_back((*c)->grid[i], fy((*c)->density[i]));
      p.polyline(pts, color);
    }
    body += p.svg;
  }
  body += "<text x=\"80\" y=\"395\" fill=\"#2ca02c\">bona fide</text>\n";
  body += "<text x=\"180\" y=\"395\" fill=\"#d62728\">attack</text>\n";
  return svg_document(1000, 410, body);
}

}  // namespace irispad::cli
