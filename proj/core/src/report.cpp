#include "gapdoor/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "gapdoor/io.hpp"

namespace gapdoor {

namespace fs = std::filesystem;

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (const double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double population_std(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  const double mu = mean_of(xs);
  double s = 0.0;
  for (const double x : xs) s += (x - mu) * (x - mu);
  return std::sqrt(s / static_cast<double>(xs.size()));
}

namespace {

std::string f2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

Report build_report(const ExperimentConfig& config, const std::vector<RunRecord>& records) {
  Report report;
  report.config_hash = config.hash();
  report.name = config.name;
  report.dataset = config.dataset;
  report.desk_scale = config.desk_scale;

  const Modality mod = config.modality();
  std::vector<std::string> pos_names;
  for (const TriggerPosition p : config.positions) pos_names.push_back(position_name(p, mod));

  for (const Head head : config.heads) {
    const std::string arch = ArchSpec{config.family, head, config.num_classes}.name();

    CleanAccuracyRow row;
    row.family = family_name(config.family);
    row.head = head_name(head);
    std::vector<double> original, poisoned;
    bool any_diverged = false;
    for (const RunRecord& r : records) {
      if (r.arch != arch) continue;
      if (r.diverged) {
        any_diverged = true;
        continue;
      }
      if (r.run_kind == "clean")
        original.push_back(r.clean_acc);
      else if (r.run_kind == "poisoned")
        poisoned.push_back(r.clean_acc);
    }
    row.original_mean = mean_of(original);
    row.original_std = population_std(original);
    row.original_n = static_cast<int>(original.size());
    row.poisoned_mean = mean_of(poisoned);
    row.poisoned_std = population_std(poisoned);
    row.poisoned_n = static_cast<int>(poisoned.size());
    const int expect_orig = config.repeats;
    const int expect_pois = config.repeats * static_cast<int>(config.positions.size());
    row.flagged = any_diverged || row.original_n < expect_orig || row.poisoned_n < expect_pois;
    report.rows.push_back(row);

    AttackMatrix m;
    m.family = family_name(config.family);
    m.head = head_name(head);
    m.positions = pos_names;
    m.expected_repeats = config.repeats;
    for (size_t i = 0; i < pos_names.size() && i < 3; ++i) {
      for (size_t j = 0; j < pos_names.size() && j < 3; ++j) {
        std::vector<double> cell;
        for (const RunRecord& r : records) {
          if (r.arch != arch || r.run_kind != "poisoned" || r.diverged) continue;
          if (r.train_position != pos_names[i]) continue;
          const auto it = r.attack_acc.find(pos_names[j]);
          if (it != r.attack_acc.end()) cell.push_back(it->second);
        }
        m.mean[i][j] = mean_of(cell);
        m.stdev[i][j] = population_std(cell);
        m.count[i][j] = static_cast<int>(cell.size());
      }
    }
    report.matrices.push_back(m);
  }
  return report;
}

std::vector<fs::path> write_report_files(const Report& report, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<fs::path> written;

  {
    std::ostringstream csv;
    csv << "family,head,original_mean,original_std,original_runs,"
           "poisoned_mean,poisoned_std,poisoned_runs,flagged\n";
    for (const auto& r : report.rows)
      csv << r.family << "," << r.head << "," << f2(r.original_mean) << ","
          << f2(r.original_std) << "," << r.original_n << "," << f2(r.poisoned_mean) << ","
          << f2(r.poisoned_std) << "," << r.poisoned_n << "," << (r.flagged ? 1 : 0) << "\n";
    const fs::path p = dir / "clean_accuracy.csv";
    io::write_text_file(p, csv.str());
    written.push_back(p);
  }

  for (const auto& m : report.matrices) {
    for (const bool is_std : {false, true}) {
      std::ostringstream csv;
      csv << "train_position";
      for (const auto& p : m.positions) csv << "," << p;
      csv << "\n";
      for (size_t i = 0; i < m.positions.size(); ++i) {
        csv << m.positions[i];
        for (size_t j = 0; j < m.positions.size(); ++j)
          csv << "," << f2(is_std ? m.stdev[i][j] : m.mean[i][j]);
        csv << "\n";
      }
      const fs::path p =
          dir / ("attack_" + m.family + "_" + m.head + (is_std ? "_std.csv" : "_mean.csv"));
      io::write_text_file(p, csv.str());
      written.push_back(p);
    }
  }

  {
    char hash_hex[32];
    std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                  static_cast<unsigned long long>(report.config_hash));
    std::ostringstream txt;
    txt << "experiment: " << report.name << "\n";
    txt << "dataset:    " << report.dataset << "\n";
    txt << "config:     " << hash_hex << "\n";
    if (report.desk_scale)
      txt << "scale:      desk-scale (reduced schedule; not paper-scale statistics)\n";
    txt << "\nclean accuracy (%)\n";
    txt << "  family        head  original          poisoned          drop\n";
    for (const auto& r : report.rows) {
      char line[160];
      std::snprintf(line, sizeof(line), "  %-12s %4s  %6s (+-%5s)   %6s (+-%5s)   %+6.2f%s\n",
                    r.family.c_str(), r.head.c_str(), f2(r.original_mean).c_str(),
                    f2(r.original_std).c_str(), f2(r.poisoned_mean).c_str(),
                    f2(r.poisoned_std).c_str(), r.original_mean - r.poisoned_mean,
                    r.flagged ? "  [incomplete]" : "");
      txt << line;
    }
    for (const auto& m : report.matrices) {
      txt << "\nattack accuracy (%): " << m.family << " / " << m.head
          << "  (rows = train position, columns = test position)\n";
      txt << "  " << std::string(10, ' ');
      for (const auto& p : m.positions) {
        char cell[32];
        std::snprintf(cell, sizeof(cell), " %16s", p.c_str());
        txt << cell;
      }
      txt << "\n";
      for (size_t i = 0; i < m.positions.size(); ++i) {
        char head[32];
        std::snprintf(head, sizeof(head), "  %-10s", m.positions[i].c_str());
        txt << head;
        for (size_t j = 0; j < m.positions.size(); ++j) {
          char cell[48];
          std::snprintf(cell, sizeof(cell), "  %6s (+-%5s)%s", f2(m.mean[i][j]).c_str(),
                        f2(m.stdev[i][j]).c_str(), m.cell_flagged(i, j) ? "*" : " ");
          txt << cell;
        }
        txt << "\n";
      }
      bool any_flag = false;
      for (size_t i = 0; i < m.positions.size() && !any_flag; ++i)
        for (size_t j = 0; j < m.positions.size() && !any_flag; ++j)
          any_flag = m.cell_flagged(i, j);
      if (any_flag) txt << "  * cell has fewer runs than configured repeats\n";
    }
    const fs::path p = dir / "report.txt";
    io::write_text_file(p, txt.str());
    written.push_back(p);
  }
  return written;
}

namespace {

const char* kPositionColors[3] = {"#1f77b4", "#ff7f0e", "#2ca02c"};

std::string svg_header(int w, int h) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\" viewBox=\"0 0 " << w << " " << h << "\" font-family=\"sans-serif\">\n";
  return os.str();
}

std::string text_el(double x, double y, const std::string& s, int size = 12,
                    const std::string& anchor = "start", const std::string& fill = "#222") {
  std::ostringstream os;
  os << "<text x=\"" << x << "\" y=\"" << y << "\" font-size=\"" << size << "\" text-anchor=\""
     << anchor << "\" fill=\"" << fill << "\">" << s << "</text>\n";
  return os.str();
}

}  // namespace

std::vector<fs::path> write_plots(const Report& report, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<fs::path> written;
  if (report.matrices.empty()) return written;

  // Line figure: attack accuracy vs test position; one series per
  // (train position, head); gap solid, fc dotted.
  {
    const int W = 640, H = 440;
    const double L = 70, R = 200, T = 50, B = 60;
    const double plot_w = W - L - R, plot_h = H - T - B;
    const auto& positions = report.matrices.front().positions;
    const size_t np = positions.size();

    const auto px = [&](size_t j) {
      return L + (np == 1 ? plot_w / 2 : plot_w * static_cast<double>(j) /
                                             static_cast<double>(np - 1));
    };
    const auto py = [&](double acc) { return T + plot_h * (1.0 - acc / 100.0); };

    std::ostringstream svg;
    svg << svg_header(W, H);
    svg << text_el(L, 24, "attack accuracy vs test trigger position: " +
                              report.matrices.front().family,
                   14);
    if (report.desk_scale) svg << text_el(L, 40, "desk-scale run", 11, "start", "#888");

    for (int g = 0; g <= 5; ++g) {
      const double y = py(g * 20.0);
      svg << "<line x1=\"" << L << "\" y1=\"" << y << "\" x2=\"" << L + plot_w << "\" y2=\""
          << y << "\" stroke=\"#ddd\"/>\n";
      svg << text_el(L - 8, y + 4, std::to_string(g * 20), 11, "end");
    }
    for (size_t j = 0; j < np; ++j)
      svg << text_el(px(j), T + plot_h + 20, positions[j], 12, "middle");
    svg << text_el(L - 45, T + plot_h / 2, "%", 12, "middle");

    double legend_y = T + 10;
    for (const auto& m : report.matrices) {
      const bool solid = m.head == "gap";
      for (size_t i = 0; i < np && i < 3; ++i) {
        std::ostringstream pts;
        for (size_t j = 0; j < np && j < 3; ++j) {
          if (m.count[i][j] == 0) continue;
          pts << (pts.tellp() > 0 ? " " : "") << px(j) << "," << py(m.mean[i][j]);
        }
        svg << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\""
            << kPositionColors[i] << "\" stroke-width=\"2\""
            << (solid ? "" : " stroke-dasharray=\"6,4\"") << "/>\n";
        for (size_t j = 0; j < np && j < 3; ++j) {
          if (m.count[i][j] == 0) continue;
          svg << "<circle cx=\"" << px(j) << "\" cy=\"" << py(m.mean[i][j])
              << "\" r=\"3\" fill=\"" << kPositionColors[i] << "\"/>\n";
        }
        svg << "<line x1=\"" << L + plot_w + 12 << "\" y1=\"" << legend_y << "\" x2=\""
            << L + plot_w + 44 << "\" y2=\"" << legend_y << "\" stroke=\""
            << kPositionColors[i] << "\" stroke-width=\"2\""
            << (solid ? "" : " stroke-dasharray=\"6,4\"") << "/>\n";
        svg << text_el(L + plot_w + 50, legend_y + 4,
                       "train " + m.positions[i] + " (" + m.head + ")", 11);
        legend_y += 18;
      }
    }
    svg << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << plot_w << "\" height=\""
        << plot_h << "\" fill=\"none\" stroke=\"#999\"/>\n";
    svg << "</svg>\n";
    const fs::path p = dir / ("attack_" + report.matrices.front().family + ".svg");
    io::write_text_file(p, svg.str());
    written.push_back(p);
  }

  for (const auto& m : report.matrices) {
    const size_t np = m.positions.size();
    const int cell = 90;
    const int W = 150 + cell * static_cast<int>(np) + 30;
    const int H = 110 + cell * static_cast<int>(np) + 30;
    std::ostringstream svg;
    svg << svg_header(W, H);
    svg << text_el(20, 28, "attack accuracy (%): " + m.family + " / " + m.head, 14);
    if (report.desk_scale) svg << text_el(20, 44, "desk-scale run", 11, "start", "#888");
    const double ox = 130, oy = 80;
    for (size_t j = 0; j < np; ++j)
      svg << text_el(ox + cell * (j + 0.5), oy - 10, "test " + m.positions[j], 11, "middle");
    for (size_t i = 0; i < np; ++i)
      svg << text_el(ox - 10, oy + cell * (i + 0.5) + 4, "train " + m.positions[i], 11, "end");
    for (size_t i = 0; i < np && i < 3; ++i)
      for (size_t j = 0; j < np && j < 3; ++j) {
        const double v = std::clamp(m.mean[i][j] / 100.0, 0.0, 1.0);
        const int rr = static_cast<int>(255 + (178 - 255) * v);
        const int gg = static_cast<int>(255 + (24 - 255) * v);
        const int bb = static_cast<int>(255 + (43 - 255) * v);
        char color[16];
        std::snprintf(color, sizeof(color), "#%02x%02x%02x", rr, gg, bb);
        svg << "<rect x=\"" << ox + cell * j << "\" y=\"" << oy + cell * i << "\" width=\""
            << cell << "\" height=\"" << cell << "\" fill=\"" << color
            << "\" stroke=\"#777\"/>\n";
        const std::string label = f2(m.mean[i][j]) + (m.cell_flagged(i, j) ? "*" : "");
        svg << text_el(ox + cell * (j + 0.5), oy + cell * (i + 0.5) + 4, label, 13, "middle",
                       v > 0.55 ? "#fff" : "#222");
      }
    svg << "</svg>\n";
    const fs::path p = dir / ("heatmap_" + m.family + "_" + m.head + ".svg");
    io::write_text_file(p, svg.str());
    written.push_back(p);
  }
  return written;
}

}  // namespace gapdoor
