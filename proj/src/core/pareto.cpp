#include "pareto.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fts {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::vector<ParetoPoint> points_from_records(const std::vector<ExperimentRecord>& records) {
    std::vector<ParetoPoint> out;
    for (const auto& r : records) {
        if (r.failed) continue;
        if (!std::isfinite(r.efficiency_score) || !std::isfinite(r.accuracy_mean)) continue;
        out.push_back({r.efficiency_score, r.accuracy_mean, r.record_id});
    }
    return out;
}

bool dominates(const ParetoPoint& a, const ParetoPoint& b) {
    if (a.efficiency_score < b.efficiency_score || a.accuracy < b.accuracy) return false;
    return a.efficiency_score > b.efficiency_score || a.accuracy > b.accuracy;
}

std::vector<ParetoPoint> pareto_front(const std::vector<ParetoPoint>& points) {
    if (points.empty()) throw ContractError("pareto_front: empty point set");
    std::vector<ParetoPoint> sorted = points;
    std::sort(sorted.begin(), sorted.end(), [](const ParetoPoint& a, const ParetoPoint& b) {
        if (a.efficiency_score != b.efficiency_score)
            return a.efficiency_score > b.efficiency_score;
        return a.accuracy > b.accuracy;
    });
    std::vector<ParetoPoint> front;
    double best_acc = -1.0;
    for (const auto& p : sorted) {
        if (p.accuracy > best_acc) {
            front.push_back(p);
            best_acc = p.accuracy;
        } else if (!front.empty() && p == front.back()) {
            front.push_back(p);  // coordinate duplicate of a frontier point
        }
    }
    std::reverse(front.begin(), front.end());  // efficiency ascending
    return front;
}

std::optional<ParetoPoint> query_min_accuracy(const std::vector<ParetoPoint>& frontier,
                                              double min_accuracy) {
    std::optional<ParetoPoint> best;
    for (const auto& p : frontier)
        if (p.accuracy >= min_accuracy &&
            (!best || p.efficiency_score > best->efficiency_score))
            best = p;
    return best;
}

std::optional<ParetoPoint> query_min_efficiency(const std::vector<ParetoPoint>& frontier,
                                                double min_efficiency) {
    std::optional<ParetoPoint> best;
    for (const auto& p : frontier)
        if (p.efficiency_score >= min_efficiency && (!best || p.accuracy > best->accuracy))
            best = p;
    return best;
}

namespace {

std::string dat_twin(const std::string& svg_path) {
    auto dot = svg_path.find_last_of('.');
    if (dot == std::string::npos) return svg_path + ".dat";
    return svg_path.substr(0, dot) + ".dat";
}

}  // namespace

void emit_front_plot(const std::vector<ParetoPoint>& points,
                     const std::vector<ParetoPoint>& frontier, const std::string& svg_path) {
    if (points.empty()) throw ContractError("emit_front_plot: no points");
    double min_e = points[0].efficiency_score, max_e = min_e;
    double min_a = points[0].accuracy, max_a = min_a;
    for (const auto& p : points) {
        min_e = std::min(min_e, p.efficiency_score);
        max_e = std::max(max_e, p.efficiency_score);
        min_a = std::min(min_a, p.accuracy);
        max_a = std::max(max_a, p.accuracy);
    }
    if (max_e == min_e) max_e = min_e + 1.0;
    if (max_a == min_a) max_a = min_a + 1.0;
    const double w = 640, h = 480, m = 60;
    auto sx = [&](double e) { return m + (e - min_e) / (max_e - min_e) * (w - 2 * m); };
    auto sy = [&](double a) { return h - m - (a - min_a) / (max_a - min_a) * (h - 2 * m); };

    std::ofstream os(svg_path);
    if (!os) throw IoError("cannot open for writing: " + svg_path);
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
       << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
    os << "  <rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
    os << "  <line x1=\"" << m << "\" y1=\"" << h - m << "\" x2=\"" << w - m << "\" y2=\""
       << h - m << "\" stroke=\"black\"/>\n";
    os << "  <line x1=\"" << m << "\" y1=\"" << m << "\" x2=\"" << m << "\" y2=\"" << h - m
       << "\" stroke=\"black\"/>\n";
    os << "  <text x=\"" << w / 2 << "\" y=\"" << h - 15
       << "\" text-anchor=\"middle\">efficiency</text>\n";
    os << "  <text x=\"18\" y=\"" << h / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
       << h / 2 << ")\">accuracy</text>\n";
    if (frontier.size() >= 1) {
        os << "  <polyline fill=\"none\" stroke=\"blue\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < frontier.size(); ++i)
            os << (i ? " " : "") << sx(frontier[i].efficiency_score) << ","
               << sy(frontier[i].accuracy);
        os << "\"/>\n";
    }
    for (const auto& p : points)
        os << "  <circle cx=\"" << sx(p.efficiency_score) << "\" cy=\"" << sy(p.accuracy)
           << "\" r=\"3\" fill=\"cyan\" stroke=\"teal\"/>\n";
    for (const auto& p : frontier)
        os << "  <circle cx=\"" << sx(p.efficiency_score) << "\" cy=\"" << sy(p.accuracy)
           << "\" r=\"4\" fill=\"red\"/>\n";
    os << "</svg>\n";
    if (!os) throw IoError("failed writing: " + svg_path);

    std::ofstream dat(dat_twin(svg_path));
    if (!dat) throw IoError("cannot open for writing: " + dat_twin(svg_path));
    dat << "# points: efficiency accuracy record_id\n";
    for (const auto& p : points)
        dat << fmt(p.efficiency_score) << " " << fmt(p.accuracy) << " "
            << (p.record_id.empty() ? "-" : p.record_id) << "\n";
    dat << "\n\n# frontier: efficiency accuracy record_id\n";
    for (const auto& p : frontier)
        dat << fmt(p.efficiency_score) << " " << fmt(p.accuracy) << " "
            << (p.record_id.empty() ? "-" : p.record_id) << "\n";
    if (!dat) throw IoError("failed writing: " + dat_twin(svg_path));
}

std::pair<std::vector<ParetoPoint>, std::vector<ParetoPoint>> parse_front_dat(
    const std::string& dat_path) {
    std::ifstream is(dat_path);
    if (!is) throw IoError("cannot open: " + dat_path);
    std::vector<ParetoPoint> points, frontier;
    std::vector<ParetoPoint>* cur = &points;
    std::string line;
    while (std::getline(is, line)) {
        if (line.rfind("# frontier", 0) == 0) {
            cur = &frontier;
            continue;
        }
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        ParetoPoint p;
        if (!(ls >> p.efficiency_score >> p.accuracy >> p.record_id))
            throw DataError("malformed .dat line: " + line);
        if (p.record_id == "-") p.record_id.clear();
        cur->push_back(p);
    }
    return {points, frontier};
}

std::string frontier_to_csv(const std::vector<ParetoPoint>& frontier) {
    std::ostringstream os;
    os << "record_id,efficiency_score,accuracy\n";
    for (const auto& p : frontier)
        os << p.record_id << "," << fmt(p.efficiency_score) << "," << fmt(p.accuracy) << "\n";
    return os.str();
}

}  // namespace fts
