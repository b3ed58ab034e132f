#pragma once

#include <optional>
#include <string>
#include <vector>

#include "experiments.hpp"

namespace fts {

struct ParetoPoint {
    double efficiency_score = 0.0;
    double accuracy = 0.0;
    std::string record_id;

    bool operator==(const ParetoPoint& o) const {
        return efficiency_score == o.efficiency_score && accuracy == o.accuracy;
    }
};

// Failed records are skipped.
std::vector<ParetoPoint> points_from_records(const std::vector<ExperimentRecord>& records);

// Strict maximization dominance: a >= b in both coordinates, > in at least one.
bool dominates(const ParetoPoint& a, const ParetoPoint& b);

// The non-dominated subset, sorted by efficiency ascending. Coordinate
// duplicates of a frontier point are all retained. O(n log n) sweep.
std::vector<ParetoPoint> pareto_front(const std::vector<ParetoPoint>& points);

// Best frontier point with accuracy >= bound (max efficiency among them).
std::optional<ParetoPoint> query_min_accuracy(const std::vector<ParetoPoint>& frontier,
                                              double min_accuracy);
// Best frontier point with efficiency >= bound (max accuracy among them).
std::optional<ParetoPoint> query_min_efficiency(const std::vector<ParetoPoint>& frontier,
                                                double min_efficiency);

// SVG scatter + frontier polyline, with a gnuplot-compatible `.dat` twin next
// to it (same path with extension swapped).
void emit_front_plot(const std::vector<ParetoPoint>& points,
                     const std::vector<ParetoPoint>& frontier, const std::string& svg_path);

// Reparses the `.dat` twin; returns (all points, frontier).
std::pair<std::vector<ParetoPoint>, std::vector<ParetoPoint>> parse_front_dat(
    const std::string& dat_path);

std::string frontier_to_csv(const std::vector<ParetoPoint>& frontier);

}  // namespace fts
