// Rank/linear correlation statistics between metric scores and gold
// ratings, pooled per task, with report assembly (averages, delta rows)
// and the gold-reference sanity analysis.
#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tigereval/core.hpp"

namespace tigereval::metaeval {

/// A correlation input vector was constant (or too short); the coefficient
/// is undefined and the task is excluded from averages.
class DegenerateInput : public core::Error {
public:
    using core::Error::Error;
};

/// Kendall tau-b (tie corrected), computed in O(n log n) via merge-sort
/// inversion counting.
double kendall(std::span<const double> xs, std::span<const double> ys);

/// Pearson of mid-ranks (ties get their average rank).
double spearman(std::span<const double> xs, std::span<const double> ys);

/// Sample Pearson r, two-pass (means first).
double pearson(std::span<const double> xs, std::span<const double> ys);

/// 1-based ranks with ties averaged.
std::vector<double> midranks(std::span<const double> values);

struct GoldRating {
    std::string instance_id;
    std::string system;
    double rating = 0.0;
};

struct PairedSample {
    double metric_score = 0.0;
    double gold = 0.0;
    std::string instance_id;
    std::string system;
};

struct TaskCorrelation {
    double kendall = 0.0;
    double spearman = 0.0;
    double pearson = 0.0;
    std::size_t n = 0;
};

/// Pools every sample of a task (across systems and inputs) into one pair
/// of vectors before computing the three coefficients.
TaskCorrelation correlate_task(const std::vector<PairedSample>& samples);

struct Triple {
    double kendall = 0.0;
    double spearman = 0.0;
    double pearson = 0.0;
};

struct BaselineGroup {
    struct Member {
        std::string name;
        std::map<std::string, Triple> per_task;
        std::optional<Triple> average;  // computed over its tasks when absent
    };
    std::string label;  // e.g. "best reference-free"
    std::vector<Member> members;
};

struct CorrelationReport {
    std::map<std::string, TaskCorrelation> per_task;
    std::vector<std::string> degenerate_tasks;  // shown as n/a, excluded from average
    Triple average;
    std::size_t tasks_in_average = 0;
    struct DeltaRow {
        std::string label;
        std::map<std::string, Triple> per_task;  // this report minus group max
        std::optional<Triple> average;
    };
    std::vector<DeltaRow> deltas;
    std::vector<std::string> warnings;
};

/// Average is the unweighted mean over non-degenerate tasks. Each delta row
/// subtracts the per-task (and per-average-column) maximum over the named
/// baseline group; tasks the group lacks are omitted with a warning.
CorrelationReport build_report(const std::map<std::string, TaskCorrelation>& per_task,
                               const std::vector<std::string>& degenerate_tasks = {},
                               const std::vector<BaselineGroup>& baselines = {});

struct SanityReport {
    struct Row {
        double frac_zero = 0.0;          // percent with score == 0
        double frac_above_minus2 = 0.0;  // percent with score > -2
        std::size_t n = 0;
    };
    std::map<std::string, Row> per_task;
    Row average;  // unweighted over tasks
};

SanityReport reference_sanity(const std::map<std::string, std::vector<double>>& scores_by_task);
SanityReport reference_sanity(const std::vector<core::ScoredInstance>& scored);

std::string to_markdown(const CorrelationReport& report);
nlohmann::ordered_json to_json(const CorrelationReport& report);
std::string to_markdown(const SanityReport& report);
nlohmann::ordered_json to_json(const SanityReport& report);

}  // namespace tigereval::metaeval
