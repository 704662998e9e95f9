#include "tigereval/metaeval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>

namespace tigereval::metaeval {

using ordered_json = nlohmann::ordered_json;

namespace {

void check_inputs(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size())
        throw core::Error("correlation inputs must have equal length");
    if (xs.size() < 2)
        throw DegenerateInput("need at least 2 samples, got " + std::to_string(xs.size()));
    for (double v : xs)
        if (!std::isfinite(v)) throw core::Error("non-finite value in x vector");
    for (double v : ys)
        if (!std::isfinite(v)) throw core::Error("non-finite value in y vector");
    auto constant = [](std::span<const double> v) {
        return std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; });
    };
    if (constant(xs)) throw DegenerateInput("x vector is constant");
    if (constant(ys)) throw DegenerateInput("y vector is constant");
}

// Pairs tied within a sorted vector: sum of t*(t-1)/2 over tie groups.
std::uint64_t tie_pairs(std::vector<double> sorted) {
    std::sort(sorted.begin(), sorted.end());
    std::uint64_t total = 0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        std::uint64_t t = j - i;
        total += t * (t - 1) / 2;
        i = j;
    }
    return total;
}

// Merge-sort inversion count: pairs (i < j) with v[i] > v[j], strictly.
std::uint64_t count_inversions(std::vector<double>& v) {
    std::vector<double> buffer(v.size());
    std::uint64_t inversions = 0;
    for (std::size_t width = 1; width < v.size(); width *= 2) {
        for (std::size_t lo = 0; lo + width < v.size(); lo += 2 * width) {
            std::size_t mid = lo + width;
            std::size_t hi = std::min(lo + 2 * width, v.size());
            std::size_t a = lo, b = mid, out = lo;
            while (a < mid && b < hi) {
                if (v[b] < v[a]) {
                    inversions += mid - a;
                    buffer[out++] = v[b++];
                } else {
                    buffer[out++] = v[a++];
                }
            }
            while (a < mid) buffer[out++] = v[a++];
            while (b < hi) buffer[out++] = v[b++];
            std::copy(buffer.begin() + static_cast<std::ptrdiff_t>(lo),
                      buffer.begin() + static_cast<std::ptrdiff_t>(hi),
                      v.begin() + static_cast<std::ptrdiff_t>(lo));
        }
    }
    return inversions;
}

}  // namespace

double kendall(std::span<const double> xs, std::span<const double> ys) {
    check_inputs(xs, ys);
    const std::size_t n = xs.size();

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (xs[a] != xs[b]) return xs[a] < xs[b];
        return ys[a] < ys[b];
    });

    // Tie bookkeeping over x groups; pairs tied in x contribute neither
    // concordant nor discordant and (with y ascending inside each group)
    // produce no inversions below.
    std::uint64_t xt = 0, xyt = 0;
    {
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j < n && xs[order[j]] == xs[order[i]]) ++j;
            std::uint64_t t = j - i;
            xt += t * (t - 1) / 2;
            std::size_t k = i;
            while (k < j) {
                std::size_t m = k;
                while (m < j && ys[order[m]] == ys[order[k]]) ++m;
                std::uint64_t u = m - k;
                xyt += u * (u - 1) / 2;
                k = m;
            }
            i = j;
        }
    }

    std::vector<double> y_sorted_by_x(n);
    for (std::size_t i = 0; i < n; ++i) y_sorted_by_x[i] = ys[order[i]];
    std::uint64_t discordant = count_inversions(y_sorted_by_x);
    std::uint64_t yt = tie_pairs(std::vector<double>(ys.begin(), ys.end()));

    const std::uint64_t n0 = static_cast<std::uint64_t>(n) * (n - 1) / 2;
    double numerator = static_cast<double>(n0) - static_cast<double>(xt) -
                       static_cast<double>(yt) + static_cast<double>(xyt) -
                       2.0 * static_cast<double>(discordant);
    // single sqrt keeps perfect (anti)correlations exactly +/-1
    double denominator =
        std::sqrt(static_cast<double>(n0 - xt) * static_cast<double>(n0 - yt));
    return std::clamp(numerator / denominator, -1.0, 1.0);
}

std::vector<double> midranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && values[order[j]] == values[order[i]]) ++j;
        double rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
        i = j;
    }
    return ranks;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
    check_inputs(xs, ys);
    const std::size_t n = xs.size();
    double mean_x = 0.0, mean_y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_x += xs[i];
        mean_y += ys[i];
    }
    mean_x /= static_cast<double>(n);
    mean_y /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double dx = xs[i] - mean_x;
        double dy = ys[i] - mean_y;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
    check_inputs(xs, ys);
    std::vector<double> rx = midranks(xs);
    std::vector<double> ry = midranks(ys);
    return pearson(rx, ry);
}

TaskCorrelation correlate_task(const std::vector<PairedSample>& samples) {
    std::vector<double> metric, gold;
    metric.reserve(samples.size());
    gold.reserve(samples.size());
    for (const auto& s : samples) {
        metric.push_back(s.metric_score);
        gold.push_back(s.gold);
    }
    TaskCorrelation out;
    out.kendall = kendall(metric, gold);
    out.spearman = spearman(metric, gold);
    out.pearson = pearson(metric, gold);
    out.n = samples.size();
    return out;
}

namespace {

Triple member_average(const BaselineGroup::Member& member,
                      const std::vector<std::string>& tasks) {
    if (member.average) return *member.average;
    Triple sum;
    std::size_t count = 0;
    for (const auto& task : tasks) {
        auto it = member.per_task.find(task);
        if (it == member.per_task.end()) continue;
        sum.kendall += it->second.kendall;
        sum.spearman += it->second.spearman;
        sum.pearson += it->second.pearson;
        ++count;
    }
    if (count == 0) return sum;
    sum.kendall /= static_cast<double>(count);
    sum.spearman /= static_cast<double>(count);
    sum.pearson /= static_cast<double>(count);
    return sum;
}

}  // namespace

CorrelationReport build_report(const std::map<std::string, TaskCorrelation>& per_task,
                               const std::vector<std::string>& degenerate_tasks,
                               const std::vector<BaselineGroup>& baselines) {
    if (per_task.empty() && degenerate_tasks.empty())
        throw core::Error("report needs at least one task");
    CorrelationReport report;
    report.per_task = per_task;
    report.degenerate_tasks = degenerate_tasks;

    for (const auto& [task, corr] : per_task) {
        (void)task;
        report.average.kendall += corr.kendall;
        report.average.spearman += corr.spearman;
        report.average.pearson += corr.pearson;
    }
    report.tasks_in_average = per_task.size();
    if (report.tasks_in_average > 0) {
        double n = static_cast<double>(report.tasks_in_average);
        report.average.kendall /= n;
        report.average.spearman /= n;
        report.average.pearson /= n;
    }
    for (const auto& task : degenerate_tasks)
        report.warnings.push_back("task '" + task +
                                  "' has undefined coefficients (constant input); "
                                  "excluded from the average");

    std::vector<std::string> averaged_tasks;
    for (const auto& [task, corr] : per_task) {
        (void)corr;
        averaged_tasks.push_back(task);
    }

    for (const auto& group : baselines) {
        CorrelationReport::DeltaRow row;
        row.label = group.label;
        for (const auto& [task, ours] : per_task) {
            std::optional<Triple> best;
            for (const auto& member : group.members) {
                auto it = member.per_task.find(task);
                if (it == member.per_task.end()) continue;
                if (!best) {
                    best = it->second;
                } else {
                    best->kendall = std::max(best->kendall, it->second.kendall);
                    best->spearman = std::max(best->spearman, it->second.spearman);
                    best->pearson = std::max(best->pearson, it->second.pearson);
                }
            }
            if (!best) {
                report.warnings.push_back("baseline group '" + group.label +
                                          "' lacks task '" + task + "'; delta omitted");
                continue;
            }
            row.per_task[task] = Triple{ours.kendall - best->kendall,
                                        ours.spearman - best->spearman,
                                        ours.pearson - best->pearson};
        }
        if (!group.members.empty() && report.tasks_in_average > 0) {
            std::optional<Triple> best_avg;
            for (const auto& member : group.members) {
                Triple avg = member_average(member, averaged_tasks);
                if (!best_avg) {
                    best_avg = avg;
                } else {
                    best_avg->kendall = std::max(best_avg->kendall, avg.kendall);
                    best_avg->spearman = std::max(best_avg->spearman, avg.spearman);
                    best_avg->pearson = std::max(best_avg->pearson, avg.pearson);
                }
            }
            row.average = Triple{report.average.kendall - best_avg->kendall,
                                 report.average.spearman - best_avg->spearman,
                                 report.average.pearson - best_avg->pearson};
        }
        report.deltas.push_back(std::move(row));
    }
    return report;
}

SanityReport reference_sanity(
    const std::map<std::string, std::vector<double>>& scores_by_task) {
    SanityReport report;
    for (const auto& [task, scores] : scores_by_task) {
        if (scores.empty()) throw core::Error("task '" + task + "' has no scores");
        std::size_t zero = 0, above = 0;
        for (double s : scores) {
            if (s == 0.0) ++zero;
            if (s > -2.0) ++above;
        }
        SanityReport::Row row;
        row.n = scores.size();
        row.frac_zero = 100.0 * static_cast<double>(zero) / static_cast<double>(scores.size());
        row.frac_above_minus2 =
            100.0 * static_cast<double>(above) / static_cast<double>(scores.size());
        report.per_task[task] = row;
    }
    if (report.per_task.empty()) throw core::Error("sanity report needs at least one task");
    for (const auto& [task, row] : report.per_task) {
        (void)task;
        report.average.frac_zero += row.frac_zero;
        report.average.frac_above_minus2 += row.frac_above_minus2;
        report.average.n += row.n;
    }
    double count = static_cast<double>(report.per_task.size());
    report.average.frac_zero /= count;
    report.average.frac_above_minus2 /= count;
    return report;
}

SanityReport reference_sanity(const std::vector<core::ScoredInstance>& scored) {
    std::map<std::string, std::vector<double>> by_task;
    for (const auto& s : scored) by_task[s.instance.task.name()].push_back(s.score);
    return reference_sanity(by_task);
}

namespace {

std::string fixed(double value, int digits) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(digits);
    out << value;
    return out.str();
}

}  // namespace

std::string to_markdown(const CorrelationReport& report) {
    std::vector<std::string> tasks;
    for (const auto& [task, corr] : report.per_task) {
        (void)corr;
        tasks.push_back(task);
    }
    for (const auto& task : report.degenerate_tasks) tasks.push_back(task);

    std::ostringstream out;
    out << "| Metric |";
    for (const auto& task : tasks) out << " " << task << " |";
    out << " Average |\n|---|";
    for (std::size_t i = 0; i < tasks.size(); ++i) out << "---|";
    out << "---|\n";

    auto coefficient_row = [&](const std::string& label, auto pick) {
        out << "| " << label << " |";
        for (const auto& task : tasks) {
            auto it = report.per_task.find(task);
            if (it == report.per_task.end()) out << " n/a |";
            else out << " " << fixed(pick(it->second), 4) << " |";
        }
        out << " " << fixed(pick(report.average), 4) << " |\n";
    };
    coefficient_row("Kendall", [](const auto& c) { return c.kendall; });
    coefficient_row("Spearman", [](const auto& c) { return c.spearman; });
    coefficient_row("Pearson", [](const auto& c) { return c.pearson; });

    out << "| n |";
    for (const auto& task : tasks) {
        auto it = report.per_task.find(task);
        if (it == report.per_task.end()) out << " n/a |";
        else out << " " << it->second.n << " |";
    }
    out << " - |\n";

    for (const auto& delta : report.deltas) {
        auto delta_row = [&](const std::string& coeff, auto pick) {
            out << "| Delta (ours - " << delta.label << ") " << coeff << " |";
            for (const auto& task : tasks) {
                auto it = delta.per_task.find(task);
                if (it == delta.per_task.end()) out << " n/a |";
                else out << " " << fixed(pick(it->second), 4) << " |";
            }
            if (delta.average) out << " " << fixed(pick(*delta.average), 4) << " |\n";
            else out << " n/a |\n";
        };
        delta_row("Kendall", [](const Triple& t) { return t.kendall; });
        delta_row("Spearman", [](const Triple& t) { return t.spearman; });
        delta_row("Pearson", [](const Triple& t) { return t.pearson; });
    }

    for (const auto& warning : report.warnings) out << "\n_" << warning << "_\n";
    return out.str();
}

nlohmann::ordered_json to_json(const CorrelationReport& report) {
    ordered_json out;
    ordered_json per_task = ordered_json::object();
    for (const auto& [task, corr] : report.per_task) {
        ordered_json c;
        c["kendall"] = corr.kendall;
        c["spearman"] = corr.spearman;
        c["pearson"] = corr.pearson;
        c["n"] = corr.n;
        per_task[task] = std::move(c);
    }
    out["per_task"] = std::move(per_task);
    out["degenerate_tasks"] = report.degenerate_tasks;
    ordered_json avg;
    avg["kendall"] = report.average.kendall;
    avg["spearman"] = report.average.spearman;
    avg["pearson"] = report.average.pearson;
    avg["tasks"] = report.tasks_in_average;
    out["average"] = std::move(avg);
    ordered_json deltas = ordered_json::array();
    for (const auto& delta : report.deltas) {
        ordered_json d;
        d["label"] = delta.label;
        ordered_json per = ordered_json::object();
        for (const auto& [task, triple] : delta.per_task) {
            ordered_json t;
            t["kendall"] = triple.kendall;
            t["spearman"] = triple.spearman;
            t["pearson"] = triple.pearson;
            per[task] = std::move(t);
        }
        d["per_task"] = std::move(per);
        if (delta.average) {
            ordered_json t;
            t["kendall"] = delta.average->kendall;
            t["spearman"] = delta.average->spearman;
            t["pearson"] = delta.average->pearson;
            d["average"] = std::move(t);
        }
        deltas.push_back(std::move(d));
    }
    out["deltas"] = std::move(deltas);
    out["warnings"] = report.warnings;
    return out;
}

std::string to_markdown(const SanityReport& report) {
    std::ostringstream out;
    out << "| |";
    for (const auto& [task, row] : report.per_task) {
        (void)row;
        out << " " << task << " |";
    }
    out << " Average |\n|---|";
    for (std::size_t i = 0; i < report.per_task.size(); ++i) out << "---|";
    out << "---|\n";

    out << "| score = 0 (%) |";
    for (const auto& [task, row] : report.per_task) {
        (void)task;
        out << " " << fixed(row.frac_zero, 2) << " |";
    }
    out << " " << fixed(report.average.frac_zero, 2) << " |\n";

    out << "| score > -2 (%) |";
    for (const auto& [task, row] : report.per_task) {
        (void)task;
        out << " " << fixed(row.frac_above_minus2, 2) << " |";
    }
    out << " " << fixed(report.average.frac_above_minus2, 2) << " |\n";
    return out.str();
}

nlohmann::ordered_json to_json(const SanityReport& report) {
    ordered_json out;
    ordered_json per_task = ordered_json::object();
    for (const auto& [task, row] : report.per_task) {
        ordered_json r;
        r["frac_zero"] = row.frac_zero;
        r["frac_above_minus2"] = row.frac_above_minus2;
        r["n"] = row.n;
        per_task[task] = std::move(r);
    }
    out["per_task"] = std::move(per_task);
    ordered_json avg;
    avg["frac_zero"] = report.average.frac_zero;
    avg["frac_above_minus2"] = report.average.frac_above_minus2;
    out["average"] = std::move(avg);
    return out;
}

}  // namespace tigereval::metaeval
