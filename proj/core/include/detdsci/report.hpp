#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "detdsci/eval.hpp"
#include "detdsci/pipeline.hpp"

namespace detdsci::report {

struct RunEntry {
    pipeline::RunRecord record;
    /// Where the run's GeoJSON was written, if anywhere.
    std::string geojson_link;
};

struct ReportInputs {
    std::vector<RunEntry> runs;
    std::vector<std::pair<std::string, eval::EvalReport>> evals;
    std::optional<pipeline::ComparisonReport> comparison;

    [[nodiscard]] bool empty() const noexcept { return runs.empty() && evals.empty() && !comparison; }
};

struct ReportBundle {
    std::string markdown;
    nlohmann::json json;
};

/// Pure function of its inputs. Throws std::invalid_argument when there is
/// nothing to report.
[[nodiscard]] ReportBundle make_report(const ReportInputs& inputs);

/// Table with one column per named evaluation, metric rows as percentages.
[[nodiscard]] std::string eval_table_markdown(
    const std::vector<std::pair<std::string, eval::EvalReport>>& evals);

/// One row per arm with TP/FP/FN and P/R/F1 percentages.
[[nodiscard]] std::string comparison_table_markdown(const pipeline::ComparisonReport& report);

}  // namespace detdsci::report
