#include "detdsci/report.hpp"

#include <map>

#include <fmt/format.h>

namespace detdsci::report {

using nlohmann::json;

namespace {

std::string pct(const std::optional<double>& v)
{
    return v ? fmt::format("{:.2f}", *v * 100.0) : std::string("-");
}

std::string run_section(const RunEntry& entry, std::size_t index)
{
    const auto& r = entry.record;
    std::string out = fmt::format("## Run {}\n\n", index + 1);
    out += fmt::format("- Config hash: `{}`\n", r.config_hash);
    out += fmt::format("- Tiles: {}\n", r.tiles);
    out += fmt::format("- Crops: {} processed, {} failed\n", r.crops.size() - r.failed_crops(),
                       r.failed_crops());
    out += fmt::format("- Exit code: {}\n", r.exit_code);
    if (!entry.geojson_link.empty()) {
        out += fmt::format("- GeoJSON: [{0}]({0})\n", entry.geojson_link);
    }
    if (!r.fatal_error.empty()) {
        out += fmt::format("- Fatal error: {}\n", r.fatal_error);
    }

    std::map<std::string, std::size_t> per_label;
    for (const auto& label : r.targets) {
        per_label[label] = 0;
    }
    for (const auto& d : r.detections) {
        ++per_label[d.label];
    }
    out += "\n| Class | Detections |\n|---|---:|\n";
    std::size_t total = 0;
    for (const auto& [label, count] : per_label) {
        out += fmt::format("| {} | {} |\n", label, count);
        total += count;
    }
    out += fmt::format("| **Total** | {} |\n", total);

    std::map<std::string, std::size_t> routed;
    for (const auto& c : r.crops) {
        if (c.routing) {
            ++routed[c.routing->detector_id];
        }
    }
    if (!routed.empty()) {
        out += "\n| Detector | Crops |\n|---|---:|\n";
        for (const auto& [id, count] : routed) {
            out += fmt::format("| {} | {} |\n", id, count);
        }
    }
    if (r.failed_crops() > 0) {
        out += "\nFailed crops:\n\n";
        for (const auto& c : r.crops) {
            if (c.status != pipeline::CropStatus::Ok) {
                out += fmt::format("- `{}` {}: {}\n", c.crop_id, pipeline::to_string(c.status), c.error);
            }
        }
    }
    return out + "\n";
}

}  // namespace

std::string eval_table_markdown(const std::vector<std::pair<std::string, eval::EvalReport>>& evals)
{
    std::string out = "| Metric |";
    std::string rule = "|---|";
    for (const auto& [name, report] : evals) {
        out += fmt::format(" {} |", name);
        rule += "---:|";
    }
    out += "\n" + rule + "\n";

    const auto row = [&](const std::string& metric, auto&& value) {
        out += fmt::format("| {} |", metric);
        for (const auto& [name, report] : evals) {
            out += fmt::format(" {} |", value(report));
        }
        out += "\n";
    };
    row("mAP 0.5", [](const eval::EvalReport& r) { return pct(r.map50); });
    row("mAP 0.5-0.95", [](const eval::EvalReport& r) { return pct(r.map); });
    row("mAR 0.5-0.95", [](const eval::EvalReport& r) { return pct(r.mar); });
    row("Small", [](const eval::EvalReport& r) { return pct(r.map_by_size[0]); });
    row("Medium", [](const eval::EvalReport& r) { return pct(r.map_by_size[1]); });
    row("Large", [](const eval::EvalReport& r) { return pct(r.map_by_size[2]); });
    row("TP", [](const eval::EvalReport& r) { return std::to_string(r.tp); });
    row("FP", [](const eval::EvalReport& r) { return std::to_string(r.fp); });
    row("FN", [](const eval::EvalReport& r) { return std::to_string(r.fn); });
    row("Precision", [](const eval::EvalReport& r) { return pct(r.scores.precision); });
    row("Recall", [](const eval::EvalReport& r) { return pct(r.scores.recall); });
    row("F1", [](const eval::EvalReport& r) { return pct(r.scores.f1); });
    return out;
}

std::string comparison_table_markdown(const pipeline::ComparisonReport& report)
{
    std::string out = "| Model | TP | FP | FN | Precision | Recall | F1 |\n|---|---:|---:|---:|---:|---:|---:|\n";
    for (const auto& a : report.arms) {
        const std::string name = a.complete ? a.arm : a.arm + " (incomplete)";
        if (!a.counts || !a.scores) {
            out += fmt::format("| {} | - | - | - | - | - | - |\n", name);
            continue;
        }
        out += fmt::format("| {} | {} | {} | {} | {:.2f} | {:.2f} | {:.2f} |\n", name, a.counts->tp,
                           a.counts->fp, a.counts->fn, a.scores->precision * 100.0,
                           a.scores->recall * 100.0, a.scores->f1 * 100.0);
    }
    if (!report.deltas.empty()) {
        out += "\n| From | To | Δ Precision (pp) | Δ Recall (pp) | Δ F1 (pp) |\n|---|---|---:|---:|---:|\n";
        for (const auto& d : report.deltas) {
            out += fmt::format("| {} | {} | {:+.2f} | {:+.2f} | {:+.2f} |\n", d.from, d.to,
                               d.precision_pp, d.recall_pp, d.f1_pp);
        }
    }
    return out;
}

ReportBundle make_report(const ReportInputs& inputs)
{
    if (inputs.empty()) {
        throw std::invalid_argument("nothing to report: no runs, evaluations or comparison");
    }
    ReportBundle bundle;
    bundle.markdown = "# Detection report\n\n";
    json runs = json::array();
    for (std::size_t i = 0; i < inputs.runs.size(); ++i) {
        bundle.markdown += run_section(inputs.runs[i], i);
        json node = pipeline::to_json(inputs.runs[i].record);
        node["geojson"] = inputs.runs[i].geojson_link;
        runs.push_back(std::move(node));
    }
    json evals = json::object();
    if (!inputs.evals.empty()) {
        bundle.markdown += "## Evaluation\n\n" + eval_table_markdown(inputs.evals) + "\n";
        for (const auto& [name, report] : inputs.evals) {
            evals[name] = eval::to_json(report);
        }
    }
    bundle.json = {{"runs", std::move(runs)}, {"evaluations", std::move(evals)}};
    if (inputs.comparison) {
        bundle.markdown += "## Comparison\n\n" + comparison_table_markdown(*inputs.comparison) + "\n";
        bundle.json["comparison"] = pipeline::to_json(*inputs.comparison);
    } else {
        bundle.json["comparison"] = nullptr;
    }
    return bundle;
}

}  // namespace detdsci::report
