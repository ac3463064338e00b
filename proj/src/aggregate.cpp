#include "locsim/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "locsim/errors.hpp"

#include "json.hpp"

namespace locsim {

double percentile(std::vector<double> samples, double q) {
    if (samples.empty()) throw DataError("percentile: empty samples");
    if (!(q > 0.0) || q > 1.0) throw DataError("percentile: q must be in (0, 1]");
    std::sort(samples.begin(), samples.end());
    const auto len = static_cast<double>(samples.size());
    auto idx = static_cast<std::size_t>(std::ceil(q * len)) - 1;
    if (idx >= samples.size()) idx = samples.size() - 1;
    return samples[idx];
}

double weighted_percentile(std::vector<std::pair<double, double>> ws, double q) {
    if (ws.empty()) throw DataError("percentile: empty samples");
    if (!(q > 0.0) || q > 1.0) throw DataError("percentile: q must be in (0, 1]");
    std::sort(ws.begin(), ws.end());
    long double total = 0;
    for (const auto& [v, w] : ws) {
        (void)v;
        total += w;
    }
    const long double target = static_cast<long double>(q) * total;
    long double cum = 0;
    for (const auto& [v, w] : ws) {
        cum += w;
        // nudge for floating accumulation so w==1 reproduces nearest-rank
        if (cum + total * 1e-12L >= target) return v;
    }
    return ws.back().first;
}

namespace {

struct Sample {
    double value;
    bool recall;
    double weight;
};

AggregateReport build_rows(const std::map<std::uint32_t, std::vector<Sample>>& by_n,
                           const AggregateKeys& keys, const std::string& mode,
                           const std::string& criterion) {
    AggregateReport report;
    for (const auto& [n, samples] : by_n) {
        AggregateRow row;
        row.game_label = keys.game_label;
        row.encoding = keys.encoding;
        row.logic = keys.logic;
        row.mode = mode;
        row.n = n;
        row.samples = samples.size();
        row.criterion = criterion;
        std::vector<std::pair<double, double>> ws;
        ws.reserve(samples.size());
        long double success = 0, total_w = 0;
        for (const auto& s : samples) {
            ws.emplace_back(s.value, s.weight);
            if (s.recall) success += s.weight;
            total_w += s.weight;
        }
        row.p25 = weighted_percentile(ws, 0.25);
        row.p50 = weighted_percentile(ws, 0.50);
        row.p75 = weighted_percentile(std::move(ws), 0.75);
        row.mean_success_rate =
            total_w > 0 ? static_cast<double>(success / total_w) : 0.0;
        report.rows.push_back(std::move(row));
    }
    return report;
}

void check_weights(std::size_t traces, const std::vector<double>& weights) {
    if (!weights.empty() && weights.size() != traces)
        throw ConfigError("aggregate: weight vector length must match trace count");
    for (double w : weights) {
        if (!(w >= 0.0)) throw ConfigError("aggregate: weights must be non-negative");
    }
}

}  // namespace

AggregateReport aggregate_greedy(const std::vector<GreedyTrace>& traces,
                                 const AggregateKeys& keys,
                                 const std::vector<double>& weights) {
    if (traces.empty()) throw DataError("aggregate: zero traces");
    check_weights(traces.size(), weights);
    std::map<std::uint32_t, std::vector<Sample>> by_n;
    for (std::size_t t = 0; t < traces.size(); ++t) {
        const double w = weights.empty() ? 1.0 : weights[t];
        for (const auto& st : traces[t].steps) {
            by_n[st.n].push_back(
                Sample{static_cast<double>(st.remaining), st.recall, w});
        }
    }
    return build_rows(by_n, keys, "greedy", "");
}

AggregateReport aggregate_statistical(const std::vector<StatTrace>& traces,
                                      const AggregateKeys& keys,
                                      const SuccessCriterion& criterion,
                                      std::size_t criterion_index,
                                      const std::vector<double>& weights) {
    if (traces.empty()) throw DataError("aggregate: zero traces");
    check_weights(traces.size(), weights);

    std::ostringstream label;
    label << criterion.kind() << "=";
    if (auto* t = std::get_if<ThresholdCriterion>(&criterion.variant)) label << t->tau;
    if (auto* t = std::get_if<TopKCriterion>(&criterion.variant)) label << t->k;
    if (auto* t = std::get_if<ScoreDropCriterion>(&criterion.variant)) label << t->delta;

    std::map<std::uint32_t, std::vector<Sample>> by_n;
    for (std::size_t t = 0; t < traces.size(); ++t) {
        const double w = weights.empty() ? 1.0 : weights[t];
        for (const auto& st : traces[t].steps) {
            if (criterion_index >= st.recall.size())
                throw DataError("aggregate: criterion index out of range for trace");
            by_n[st.n].push_back(Sample{static_cast<double>(st.rank),
                                        st.recall[criterion_index], w});
        }
    }
    return build_rows(by_n, keys, "statistical", label.str());
}

namespace {

std::string format_number(double v) {
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 1e15) {
        std::ostringstream os;
        os << static_cast<long long>(v);
        return os.str();
    }
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

std::string svg_for_group(const std::vector<const AggregateRow*>& rows) {
    // Self-contained line chart: log-scaled percentiles (left axis) and mean
    // success rate (right axis, red) against the number of scans n.
    const int width = 640, height = 400;
    const int ml = 70, mr = 70, mt = 40, mb = 50;
    const double plot_w = width - ml - mr;
    const double plot_h = height - mt - mb;

    double max_v = 1.0;
    std::uint32_t min_n = rows.front()->n, max_n = rows.front()->n;
    for (const auto* r : rows) {
        max_v = std::max({max_v, r->p25, r->p50, r->p75});
        min_n = std::min(min_n, r->n);
        max_n = std::max(max_n, r->n);
    }
    const double log_top = std::log10(max_v + 1.0);
    auto x_of = [&](std::uint32_t n) {
        if (max_n == min_n) return ml + plot_w / 2;
        return ml + plot_w * (static_cast<double>(n - min_n) / (max_n - min_n));
    };
    auto y_of_count = [&](double v) {
        const double frac = log_top > 0 ? std::log10(v + 1.0) / log_top : 0.0;
        return mt + plot_h * (1.0 - frac);
    };
    auto y_of_rate = [&](double v) { return mt + plot_h * (1.0 - v); };

    auto polyline = [&](auto&& y_fn, auto&& value_fn, const char* color, int sw) {
        std::ostringstream os;
        os << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << sw
           << "\" points=\"";
        for (const auto* r : rows) {
            os << x_of(r->n) << "," << y_fn(value_fn(*r)) << " ";
        }
        os << "\"/>\n";
        return os.str();
    };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    svg << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    const auto& first = *rows.front();
    svg << "  <text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"14\">" << first.game_label << " / "
        << first.encoding << " vs " << first.logic << " (" << first.mode << ")</text>\n";
    // axes
    svg << "  <line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
        << mt + plot_h << "\" stroke=\"black\"/>\n";
    svg << "  <line x1=\"" << ml << "\" y1=\"" << mt + plot_h << "\" x2=\"" << ml + plot_w
        << "\" y2=\"" << mt + plot_h << "\" stroke=\"black\"/>\n";
    svg << "  <line x1=\"" << ml + plot_w << "\" y1=\"" << mt << "\" x2=\"" << ml + plot_w
        << "\" y2=\"" << mt + plot_h << "\" stroke=\"red\"/>\n";
    // left (log) axis ticks at powers of ten
    for (int e = 0;; ++e) {
        const double v = std::pow(10.0, e) - 1.0;
        if (v > max_v) break;
        const double y = y_of_count(v);
        svg << "  <line x1=\"" << ml - 4 << "\" y1=\"" << y << "\" x2=\"" << ml << "\" y2=\""
            << y << "\" stroke=\"black\"/>\n";
        svg << "  <text x=\"" << ml - 8 << "\" y=\"" << y + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
            << format_number(v) << "</text>\n";
    }
    // right axis ticks
    for (int i = 0; i <= 4; ++i) {
        const double v = i / 4.0;
        const double y = y_of_rate(v);
        svg << "  <line x1=\"" << ml + plot_w << "\" y1=\"" << y << "\" x2=\""
            << ml + plot_w + 4 << "\" y2=\"" << y << "\" stroke=\"red\"/>\n";
        svg << "  <text x=\"" << ml + plot_w + 8 << "\" y=\"" << y + 4
            << "\" text-anchor=\"start\" font-family=\"sans-serif\" font-size=\"10\" "
            << "fill=\"red\">" << v << "</text>\n";
    }
    // x ticks
    for (const auto* r : rows) {
        const double x = x_of(r->n);
        svg << "  <line x1=\"" << x << "\" y1=\"" << mt + plot_h << "\" x2=\"" << x
            << "\" y2=\"" << mt + plot_h + 4 << "\" stroke=\"black\"/>\n";
        svg << "  <text x=\"" << x << "\" y=\"" << mt + plot_h + 16
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << r->n
            << "</text>\n";
    }
    svg << "  <text x=\"" << ml + plot_w / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">scans n"
        << "</text>\n";

    svg << polyline(y_of_count, [](const AggregateRow& r) { return r.p75; }, "#bbbbbb", 1);
    svg << polyline(y_of_count, [](const AggregateRow& r) { return r.p25; }, "#888888", 1);
    svg << polyline(y_of_count, [](const AggregateRow& r) { return r.p50; }, "black", 2);
    svg << polyline(y_of_rate, [](const AggregateRow& r) { return r.mean_success_rate; },
                    "red", 2);
    svg << "</svg>\n";
    return svg.str();
}

std::string sanitize(const std::string& s) {
    std::string out;
    for (char c : s) {
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    }
    return out;
}

}  // namespace

std::string report_to_csv(const AggregateReport& report) {
    std::ostringstream os;
    os << "game_label,encoding,logic,mode,n,samples,p25,p50,p75,mean_success_rate,criterion\n";
    for (const auto& r : report.rows) {
        os << r.game_label << ',' << r.encoding << ',' << r.logic << ',' << r.mode << ','
           << r.n << ',' << r.samples << ',' << format_number(r.p25) << ','
           << format_number(r.p50) << ',' << format_number(r.p75) << ','
           << format_number(r.mean_success_rate) << ',' << r.criterion << '\n';
    }
    return os.str();
}

AggregateReport report_from_csv(const std::string& csv) {
    AggregateReport report;
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line)) throw DataError("csv report: empty input");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string field;
        std::istringstream ls(line);
        while (std::getline(ls, field, ',')) fields.push_back(field);
        if (line.back() == ',') fields.push_back("");
        if (fields.size() != 11) throw DataError("csv report: expected 11 fields per row");
        AggregateRow r;
        r.game_label = fields[0];
        r.encoding = fields[1];
        r.logic = fields[2];
        r.mode = fields[3];
        r.n = static_cast<std::uint32_t>(std::stoul(fields[4]));
        r.samples = std::stoull(fields[5]);
        r.p25 = std::stod(fields[6]);
        r.p50 = std::stod(fields[7]);
        r.p75 = std::stod(fields[8]);
        r.mean_success_rate = std::stod(fields[9]);
        r.criterion = fields[10];
        report.rows.push_back(std::move(r));
    }
    return report;
}

void emit_report(const AggregateReport& report, const std::set<ReportFormat>& formats,
                 const std::filesystem::path& out_dir, const std::string& base_name) {
    if (report.rows.empty()) throw DataError("nothing to emit");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw DataError("cannot create report directory " + out_dir.string());

    if (formats.count(ReportFormat::Csv)) {
        std::ofstream out(out_dir / (base_name + ".csv"), std::ios::trunc);
        if (!out) throw DataError("cannot write csv report");
        out << report_to_csv(report);
    }
    if (formats.count(ReportFormat::Json)) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& r : report.rows) {
            rows.push_back({{"game_label", r.game_label},
                            {"encoding", r.encoding},
                            {"logic", r.logic},
                            {"mode", r.mode},
                            {"n", r.n},
                            {"samples", r.samples},
                            {"p25", r.p25},
                            {"p50", r.p50},
                            {"p75", r.p75},
                            {"mean_success_rate", r.mean_success_rate},
                            {"criterion", r.criterion}});
        }
        std::ofstream out(out_dir / (base_name + ".json"), std::ios::trunc);
        if (!out) throw DataError("cannot write json report");
        out << rows.dump(2) << "\n";
    }
    if (formats.count(ReportFormat::Svg)) {
        // one chart per (game_label, encoding, logic, mode, criterion)
        std::map<std::string, std::vector<const AggregateRow*>> groups;
        for (const auto& r : report.rows) {
            groups[sanitize(r.game_label) + "__" + sanitize(r.encoding) + "__" +
                   sanitize(r.logic) + "__" + sanitize(r.mode) +
                   (r.criterion.empty() ? "" : "__" + sanitize(r.criterion))]
                .push_back(&r);
        }
        for (auto& [name, rows] : groups) {
            std::sort(rows.begin(), rows.end(),
                      [](const AggregateRow* a, const AggregateRow* b) { return a->n < b->n; });
            std::ofstream out(out_dir / (base_name + "__" + name + ".svg"), std::ios::trunc);
            if (!out) throw DataError("cannot write svg report");
            out << svg_for_group(rows);
        }
    }
}

}  // namespace locsim
