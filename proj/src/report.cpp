#include "fsa/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace fsa {

namespace fs = std::filesystem;

const std::map<std::string, ReferenceMetrics>& reference_prediction_benchmarks() {
    static const std::map<std::string, ReferenceMetrics> m = {
        {"random_walk", {49.11, 53.02, std::nullopt}},
        {"analyst_1m", {52.71, 54.48, std::nullopt}},
        {"analyst_3m", {55.95, 55.33, std::nullopt}},
        {"analyst_6m", {56.68, 56.85, std::nullopt}},
        {"gpt_simple", {52.33, 54.52, std::nullopt}},
        {"gpt_cot", {60.35, 60.90, std::nullopt}},
        {"logit", {52.94, 57.23, std::nullopt}},
        {"ann_op", {60.45, 61.62, std::nullopt}},
        {"ann_fs", {60.12, 61.30, 59.13}},
        {"embed_ann", {58.95, 65.26, 64.22}},
        {"dual_ann", {63.16, 66.33, 65.90}},
        {"embed_ann_excl_trend", {57.11, 64.03, 63.81}},
        {"embed_ann_excl_ratio", {55.65, 62.36, 61.89}},
        {"embed_ann_excl_rationale", {58.88, 65.15, 64.16}},
        {"conf_q4", {62.44, 66.47, std::nullopt}},
        {"conf_q1", {59.86, 55.62, std::nullopt}},
        {"logprob_q4", {63.15, 65.16, std::nullopt}},
        {"logprob_q1", {58.54, 54.15, std::nullopt}},
        {"magnitude_large", {62.03, 61.16, std::nullopt}},
        {"magnitude_small", {60.22, 57.95, std::nullopt}},
    };
    return m;
}

const std::map<std::string, ReferenceBacktest>& reference_backtest_benchmarks() {
    static const std::map<std::string, ReferenceBacktest> m = {
        {"gpt_ew",
         {1.28, 0.38, 3.36,
          {{"CAPM", 1.23}, {"3F", 1.33}, {"4F", 1.29}, {"5F", 0.97}, {"5F+Mom", 0.84}}}},
        {"gpt_vw",
         {0.56, 0.38, 1.47,
          {{"CAPM", 0.71}, {"3F", 1.00}, {"4F", 0.89}, {"5F", 0.56}, {"5F+Mom", 0.37}}}},
        {"ann_ew",
         {0.89, 0.35, 2.54,
          {{"CAPM", 1.11}, {"3F", 1.23}, {"4F", 0.97}, {"5F", 0.69}, {"5F+Mom", 0.60}}}},
        {"ann_vw",
         {0.52, 0.29, 1.79,
          {{"CAPM", 0.90}, {"3F", 1.08}, {"4F", 0.88}, {"5F", 0.72}, {"5F+Mom", 0.50}}}},
        {"logit_ew",
         {0.88, 0.43, 2.05,
          {{"CAPM", 1.07}, {"3F", 1.16}, {"4F", 0.91}, {"5F", 0.48}, {"5F+Mom", 0.43}}}},
        {"logit_vw",
         {0.42, 0.52, 0.81,
          {{"CAPM", 0.64}, {"3F", 0.80}, {"4F", 0.75}, {"5F", 0.47}, {"5F+Mom", 0.31}}}},
    };
    return m;
}

ReferenceGuessRates reference_guess_rates() { return {}; }

std::string svg_line_chart(const std::vector<std::pair<double, double>>& points,
                           const std::string& title, const std::string& x_label,
                           const std::string& y_label) {
    const int width = 720, height = 420, margin = 60;
    std::string svg = strf(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
        "viewBox=\"0 0 %d %d\">\n",
        width, height, width, height);
    svg += strf("<rect x=\"0\" y=\"0\" width=\"%d\" height=\"%d\" fill=\"white\"/>\n", width,
                height);
    svg += strf(
        "<text x=\"%d\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" "
        "text-anchor=\"middle\">%s</text>\n",
        width / 2, title.c_str());
    if (points.size() >= 2) {
        double xmin = points.front().first, xmax = points.front().first;
        double ymin = points.front().second, ymax = points.front().second;
        for (const auto& [x, y] : points) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
        if (xmax == xmin) xmax = xmin + 1.0;
        if (ymax == ymin) ymax = ymin + 1.0;
        const double pad = 0.05 * (ymax - ymin);
        ymin -= pad;
        ymax += pad;
        auto px = [&](double x) {
            return margin + (x - xmin) / (xmax - xmin) * (width - 2 * margin);
        };
        auto py = [&](double y) {
            return height - margin - (y - ymin) / (ymax - ymin) * (height - 2 * margin);
        };
        svg += strf(
            "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n"
            "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n",
            margin, height - margin, width - margin, height - margin, margin, margin, margin,
            height - margin);
        std::string path = "M";
        for (const auto& [x, y] : points) path += strf(" %.2f %.2f", px(x), py(y));
        svg += "<path d=\"" + path + "\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n";
        for (const auto& [x, y] : points) {
            svg += strf("<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2.5\" fill=\"#1f77b4\"/>\n", px(x),
                        py(y));
        }
        svg += strf(
            "<text x=\"%d\" y=\"%d\" font-family=\"sans-serif\" font-size=\"12\" "
            "text-anchor=\"middle\">%s</text>\n",
            width / 2, height - 16, x_label.c_str());
        svg += strf(
            "<text x=\"18\" y=\"%d\" font-family=\"sans-serif\" font-size=\"12\" "
            "text-anchor=\"middle\" transform=\"rotate(-90 18 %d)\">%s</text>\n",
            height / 2, height / 2, y_label.c_str());
        svg += strf(
            "<text x=\"%d\" y=\"%d\" font-family=\"sans-serif\" font-size=\"10\">%.4g</text>\n"
            "<text x=\"%d\" y=\"%d\" font-family=\"sans-serif\" font-size=\"10\">%.4g</text>\n",
            8, height - margin, ymin + pad, 8, margin + 4, ymax - pad);
        svg += strf(
            "<text x=\"%d\" y=\"%d\" font-family=\"sans-serif\" font-size=\"10\">%.0f</text>\n"
            "<text x=\"%d\" y=\"%d\" font-family=\"sans-serif\" font-size=\"10\" "
            "text-anchor=\"end\">%.0f</text>\n",
            margin, height - margin + 16, xmin, width - margin, height - margin + 16, xmax);
    }
    svg += "</svg>\n";
    return svg;
}

void write_text_file(const std::string& path, const std::string& content) {
    fs::create_directories(fs::path(path).parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    out << content;
}

}  // namespace fsa
