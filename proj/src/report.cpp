/*
 * Copyright 2026 The rqat Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


// CSV tables and PNG line plots for sweep directories.

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "rqat/errors.hpp"
#include "rqat/experiment.hpp"

namespace rqat {

namespace {

namespace fs = std::filesystem;

void write_table(const fs::path& path, const std::vector<Curve>& curves, const char* x_name) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "series,bits," << x_name << ",accuracy,runs\n";
    char buf[96];
    for (const auto& c : curves)
        for (const auto& p : c.points) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%d", p.x, p.accuracy, p.runs);
            out << c.series << ',' << c.bits << ',' << buf << '\n';
        }
    if (!out) throw IoError("short write to " + path.string());
}

std::string fmt(double v, int decimals) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

void plot(const fs::path& path, const std::vector<Curve>& curves, const std::string& title, const std::string& x_label) {
    constexpr int W = 900, H = 580, left = 80, right = 240, top = 70, bottom = 70;
    cv::Mat img(H, W, CV_8UC3, cv::Scalar(255, 255, 255));
    double x_max = 0.0, y_min = 1.0;
    for (const auto& c : curves)
        for (const auto& p : c.points) {
            x_max = std::max(x_max, p.x);
            y_min = std::min(y_min, p.accuracy);
        }
    if (x_max <= 0.0) x_max = 1.0;
    y_min = std::max(0.0, std::floor((y_min - 0.05) * 10.0) / 10.0);
    const double y_max = 1.0;
    const int pw = W - left - right, ph = H - top - bottom;
    auto px = [&](double x) { return left + static_cast<int>(std::lround(x / x_max * pw)); };
    auto py = [&](double y) { return top + ph - static_cast<int>(std::lround((y - y_min) / (y_max - y_min) * ph)); };

    const auto black = cv::Scalar(0, 0, 0), grid = cv::Scalar(225, 225, 225);
    const int font = cv::FONT_HERSHEY_SIMPLEX;
    for (int i = 0; i <= 5; ++i) {
        const double y = y_min + (y_max - y_min) * i / 5.0;
        const double x = x_max * i / 5.0;
        cv::line(img, {left, py(y)}, {left + pw, py(y)}, grid, 1);
        cv::line(img, {px(x), top}, {px(x), top + ph}, grid, 1);
        cv::putText(img, fmt(y, 2), {left - 52, py(y) + 5}, font, 0.45, black, 1, cv::LINE_AA);
        cv::putText(img, fmt(x, 2), {px(x) - 16, top + ph + 20}, font, 0.45, black, 1, cv::LINE_AA);
    }
    cv::rectangle(img, {left, top}, {left + pw, top + ph}, black, 1);
    cv::putText(img, title, {left, 30}, font, 0.65, black, 1, cv::LINE_AA);
    cv::putText(img, x_label, {left + pw / 2 - 40, H - 22}, font, 0.55, black, 1, cv::LINE_AA);
    cv::putText(img, "accuracy", {20, top - 12}, font, 0.5, black, 1, cv::LINE_AA);

    static const cv::Scalar palette[] = {{180, 119, 31}, {14, 127, 255}, {44, 160, 44},  {40, 39, 214},
                                         {189, 103, 148}, {75, 86, 140},  {194, 119, 227}, {127, 127, 127}};
    int row = 0;
    for (const auto& c : curves) {
        const auto color = palette[row % std::size(palette)];
        std::vector<cv::Point> pts;
        for (const auto& p : c.points) pts.emplace_back(px(p.x), py(p.accuracy));
        if (pts.size() > 1) cv::polylines(img, pts, false, color, 2, cv::LINE_AA);
        for (const auto& p : pts) cv::circle(img, p, 4, color, cv::FILLED, cv::LINE_AA);
        const int ly = top + 10 + 22 * row;
        cv::line(img, {W - right + 16, ly}, {W - right + 46, ly}, color, 2, cv::LINE_AA);
        cv::putText(img, c.series + " W" + std::to_string(c.bits), {W - right + 54, ly + 5}, font, 0.45, black, 1,
                    cv::LINE_AA);
        ++row;
    }
    if (!cv::imwrite(path.string(), img)) throw IoError("cannot write " + path.string());
}

}  // namespace

SweepReport write_report(const std::string& sweep_dir, const std::string& out_dir) {
    SweepReport rep = collect_sweep(sweep_dir);
    if (rep.manifests == 0) throw IngestError("no manifest.json files under " + sweep_dir);
    const fs::path out(out_dir);
    fs::create_directories(out);
    write_table(out / "fault_curves.csv", rep.fault_curves, "fault_rate");
    write_table(out / "variability_curves.csv", rep.variability_curves, "sigma_over_mu");
    plot(out / "fault_curves.png", rep.fault_curves, "accuracy vs bit-fault rate", "bit-fault rate");
    plot(out / "variability_curves.png", rep.variability_curves, "accuracy vs sigma/mu", "sigma/mu");
    return rep;
}

}  // namespace rqat
