#include "fitcap/reporting.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "fitcap/errors.hpp"
#include "fitcap/seeding.hpp"

namespace fitcap {

namespace fs = std::filesystem;

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

std::string opt_number(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::vector<TauPoint> tau_points(const std::string& model, const std::map<double, std::vector<double>>& by_tau) {
    std::vector<TauPoint> out;
    for (const auto& [tau, vals] : by_tau) {
        if (vals.empty()) continue;
        TauPoint p;
        p.model = model;
        p.tau = tau;
        p.n = vals.size();
        p.mean = mean_of(vals);
        p.std = sample_std(vals);
        p.min = *std::min_element(vals.begin(), vals.end());
        p.max = *std::max_element(vals.begin(), vals.end());
        out.push_back(p);
    }
    return out;
}

ModelPsi summarize(const std::string& model, const std::vector<const RunRecord*>& runs) {
    ModelPsi m;
    m.model = model;
    std::vector<double> values;
    for (const auto* r : runs) {
        ++m.runs;
        if (r->failed) {
            ++m.failed_runs;
            std::string note = "seed " + std::to_string(r->key.seed) + ": ";
            for (std::size_t i = 0; i < r->failure_reasons.size(); ++i) {
                note += (i ? "; " : "") + r->failure_reasons[i];
            }
            m.failure_notes.push_back(note);
        }
        if (r->test_accuracy) values.push_back(*r->test_accuracy);
    }
    if (!values.empty()) m.summary = boxplot_stats(values);
    return m;
}

std::optional<double> mean_present(const std::vector<std::optional<double>>& v) {
    std::vector<double> vals;
    for (const auto& x : v) {
        if (x) vals.push_back(*x);
    }
    if (vals.empty()) return std::nullopt;
    return mean_of(vals);
}

}  // namespace

MetricReport build_report(const std::vector<RunRecord>& input) {
    if (input.empty()) throw ArgumentError("cannot build a report from an empty store");
    // Store order is filesystem order; sort so every output is a function of the set.
    std::vector<RunRecord> records = input;
    std::sort(records.begin(), records.end(), [](const RunRecord& a, const RunRecord& b) {
        if (a.key.family != b.key.family) return a.key.family < b.key.family;
        if (a.key.seed != b.key.seed) return a.key.seed < b.key.seed;
        if (a.key.tau != b.key.tau) return a.key.tau < b.key.tau;
        return a.key.id() < b.key.id();
    });
    MetricReport rep;
    rep.dataset = records.front().key.dataset;
    rep.record_count = records.size();

    std::vector<std::string> ids;
    std::vector<const RunRecord*> baseline_runs;
    std::map<std::string, std::vector<const RunRecord*>> by_family;
    std::map<std::uint64_t, const RunRecord*> baseline_by_seed;
    for (const auto& r : records) {
        if (r.key.dataset != rep.dataset) throw ConsistencyError("records mix datasets");
        ids.push_back(r.key.id());
        if (r.key.family == kBaselineName) {
            baseline_runs.push_back(&r);
            baseline_by_seed[r.key.seed] = &r;
        } else {
            by_family[r.key.family].push_back(&r);
        }
    }
    std::sort(ids.begin(), ids.end());
    std::uint64_t h = fnv1a64("");
    for (const auto& id : ids) h = fnv1a64(id + "\n", h);
    std::ostringstream hs;
    hs << std::hex << h;
    rep.store_hash = hs.str();

    rep.baseline = summarize(kBaselineLabel, baseline_runs);

    // accuracy vs tau: baselines are the tau = 0 point of every curve.
    std::map<double, std::vector<double>> base_tau, base_knn;
    for (const auto* r : baseline_runs) {
        if (r->test_accuracy) base_tau[0.0].push_back(*r->test_accuracy);
        if (r->knn_accuracy) base_knn[0.0].push_back(*r->knn_accuracy);
    }
    if (by_family.empty()) {
        auto pts = tau_points(kBaselineLabel, base_tau);
        rep.accuracy_vs_tau.insert(rep.accuracy_vs_tau.end(), pts.begin(), pts.end());
        auto knn = tau_points(kBaselineLabel, base_knn);
        rep.knn_vs_tau.insert(rep.knn_vs_tau.end(), knn.begin(), knn.end());
    }

    std::map<std::string, double> psi_means, is_means, fid_means;
    for (const auto& [family, runs] : by_family) {
        std::vector<const RunRecord*> psi_runs;
        std::map<double, std::vector<double>> acc = base_tau, knn = base_knn;
        std::vector<std::optional<double>> is_vals, fid_vals;
        std::vector<std::vector<double>> rel;  // per seed
        for (const auto* r : runs) {
            if (r->test_accuracy) acc[r->key.tau].push_back(*r->test_accuracy);
            if (r->knn_accuracy) knn[r->key.tau].push_back(*r->knn_accuracy);
            if (!r->psi) continue;
            psi_runs.push_back(r);
            is_vals.push_back(r->adapted_is);
            fid_vals.push_back(r->adapted_fid);
            auto base = baseline_by_seed.find(r->key.seed);
            if (base == baseline_by_seed.end() || r->per_class_accuracy.empty() ||
                base->second->per_class_accuracy.size() != r->per_class_accuracy.size()) {
                continue;
            }
            std::vector<double> model, reference;
            for (std::size_t k = 0; k < r->per_class_accuracy.size(); ++k) {
                const auto& a = r->per_class_accuracy[k];
                const auto& b = base->second->per_class_accuracy[k];
                model.push_back(a ? *a : std::nan(""));
                reference.push_back(b ? *b : std::nan(""));
            }
            rel.push_back(per_class_relative(model, reference));
        }
        auto fam = summarize(family, psi_runs);
        auto pts = tau_points(family, acc);
        rep.accuracy_vs_tau.insert(rep.accuracy_vs_tau.end(), pts.begin(), pts.end());
        auto kpts = tau_points(family, knn);
        rep.knn_vs_tau.insert(rep.knn_vs_tau.end(), kpts.begin(), kpts.end());

        if (!rel.empty()) {
            ClassRelative cr;
            cr.model = family;
            for (std::size_t k = 0; k < rel.front().size(); ++k) {
                std::vector<double> vals;
                for (const auto& seed_rel : rel) {
                    if (std::isfinite(seed_rel[k])) vals.push_back(seed_rel[k]);
                }
                cr.n.push_back(vals.size());
                cr.mean.push_back(vals.empty() ? std::nan("") : mean_of(vals));
                cr.std.push_back(sample_std(vals));
            }
            rep.per_class.push_back(std::move(cr));
        }

        ComparisonRow row;
        row.model = family;
        if (fam.summary) row.psi = fam.summary->mean;
        row.is = mean_present(is_vals);
        row.fid = mean_present(fid_vals);
        rep.comparison.push_back(row);
        rep.families.push_back(std::move(fam));
    }

    // The baseline joins the comparison with its reference IS / FID.
    ComparisonRow base_row;
    base_row.model = kBaselineLabel;
    if (rep.baseline.summary) base_row.psi = rep.baseline.summary->mean;
    std::vector<std::optional<double>> bis, bfid;
    for (const auto* r : baseline_runs) {
        bis.push_back(r->adapted_is);
        bfid.push_back(r->adapted_fid);
    }
    base_row.is = mean_present(bis);
    base_row.fid = mean_present(bfid);
    rep.comparison.insert(rep.comparison.begin(), base_row);

    auto normalize = [&](auto field, auto z_field, MetricKind kind, const char* label) {
        std::map<std::string, double> values;
        for (const auto& row : rep.comparison) {
            if (row.*field) values[row.model] = *(row.*field);
        }
        if (values.size() < 2) return;
        try {
            const auto z = normalize_scores(values, kind);
            for (auto& row : rep.comparison) {
                if (auto it = z.find(row.model); it != z.end()) row.*z_field = it->second;
            }
        } catch (const DegenerateInputError&) {
            rep.notes.push_back(std::string(label) + " is identical for every model; not normalised");
        }
    };
    normalize(&ComparisonRow::psi, &ComparisonRow::psi_z, MetricKind::accuracy, "Psi");
    normalize(&ComparisonRow::is, &ComparisonRow::is_z, MetricKind::inception_score, "IS");
    normalize(&ComparisonRow::fid, &ComparisonRow::fid_z, MetricKind::frechet_distance, "FID");

    rep.notes.push_back("accuracy_vs_tau 'max' columns pick the best seed per tau; they are a max statistic, "
                        "not a mean");
    return rep;
}

// ---------------------------------------------------------------------------
// Plot theme
// ---------------------------------------------------------------------------

PlotTheme PlotTheme::defaults() {
    PlotTheme t;
    t.palette = {{{180, 119, 31}},  {{14, 127, 255}}, {{44, 160, 44}},  {{40, 39, 214}},  {{189, 103, 148}},
                 {{75, 86, 140}},   {{194, 119, 227}}, {{127, 127, 127}}, {{34, 189, 188}}, {{207, 190, 23}}};
    return t;
}

nlohmann::json PlotTheme::to_json() const {
    return {{"version", version},
            {"width", width},
            {"height", height},
            {"margins", {margin_left, margin_right, margin_top, margin_bottom}},
            {"font_scale", font_scale},
            {"line_thickness", line_thickness},
            {"palette_bgr", palette},
            {"failure_color_bgr", failure_color}};
}

PlotTheme PlotTheme::from_json(const nlohmann::json& j) {
    auto t = defaults();
    t.version = j.value("version", t.version);
    t.width = j.value("width", t.width);
    t.height = j.value("height", t.height);
    if (j.contains("margins")) {
        const auto m = j.at("margins").get<std::vector<int>>();
        if (m.size() != 4) throw FormatError("theme margins need four values");
        t.margin_left = m[0];
        t.margin_right = m[1];
        t.margin_top = m[2];
        t.margin_bottom = m[3];
    }
    t.font_scale = j.value("font_scale", t.font_scale);
    t.line_thickness = j.value("line_thickness", t.line_thickness);
    if (j.contains("palette_bgr")) t.palette = j.at("palette_bgr").get<std::vector<std::array<int, 3>>>();
    if (t.palette.empty()) throw FormatError("theme palette is empty");
    if (j.contains("failure_color_bgr")) t.failure_color = j.at("failure_color_bgr").get<std::array<int, 3>>();
    return t;
}

namespace {

// ---------------------------------------------------------------------------
// Minimal chart canvas on top of OpenCV drawing primitives.
// ---------------------------------------------------------------------------
class Chart {
public:
    Chart(const PlotTheme& theme, std::string title, std::string xlabel, std::string ylabel)
        : t_(theme), img_(theme.height, theme.width, CV_8UC3, cv::Scalar(255, 255, 255)) {
        put(title, {t_.margin_left, t_.margin_top / 2}, 1.4);
        put(xlabel, {t_.margin_left + plot_w() / 2 - 40, t_.height - 15}, 1.0);
        put(ylabel, {8, t_.margin_top - 12}, 1.0);
    }

    void set_range(double x0, double x1, double y0, double y1) {
        if (!(x1 > x0)) {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if (!(y1 > y0)) {
            y0 -= 0.5;
            y1 += 0.5;
        }
        x0_ = x0, x1_ = x1, y0_ = y0, y1_ = y1;
    }

    cv::Point at(double x, double y) const {
        const double fx = (x - x0_) / (x1_ - x0_);
        const double fy = (y - y0_) / (y1_ - y0_);
        return {t_.margin_left + static_cast<int>(std::lround(fx * plot_w())),
                t_.margin_top + static_cast<int>(std::lround((1.0 - fy) * plot_h()))};
    }

    void axes(bool numeric_x = true) {
        const cv::Scalar ink(0, 0, 0), grid(225, 225, 225);
        for (int i = 0; i <= 5; ++i) {
            const double y = y0_ + (y1_ - y0_) * i / 5.0;
            const auto p = at(x0_, y);
            cv::line(img_, p, {t_.margin_left + plot_w(), p.y}, grid, 1);
            put(tick(y), {4, p.y + 4}, 0.9);
        }
        if (numeric_x) {
            for (int i = 0; i <= 4; ++i) {
                const double x = x0_ + (x1_ - x0_) * i / 4.0;
                const auto p = at(x, y0_);
                cv::line(img_, p, {p.x, p.y + 5}, ink, 1);
                put(tick(x), {p.x - 15, p.y + 20}, 0.9);
            }
        }
        cv::rectangle(img_, {t_.margin_left, t_.margin_top}, {t_.margin_left + plot_w(), t_.margin_top + plot_h()},
                      ink, 1);
    }

    void x_label_at(double x, const std::string& text) {
        const auto p = at(x, y0_);
        put(text, {p.x - 4 * static_cast<int>(text.size()), p.y + 20}, 0.9);
    }

    void polyline(const std::vector<cv::Point>& pts, const cv::Scalar& c) {
        if (pts.size() > 1) cv::polylines(img_, pts, false, c, t_.line_thickness, cv::LINE_AA);
        for (const auto& p : pts) cv::circle(img_, p, 4, c, cv::FILLED, cv::LINE_AA);
    }

    void band(const std::vector<cv::Point>& upper, const std::vector<cv::Point>& lower, const cv::Scalar& c) {
        if (upper.size() < 2) return;
        std::vector<cv::Point> poly(upper);
        poly.insert(poly.end(), lower.rbegin(), lower.rend());
        cv::Mat overlay = img_.clone();
        cv::fillPoly(overlay, std::vector<std::vector<cv::Point>>{poly}, c, cv::LINE_AA);
        cv::addWeighted(overlay, 0.2, img_, 0.8, 0.0, img_);
    }

    void rect(cv::Point a, cv::Point b, const cv::Scalar& c, bool filled) {
        cv::rectangle(img_, a, b, c, filled ? cv::FILLED : t_.line_thickness, cv::LINE_AA);
    }

    void line(cv::Point a, cv::Point b, const cv::Scalar& c, int thickness = 0) {
        cv::line(img_, a, b, c, thickness ? thickness : t_.line_thickness, cv::LINE_AA);
    }

    void circle(cv::Point p, const cv::Scalar& c) { cv::circle(img_, p, 4, c, 1, cv::LINE_AA); }

    void cross(cv::Point p, const cv::Scalar& c) {
        line({p.x - 7, p.y - 7}, {p.x + 7, p.y + 7}, c);
        line({p.x - 7, p.y + 7}, {p.x + 7, p.y - 7}, c);
    }

    void legend(std::size_t slot, const std::string& text, const cv::Scalar& c) {
        const int x = t_.width - t_.margin_right + 15;
        const int y = t_.margin_top + 10 + static_cast<int>(slot) * 22;
        cv::rectangle(img_, {x, y - 8}, {x + 14, y + 6}, c, cv::FILLED);
        put(text, {x + 20, y + 4}, 1.0);
    }

    void put(const std::string& text, cv::Point p, double scale, const cv::Scalar& c = {0, 0, 0}) {
        cv::putText(img_, text, p, cv::FONT_HERSHEY_SIMPLEX, t_.font_scale * scale, c, 1, cv::LINE_AA);
    }

    void save(const fs::path& path) const {
        if (!cv::imwrite(path.string(), img_)) throw IoError("cannot write " + path.string());
    }

    int plot_w() const { return t_.width - t_.margin_left - t_.margin_right; }
    int plot_h() const { return t_.height - t_.margin_top - t_.margin_bottom; }
    double y0() const { return y0_; }
    double y1() const { return y1_; }

private:
    static std::string tick(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3g", v);
        return buf;
    }

    const PlotTheme& t_;
    cv::Mat img_;
    double x0_ = 0, x1_ = 1, y0_ = 0, y1_ = 1;
};

cv::Scalar color(const PlotTheme& t, std::size_t i) {
    const auto& c = t.palette[i % t.palette.size()];
    return {static_cast<double>(c[0]), static_cast<double>(c[1]), static_cast<double>(c[2])};
}

cv::Scalar failure_color(const PlotTheme& t) {
    return {static_cast<double>(t.failure_color[0]), static_cast<double>(t.failure_color[1]),
            static_cast<double>(t.failure_color[2])};
}

std::vector<std::string> curve_models(const std::vector<TauPoint>& pts) {
    std::vector<std::string> models;
    for (const auto& p : pts) {
        if (std::find(models.begin(), models.end(), p.model) == models.end()) models.push_back(p.model);
    }
    return models;
}

void plot_tau(const std::vector<TauPoint>& pts, bool use_max, const PlotTheme& theme, const std::string& title,
              const fs::path& path) {
    Chart chart(theme, title, "tau", use_max ? "max accuracy" : "mean accuracy (+/- std)");
    double lo = 1.0, hi = 0.0;
    for (const auto& p : pts) {
        lo = std::min(lo, use_max ? p.max : p.mean - p.std);
        hi = std::max(hi, use_max ? p.max : p.mean + p.std);
    }
    const double pad = 0.05 * std::max(hi - lo, 1e-3);
    chart.set_range(0.0, 1.0, lo - pad, hi + pad);
    chart.axes();
    const auto models = curve_models(pts);
    for (std::size_t m = 0; m < models.size(); ++m) {
        std::vector<cv::Point> line, upper, lower;
        for (const auto& p : pts) {
            if (p.model != models[m]) continue;
            line.push_back(chart.at(p.tau, use_max ? p.max : p.mean));
            upper.push_back(chart.at(p.tau, p.mean + p.std));
            lower.push_back(chart.at(p.tau, p.mean - p.std));
        }
        if (!use_max) chart.band(upper, lower, color(theme, m));
        chart.polyline(line, color(theme, m));
        chart.legend(m, models[m], color(theme, m));
    }
    chart.save(path);
}

void plot_boxes(const std::vector<const ModelPsi*>& models, bool zoomed, const PlotTheme& theme,
                const fs::path& path) {
    Chart chart(theme, zoomed ? "Fitting capacity (zoomed to whiskers)" : "Fitting capacity", "model",
                "test accuracy");
    double lo = 1.0, hi = 0.0;
    for (const auto* m : models) {
        if (!m->summary) continue;
        const auto& s = *m->summary;
        lo = std::min(lo, zoomed ? s.whisker_low : *std::min_element(s.per_seed_values.begin(),
                                                                      s.per_seed_values.end()));
        hi = std::max(hi, zoomed ? s.whisker_high : s.best);
    }
    if (lo > hi) lo = 0.0, hi = 1.0;
    const double pad = 0.05 * std::max(hi - lo, 1e-3);
    const double n = static_cast<double>(models.size());
    chart.set_range(0.0, n, lo - pad, hi + pad);
    chart.axes(false);
    for (std::size_t i = 0; i < models.size(); ++i) {
        const auto* m = models[i];
        const double cx = static_cast<double>(i) + 0.5;
        chart.x_label_at(cx, m->model);
        if (!m->summary) {
            chart.cross(chart.at(cx, (chart.y0() + chart.y1()) / 2), failure_color(theme));
            chart.put("FAILED", chart.at(cx - 0.2, (chart.y0() + chart.y1()) / 2 - (chart.y1() - chart.y0()) * 0.06),
                      1.0, failure_color(theme));
            continue;
        }
        const auto& s = *m->summary;
        const auto c = color(theme, i);
        chart.rect(chart.at(cx - 0.25, s.q3), chart.at(cx + 0.25, s.q1), c, false);
        chart.line(chart.at(cx - 0.25, s.median), chart.at(cx + 0.25, s.median), c, theme.line_thickness + 1);
        chart.line(chart.at(cx, s.q3), chart.at(cx, s.whisker_high), c);
        chart.line(chart.at(cx, s.q1), chart.at(cx, s.whisker_low), c);
        chart.line(chart.at(cx - 0.12, s.whisker_high), chart.at(cx + 0.12, s.whisker_high), c);
        chart.line(chart.at(cx - 0.12, s.whisker_low), chart.at(cx + 0.12, s.whisker_low), c);
        if (!zoomed) {
            for (double o : s.outliers) chart.circle(chart.at(cx, o), c);
        }
        if (m->failed_runs > 0) {
            chart.put(std::to_string(m->failed_runs) + " failed", chart.at(cx - 0.3, chart.y1()) + cv::Point(0, 14),
                      0.9, failure_color(theme));
        }
    }
    chart.save(path);
}

void plot_grouped_bars(const std::vector<std::string>& groups, const std::vector<std::string>& series,
                       const std::vector<std::vector<double>>& value,  // [series][group]
                       const std::vector<std::vector<double>>& err, const PlotTheme& theme, const std::string& title,
                       const std::string& ylabel, const fs::path& path) {
    Chart chart(theme, title, "", ylabel);
    double lo = 0.0, hi = 0.0;
    for (std::size_t s = 0; s < series.size(); ++s) {
        for (std::size_t g = 0; g < groups.size(); ++g) {
            const double v = value[s][g];
            if (!std::isfinite(v)) continue;
            const double e = err.empty() ? 0.0 : err[s][g];
            lo = std::min(lo, v - e);
            hi = std::max(hi, v + e);
        }
    }
    const double pad = 0.05 * std::max(hi - lo, 1e-3);
    chart.set_range(0.0, static_cast<double>(groups.size()), lo - pad, hi + pad);
    chart.axes(false);
    chart.line(chart.at(0.0, 0.0), chart.at(static_cast<double>(groups.size()), 0.0), {0, 0, 0}, 1);
    const double width = 0.8 / static_cast<double>(std::max<std::size_t>(series.size(), 1));
    for (std::size_t g = 0; g < groups.size(); ++g) {
        chart.x_label_at(static_cast<double>(g) + 0.5, groups[g]);
        for (std::size_t s = 0; s < series.size(); ++s) {
            const double v = value[s][g];
            if (!std::isfinite(v)) continue;
            const double x = static_cast<double>(g) + 0.1 + width * static_cast<double>(s);
            chart.rect(chart.at(x, std::max(v, 0.0)), chart.at(x + width, std::min(v, 0.0)), color(theme, s), true);
            if (!err.empty() && err[s][g] > 0.0) {
                const double cx = x + width / 2;
                chart.line(chart.at(cx, v - err[s][g]), chart.at(cx, v + err[s][g]), {0, 0, 0}, 1);
            }
        }
    }
    for (std::size_t s = 0; s < series.size(); ++s) chart.legend(s, series[s], color(theme, s));
    chart.save(path);
}

class CsvWriter {
public:
    explicit CsvWriter(const fs::path& path) : path_(path), out_(path, std::ios::trunc) {
        if (!out_) throw IoError("cannot write " + path.string());
    }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << '\n';
    }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
    std::ofstream out_;
};

std::string join_numbers(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + format_number(v[i]);
    return s;
}

void write_summary_row(CsvWriter& csv, const ModelPsi& m) {
    if (!m.summary) {
        csv.row({m.model, "0", "", "", "", "", "", "", "", "", "", "", "", "", std::to_string(m.failed_runs),
                 "all_failed"});
        return;
    }
    const auto& s = *m.summary;
    csv.row({m.model, std::to_string(s.per_seed_values.size()), format_number(s.mean), opt_number(s.std),
             format_number(s.best), format_number(s.median), format_number(s.q1), format_number(s.q3),
             format_number(s.lower_fence), format_number(s.upper_fence), format_number(s.whisker_low),
             format_number(s.whisker_high), join_numbers(s.outliers), join_numbers(s.per_seed_values),
             std::to_string(m.failed_runs),
             m.failed_runs == 0 ? "ok" : m.failed_runs == m.runs ? "failed" : "partial_failure"});
}

std::string pct(const std::optional<double>& v) {
    if (!v) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * *v);
    return buf;
}

std::string short_num(const std::optional<double>& v) {
    if (!v) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", *v);
    return buf;
}

}  // namespace

std::vector<fs::path> render_report(const MetricReport& rep, const fs::path& output_dir, const PlotTheme& theme) {
    const auto dir = output_dir / "report";
    fs::create_directories(dir);
    std::vector<fs::path> written;

    {
        std::ofstream out(dir / "theme.json", std::ios::trunc);
        out << theme.to_json().dump(2) << '\n';
        written.push_back(dir / "theme.json");
    }

    std::vector<const ModelPsi*> models{&rep.baseline};
    for (const auto& f : rep.families) models.push_back(&f);

    {
        CsvWriter csv(dir / "psi_summary.csv");
        csv.row({"model", "n", "mean", "std", "best", "median", "q1", "q3", "lower_fence", "upper_fence",
                 "whisker_low", "whisker_high", "outliers", "values", "failed_runs", "status"});
        for (const auto* m : models) write_summary_row(csv, *m);
        written.push_back(csv.path());
    }
    {
        CsvWriter mean(dir / "table_mean_psi.csv");
        CsvWriter best(dir / "table_best_psi.csv");
        mean.row({"model", "mean_psi"});
        best.row({"model", "best_psi"});
        for (const auto* m : models) {
            mean.row({m->model, m->summary ? format_number(m->summary->mean) : "FAILED"});
            best.row({m->model, m->summary ? format_number(m->summary->best) : "FAILED"});
        }
        written.push_back(mean.path());
        written.push_back(best.path());
    }
    auto tau_csv = [&](const std::vector<TauPoint>& pts, const char* name) {
        CsvWriter csv(dir / name);
        csv.row({"model", "tau", "n", "mean", "std", "min", "max"});
        for (const auto& p : pts) {
            csv.row({p.model, format_number(p.tau), std::to_string(p.n), format_number(p.mean), format_number(p.std),
                     format_number(p.min), format_number(p.max)});
        }
        written.push_back(csv.path());
    };
    tau_csv(rep.accuracy_vs_tau, "accuracy_vs_tau.csv");
    if (!rep.knn_vs_tau.empty()) tau_csv(rep.knn_vs_tau, "knn_vs_tau.csv");
    {
        CsvWriter csv(dir / "per_class_relative.csv");
        csv.row({"model", "class", "n", "mean", "std"});
        for (const auto& c : rep.per_class) {
            for (std::size_t k = 0; k < c.mean.size(); ++k) {
                csv.row({c.model, std::to_string(k), std::to_string(c.n[k]), format_number(c.mean[k]),
                         format_number(c.std[k])});
            }
        }
        written.push_back(csv.path());
    }
    {
        CsvWriter csv(dir / "comparison.csv");
        csv.row({"model", "psi", "is", "fid", "psi_z", "is_z", "fid_z"});
        for (const auto& r : rep.comparison) {
            csv.row({r.model, opt_number(r.psi), opt_number(r.is), opt_number(r.fid), opt_number(r.psi_z),
                     opt_number(r.is_z), opt_number(r.fid_z)});
        }
        written.push_back(csv.path());
    }

    // --- figures ---
    std::vector<std::pair<std::string, std::string>> figures;  // file, caption
    auto figure = [&](const std::string& file, const std::string& caption) {
        written.push_back(dir / file);
        figures.emplace_back(file, caption);
    };
    plot_tau(rep.accuracy_vs_tau, true, theme, "Maximum classifier accuracy vs tau", dir / "accuracy_vs_tau_max.png");
    figure("accuracy_vs_tau_max.png", "Best seed per tau (max statistic)");
    plot_tau(rep.accuracy_vs_tau, false, theme, "Classifier accuracy vs tau", dir / "accuracy_vs_tau_std.png");
    figure("accuracy_vs_tau_std.png", "Mean accuracy with +/- one standard deviation");
    plot_boxes(models, false, theme, dir / "psi_boxplot.png");
    figure("psi_boxplot.png", "Fitting capacity per seed; circles are 1.5 IQR outliers");
    plot_boxes(models, true, theme, dir / "psi_boxplot_zoomed.png");
    figure("psi_boxplot_zoomed.png", "Same boxes, y axis clipped to the whiskers");
    if (!rep.knn_vs_tau.empty()) {
        plot_tau(rep.knn_vs_tau, false, theme, "1-NN accuracy vs tau", dir / "knn_vs_tau.png");
        figure("knn_vs_tau.png", "1-NN accuracy, mean +/- std over seeds");
    }
    if (!rep.per_class.empty()) {
        std::vector<std::string> classes, series;
        std::vector<std::vector<double>> val, err;
        for (std::size_t k = 0; k < rep.per_class.front().mean.size(); ++k) classes.push_back(std::to_string(k));
        for (const auto& c : rep.per_class) {
            series.push_back(c.model);
            val.push_back(c.mean);
            err.push_back(c.std);
        }
        plot_grouped_bars(classes, series, val, err, theme, "Per-class accuracy relative to baseline (tau = 1)",
                          "relative accuracy", dir / "per_class_relative.png");
        figure("per_class_relative.png", "Model minus baseline per class, std whiskers over seeds");
    }
    {
        std::vector<std::string> groups;
        std::vector<std::vector<double>> val(3);
        for (const auto& r : rep.comparison) {
            groups.push_back(r.model);
            val[0].push_back(r.psi_z.value_or(std::nan("")));
            val[1].push_back(r.is_z.value_or(std::nan("")));
            val[2].push_back(r.fid_z.value_or(std::nan("")));
        }
        plot_grouped_bars(groups, {"Psi", "IS", "-FID"}, val, {}, theme, "Normalised comparison", "z-score",
                          dir / "normalized_comparison.png");
        figure("normalized_comparison.png", "Each metric z-scored across models, FID negated first");
    }

    // --- index ---
    std::ofstream md(dir / "index.md", std::ios::trunc);
    md << "# Fitting capacity report: " << rep.dataset << "\n\n";
    md << "Records: " << rep.record_count << "  \nStore hash: `" << rep.store_hash << "`\n\n";
    md << "## Fitting capacity\n\n| Model | Mean | Best | Median | Runs | Status |\n|---|---|---|---|---|---|\n";
    for (const auto* m : models) {
        std::string status = "ok";
        if (m->all_failed()) {
            status = "**FAILED** (all runs)";
        } else if (m->failed_runs > 0) {
            status = "**FAILED** " + std::to_string(m->failed_runs) + "/" + std::to_string(m->runs) + " runs";
        }
        md << "| " << m->model << " | " << pct(m->summary ? std::optional(m->summary->mean) : std::nullopt) << " | "
           << pct(m->summary ? std::optional(m->summary->best) : std::nullopt) << " | "
           << pct(m->summary ? std::optional(m->summary->median) : std::nullopt) << " | " << m->runs << " | "
           << status << " |\n";
    }
    md << "\n## Normalised comparison\n\n| Model | Psi | IS | FID | z(Psi) | z(IS) | z(-FID) |\n"
          "|---|---|---|---|---|---|---|\n";
    for (const auto& r : rep.comparison) {
        md << "| " << r.model << " | " << pct(r.psi) << " | " << short_num(r.is) << " | " << short_num(r.fid)
           << " | " << short_num(r.psi_z) << " | " << short_num(r.is_z) << " | " << short_num(r.fid_z) << " |\n";
    }
    bool any_failure = false;
    for (const auto* m : models) any_failure = any_failure || m->failed_runs > 0;
    if (any_failure) {
        md << "\n## Failed runs\n\n";
        for (const auto* m : models) {
            for (const auto& note : m->failure_notes) md << "- **FAILED** " << m->model << ", " << note << "\n";
        }
    }
    md << "\n## Figures\n\n";
    for (const auto& [file, caption] : figures) md << "![" << caption << "](" << file << ")\n\n" << caption << "\n\n";
    md << "## Tables\n\n";
    for (const auto& p : written) {
        if (p.extension() == ".csv") md << "- [" << p.filename().string() << "](" << p.filename().string() << ")\n";
    }
    if (!rep.notes.empty()) {
        md << "\n## Notes\n\n";
        for (const auto& n : rep.notes) md << "- " << n << "\n";
    }
    written.push_back(dir / "index.md");
    return written;
}

}  // namespace fitcap
