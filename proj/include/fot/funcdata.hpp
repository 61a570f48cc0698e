#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "fot/errors.hpp"
#include "fot/rng.hpp"

namespace fot {

/// One observed function: values at strictly increasing design points.
struct FunctionalSample {
    Eigen::VectorXd x;
    Eigen::VectorXd y;
    int channel = 0;

    void validate() const {
        if (x.size() != y.size())
            throw ValidityError("sample: x and y lengths differ");
        if (x.size() < 2)
            throw ValidityError("sample: needs at least 2 design points");
        for (Eigen::Index i = 0; i + 1 < x.size(); ++i)
            if (!(x(i) < x(i + 1)))
                throw ValidityError("sample: design points must be strictly increasing");
        if (!x.allFinite() || !y.allFinite())
            throw ValidityError("sample: non-finite value");
    }

    /// Linear interpolation with clamped extrapolation at the ends.
    double interp(double t) const {
        const auto n = x.size();
        if (t <= x(0)) return y(0);
        if (t >= x(n - 1)) return y(n - 1);
        Eigen::Index hi = 1;
        while (x(hi) < t) ++hi;
        const double w = (t - x(hi - 1)) / (x(hi) - x(hi - 1));
        return (1.0 - w) * y(hi - 1) + w * y(hi);
    }

    Eigen::VectorXd interp(const Eigen::VectorXd& points) const {
        Eigen::VectorXd out(points.size());
        for (Eigen::Index i = 0; i < points.size(); ++i) out(i) = interp(points(i));
        return out;
    }
};

struct FunctionalDataset {
    std::vector<FunctionalSample> samples;
    std::string domain = "source"; // "source" or "target"

    void validate() const {
        if (samples.empty()) throw ValidityError("dataset: empty");
        for (const auto& s : samples) s.validate();
    }
};

/// Uniform prior over the four sinusoid parameters of one mixture
/// component: y = A sin(omega x + phi) + m. Degenerate ranges (lo == hi)
/// are allowed.
struct SinusoidComponent {
    double amplitude_lo = 1.0, amplitude_hi = 1.0;
    double omega_lo = 2.0 * std::numbers::pi, omega_hi = 2.0 * std::numbers::pi;
    double phase_lo = 0.0, phase_hi = 0.0;
    double shift_lo = 0.0, shift_hi = 0.0;
};

struct SinusoidMixtureParams {
    std::vector<SinusoidComponent> components;
    int points_min = 20;
    int points_max = 20; // per-sample design-point count drawn in [min, max]
};

/// Draws n_samples curves: pick a component uniformly, draw its parameters,
/// evaluate at sorted uniform design points in [0,1].
inline FunctionalDataset generate_sinusoid_mixture(int n_samples,
                                                   const SinusoidMixtureParams& params,
                                                   Rng& rng) {
    if (n_samples < 1) throw ParameterError("generate: n_samples must be >= 1");
    if (params.components.empty())
        throw ParameterError("generate: no mixture components given");
    if (params.points_min < 2 || params.points_max < params.points_min)
        throw ParameterError("generate: invalid points-per-sample range");

    FunctionalDataset ds;
    for (int s = 0; s < n_samples; ++s) {
        const auto ci = static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(params.components.size()) - 1));
        const auto& c = params.components[ci];
        const double A = rng.uniform(c.amplitude_lo, c.amplitude_hi);
        const double omega = rng.uniform(c.omega_lo, c.omega_hi);
        const double phi = rng.uniform(c.phase_lo, c.phase_hi);
        const double m = rng.uniform(c.shift_lo, c.shift_hi);
        const auto d = static_cast<int>(rng.uniform_int(params.points_min, params.points_max));

        std::vector<double> pts(static_cast<std::size_t>(d));
        for (auto& p : pts) p = rng.uniform();
        std::sort(pts.begin(), pts.end());
        // Nudge apart coincident draws; design points must strictly increase.
        for (std::size_t i = 1; i < pts.size(); ++i)
            if (pts[i] <= pts[i - 1]) pts[i] = std::nextafter(pts[i - 1], 2.0);

        FunctionalSample sample;
        sample.x = Eigen::Map<const Eigen::VectorXd>(pts.data(), d);
        sample.y.resize(d);
        for (int i = 0; i < d; ++i)
            sample.y(i) = A * std::sin(omega * sample.x(i) + phi) + m;
        sample.validate();
        ds.samples.push_back(std::move(sample));
    }
    return ds;
}

/// Resample every curve onto a common grid by linear interpolation.
inline FunctionalDataset resample_to_grid(const FunctionalDataset& ds,
                                          const Eigen::VectorXd& grid) {
    FunctionalDataset out;
    out.domain = ds.domain;
    for (const auto& s : ds.samples) {
        FunctionalSample r;
        r.x = grid;
        r.y = s.interp(grid);
        r.channel = s.channel;
        out.samples.push_back(std::move(r));
    }
    return out;
}

inline Eigen::VectorXd uniform_grid(double lo, double hi, int n) {
    Eigen::VectorXd g(n);
    for (int i = 0; i < n; ++i)
        g(i) = lo + (hi - lo) * static_cast<double>(i) / (n - 1);
    return g;
}

// ---------------------------------------------------------------------------
// Serialization. JSON is canonical: {domain, samples:[{x, y, channel}]}.
// CSV is long form: sample_id, x, y[, channel].
// ---------------------------------------------------------------------------

inline nlohmann::json dataset_to_json(const FunctionalDataset& ds) {
    nlohmann::json j;
    j["domain"] = ds.domain;
    j["samples"] = nlohmann::json::array();
    for (const auto& s : ds.samples) {
        nlohmann::json js;
        js["x"] = std::vector<double>(s.x.begin(), s.x.end());
        js["y"] = std::vector<double>(s.y.begin(), s.y.end());
        js["channel"] = s.channel;
        j["samples"].push_back(std::move(js));
    }
    return j;
}

inline FunctionalDataset dataset_from_json(const nlohmann::json& j) {
    FunctionalDataset ds;
    ds.domain = j.value("domain", "source");
    for (const auto& js : j.at("samples")) {
        FunctionalSample s;
        const auto xs = js.at("x").get<std::vector<double>>();
        const auto ys = js.at("y").get<std::vector<double>>();
        if (xs.size() != ys.size())
            throw ParseError("dataset json: sample with mismatched x/y lengths");
        s.x = Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
        s.y = Eigen::Map<const Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
        s.channel = js.value("channel", 0);
        ds.samples.push_back(std::move(s));
    }
    ds.validate();
    return ds;
}

inline void save_dataset_json(const FunctionalDataset& ds, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << dataset_to_json(ds).dump(2) << '\n';
}

inline FunctionalDataset load_dataset_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open for reading: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return dataset_from_json(j);
}

inline void save_dataset_csv(const FunctionalDataset& ds, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "sample_id,x,y,channel\n";
    char buf[64];
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const auto& s = ds.samples[i];
        for (Eigen::Index r = 0; r < s.x.size(); ++r) {
            f << i << ',';
            std::snprintf(buf, sizeof buf, "%.17g", s.x(r));
            f << buf << ',';
            std::snprintf(buf, sizeof buf, "%.17g", s.y(r));
            f << buf << ',' << s.channel << '\n';
        }
    }
}

inline FunctionalDataset load_dataset_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open for reading: " + path);
    std::string line;
    if (!std::getline(f, line)) throw ParseError(path + ": empty file");

    struct Row { std::vector<double> x, y; int channel = 0; };
    std::vector<Row> rows; // indexed by sample_id
    int lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string tok;
        std::vector<std::string> cols;
        while (std::getline(ss, tok, ',')) cols.push_back(tok);
        if (cols.size() < 3)
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected at least 3 columns");
        try {
            const auto id = static_cast<std::size_t>(std::stoul(cols[0]));
            if (id >= rows.size()) rows.resize(id + 1);
            rows[id].x.push_back(std::stod(cols[1]));
            rows[id].y.push_back(std::stod(cols[2]));
            if (cols.size() > 3) rows[id].channel = std::stoi(cols[3]);
        } catch (const std::exception&) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": malformed row");
        }
    }
    FunctionalDataset ds;
    for (auto& r : rows) {
        FunctionalSample s;
        s.x = Eigen::Map<const Eigen::VectorXd>(r.x.data(), static_cast<Eigen::Index>(r.x.size()));
        s.y = Eigen::Map<const Eigen::VectorXd>(r.y.data(), static_cast<Eigen::Index>(r.y.size()));
        s.channel = r.channel;
        ds.samples.push_back(std::move(s));
    }
    ds.validate();
    return ds;
}

inline void save_dataset(const FunctionalDataset& ds, const std::string& path,
                         const std::string& format) {
    if (format == "json") save_dataset_json(ds, path);
    else if (format == "csv") save_dataset_csv(ds, path);
    else throw ParameterError("save_dataset: unknown format '" + format + "'");
}

inline FunctionalDataset load_dataset(const std::string& path, const std::string& format) {
    if (format == "json") return load_dataset_json(path);
    if (format == "csv") return load_dataset_csv(path);
    throw ParameterError("load_dataset: unknown format '" + format + "'");
}

} // namespace fot
