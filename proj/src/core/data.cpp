#include "data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace fts {

void TimeSeriesDataset::check_invariants() const {
    if (dims < 1) throw DataError("dataset " + name + ": dims must be >= 1");
    if (length < 2) throw DataError("dataset " + name + ": length must be >= 2");
    if (samples.size() != labels.size())
        throw DataError("dataset " + name + ": sample/label count mismatch");
    if (sample_ids.size() != samples.size())
        throw DataError("dataset " + name + ": sample_ids count mismatch");
    for (const auto& s : samples)
        if (s.size() != dims * length)
            throw DataError("dataset " + name + ": sample size != dims*length");
    for (int l : labels)
        if (l < 0 || static_cast<std::size_t>(l) >= num_classes())
            throw DataError("dataset " + name + ": label out of range");
}

Tensor TimeSeriesDataset::batch(const std::vector<std::size_t>& idx) const {
    if (idx.empty()) throw DataError("batch: empty index list");
    std::vector<double> out(idx.size() * length * dims);
    for (std::size_t b = 0; b < idx.size(); ++b) {
        if (idx[b] >= samples.size()) throw DataError("batch: index out of range");
        const auto& s = samples[idx[b]];
        for (std::size_t t = 0; t < length; ++t)
            for (std::size_t d = 0; d < dims; ++d)
                out[(b * length + t) * dims + d] = s[d * length + t];
    }
    return Tensor({idx.size(), length, dims}, std::move(out));
}

const std::vector<ManifestEntry>& dataset_manifest() {
    static const std::vector<ManifestEntry> table = {
        {"AtrialFibrillation", "AF", 15, 15, 2, 640, 3},
        {"BasicMotions", "BM", 40, 40, 6, 100, 4},
        {"Cricket", "CR", 108, 72, 6, 1197, 12},
        {"DuckDuckGeese", "DDG", 50, 50, 1345, 270, 5},
        {"Epilepsy", "EP", 137, 138, 3, 206, 4},
        {"EthanolConcentration", "EC", 261, 263, 3, 1751, 4},
        {"ERing", "ER", 30, 270, 4, 65, 6},
        {"FingerMovements", "FM", 316, 100, 28, 50, 2},
        {"HandMovementDirection", "HMD", 160, 74, 10, 400, 4},
        {"Handwriting", "HW", 150, 850, 3, 152, 26},
        {"Heartbeat", "HB", 204, 205, 61, 405, 2},
        {"Libras", "LIB", 180, 180, 2, 45, 15},
        {"NATOPS", "NATO", 180, 180, 24, 51, 6},
        {"PEMS-SF", "PEMS", 267, 173, 963, 144, 7},
        {"RacketSports", "RS", 151, 152, 6, 30, 4},
        {"SelfRegulationSCP1", "SRS1", 268, 293, 6, 896, 2},
        {"SelfRegulationSCP2", "SRS2", 200, 180, 7, 1152, 2},
        {"UWaveGestureLibrary", "UW", 120, 320, 3, 315, 8},
    };
    return table;
}

std::string validate_against_manifest(const TimeSeriesDataset& ds, const std::string& code) {
    const ManifestEntry* entry = nullptr;
    for (const auto& e : dataset_manifest())
        if (e.code == code) entry = &e;
    if (!entry) throw ConfigError("unknown dataset code: " + code);
    std::ostringstream report;
    auto check = [&report](const char* field, std::size_t got, std::size_t want) {
        if (got != want)
            report << field << ": expected " << want << ", got " << got << "\n";
    };
    std::size_t want_size = ds.partition == "test" ? entry->test_size : entry->train_size;
    check(ds.partition == "test" ? "test_size" : "train_size", ds.size(), want_size);
    check("dims", ds.dims, entry->dims);
    check("length", ds.length, entry->length);
    check("classes", ds.num_classes(), entry->classes);
    return report.str();
}

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

TimeSeriesDataset parse_ts(const std::string& text) {
    TimeSeriesDataset ds;
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    bool in_data = false;
    bool saw_class_label = false;
    std::size_t declared_dims = 0, declared_len = 0;

    while (std::getline(is, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (!in_data) {
            if (t.empty() || t[0] != '@')
                throw ParseError("expected '@' header line before @data, got: " + t, line_no);
            std::istringstream hs(t);
            std::string key;
            hs >> key;
            key = lower(key);
            if (key == "@problemname") {
                hs >> ds.name;
            } else if (key == "@dimension" || key == "@dimensions") {
                if (!(hs >> declared_dims))
                    throw ParseError("@dimension needs an integer value", line_no);
            } else if (key == "@univariate") {
                std::string v;
                hs >> v;
                if (lower(v) == "true") declared_dims = 1;
            } else if (key == "@serieslength") {
                if (!(hs >> declared_len))
                    throw ParseError("@seriesLength needs an integer value", line_no);
            } else if (key == "@classlabel") {
                std::string flag;
                hs >> flag;
                if (lower(flag) != "true")
                    throw ParseError("@classLabel must be 'true' followed by labels", line_no);
                std::string label;
                while (hs >> label) ds.class_names.push_back(label);
                if (ds.class_names.empty())
                    throw ParseError("@classLabel lists no class labels", line_no);
                saw_class_label = true;
            } else if (key == "@data") {
                in_data = true;
            }
            // unknown @ headers are ignored
            continue;
        }
        // data record: dim1vals:dim2vals:...:label
        if (t.find('?') != std::string::npos)
            throw ParseError("missing values ('?') are not supported", line_no);
        auto fields = split(t, ':');
        if (fields.size() < 2)
            throw ParseError("record needs at least one dimension and a class label", line_no);
        std::string label = trim(fields.back());
        fields.pop_back();
        auto it = std::find(ds.class_names.begin(), ds.class_names.end(), label);
        if (it == ds.class_names.end())
            throw ParseError("unknown class label '" + label + "'", line_no);
        std::size_t rec_dims = fields.size();
        if (ds.samples.empty() && declared_dims == 0) declared_dims = rec_dims;
        if (rec_dims != declared_dims)
            throw ParseError("record has " + std::to_string(rec_dims) +
                                 " dimensions, expected " + std::to_string(declared_dims),
                             line_no);
        std::vector<double> sample;
        std::size_t rec_len = 0;
        for (std::size_t d = 0; d < rec_dims; ++d) {
            auto vals = split(fields[d], ',');
            if (d == 0)
                rec_len = vals.size();
            else if (vals.size() != rec_len)
                throw ParseError("dimension " + std::to_string(d + 1) + " has " +
                                     std::to_string(vals.size()) + " values, expected " +
                                     std::to_string(rec_len),
                                 line_no);
            for (const auto& v : vals) {
                std::string tv = trim(v);
                if (tv.empty()) throw ParseError("empty value in record", line_no);
                char* end = nullptr;
                double x = std::strtod(tv.c_str(), &end);
                if (end == tv.c_str() || *end != '\0')
                    throw ParseError("not a number: '" + tv + "'", line_no);
                sample.push_back(x);
            }
        }
        if (ds.samples.empty() && declared_len == 0) declared_len = rec_len;
        if (rec_len != declared_len)
            throw ParseError("record length " + std::to_string(rec_len) + " differs from " +
                                 std::to_string(declared_len),
                             line_no);
        ds.samples.push_back(std::move(sample));
        ds.labels.push_back(static_cast<int>(it - ds.class_names.begin()));
    }
    if (!in_data) throw ParseError("missing @data section", line_no);
    if (!saw_class_label) throw ParseError("missing @classLabel header", line_no);
    if (ds.samples.empty()) throw ParseError("no data records after @data", line_no);
    ds.dims = declared_dims;
    ds.length = declared_len;
    ds.sample_ids.resize(ds.samples.size());
    for (std::size_t i = 0; i < ds.sample_ids.size(); ++i) ds.sample_ids[i] = i;
    ds.check_invariants();
    return ds;
}

TimeSeriesDataset load_ts_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open dataset file: " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    TimeSeriesDataset ds = parse_ts(buf.str());
    if (path.find("TEST") != std::string::npos || path.find("test") != std::string::npos)
        ds.partition = "test";
    return ds;
}

std::string serialize_ts(const TimeSeriesDataset& ds) {
    ds.check_invariants();
    std::ostringstream os;
    os << "@problemName " << (ds.name.empty() ? "unnamed" : ds.name) << "\n";
    os << "@dimension " << ds.dims << "\n";
    os << "@seriesLength " << ds.length << "\n";
    os << "@classLabel true";
    for (const auto& c : ds.class_names) os << " " << c;
    os << "\n@data\n";
    char buf[32];
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const auto& s = ds.samples[i];
        for (std::size_t d = 0; d < ds.dims; ++d) {
            for (std::size_t t = 0; t < ds.length; ++t) {
                std::snprintf(buf, sizeof(buf), "%.17g", s[d * ds.length + t]);
                os << (t ? "," : "") << buf;
            }
            os << ":";
        }
        os << ds.class_names[ds.labels[i]] << "\n";
    }
    return os.str();
}

void save_ts_file(const TimeSeriesDataset& ds, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << serialize_ts(ds);
    if (!os) throw IoError("failed writing: " + path);
}

std::pair<TimeSeriesDataset, TimeSeriesDataset> synth_dataset(
    std::uint64_t seed, std::size_t classes, std::size_t dims, std::size_t length,
    std::size_t n_per_class, double difficulty) {
    if (classes < 2) throw ConfigError("synth_dataset: need at least 2 classes");
    if (dims < 1) throw ConfigError("synth_dataset: need at least 1 dimension");
    if (length < 4) throw ConfigError("synth_dataset: need length >= 4");
    if (classes + 1 > length / 2)
        throw ConfigError("synth_dataset: class frequencies exceed the Nyquist bin");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uphase(0.0, 2.0 * 3.14159265358979323846);
    std::normal_distribution<double> noise(0.0, 1.0);
    // Per-sample jitter keeps the cosine component's sign so the class stays
    // recoverable from the real spectrum; broadband plus sparse impulse noise
    // (both Gaussian) punishes reading raw time samples much harder than
    // reading frequency bins, where impulse energy spreads 1/L thin.
    double phase_scale = 0.25 * std::min(difficulty, 1.0);
    double noise_std = 0.5 * difficulty;
    double impulse_prob = 0.2 * std::min(difficulty, 1.0);
    double impulse_std = 6.0 * difficulty;
    std::uniform_real_distribution<double> ucoin(0.0, 1.0);

    auto make = [&](const std::string& partition) {
        TimeSeriesDataset ds;
        ds.name = "synth";
        ds.partition = partition;
        ds.dims = dims;
        ds.length = length;
        for (std::size_t c = 0; c < classes; ++c)
            ds.class_names.push_back("c" + std::to_string(c));
        for (std::size_t c = 0; c < classes; ++c) {
            double freq = static_cast<double>(c + 1);
            // Class-specific base phase: classes then differ at t=0 too, not
            // only in which frequency bin carries the energy.
            double base_phase = 2.4 * static_cast<double>(c);
            for (std::size_t s = 0; s < n_per_class; ++s) {
                std::vector<double> sample(dims * length);
                for (std::size_t d = 0; d < dims; ++d) {
                    double phase = base_phase + phase_scale * uphase(rng);
                    for (std::size_t t = 0; t < length; ++t) {
                        double x = std::cos(2.0 * 3.14159265358979323846 * freq *
                                                static_cast<double>(t) /
                                                static_cast<double>(length) +
                                            phase);
                        if (noise_std > 0.0) x += noise_std * noise(rng);
                        if (impulse_prob > 0.0 && ucoin(rng) < impulse_prob)
                            x += impulse_std * noise(rng);
                        sample[d * length + t] = x;
                    }
                }
                ds.samples.push_back(std::move(sample));
                ds.labels.push_back(static_cast<int>(c));
            }
        }
        ds.sample_ids.resize(ds.samples.size());
        for (std::size_t i = 0; i < ds.sample_ids.size(); ++i) ds.sample_ids[i] = i;
        ds.check_invariants();
        return ds;
    };
    TimeSeriesDataset train = make("train");
    TimeSeriesDataset test = make("test");
    return {std::move(train), std::move(test)};
}

}  // namespace fts
