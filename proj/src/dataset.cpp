#include "avqe/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "avqe/errors.hpp"

namespace avqe {

namespace {

std::string canon_column(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (unsigned char c : s) {
        if (std::isspace(c)) continue;
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cell);
            cell.clear();
        } else if (c != '\r' && c != '"') {
            cell.push_back(c);
        }
    }
    cells.push_back(cell);
    for (auto& s : cells) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        s = (b == std::string::npos) ? std::string() : s.substr(b, e - b + 1);
    }
    return cells;
}

bool parse_double_strict(const std::string& cell, double& out) {
    if (cell.empty()) return false;
    const char* begin = cell.c_str();
    char* end = nullptr;
    out = std::strtod(begin, &end);
    return end == begin + cell.size();
}

struct ParsedCsv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

ParsedCsv read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    ParsedCsv csv;
    std::string line;
    if (!std::getline(in, line)) throw DataError("'" + path + "': empty file");
    csv.header = split_csv_line(line);
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        csv.rows.push_back(split_csv_line(line));
    }
    return csv;
}

std::vector<QosRecord> records_from_rows(const ParsedCsv& csv, const FeatureSchema& schema,
                                         const std::vector<std::size_t>& feat_idx,
                                         std::optional<std::size_t> target_idx,
                                         std::optional<std::size_t> order_idx) {
    struct RowBundle {
        QosRecord rec;
        double order_key = 0.0;
        std::size_t file_pos = 0;
    };
    std::vector<RowBundle> bundles;
    bundles.reserve(csv.rows.size());

    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        const auto& cells = csv.rows[r];
        const std::string row_id = "row " + std::to_string(r + 1);
        RowBundle b;
        b.file_pos = r;
        b.rec.features.reserve(feat_idx.size());
        for (std::size_t j = 0; j < feat_idx.size(); ++j) {
            if (feat_idx[j] >= cells.size()) {
                throw DataError(row_id + ": too few cells for column '" + schema.names[j] + "'");
            }
            double v;
            if (!parse_double_strict(cells[feat_idx[j]], v) || !std::isfinite(v)) {
                throw DataError(row_id + ", column '" + schema.names[j] +
                                "': unparseable or non-finite value '" + cells[feat_idx[j]] + "'");
            }
            b.rec.features.push_back(v);
        }
        if (target_idx && *target_idx < cells.size() && !cells[*target_idx].empty()) {
            double v;
            if (!parse_double_strict(cells[*target_idx], v) || !std::isfinite(v)) {
                throw DataError(row_id + ", column '" + schema.target +
                                "': unparseable or non-finite value '" + cells[*target_idx] + "'");
            }
            if (v < kMosMin || v > kMosMax) {
                throw DataError(row_id + ": MOS value " + std::to_string(v) + " outside [1,5]");
            }
            b.rec.mos = v;
        }
        if (order_idx) {
            if (*order_idx >= cells.size()) throw DataError(row_id + ": too few cells for order column");
            double v;
            if (!parse_double_strict(cells[*order_idx], v) || !std::isfinite(v)) {
                throw DataError(row_id + ": unparseable order-by value '" + cells[*order_idx] + "'");
            }
            b.order_key = v;
        }
        bundles.push_back(std::move(b));
    }

    if (order_idx) {
        std::stable_sort(bundles.begin(), bundles.end(),
                         [](const RowBundle& a, const RowBundle& b) { return a.order_key < b.order_key; });
    }

    std::vector<QosRecord> records;
    records.reserve(bundles.size());
    for (std::size_t i = 0; i < bundles.size(); ++i) {
        bundles[i].rec.ordinal = i;
        records.push_back(std::move(bundles[i].rec));
    }
    return records;
}

std::optional<std::size_t> find_column(const std::vector<std::string>& header, const std::string& name) {
    const std::string want = canon_column(name);
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (canon_column(header[i]) == want) return i;
    }
    return std::nullopt;
}

}  // namespace

void FeatureSchema::validate() const {
    if (names.empty()) throw DataError("schema: feature list is empty");
    std::set<std::string> seen;
    for (const auto& n : names) {
        if (!seen.insert(canon_column(n)).second) {
            throw DataError("schema: duplicate feature column '" + n + "'");
        }
    }
    if (seen.count(canon_column(target))) {
        throw DataError("schema: target column '" + target + "' also listed as a feature");
    }
}

FeatureSchema inrs_default_schema() {
    FeatureSchema s;
    s.names = {"aFrameCount",      "pFrameCountDiff", "s2PFrameCountDiff",
               "s3PFrameMeanDiff", "s10PFrameMeanDiff", "audioNbFrames",
               "audioBitRate",     "videoBitRate",    "videoPacketLossRate"};
    s.target = "mos";
    return s;
}

LoopMode parse_loop_mode(const std::string& s) {
    if (s == "open") return LoopMode::open;
    if (s == "closed") return LoopMode::closed;
    throw DataError("unknown loop mode '" + s + "' (expected open or closed)");
}

std::string loop_mode_name(LoopMode mode) { return mode == LoopMode::open ? "open" : "closed"; }

Normalizer::Normalizer(std::vector<double> feat_min, std::vector<double> feat_max,
                       double target_min, double target_max)
    : feat_min_(std::move(feat_min)), feat_max_(std::move(feat_max)),
      tgt_min_(target_min), tgt_max_(target_max) {
    if (feat_min_.size() != feat_max_.size()) {
        throw DataError("normalizer: min/max length mismatch");
    }
    for (std::size_t i = 0; i < feat_min_.size(); ++i) {
        if (feat_max_[i] < feat_min_[i]) throw DataError("normalizer: max < min for feature " + std::to_string(i));
    }
}

std::vector<double> Normalizer::transform_features(const std::vector<double>& raw) const {
    if (raw.size() != feat_min_.size()) {
        throw DataError("normalizer: feature length " + std::to_string(raw.size()) +
                        " does not match fitted length " + std::to_string(feat_min_.size()));
    }
    std::vector<double> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double span = feat_max_[i] - feat_min_[i];
        out[i] = span > 0.0 ? -1.0 + 2.0 * (raw[i] - feat_min_[i]) / span : 0.0;
    }
    return out;
}

std::vector<double> Normalizer::inverse_features(const std::vector<double>& scaled) const {
    if (scaled.size() != feat_min_.size()) {
        throw DataError("normalizer: feature length mismatch in inverse");
    }
    std::vector<double> out(scaled.size());
    for (std::size_t i = 0; i < scaled.size(); ++i) {
        const double span = feat_max_[i] - feat_min_[i];
        out[i] = span > 0.0 ? feat_min_[i] + (scaled[i] + 1.0) * span / 2.0 : feat_min_[i];
    }
    return out;
}

double Normalizer::normalize_target(double raw) const {
    const double span = tgt_max_ - tgt_min_;
    return span > 0.0 ? -1.0 + 2.0 * (raw - tgt_min_) / span : 0.0;
}

double Normalizer::denormalize_target(double scaled) const {
    const double span = tgt_max_ - tgt_min_;
    return span > 0.0 ? tgt_min_ + (scaled + 1.0) * span / 2.0 : tgt_min_;
}

Normalizer identity_normalizer(std::size_t p) {
    return Normalizer(std::vector<double>(p, -1.0), std::vector<double>(p, 1.0), kMosMin, kMosMax);
}

std::vector<std::size_t> FoldPlan::test_ordinals(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        if (assignment[i] == fold) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> FoldPlan::train_ordinals(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        if (assignment[i] != fold) out.push_back(i);
    }
    return out;
}

std::vector<QosRecord> load_csv(const std::string& path, const FeatureSchema& schema,
                                const std::optional<std::string>& order_by) {
    schema.validate();
    const ParsedCsv csv = read_csv_file(path);

    std::vector<std::size_t> feat_idx;
    feat_idx.reserve(schema.names.size());
    for (const auto& name : schema.names) {
        auto idx = find_column(csv.header, name);
        if (!idx) throw DataError("'" + path + "': missing column '" + name + "'");
        feat_idx.push_back(*idx);
    }
    std::optional<std::size_t> target_idx = find_column(csv.header, schema.target);
    std::optional<std::size_t> order_idx;
    if (order_by) {
        order_idx = find_column(csv.header, *order_by);
        if (!order_idx) throw DataError("'" + path + "': missing order-by column '" + *order_by + "'");
    }
    return records_from_rows(csv, schema, feat_idx, target_idx, order_idx);
}

std::pair<FeatureSchema, std::vector<QosRecord>> load_csv_all(
    const std::string& path, const std::string& target,
    const std::optional<std::string>& order_by) {
    const ParsedCsv csv = read_csv_file(path);

    const std::string target_canon = canon_column(target);
    FeatureSchema schema;
    schema.target = target;
    std::vector<std::size_t> feat_idx;
    std::optional<std::size_t> target_idx;
    for (std::size_t i = 0; i < csv.header.size(); ++i) {
        if (canon_column(csv.header[i]) == target_canon) {
            target_idx = i;
        } else {
            schema.names.push_back(csv.header[i]);
            feat_idx.push_back(i);
        }
    }
    if (!target_idx) throw DataError("'" + path + "': missing column '" + target + "'");
    schema.validate();

    std::optional<std::size_t> order_idx;
    if (order_by) {
        order_idx = find_column(csv.header, *order_by);
        if (!order_idx) throw DataError("'" + path + "': missing order-by column '" + *order_by + "'");
    }
    return {schema, records_from_rows(csv, schema, feat_idx, target_idx, order_idx)};
}

Normalizer fit_normalizer(const std::vector<QosRecord>& records,
                          const std::vector<std::size_t>& training_rows) {
    if (training_rows.empty()) throw DataError("fit_normalizer: empty training-row set");
    const std::size_t p = records.at(training_rows.front()).features.size();
    std::vector<double> lo(p, std::numeric_limits<double>::infinity());
    std::vector<double> hi(p, -std::numeric_limits<double>::infinity());
    double tlo = std::numeric_limits<double>::infinity();
    double thi = -std::numeric_limits<double>::infinity();
    bool any_target = false;
    for (std::size_t row : training_rows) {
        const QosRecord& rec = records.at(row);
        if (rec.features.size() != p) throw DataError("fit_normalizer: inconsistent feature length");
        for (std::size_t i = 0; i < p; ++i) {
            lo[i] = std::min(lo[i], rec.features[i]);
            hi[i] = std::max(hi[i], rec.features[i]);
        }
        if (rec.mos) {
            tlo = std::min(tlo, *rec.mos);
            thi = std::max(thi, *rec.mos);
            any_target = true;
        }
    }
    if (!any_target) {
        tlo = 0.0;
        thi = 0.0;
    }
    return Normalizer(std::move(lo), std::move(hi), tlo, thi);
}

std::vector<QosRecord> apply_normalizer(const Normalizer& norm,
                                        const std::vector<QosRecord>& records) {
    std::vector<QosRecord> out;
    out.reserve(records.size());
    for (const QosRecord& rec : records) {
        QosRecord n;
        n.ordinal = rec.ordinal;
        n.features = norm.transform_features(rec.features);
        if (rec.mos) n.mos = norm.normalize_target(*rec.mos);
        out.push_back(std::move(n));
    }
    return out;
}

std::vector<LaggedSample> make_lagged(const std::vector<QosRecord>& records, std::size_t d_u,
                                      std::size_t d_y, LoopMode mode) {
    const std::size_t warm = std::max(d_u, d_y);
    if (records.size() <= warm) {
        throw DataError("make_lagged: need more than max(d_u,d_y)=" + std::to_string(warm) +
                        " records, got " + std::to_string(records.size()));
    }
    const std::size_t p = records.front().features.size();
    std::vector<LaggedSample> samples;
    samples.reserve(records.size() - warm);
    for (std::size_t n = warm; n < records.size(); ++n) {
        LaggedSample s;
        s.input.reserve(p * (d_u + 1) + d_y);
        for (std::size_t lag = 0; lag <= d_u; ++lag) {
            const auto& f = records[n - lag].features;
            s.input.insert(s.input.end(), f.begin(), f.end());
        }
        for (std::size_t j = 1; j <= d_y; ++j) {
            if (mode == LoopMode::open) {
                const auto& m = records[n - j].mos;
                if (!m) {
                    throw DataError("make_lagged: record " + std::to_string(records[n - j].ordinal) +
                                    " is missing MOS needed for open-loop feedback");
                }
                s.input.push_back(*m);
            } else {
                s.input.push_back(0.0);  // placeholder, substituted by model feedback
            }
        }
        if (mode == LoopMode::open) {
            if (!records[n].mos) {
                throw DataError("make_lagged: record " + std::to_string(records[n].ordinal) +
                                " is missing the MOS target");
            }
            s.target = *records[n].mos;
        } else {
            s.target = records[n].mos.value_or(std::numeric_limits<double>::quiet_NaN());
        }
        s.origin = records[n].ordinal;
        samples.push_back(std::move(s));
    }
    return samples;
}

FoldPlan make_folds(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k < 2 || k > n) {
        throw DataError("make_folds: k=" + std::to_string(k) + " out of range [2," +
                        std::to_string(n) + "]");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);
    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.assignment.resize(n);
    for (std::size_t i = 0; i < n; ++i) plan.assignment[order[i]] = i % k;
    return plan;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_train_val(
    const std::vector<std::size_t>& pool, std::uint64_t seed) {
    if (pool.size() < 2) throw DataError("split_train_val: need at least 2 indices");
    std::vector<std::size_t> shuffled = pool;
    Rng rng(seed);
    rng.shuffle(shuffled);
    const std::size_t n_val = std::max<std::size_t>(1, pool.size() * 3 / 10);
    std::vector<std::size_t> val(shuffled.begin(), shuffled.begin() + n_val);
    std::vector<std::size_t> train(shuffled.begin() + n_val, shuffled.end());
    std::sort(train.begin(), train.end());
    std::sort(val.begin(), val.end());
    return {train, val};
}

double synth_recursion_step(double y_prev1, double y_prev2, double u1_now, double u2_prev) {
    return std::tanh(0.6 * (y_prev1 - 2.5) - 0.3 * (y_prev2 - 2.5) + 0.8 * u1_now +
                     0.4 * u2_prev) +
           2.5;
}

std::vector<QosRecord> synth_narx_series(std::size_t n, std::uint64_t seed, double noise_sd) {
    if (n < 10) throw DataError("synth_narx_series: need n >= 10");
    if (noise_sd < 0.0) throw DataError("synth_narx_series: noise_sd must be non-negative");
    Rng rng(seed);
    std::vector<QosRecord> records;
    records.reserve(n);
    double y1 = 2.5, y2 = 2.5, u2_prev = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double u1 = rng.uniform(-1.0, 1.0);
        const double u2 = rng.uniform(-1.0, 1.0);
        double y = synth_recursion_step(y1, y2, u1, u2_prev) + noise_sd * rng.normal();
        y = clip(y, kMosMin, kMosMax);
        QosRecord rec;
        rec.ordinal = i;
        rec.features = {u1, u2};
        rec.mos = y;
        records.push_back(std::move(rec));
        y2 = y1;
        y1 = y;
        u2_prev = u2;
    }
    return records;
}

void write_fold_plan(const FoldPlan& plan, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "ordinal,fold\n";
    for (std::size_t i = 0; i < plan.assignment.size(); ++i) {
        out << i << "," << plan.assignment[i] << "\n";
    }
}

std::uint64_t fold_plan_hash(const FoldPlan& plan) {
    std::ostringstream os;
    os << "k:" << plan.k << ";";
    for (std::size_t a : plan.assignment) os << a << ",";
    return fnv1a64(os.str());
}

}  // namespace avqe
