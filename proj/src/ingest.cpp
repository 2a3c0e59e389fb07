#include "resonance/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "resonance/score_table.hpp"

#include "json.hpp"

namespace resonance {

void ScoreTable::reserve(std::size_t n) {
    m_.reserve(n);
    score_.reserve(n);
    region_.reserve(n);
    if (labeled_) label_.reserve(n);
}

void ScoreTable::append(double m, double score, Region region, std::optional<Label> label) {
    if (labeled_ != label.has_value())
        throw data_error("score table label presence mismatch");
    m_.push_back(m);
    score_.push_back(score);
    region_.push_back(region);
    if (labeled_) label_.push_back(static_cast<std::int8_t>(*label));
}

ScoreTable ScoreTable::filtered_above(double threshold) const {
    ScoreTable out(labeled_);
    for (std::size_t i = 0; i < size(); ++i) {
        if (score_[i] > threshold) {
            std::optional<Label> l;
            if (labeled_) l = label(i);
            out.append(m_[i], score_[i], region_[i], l);
        }
    }
    return out;
}

std::vector<double> ScoreTable::scores_in(Region r) const {
    std::vector<double> out;
    for (std::size_t i = 0; i < size(); ++i)
        if (region_[i] == r) out.push_back(score_[i]);
    return out;
}

std::vector<double> ScoreTable::sb_scores() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < size(); ++i)
        if (region_[i] != Region::SR) out.push_back(score_[i]);
    return out;
}

void ColumnSchema::validate() const {
    if (feature_columns.empty()) throw config_error("schema needs at least one feature column");
    std::vector<std::string> names = feature_columns;
    names.push_back(resonant_column);
    if (has_label()) names.push_back(label_column);
    std::sort(names.begin(), names.end());
    if (std::adjacent_find(names.begin(), names.end()) != names.end())
        throw config_error("schema column names must be distinct");
    if (!(unit_scale > 0.0) || !std::isfinite(unit_scale))
        throw config_error("unit_scale must be positive and finite");
}

ColumnSchema ColumnSchema::canonical(int d, bool labeled) {
    ColumnSchema s;
    for (int j = 0; j < d; ++j) s.feature_columns.push_back("x" + std::to_string(j));
    if (labeled) s.label_column = "label";
    return s;
}

ColumnSchema ColumnSchema::lhco() {
    ColumnSchema s;
    s.resonant_column = "m";
    s.feature_columns = {"m_j1", "dm_j", "tau21_1", "tau21_2"};
    s.label_column = "label";
    return s;
}

ColumnSchema ColumnSchema::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open schema file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw config_error("malformed schema JSON: " + std::string(e.what()));
    }
    ColumnSchema s;
    try {
        s.resonant_column = j.at("resonant_column").get<std::string>();
        s.feature_columns = j.at("feature_columns").get<std::vector<std::string>>();
        if (j.contains("label_column") && !j["label_column"].is_null())
            s.label_column = j["label_column"].get<std::string>();
        if (j.contains("unit_scale")) s.unit_scale = j["unit_scale"].get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw config_error("schema JSON missing field: " + std::string(e.what()));
    }
    s.validate();
    return s;
}

void ColumnSchema::to_json_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw data_error("cannot open schema file for writing: " + path);
    nlohmann::json j = {{"resonant_column", resonant_column},
                        {"feature_columns", feature_columns},
                        {"unit_scale", unit_scale}};
    if (has_label()) j["label_column"] = label_column;
    out << j.dump(2) << "\n";
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r')
        out.back().pop_back();
    return out;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& col) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    while (first < last && *first == ' ') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last)
        throw data_error("unparsable cell '" + cell + "' in column " + col + " at data row " +
                         std::to_string(row));
    return v;
}

void format_value(std::string& out, double v) {
    char buf[32];
    const int n = std::snprintf(buf, sizeof(buf), "%.17g", v);
    out.append(buf, static_cast<std::size_t>(n));
}

}  // namespace

Dataset read_csv(const std::string& path, const ColumnSchema& schema, ReadReport* report) {
    schema.validate();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open input file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw data_error("missing header row in " + path);
    const auto header = split_line(line);
    auto col_index = [&](const std::string& name) -> std::size_t {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw data_error("missing column '" + name + "' in " + path);
        return static_cast<std::size_t>(it - header.begin());
    };

    const std::size_t m_idx = col_index(schema.resonant_column);
    std::vector<std::size_t> x_idx;
    for (const auto& name : schema.feature_columns) x_idx.push_back(col_index(name));
    const bool labeled = schema.has_label();
    const std::size_t label_idx = labeled ? col_index(schema.label_column) : 0;

    Dataset ds(static_cast<int>(x_idx.size()), labeled);
    ReadReport local;
    std::vector<double> x(x_idx.size());
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        ++row;
        const auto cells = split_line(line);
        if (cells.size() != header.size())
            throw data_error("row " + std::to_string(row) + " has " +
                             std::to_string(cells.size()) + " cells, header has " +
                             std::to_string(header.size()));
        double m = parse_cell(cells[m_idx], row, schema.resonant_column) * schema.unit_scale;
        bool finite = std::isfinite(m) && m > 0.0;
        for (std::size_t j = 0; j < x_idx.size(); ++j) {
            x[j] = parse_cell(cells[x_idx[j]], row, schema.feature_columns[j]);
            finite = finite && std::isfinite(x[j]);
        }
        std::optional<Label> label;
        if (labeled) {
            const double lv = parse_cell(cells[label_idx], row, schema.label_column);
            if (lv == 0.0)
                label = Label::Background;
            else if (lv == 1.0)
                label = Label::Signal;
            else
                throw data_error("label must be 0 or 1, got '" + cells[label_idx] +
                                 "' at data row " + std::to_string(row));
        }
        if (!finite) {
            local.rows_rejected++;
            local.rejected_rows.push_back(row);
            continue;
        }
        ds.append(m, x, label);
        local.rows_read++;
    }
    if (ds.size() == 0) throw data_error("no usable rows in " + path);
    if (report) *report = local;
    return ds;
}

void write_csv(const Dataset& ds, const std::string& path, const ColumnSchema& schema) {
    schema.validate();
    if (static_cast<int>(schema.feature_columns.size()) != ds.dim())
        throw data_error("schema feature count does not match dataset dimension");
    if (schema.has_label() && !ds.labeled())
        throw data_error("schema has a label column but dataset is unlabeled");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot open output file: " + path);

    std::string buf;
    buf += schema.resonant_column;
    for (const auto& name : schema.feature_columns) {
        buf += ',';
        buf += name;
    }
    const bool write_label = schema.has_label() && ds.labeled();
    if (write_label) {
        buf += ',';
        buf += schema.label_column;
    }
    buf += '\n';

    for (std::size_t i = 0; i < ds.size(); ++i) {
        format_value(buf, ds.m(i) / schema.unit_scale);
        for (double v : ds.x(i)) {
            buf += ',';
            format_value(buf, v);
        }
        if (write_label) {
            buf += ',';
            buf += (ds.label(i) == Label::Signal) ? '1' : '0';
        }
        buf += '\n';
        if (buf.size() > (1u << 20)) {
            out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
            buf.clear();
        }
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw data_error("failed writing " + path);
}

void write_scores_csv(const ScoreTable& st, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot open output file: " + path);
    std::string buf = st.labeled() ? "m,score,region,label\n" : "m,score,region\n";
    for (std::size_t i = 0; i < st.size(); ++i) {
        format_value(buf, st.m(i));
        buf += ',';
        format_value(buf, st.score(i));
        buf += ',';
        buf += region_name(st.region(i));
        if (st.labeled()) {
            buf += ',';
            buf += (st.label(i) == Label::Signal) ? '1' : '0';
        }
        buf += '\n';
        if (buf.size() > (1u << 20)) {
            out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
            buf.clear();
        }
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw data_error("failed writing " + path);
}

ScoreTable read_scores_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open scores file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw data_error("missing header row in " + path);
    const auto header = split_line(line);
    const bool labeled =
        std::find(header.begin(), header.end(), "label") != header.end();
    if (header.size() != (labeled ? 4u : 3u) || header[0] != "m" || header[1] != "score" ||
        header[2] != "region")
        throw data_error("scores file must have columns m,score,region[,label]");

    ScoreTable st(labeled);
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        ++row;
        const auto cells = split_line(line);
        if (cells.size() != header.size())
            throw data_error("scores row " + std::to_string(row) + " malformed");
        const double m = parse_cell(cells[0], row, "m");
        const double s = parse_cell(cells[1], row, "score");
        const Region r = region_from_name(cells[2]);
        std::optional<Label> label;
        if (labeled) {
            if (cells[3] == "1")
                label = Label::Signal;
            else if (cells[3] == "0")
                label = Label::Background;
            else
                throw data_error("score label must be 0 or 1 at row " + std::to_string(row));
        }
        st.append(m, s, r, label);
    }
    if (st.size() == 0) throw data_error("no usable rows in " + path);
    return st;
}

}  // namespace resonance
