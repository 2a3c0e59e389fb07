#pragma once

#include <string>
#include <vector>

#include "resonance/core.hpp"

namespace resonance {

class ScoreTable;  // defined in cwola.hpp

// Column layout of a dataset CSV. unit_scale multiplies m on read
// (e.g. 0.001 to ingest GeV into TeV-scale analyses).
struct ColumnSchema {
    std::string resonant_column = "m";
    std::vector<std::string> feature_columns;
    std::string label_column;  // empty -> unlabeled
    double unit_scale = 1.0;

    bool has_label() const { return !label_column.empty(); }
    void validate() const;

    // m, x0..x{d-1} [, label]
    static ColumnSchema canonical(int d, bool labeled);
    // The published high-level-feature layout: m, m_j1, dm_j, tau21_1, tau21_2, label.
    static ColumnSchema lhco();

    static ColumnSchema from_json_file(const std::string& path);
    void to_json_file(const std::string& path) const;
};

struct ReadReport {
    std::size_t rows_read = 0;
    std::size_t rows_rejected = 0;          // non-finite values
    std::vector<std::size_t> rejected_rows;  // 1-based data row indices
};

// Reads a header CSV into a Dataset. Rows containing non-finite values are
// skipped and reported; unparsable cells or missing columns are errors.
Dataset read_csv(const std::string& path, const ColumnSchema& schema,
                 ReadReport* report = nullptr);

// Writes with 17 significant digits so read_csv(write_csv(ds)) reproduces
// ds exactly at unit_scale = 1. Column order follows the schema.
void write_csv(const Dataset& ds, const std::string& path, const ColumnSchema& schema);

// ScoreTable CSV: m,score,region[,label].
void write_scores_csv(const ScoreTable& st, const std::string& path);
ScoreTable read_scores_csv(const std::string& path);

}  // namespace resonance
