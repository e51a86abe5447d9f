#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "siglev/matrix.hpp"

namespace siglev {

// Labeled sample: covariate rows X (n x p) plus responses Y (n). `whitened`
// marks data already passed through a CovariateModel transform; the
// estimators require it (or an explicit caller assertion via the flag).
struct LabeledDataset {
    Matrix x;
    std::vector<double> y;
    bool whitened = false;
    std::optional<std::vector<std::string>> column_names;

    std::size_t n() const { return x.rows; }
    std::size_t p() const { return x.cols; }
};

// Covariates only (the unlabeled part of the semi-supervised sample).
struct UnlabeledDataset {
    Matrix x;
    bool whitened = false;

    std::size_t n() const { return x.rows; }
    std::size_t p() const { return x.cols; }
};

using ColumnRef = std::variant<std::string, std::size_t>;

// CSV ingestion. The response column (by header name, or 0-based index) is
// removed from the covariate block; row order is preserved. Cells must all
// parse as finite reals; violations report the offending row/column.
LabeledDataset load_csv(const std::string& path, const ColumnRef& response_column,
                        bool has_header = true);
UnlabeledDataset load_unlabeled_csv(const std::string& path, bool has_header = true);

// Writes header (column names or x1..xp plus `response_name`) and full
// round-trip precision values.
void write_csv(const LabeledDataset& d, const std::string& path,
               const std::string& response_name = "y");

// Appends X_j * X_j' for all j < j' in `subset` (default: all columns).
// Original columns are retained; new names are "a×b".
LabeledDataset add_pairwise_interactions(const LabeledDataset& d,
                                         const std::optional<std::vector<std::size_t>>& subset = {});

// Greedy left-to-right pruning: a column is dropped when its residual norm
// after projecting on the span of already-kept columns is <= tol * own norm.
// Returns the pruned dataset and the kept column indices.
std::pair<LabeledDataset, std::vector<std::size_t>> drop_collinear(const LabeledDataset& d,
                                                                   double tol = 1e-8);

// Ranks covariates by |t-value| from a full OLS fit (intercept included) and
// returns the top k column indices; ties break toward the smaller index.
// Requires n > p + 1.
std::vector<std::size_t> top_t_value_columns(const LabeledDataset& d, std::size_t k);

// Columnar binary cache with a versioned header, for repeated benchmark runs.
void save_cache(const LabeledDataset& d, const std::string& path);
LabeledDataset load_cache(const std::string& path);

}  // namespace siglev
