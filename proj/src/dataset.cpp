#include "siglev/dataset.hpp"

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "siglev/kernels.hpp"

namespace siglev {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return cells;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& raw, std::size_t row, std::size_t col) {
    std::string cell = trim(raw);
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || cell.empty() || !std::isfinite(v)) {
        std::ostringstream msg;
        msg << "unparseable cell \"" << cell << "\" at row " << row + 1 << ", column " << col + 1;
        throw std::runtime_error(msg.str());
    }
    return v;
}

struct RawCsv {
    std::vector<std::string> names;
    bool has_header;
    std::vector<std::vector<double>> rows;
};

RawCsv read_csv(const std::string& path, bool has_header) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    RawCsv out;
    out.has_header = has_header;
    std::string line;
    std::size_t ncols = 0;
    std::size_t row_idx = 0;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_line(line);
        if (first && has_header) {
            for (auto& c : cells) out.names.push_back(trim(c));
            ncols = cells.size();
            first = false;
            continue;
        }
        if (first) {
            ncols = cells.size();
            first = false;
        } else if (cells.size() != ncols) {
            std::ostringstream msg;
            msg << "row " << row_idx + 1 << " has " << cells.size() << " cells, expected " << ncols;
            throw std::runtime_error(msg.str());
        }
        std::vector<double> vals(cells.size());
        for (std::size_t j = 0; j < cells.size(); ++j) vals[j] = parse_cell(cells[j], row_idx, j);
        out.rows.push_back(std::move(vals));
        ++row_idx;
    }
    if (out.rows.empty()) throw std::runtime_error("no data rows in " + path);
    if (!has_header) {
        out.names.resize(ncols);
        for (std::size_t j = 0; j < ncols; ++j) out.names[j] = "x" + std::to_string(j + 1);
    }
    return out;
}

using EigenRowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const EigenRowMat> as_eigen(const Matrix& m) {
    return {m.data.data(), static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols)};
}

}  // namespace

LabeledDataset load_csv(const std::string& path, const ColumnRef& response_column,
                        bool has_header) {
    RawCsv raw = read_csv(path, has_header);
    const std::size_t ncols = raw.names.size();

    std::size_t resp = ncols;
    if (std::holds_alternative<std::string>(response_column)) {
        const auto& name = std::get<std::string>(response_column);
        for (std::size_t j = 0; j < ncols; ++j) {
            if (raw.names[j] == name) {
                resp = j;
                break;
            }
        }
        if (resp == ncols) throw std::runtime_error("response column absent: " + name);
    } else {
        resp = std::get<std::size_t>(response_column);
        if (resp >= ncols) {
            throw std::runtime_error("response column index out of range: " + std::to_string(resp));
        }
    }
    if (ncols < 2) throw std::runtime_error("need at least one covariate column besides response");

    LabeledDataset d;
    const std::size_t n = raw.rows.size();
    const std::size_t p = ncols - 1;
    d.x = Matrix(n, p);
    d.y.resize(n);
    std::vector<std::string> names;
    names.reserve(p);
    for (std::size_t j = 0; j < ncols; ++j) {
        if (j != resp) names.push_back(raw.names[j]);
    }
    d.column_names = std::move(names);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t k = 0;
        for (std::size_t j = 0; j < ncols; ++j) {
            if (j == resp) {
                d.y[i] = raw.rows[i][j];
            } else {
                d.x(i, k++) = raw.rows[i][j];
            }
        }
    }
    return d;
}

UnlabeledDataset load_unlabeled_csv(const std::string& path, bool has_header) {
    RawCsv raw = read_csv(path, has_header);
    UnlabeledDataset u;
    const std::size_t n = raw.rows.size();
    const std::size_t p = raw.names.size();
    u.x = Matrix(n, p);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) u.x(i, j) = raw.rows[i][j];
    return u;
}

void write_csv(const LabeledDataset& d, const std::string& path, const std::string& response_name) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    char buf[64];
    for (std::size_t j = 0; j < d.p(); ++j) {
        const std::string name = d.column_names ? (*d.column_names)[j] : "x" + std::to_string(j + 1);
        out << name << ',';
    }
    out << response_name << '\n';
    for (std::size_t i = 0; i < d.n(); ++i) {
        for (std::size_t j = 0; j < d.p(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", d.x(i, j));
            out << buf << ',';
        }
        std::snprintf(buf, sizeof buf, "%.17g", d.y[i]);
        out << buf << '\n';
    }
}

LabeledDataset add_pairwise_interactions(const LabeledDataset& d,
                                         const std::optional<std::vector<std::size_t>>& subset) {
    const std::size_t p = d.p();
    std::vector<std::size_t> s;
    if (subset) {
        s = *subset;
        for (std::size_t j : s) {
            if (j >= p) throw std::invalid_argument("interaction index out of range: " + std::to_string(j));
        }
    } else {
        s.resize(p);
        for (std::size_t j = 0; j < p; ++j) s[j] = j;
    }
    const std::size_t extra = s.size() < 2 ? 0 : s.size() * (s.size() - 1) / 2;

    LabeledDataset out;
    out.y = d.y;
    out.whitened = false;
    out.x = Matrix(d.n(), p + extra);
    std::vector<std::string> names;
    names.reserve(p + extra);
    auto name_of = [&](std::size_t j) {
        return d.column_names ? (*d.column_names)[j] : "x" + std::to_string(j + 1);
    };
    for (std::size_t j = 0; j < p; ++j) names.push_back(name_of(j));
    for (std::size_t a = 0; a < s.size(); ++a)
        for (std::size_t b = a + 1; b < s.size(); ++b)
            names.push_back(name_of(s[a]) + "\xC3\x97" + name_of(s[b]));  // UTF-8 multiplication sign
    out.column_names = std::move(names);

    for (std::size_t i = 0; i < d.n(); ++i) {
        const double* src = d.x.row(i);
        double* dst = out.x.row(i);
        std::memcpy(dst, src, p * sizeof(double));
        std::size_t k = p;
        for (std::size_t a = 0; a < s.size(); ++a)
            for (std::size_t b = a + 1; b < s.size(); ++b) dst[k++] = src[s[a]] * src[s[b]];
    }
    return out;
}

std::pair<LabeledDataset, std::vector<std::size_t>> drop_collinear(const LabeledDataset& d,
                                                                   double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("drop_collinear: tol must be > 0");
    const std::size_t n = d.n(), p = d.p();
    std::vector<std::size_t> kept;
    std::vector<std::vector<double>> basis;  // orthonormal columns of the kept span

    std::vector<double> col(n), r(n);
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t i = 0; i < n; ++i) col[i] = d.x(i, j);
        const double own = std::sqrt(kernels::sumsq(col));
        r = col;
        // two Gram-Schmidt passes for stability
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& q : basis) {
                const double coef = kernels::dot(r, q);
                kernels::axpy(-coef, q, r);
            }
        }
        const double res = std::sqrt(kernels::sumsq(r));
        if (res <= tol * own) continue;
        kernels::scale(1.0 / res, r, r);
        basis.push_back(r);
        kept.push_back(j);
    }

    LabeledDataset out;
    out.y = d.y;
    out.whitened = d.whitened;
    out.x = Matrix(n, kept.size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < kept.size(); ++k) out.x(i, k) = d.x(i, kept[k]);
    if (d.column_names) {
        std::vector<std::string> names;
        names.reserve(kept.size());
        for (std::size_t k : kept) names.push_back((*d.column_names)[k]);
        out.column_names = std::move(names);
    }
    return {std::move(out), std::move(kept)};
}

std::vector<std::size_t> top_t_value_columns(const LabeledDataset& d, std::size_t k) {
    const std::size_t n = d.n(), p = d.p();
    if (n <= p + 1) throw std::invalid_argument("top_t_value_columns: requires n > p + 1");
    if (k > p) throw std::invalid_argument("top_t_value_columns: k exceeds column count");

    Eigen::MatrixXd design(n, p + 1);
    design.col(0).setOnes();
    design.rightCols(p) = as_eigen(d.x);
    Eigen::Map<const Eigen::VectorXd> y(d.y.data(), static_cast<Eigen::Index>(n));

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < static_cast<Eigen::Index>(p + 1)) {
        throw std::runtime_error("top_t_value_columns: design is rank deficient; remove collinear columns first");
    }
    Eigen::VectorXd coef = qr.solve(y);
    Eigen::VectorXd resid = y - design * coef;
    const double dof = static_cast<double>(n - p - 1);
    const double s2 = resid.squaredNorm() / dof;
    Eigen::MatrixXd xtx_inv =
        (design.transpose() * design).ldlt().solve(Eigen::MatrixXd::Identity(p + 1, p + 1));

    std::vector<std::pair<double, std::size_t>> ranked(p);
    for (std::size_t j = 0; j < p; ++j) {
        const double se = std::sqrt(s2 * xtx_inv(static_cast<Eigen::Index>(j + 1), static_cast<Eigen::Index>(j + 1)));
        const double t = se > 0.0 ? std::abs(coef(static_cast<Eigen::Index>(j + 1))) / se : 0.0;
        ranked[j] = {t, j};
    }
    // descending |t|, ties toward the smaller column index
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::size_t> out(k);
    for (std::size_t i = 0; i < k; ++i) out[i] = ranked[i].second;
    std::sort(out.begin(), out.end());
    return out;
}

namespace {
constexpr char kCacheMagic[8] = {'S', 'G', 'L', 'V', 'D', 'S', '0', '1'};
}

void save_cache(const LabeledDataset& d, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out.write(kCacheMagic, sizeof kCacheMagic);
    const std::uint64_t n = d.n(), p = d.p();
    const std::uint8_t whitened = d.whitened ? 1 : 0;
    const std::uint8_t named = d.column_names ? 1 : 0;
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    out.write(reinterpret_cast<const char*>(&p), sizeof p);
    out.write(reinterpret_cast<const char*>(&whitened), 1);
    out.write(reinterpret_cast<const char*>(&named), 1);
    if (named) {
        for (const auto& name : *d.column_names) {
            const std::uint32_t len = static_cast<std::uint32_t>(name.size());
            out.write(reinterpret_cast<const char*>(&len), sizeof len);
            out.write(name.data(), len);
        }
    }
    // column-major blocks, then the response
    std::vector<double> col(n);
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t i = 0; i < n; ++i) col[i] = d.x(i, j);
        out.write(reinterpret_cast<const char*>(col.data()), static_cast<std::streamsize>(n * sizeof(double)));
    }
    out.write(reinterpret_cast<const char*>(d.y.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!out) throw std::runtime_error("write failed: " + path);
}

LabeledDataset load_cache(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kCacheMagic, sizeof magic) != 0) {
        throw std::runtime_error("not a dataset cache (bad magic/version): " + path);
    }
    std::uint64_t n = 0, p = 0;
    std::uint8_t whitened = 0, named = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    in.read(reinterpret_cast<char*>(&p), sizeof p);
    in.read(reinterpret_cast<char*>(&whitened), 1);
    in.read(reinterpret_cast<char*>(&named), 1);
    LabeledDataset d;
    d.whitened = whitened != 0;
    if (named) {
        std::vector<std::string> names(p);
        for (auto& name : names) {
            std::uint32_t len = 0;
            in.read(reinterpret_cast<char*>(&len), sizeof len);
            name.resize(len);
            in.read(name.data(), len);
        }
        d.column_names = std::move(names);
    }
    d.x = Matrix(n, p);
    std::vector<double> col(n);
    for (std::size_t j = 0; j < p; ++j) {
        in.read(reinterpret_cast<char*>(col.data()), static_cast<std::streamsize>(n * sizeof(double)));
        for (std::size_t i = 0; i < n; ++i) d.x(i, j) = col[i];
    }
    d.y.resize(n);
    in.read(reinterpret_cast<char*>(d.y.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw std::runtime_error("truncated dataset cache: " + path);
    return d;
}

}  // namespace siglev
