#include "madt/pipeline/data.hpp"

#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <sstream>

#include "madt/errors.hpp"

namespace madt::pipeline {
namespace {

std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

double parse_number(const std::string& cell, std::size_t line, std::size_t col) {
    const std::string t = trim(cell);
    double v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size())
        throw ParseError("non-numeric cell '" + t + "' in column " + std::to_string(col + 1), line);
    return v;
}

}  // namespace

Series parse_csv(const std::string& text, bool require_labels) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw ParseError("empty file: header row missing", 1);
    ++lineno;
    std::vector<std::string> header = split_commas(line);
    for (auto& h : header) h = trim(h);
    if (header.empty() || (header.size() == 1 && header[0].empty())) throw ParseError("empty header row", 1);

    Series s;
    const bool has_label = header.back() == kLabelColumn;
    if (require_labels && !has_label) throw ParseError("missing '" + std::string(kLabelColumn) + "' column", 1);
    s.sensor_names.assign(header.begin(), header.end() - (has_label ? 1 : 0));
    if (s.sensor_names.empty()) throw ParseError("no sensor columns", 1);

    const std::size_t n = s.sensor_names.size();
    std::vector<double> values;
    std::vector<int> labels;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split_commas(line);
        if (cells.size() != header.size())
            throw ParseError("expected " + std::to_string(header.size()) + " cells, found " +
                                 std::to_string(cells.size()),
                             lineno);
        for (std::size_t j = 0; j < n; ++j) values.push_back(parse_number(cells[j], lineno, j));
        if (has_label) {
            const double l = parse_number(cells[n], lineno, n);
            if (l != 0.0 && l != 1.0) throw ParseError("label must be 0 or 1", lineno);
            labels.push_back(int(l));
        }
    }
    const std::size_t rows = values.size() / n;
    s.values = nd::Matrix(rows, n, std::move(values));
    if (has_label) s.labels = std::move(labels);
    return s;
}

Series load_csv(const std::filesystem::path& path, bool require_labels) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_csv(ss.str(), require_labels);
}

std::string format_csv(const Series& s) {
    std::string out;
    for (std::size_t j = 0; j < s.sensor_names.size(); ++j) out += (j ? "," : "") + s.sensor_names[j];
    if (s.labels) out += std::string(",") + kLabelColumn;
    out += '\n';
    char buf[64];
    for (std::size_t i = 0; i < s.length(); ++i) {
        for (std::size_t j = 0; j < s.sensors(); ++j) {
            // %.17g round-trips every double exactly.
            std::snprintf(buf, sizeof buf, "%.17g", s.values(i, j));
            if (j) out += ',';
            out += buf;
        }
        if (s.labels) out += "," + std::to_string((*s.labels)[i]);
        out += '\n';
    }
    return out;
}

void save_csv(const std::filesystem::path& path, const Series& s) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot write " + path.string());
    f << format_csv(s);
}

Series slice(const Series& s, std::size_t begin, std::size_t end) {
    if (begin > end || end > s.length()) throw InputError("slice: range out of bounds");
    Series out;
    out.sensor_names = s.sensor_names;
    out.values = nd::Matrix(end - begin, s.sensors());
    for (std::size_t i = begin; i < end; ++i)
        for (std::size_t j = 0; j < s.sensors(); ++j) out.values(i - begin, j) = s.values(i, j);
    if (s.labels) out.labels = std::vector<int>(s.labels->begin() + long(begin), s.labels->begin() + long(end));
    return out;
}

NormStats fit_normalization(const nd::Matrix& values) {
    if (values.rows() == 0) throw InputError("fit_normalization: empty series");
    NormStats st;
    const std::size_t n = values.cols(), rows = values.rows();
    st.mean.assign(n, 0.0);
    st.std.assign(n, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < n; ++j) st.mean[j] += values(i, j);
    for (auto& m : st.mean) m /= double(rows);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < n; ++j) st.std[j] += (values(i, j) - st.mean[j]) * (values(i, j) - st.mean[j]);
    for (auto& s : st.std) {
        s = std::sqrt(s / double(rows));
        if (!(s > 1e-12)) s = 1.0;
    }
    return st;
}

nd::Matrix apply_normalization(const nd::Matrix& values, const NormStats& stats) {
    if (stats.mean.size() != values.cols() || stats.std.size() != values.cols())
        throw DimensionError("apply_normalization: statistics cover " + std::to_string(stats.mean.size()) +
                             " sensors, series has " + std::to_string(values.cols()));
    nd::Matrix out(values.rows(), values.cols());
    for (std::size_t i = 0; i < values.rows(); ++i)
        for (std::size_t j = 0; j < values.cols(); ++j) out(i, j) = (values(i, j) - stats.mean[j]) / stats.std[j];
    return out;
}

std::vector<statemat::TimeWindow> make_windows(const nd::Matrix& values, std::size_t w) {
    if (w == 0) throw ParameterError("make_windows: window length must be positive");
    if (values.rows() < w)
        throw InputError("series length " + std::to_string(values.rows()) + " is shorter than window " +
                         std::to_string(w));
    std::vector<statemat::TimeWindow> out;
    for (std::size_t k = 0; k + w <= values.rows(); k += w) {
        statemat::TimeWindow win;
        win.start_index = k;
        win.values = nd::Matrix(w, values.cols());
        for (std::size_t i = 0; i < w; ++i)
            for (std::size_t j = 0; j < values.cols(); ++j) win.values(i, j) = values(k + i, j);
        out.push_back(std::move(win));
    }
    return out;
}

}  // namespace madt::pipeline
