#pragma once

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "estimator.hpp"
#include "io.hpp"

namespace quantcurve {

// CSV sample format: header row x1..xd,y; decimal point, no thousands
// separators.  Errors carry row/column coordinates (1-based, header is row 1).
inline Sample ingest_csv(const std::string& path) {
    const std::string text = read_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": missing header row");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::string cur;
        for (char c : s) {
            if (c == ',') {
                out.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        out.push_back(cur);
        return out;
    };

    const std::vector<std::string> header = split(line);
    if (header.size() < 2 || header.back() != "y")
        throw std::runtime_error(path + ": header must be x1..xd,y");
    for (std::size_t j = 0; j + 1 < header.size(); ++j)
        if (header[j] != "x" + std::to_string(j + 1))
            throw std::runtime_error(path + ": expected column x" + std::to_string(j + 1) +
                                     ", found '" + header[j] + "'");
    const std::size_t d = header.size() - 1;

    Sample s;
    s.d = d;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> cells = split(line);
        if (cells.size() != d + 1)
            throw std::runtime_error(path + ": row " + std::to_string(row) + " has " +
                                     std::to_string(cells.size()) + " cells, expected " +
                                     std::to_string(d + 1));
        for (std::size_t j = 0; j <= d; ++j) {
            std::size_t pos = 0;
            double v;
            try {
                v = std::stod(cells[j], &pos);
            } catch (const std::exception&) {
                pos = 0;
            }
            if (pos != cells[j].size() || !std::isfinite(v))
                throw std::runtime_error(path + ": row " + std::to_string(row) + " column " +
                                         std::to_string(j + 1) + ": invalid value '" + cells[j] +
                                         "'");
            if (j < d)
                s.x.push_back(v);
            else
                s.y.push_back(v);
        }
    }
    s.n = s.y.size();
    if (s.n == 0) throw std::runtime_error(path + ": no data rows");
    return s;
}

inline std::string emit_csv(const Sample& s) {
    std::ostringstream os;
    for (std::size_t j = 0; j < s.d; ++j) os << "x" << (j + 1) << ",";
    os << "y\n";
    for (std::size_t i = 0; i < s.n; ++i) {
        for (std::size_t j = 0; j < s.d; ++j) os << fmt17(s.x[i * s.d + j]) << ",";
        os << fmt17(s.y[i]) << "\n";
    }
    return os.str();
}

}  // namespace quantcurve
