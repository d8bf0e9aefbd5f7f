#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "tlmc/core/error.hpp"

namespace tlmc {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

// Fixed leading columns of every per-frame CSV. Extra columns follow in the
// order they were declared when the file was opened. Missing values are empty.
inline const std::vector<std::string>& frame_csv_columns() {
    static const std::vector<std::string> cols{"frame", "mode", "spp", "mrse", "rbias2", "rvar",
                                               "avg_path_length", "ir_bounces", "train_loss"};
    return cols;
}

struct FrameRow {
    int frame = 0;
    std::string mode;
    int spp = 0;
    double mrse = kMissing;
    double rbias2 = kMissing;
    double rvar = kMissing;
    double avg_path_length = kMissing;
    double ir_bounces = kMissing;
    double train_loss = kMissing;
    std::vector<double> extras;  // matches CsvWriter::extra_columns()
};

inline std::string csv_number(double v) {
    if (!std::isfinite(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

// Minimal quoting: only fields containing a comma, quote or newline are quoted.
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
}

class CsvWriter {
public:
    CsvWriter() = default;
    CsvWriter(const std::string& path, std::vector<std::string> header) : header_(std::move(header)) {
        out_.open(path, std::ios::binary | std::ios::trunc);
        if (!out_) throw Error("cannot write '" + path + "'");
        write_fields(header_);
    }

    const std::vector<std::string>& header() const { return header_; }

    void row(const std::vector<std::string>& fields) {
        if (fields.size() != header_.size())
            throw Error("csv row has " + std::to_string(fields.size()) + " fields, header has " +
                        std::to_string(header_.size()));
        write_fields(fields);
    }

private:
    void write_fields(const std::vector<std::string>& f) {
        for (std::size_t i = 0; i < f.size(); ++i) out_ << (i ? "," : "") << csv_field(f[i]);
        out_ << '\n';
        out_.flush();
    }

    std::vector<std::string> header_;
    std::ofstream out_;
};

class FrameCsv {
public:
    FrameCsv() = default;
    FrameCsv(const std::string& path, std::vector<std::string> extra_columns) : extras_(std::move(extra_columns)) {
        std::vector<std::string> h = frame_csv_columns();
        h.insert(h.end(), extras_.begin(), extras_.end());
        writer_ = CsvWriter(path, h);
    }
    FrameCsv(FrameCsv&&) = default;
    FrameCsv& operator=(FrameCsv&&) = default;

    const std::vector<std::string>& extra_columns() const { return extras_; }

    void write(const FrameRow& r) {
        if (r.extras.size() != extras_.size()) throw Error("frame row extras do not match the csv header");
        std::vector<std::string> f{std::to_string(r.frame), r.mode, std::to_string(r.spp), csv_number(r.mrse),
                                   csv_number(r.rbias2), csv_number(r.rvar), csv_number(r.avg_path_length),
                                   csv_number(r.ir_bounces), csv_number(r.train_loss)};
        for (double e : r.extras) f.push_back(csv_number(e));
        writer_.row(f);
    }

private:
    std::vector<std::string> extras_;
    CsvWriter writer_;
};

// Reads a CSV without quoted newlines back into rows of strings (tests, scripts).
inline std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read '" + path + "'");
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> f;
        std::string cur;
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            char c = line[i];
            if (quoted) {
                if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else if (c == '"') {
                    quoted = false;
                } else {
                    cur += c;
                }
            } else if (c == '"') {
                quoted = true;
            } else if (c == ',') {
                f.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        f.push_back(cur);
        rows.push_back(std::move(f));
    }
    return rows;
}

}  // namespace tlmc
