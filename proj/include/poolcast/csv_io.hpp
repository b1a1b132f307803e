#pragma once

// Hourly market CSV: one row per hour, `timestamp,price,<exogenous...>`.
// Timestamps are local market time, ISO-8601 (`YYYY-MM-DDTHH:MM[:SS]`, a space
// is accepted in place of `T`). The spring DST hour is simply absent and the
// autumn DST hour appears twice; both are repaired on load.

#include "poolcast/error.hpp"
#include "poolcast/frame.hpp"
#include "poolcast/text.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace poolcast {

struct Timestamp {
    Date date{};
    int hour = 0;

    friend bool operator==(const Timestamp&, const Timestamp&) = default;
    friend auto operator<=>(const Timestamp& a, const Timestamp& b) {
        if (auto c = a.date <=> b.date; c != 0) return c;
        return a.hour <=> b.hour;
    }
};

inline Timestamp parse_timestamp(std::string_view s, std::size_t line) {
    const std::string str = std::string(trim(s));
    int y = 0, hh = 0, mm = 0;
    unsigned mo = 0, d = 0;
    char sep = 0;
    const int got = std::sscanf(str.c_str(), "%d-%u-%u%c%d:%d", &y, &mo, &d, &sep, &hh, &mm);
    if (got != 6 || (sep != 'T' && sep != ' ') || hh < 0 || hh > 23 || mm != 0) {
        throw ParseError("unparseable timestamp '" + str + "'", line);
    }
    try {
        return {make_date(y, mo, d), hh};
    } catch (const ParseError&) {
        throw ParseError("invalid date in timestamp '" + str + "'", line);
    }
}

namespace detail {

inline Series series_from_column(std::string_view name, std::size_t line) {
    for (Series s : {Series::Price, Series::Load, Series::ZonalLoad, Series::Wind, Series::Solar}) {
        if (column_name(s) == name) return s;
    }
    throw SchemaError("line " + std::to_string(line) + ": unknown column '" + std::string(name) + "'");
}

}  // namespace detail

/// Parses and repairs a market CSV from a stream.
inline HourlyFrame read_csv(std::istream& in, Market market) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ParseError("empty file", 1);
    ++line_no;
    const auto header = split_csv(line);
    if (header.empty() || trim(header[0]) != "timestamp") {
        throw SchemaError("header must start with 'timestamp'");
    }

    std::vector<Series> columns;
    for (std::size_t c = 1; c < header.size(); ++c) {
        const Series s = detail::series_from_column(trim(header[c]), line_no);
        if (std::find(columns.begin(), columns.end(), s) != columns.end()) {
            throw SchemaError("duplicate column '" + std::string(trim(header[c])) + "'");
        }
        columns.push_back(s);
    }
    std::vector<Series> required = exogenous_schema(market);
    required.insert(required.begin(), Series::Price);
    for (Series s : columns) {
        if (std::find(required.begin(), required.end(), s) == required.end()) {
            throw SchemaError("column '" + std::string(column_name(s)) + "' is not part of the " +
                              std::string(to_string(market)) + " schema");
        }
    }
    for (Series s : required) {
        if (std::find(columns.begin(), columns.end(), s) == columns.end()) {
            throw SchemaError("missing column '" + std::string(column_name(s)) + "' required by market " +
                              std::string(to_string(market)));
        }
    }

    struct Row {
        Timestamp ts;
        std::vector<double> values;
    };
    std::vector<Row> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto fields = split_csv(line);
        if (fields.size() != header.size()) {
            throw ParseError("expected " + std::to_string(header.size()) + " fields, got " +
                                 std::to_string(fields.size()),
                             line_no);
        }
        Row row{parse_timestamp(fields[0], line_no), {}};
        if (!rows.empty() && row.ts < rows.back().ts) throw ParseError("rows are not sorted by timestamp", line_no);
        row.values.reserve(columns.size());
        for (std::size_t c = 1; c < fields.size(); ++c) {
            const auto v = parse_optional_double(fields[c]);
            if (!v) throw ParseError("malformed number '" + std::string(fields[c]) + "'", line_no);
            row.values.push_back(*v);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError("no data rows", line_no);

    HourlyFrame frame;
    frame.market = market;
    frame.start_date = rows.front().ts.date;
    const int n_days = static_cast<int>((rows.back().ts.date - frame.start_date).count()) + 1;

    for (std::size_t c = 0; c < columns.size(); ++c) {
        std::vector<RawObservation> raw;
        raw.reserve(rows.size());
        for (const auto& r : rows) {
            raw.push_back({static_cast<int>((r.ts.date - frame.start_date).count()), r.ts.hour, r.values[c]});
        }
        auto repaired = repair_hours(raw, n_days, columns[c]);
        for (auto& e : repaired.log.entries) frame.repairs.entries.push_back(std::move(e));
        if (columns[c] == Series::Price) {
            frame.price = std::move(repaired.values);
        } else {
            frame.exog.emplace(columns[c], std::move(repaired.values));
        }
    }
    frame.validate();
    return frame;
}

inline HourlyFrame load_csv(const std::string& path, Market market) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    return read_csv(in, market);
}

/// Writes the dense frame with fixed 6-decimal values.
inline void write_csv(std::ostream& out, const HourlyFrame& frame) {
    const auto schema = exogenous_schema(frame.market);
    out << "timestamp,price";
    for (Series s : schema) out << ',' << column_name(s);
    out << '\n';
    std::string buf;
    for (int d = 0; d < frame.n_days(); ++d) {
        const std::string date = format_date(frame.date_of(d));
        for (int h = 0; h < kHoursPerDay; ++h) {
            buf.clear();
            buf += date;
            buf += 'T';
            buf += static_cast<char>('0' + h / 10);
            buf += static_cast<char>('0' + h % 10);
            buf += ":00,";
            append_fixed(buf, frame.price(d, h));
            for (Series s : schema) {
                buf += ',';
                append_fixed(buf, frame.exog.at(s)(d, h));
            }
            buf += '\n';
            out << buf;
        }
    }
}

inline void write_csv(const std::string& path, const HourlyFrame& frame) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write '" + path + "'");
    write_csv(out, frame);
}

}  // namespace poolcast
