#include "ultradec/csv.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace ultradec {

std::string format_g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace {

void write_table(const std::string& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows, const char* sep,
                 const char* header_prefix, const std::vector<std::string>& trailing) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open output file " + path);

    out << header_prefix;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i > 0) out << sep;
        out << header[i];
    }
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i > 0) out << sep;
            out << row[i];
        }
        out << '\n';
    }
    for (const auto& line : trailing) out << "# " << line << '\n';
    if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows,
               const std::vector<std::string>& trailing_comments) {
    write_table(path, header, rows, ",", "", trailing_comments);
}

void write_plot_data(const std::string& path, const std::vector<std::string>& header,
                     const std::vector<std::vector<std::string>>& rows) {
    write_table(path, header, rows, " ", "# ", {});
}

void write_timeline_csv(const std::string& path, const Timeline& timeline) {
    if (timeline.states.empty()) throw std::invalid_argument("write_timeline_csv: empty timeline");
    const int levels = timeline.states.front().levels();

    std::vector<std::string> header = {"t"};
    for (int mu = 0; mu < levels; ++mu) header.push_back("p_" + std::to_string(mu));
    header.push_back("maxcoh");

    std::vector<std::vector<std::string>> rows;
    for (std::size_t k = 0; k < timeline.states.size(); ++k) {
        std::vector<std::string> row = {format_g17(timeline.times[k])};
        const Eigen::VectorXd p = device_populations(timeline.states[k]);
        for (int mu = 0; mu < levels; ++mu) row.push_back(format_g17(p(mu)));
        row.push_back(format_g17(coherence_norms(timeline.states[k]).maxCoeff()));
        rows.push_back(std::move(row));
    }
    write_csv(path, header, rows);
}

}  // namespace ultradec
