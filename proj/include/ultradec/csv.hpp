// csv.hpp — Output tables. Numbers are serialised with 17 significant digits
// so reruns with the same seed produce byte-identical files.

#pragma once

#include <string>
#include <vector>

#include "ultradec/lindblad.hpp"

namespace ultradec {

std::string format_g17(double x);

// Population table of a state timeline: columns t, p_0..p_M, maxcoh, where
// maxcoh is the largest off-diagonal block norm at that time.
void write_timeline_csv(const std::string& path, const Timeline& timeline);

// Comma-separated table with one header row; trailing comment lines (if any)
// are written last, prefixed with '#'.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows,
               const std::vector<std::string>& trailing_comments = {});

// The same table as whitespace-separated plot data with a '#' header line.
void write_plot_data(const std::string& path, const std::vector<std::string>& header,
                     const std::vector<std::vector<std::string>>& rows);

}  // namespace ultradec
