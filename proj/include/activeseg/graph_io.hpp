#pragma once

#include <filesystem>
#include <iosfwd>
#include <string_view>

#include "activeseg/region_graph.hpp"

namespace activeseg {

enum class GraphFormat { jsonl, csv };

/// "jsonl" / "csv"; throws std::invalid_argument otherwise.
GraphFormat parse_graph_format(std::string_view name);
/// Picks the format from the file extension (.csv, otherwise jsonl).
GraphFormat format_from_path(const std::filesystem::path& path);

// JSONL: one object per line.
//   {"type":"header","feature_dim":d,"n_nodes":N}
//   {"type":"node","id":0,"size":12,"true_body":3}
//   {"type":"edge","id":0,"u":0,"v":1,"x":[...],"true_label":1}
// CSV: one record per row, optional fields left empty.
//   header,<feature_dim>,<n_nodes>
//   node,<id>,<size>,<true_body>
//   edge,<id>,<u>,<v>,<true_label>,<x_0>,...,<x_{d-1}>
// Lines that are blank or start with '#' are skipped in both formats.

RegionGraph read_region_graph(std::istream& in, GraphFormat format);
RegionGraph load_region_graph(const std::filesystem::path& path, GraphFormat format);
RegionGraph load_region_graph(const std::filesystem::path& path);

/// Writes doubles in shortest round-trip form so a reload is bit-identical.
void write_region_graph(std::ostream& out, const RegionGraph& graph, GraphFormat format);
void save_region_graph(const std::filesystem::path& path, const RegionGraph& graph, GraphFormat format);

}  // namespace activeseg
