#include "activeseg/graph_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace activeseg {

namespace {

using nlohmann::json;

struct Header {
  std::size_t feature_dim = 0;
  std::size_t n_nodes = 0;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool skip_line(const std::string& s) { return s.empty() || s.front() == '#'; }

RegionGraph finish(Header header, bool have_header, std::vector<SuperpixelNode> nodes,
                   std::vector<BoundarySample> edges, std::size_t last_line) {
  if (!have_header) throw ParseError(last_line, "missing header record");
  if (nodes.size() != header.n_nodes)
    throw ValidationError("header declares " + std::to_string(header.n_nodes) + " nodes, file has " +
                          std::to_string(nodes.size()));
  for (const auto& e : edges)
    if (e.x.size() != header.feature_dim)
      throw DimensionMismatch("edge " + std::to_string(e.id) + " has " + std::to_string(e.x.size()) +
                              " features, header declares " + std::to_string(header.feature_dim));
  return RegionGraph(std::move(nodes), std::move(edges));
}

RegionGraph read_jsonl(std::istream& in) {
  Header header;
  bool have_header = false;
  std::vector<SuperpixelNode> nodes;
  std::vector<BoundarySample> edges;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (skip_line(line)) continue;
    try {
      const json obj = json::parse(line);
      const std::string type = obj.at("type").get<std::string>();
      if (type == "header") {
        header.feature_dim = obj.at("feature_dim").get<std::size_t>();
        header.n_nodes = obj.at("n_nodes").get<std::size_t>();
        have_header = true;
      } else if (type == "node") {
        SuperpixelNode s;
        s.id = obj.at("id").get<NodeId>();
        s.size = obj.value("size", std::int64_t{1});
        if (obj.contains("true_body") && !obj["true_body"].is_null()) s.true_body = obj["true_body"].get<std::int64_t>();
        nodes.push_back(s);
      } else if (type == "edge") {
        BoundarySample e;
        e.id = obj.at("id").get<EdgeId>();
        e.u = obj.at("u").get<NodeId>();
        e.v = obj.at("v").get<NodeId>();
        e.x = obj.at("x").get<std::vector<double>>();
        if (obj.contains("true_label") && !obj["true_label"].is_null()) e.true_label = obj["true_label"].get<Label>();
        if (have_header && e.x.size() != header.feature_dim)
          throw DimensionMismatch("line " + std::to_string(line_no) + ": edge " + std::to_string(e.id) + " has " +
                                  std::to_string(e.x.size()) + " features, header declares " +
                                  std::to_string(header.feature_dim));
        edges.push_back(std::move(e));
      } else {
        throw ParseError(line_no, "unknown record type '" + type + "'");
      }
    } catch (const json::exception& ex) {
      throw ParseError(line_no, ex.what());
    }
  }
  return finish(header, have_header, std::move(nodes), std::move(edges), line_no);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

template <class T>
T parse_number(const std::string& s, std::size_t line_no) {
  T value{};
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) throw ParseError(line_no, "bad number '" + s + "'");
  return value;
}

RegionGraph read_csv(std::istream& in) {
  Header header;
  bool have_header = false;
  std::vector<SuperpixelNode> nodes;
  std::vector<BoundarySample> edges;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (skip_line(line)) continue;
    const auto f = split_csv(line);
    const std::string& type = f[0];
    if (type == "header") {
      if (f.size() != 3) throw ParseError(line_no, "header needs feature_dim,n_nodes");
      header.feature_dim = parse_number<std::size_t>(f[1], line_no);
      header.n_nodes = parse_number<std::size_t>(f[2], line_no);
      have_header = true;
    } else if (type == "node") {
      if (f.size() != 4) throw ParseError(line_no, "node needs id,size,true_body");
      SuperpixelNode s;
      s.id = parse_number<NodeId>(f[1], line_no);
      s.size = f[2].empty() ? 1 : parse_number<std::int64_t>(f[2], line_no);
      if (!f[3].empty()) s.true_body = parse_number<std::int64_t>(f[3], line_no);
      nodes.push_back(s);
    } else if (type == "edge") {
      if (f.size() < 6) throw ParseError(line_no, "edge needs id,u,v,true_label and at least one feature");
      BoundarySample e;
      e.id = parse_number<EdgeId>(f[1], line_no);
      e.u = parse_number<NodeId>(f[2], line_no);
      e.v = parse_number<NodeId>(f[3], line_no);
      if (!f[4].empty()) e.true_label = parse_number<int>(f[4], line_no);
      for (std::size_t k = 5; k < f.size(); ++k) e.x.push_back(parse_number<double>(f[k], line_no));
      if (have_header && e.x.size() != header.feature_dim)
        throw DimensionMismatch("line " + std::to_string(line_no) + ": edge " + std::to_string(e.id) + " has " +
                                std::to_string(e.x.size()) + " features, header declares " +
                                std::to_string(header.feature_dim));
      edges.push_back(std::move(e));
    } else {
      throw ParseError(line_no, "unknown record type '" + type + "'");
    }
  }
  return finish(header, have_header, std::move(nodes), std::move(edges), line_no);
}

void append_double(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

}  // namespace

GraphFormat parse_graph_format(std::string_view name) {
  if (name == "jsonl") return GraphFormat::jsonl;
  if (name == "csv") return GraphFormat::csv;
  throw std::invalid_argument("unknown graph format '" + std::string(name) + "'");
}

GraphFormat format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? GraphFormat::csv : GraphFormat::jsonl;
}

RegionGraph read_region_graph(std::istream& in, GraphFormat format) {
  return format == GraphFormat::jsonl ? read_jsonl(in) : read_csv(in);
}

RegionGraph load_region_graph(const std::filesystem::path& path, GraphFormat format) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_region_graph(in, format);
}

RegionGraph load_region_graph(const std::filesystem::path& path) {
  return load_region_graph(path, format_from_path(path));
}

void write_region_graph(std::ostream& out, const RegionGraph& graph, GraphFormat format) {
  std::string line;
  if (format == GraphFormat::jsonl) {
    out << R"({"type":"header","feature_dim":)" << graph.feature_dim() << R"(,"n_nodes":)" << graph.node_count()
        << "}\n";
    for (const auto& s : graph.nodes()) {
      out << R"({"type":"node","id":)" << s.id << R"(,"size":)" << s.size;
      if (s.true_body) out << R"(,"true_body":)" << *s.true_body;
      out << "}\n";
    }
    for (const auto& e : graph.edges()) {
      line.clear();
      line += R"({"type":"edge","id":)" + std::to_string(e.id) + R"(,"u":)" + std::to_string(e.u) + R"(,"v":)" +
              std::to_string(e.v) + R"(,"x":[)";
      for (std::size_t k = 0; k < e.x.size(); ++k) {
        if (k) line += ',';
        append_double(line, e.x[k]);
      }
      line += ']';
      if (e.true_label) line += R"(,"true_label":)" + std::to_string(*e.true_label);
      line += "}\n";
      out << line;
    }
  } else {
    out << "header," << graph.feature_dim() << ',' << graph.node_count() << '\n';
    for (const auto& s : graph.nodes()) {
      out << "node," << s.id << ',' << s.size << ',';
      if (s.true_body) out << *s.true_body;
      out << '\n';
    }
    for (const auto& e : graph.edges()) {
      line = "edge," + std::to_string(e.id) + ',' + std::to_string(e.u) + ',' + std::to_string(e.v) + ',';
      if (e.true_label) line += std::to_string(*e.true_label);
      for (double f : e.x) {
        line += ',';
        append_double(line, f);
      }
      line += '\n';
      out << line;
    }
  }
}

void save_region_graph(const std::filesystem::path& path, const RegionGraph& graph, GraphFormat format) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_region_graph(out, graph, format);
}

}  // namespace activeseg
