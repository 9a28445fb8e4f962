#pragma once

// Line-oriented scenario files:
//
//   nodes N
//   gateways i j k ...        (optional)
//   link FROM TO T P          (capacity T, success probability P)
//   flow SRC RATE DEADLINE
//
// '#' starts a comment. Link and flow ids follow file order.

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "dsr/model.hpp"

namespace dsr {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::vector<std::string> split_words(const std::string& line) {
  std::vector<std::string> words;
  std::istringstream in(line.substr(0, line.find('#')));
  for (std::string w; in >> w;) words.push_back(w);
  return words;
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace detail

inline Topology parse_scenario(std::istream& in, const std::string& name = "<input>") {
  Topology t;
  bool have_nodes = false;
  int line_no = 0;
  const auto fail = [&](const std::string& why) -> ParseError {
    return ParseError(name + ":" + std::to_string(line_no) + ": " + why);
  };
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const auto w = detail::split_words(line);
    if (w.empty()) continue;
    const std::string& kw = w[0];
    if (kw == "nodes") {
      if (have_nodes) throw fail("duplicate 'nodes' line");
      if (w.size() != 2 || !detail::parse_number(w[1], t.n_nodes)) throw fail("expected 'nodes N'");
      if (t.n_nodes < 1 || t.n_nodes > kMaxNodes) throw fail("node count must be in [1, 64]");
      have_nodes = true;
      continue;
    }
    if (!have_nodes) throw fail("expected 'nodes N' before '" + kw + "'");
    if (kw == "gateways") {
      for (std::size_t i = 1; i < w.size(); ++i) {
        NodeId g = 0;
        if (!detail::parse_number(w[i], g) || g < 0 || g >= t.n_nodes) throw fail("expected 'gateways i j ...' with node ids");
        t.gateways = t.gateways.with(g);
      }
    } else if (kw == "link") {
      Link l;
      l.id = static_cast<int>(t.links.size());
      if (w.size() != 5 || !detail::parse_number(w[1], l.tx) || !detail::parse_number(w[2], l.rx) ||
          !detail::parse_number(w[3], l.capacity) || !detail::parse_number(w[4], l.reliability)) {
        throw fail("expected 'link FROM TO T P'");
      }
      t.links.push_back(l);
    } else if (kw == "flow") {
      Flow f;
      f.id = static_cast<int>(t.flows.size());
      if (w.size() != 4 || !detail::parse_number(w[1], f.source) || !detail::parse_number(w[2], f.arrival_rate) ||
          !detail::parse_number(w[3], f.deadline)) {
        throw fail("expected 'flow SRC RATE DEADLINE'");
      }
      t.flows.push_back(f);
    } else {
      throw fail("unknown keyword '" + kw + "' (expected nodes, gateways, link or flow)");
    }
  }
  if (!have_nodes) throw ParseError(name + ": empty scenario, expected 'nodes N'");
  const auto diags = validate_topology(t);
  if (!diags.empty()) {
    std::string msg = name + ": invalid topology";
    for (const auto& d : diags) msg += "\n  " + d;
    throw ParseError(msg);
  }
  return t;
}

inline Topology load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open");
  return parse_scenario(in, path);
}

inline std::string serialize_scenario(const Topology& t) {
  std::ostringstream out;
  out << "nodes " << t.n_nodes << "\n";
  if (!t.gateways.empty()) {
    out << "gateways";
    for (NodeId g : t.gateways) out << ' ' << g;
    out << "\n";
  }
  for (const auto& l : t.links)
    out << "link " << l.tx << ' ' << l.rx << ' ' << l.capacity << ' ' << detail::format_double(l.reliability) << "\n";
  for (const auto& f : t.flows)
    out << "flow " << f.source << ' ' << detail::format_double(f.arrival_rate) << ' ' << f.deadline << "\n";
  return out.str();
}

}  // namespace dsr
