#include "nbrenc/errors.hpp"
#include "nbrenc/neighbors/neighborhood.hpp"
#include "nbrenc/random.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <string>

namespace nbrenc::neighbors {

NeighborAssignment side_info_neighbors(const SideInfoGroups& groups, std::size_t n,
                                       std::uint64_t seed) {
  NeighborAssignment out;
  out.slot_count = 1;
  out.entries.resize(n);
  std::set<std::size_t> seen;
  for (const auto& [id, members] : groups.groups) {
    for (std::size_t m : members) {
      if (m >= n) throw InputError("group '" + id + "' lists sample " + std::to_string(m) + " of " + std::to_string(n));
      if (!seen.insert(m).second) throw InputError("sample " + std::to_string(m) + " belongs to more than one group");
    }
  }
  Rng rng(seed);
  for (const auto& [id, members] : groups.groups) {
    if (members.size() < 2) continue;
    const std::size_t rep_pos = uniform_index(rng, members.size());
    const std::size_t rep = members[rep_pos];
    for (std::size_t pos = 0; pos < members.size(); ++pos) {
      if (pos != rep_pos) out.entries[members[pos]].push_back(NeighborEntry{rep, 0, kNoDistance});
    }
    std::size_t other = uniform_index(rng, members.size() - 1);
    if (other >= rep_pos) ++other;
    out.entries[rep].push_back(NeighborEntry{members[other], 0, kNoDistance});
  }
  return out;
}

SideInfoGroups load_side_info_groups(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open group file " + path.string());
  SideInfoGroups out;
  std::set<std::size_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) throw ParseError("expected group_id<TAB>sample_index", line_no);
    const std::string group = line.substr(0, tab);
    std::string index_text = line.substr(tab + 1);
    while (!index_text.empty() && (index_text.back() == ' ' || index_text.back() == '\t')) index_text.pop_back();
    std::size_t index = 0;
    const auto* first = index_text.data();
    const auto* last = first + index_text.size();
    auto [ptr, ec] = std::from_chars(first, last, index);
    if (ec != std::errc() || ptr != last || index_text.empty()) {
      throw ParseError("bad sample index '" + index_text + "'", line_no);
    }
    if (!seen.insert(index).second) {
      throw ParseError("sample " + std::to_string(index) + " appears in more than one membership", line_no);
    }
    out.groups[group].push_back(index);
  }
  if (in.bad()) throw IoError("read failure on " + path.string());
  return out;
}

}  // namespace nbrenc::neighbors
