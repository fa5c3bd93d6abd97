#include "numalab/index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "numalab/error.hpp"

namespace numalab {

namespace {

std::uint64_t search_cost(std::size_t n) { return std::bit_width(n) == 0 ? 1 : std::bit_width(n); }

std::uint64_t record_value(std::uint64_t key) { return key * 0x9e3779b1ULL + 1; }

// Even split of n items into ceil(n / fill) groups.
std::vector<std::size_t> group_sizes(std::size_t n, std::size_t fill) {
  const std::size_t groups = (n + fill - 1) / fill;
  std::vector<std::size_t> sizes(groups, n / groups);
  for (std::size_t i = 0; i < n % groups; ++i) ++sizes[i];
  return sizes;
}

}  // namespace

std::size_t AccessTrace::writes() const {
  return static_cast<std::size_t>(
      std::count_if(accesses.begin(), accesses.end(), [](const Access& a) { return a.kind == AccessKind::write; }));
}

const IndexSlice& SlicedIndex::slice(SliceId id) const {
  if (id >= slices_.size()) throw Error("slice id " + std::to_string(id) + " out of range");
  return slices_[id];
}

void SlicedIndex::assign_core(SliceId id, std::optional<CoreId> core) {
  if (id >= slices_.size()) throw Error("slice id " + std::to_string(id) + " out of range");
  slices_[id].assigned_core = core;
}

SliceId SlicedIndex::slice_of_key(std::uint64_t key) const {
  if (!domain_.contains(key)) throw Error("key " + std::to_string(key) + " outside the index domain");
  const auto it = std::upper_bound(slices_.begin(), slices_.end(), key,
                                   [](std::uint64_t k, const IndexSlice& s) { return k < s.range.lo; });
  return static_cast<SliceId>(std::distance(slices_.begin(), it) - 1);
}

std::vector<SliceId> SlicedIndex::slices_of(const Query& q) const {
  if (q.kind != QueryKind::scan) return {slice_of_key(q.key)};
  if (!spatial()) {
    const std::uint64_t hi = std::min(q.key + std::max<std::uint64_t>(q.scan_length, 1), domain_.hi);
    const SliceId a = slice_of_key(q.key);
    const SliceId b = slice_of_key(hi - 1);
    std::vector<SliceId> out;
    for (SliceId s = a; s <= b; ++s) out.push_back(s);
    return out;
  }
  std::vector<bool> hit(slices_.size(), false);
  spatial_slices(q.rect(), kHilbertOrder, 0, 0, hit);
  std::vector<SliceId> out;
  for (SliceId s = 0; s < hit.size(); ++s) {
    if (hit[s]) out.push_back(s);
  }
  return out;
}

// An aligned block of side 2^level covers one contiguous run of 4^level
// Hilbert positions, so a block that lies inside one slice settles the whole
// block; only blocks cut by both the rectangle edge and a slice boundary recurse.
void SlicedIndex::spatial_slices(const Rect& rect, std::uint32_t level, std::uint32_t x0, std::uint32_t y0,
                                 std::vector<bool>& hit) const {
  const std::uint64_t side = 1ULL << level;
  const Rect block{x0, y0, static_cast<std::uint32_t>(std::min<std::uint64_t>(x0 + side, kSpatialSide)),
                   static_cast<std::uint32_t>(std::min<std::uint64_t>(y0 + side, kSpatialSide))};
  if (!rect.intersects(block)) return;
  const std::uint64_t span = side * side;
  const std::uint64_t first = hilbert_index(Point2{x0, y0}) & ~(span - 1);
  const SliceId a = slice_of_key(first);
  const SliceId b = slice_of_key(first + span - 1);
  if (a == b || rect.covers(block)) {
    for (SliceId s = a; s <= b; ++s) hit[s] = true;
    return;
  }
  const auto half = static_cast<std::uint32_t>(side / 2);
  spatial_slices(rect, level - 1, x0, y0, hit);
  spatial_slices(rect, level - 1, x0 + half, y0, hit);
  spatial_slices(rect, level - 1, x0, y0 + half, hit);
  spatial_slices(rect, level - 1, x0 + half, y0 + half, hit);
}

IndexNodeId SlicedIndex::allocate(bool leaf, NodeId home) {
  IndexNode n;
  n.leaf = leaf;
  n.home = home;
  nodes_.push_back(std::move(n));
  return static_cast<IndexNodeId>(nodes_.size() - 1);
}

NodeId SlicedIndex::home_for_new_node(std::uint64_t key, NodeId exec_node) const {
  switch (placement_) {
    case PlacementMode::first_touch: return exec_node;
    case PlacementMode::interleave: return static_cast<NodeId>(nodes_.size() % node_count_);
    case PlacementMode::slice_home: return slices_[slice_of_key(key)].home_node;
  }
  return exec_node;
}

Rect SlicedIndex::node_mbr(IndexNodeId id) const {
  const IndexNode& n = nodes_[id];
  Rect r{};
  if (n.leaf) {
    for (const auto& p : n.points) r.expand(p);
  } else {
    for (const auto& c : n.child_mbr) r.expand(c);
  }
  return r;
}

void SlicedIndex::touch(AccessTrace& trace, IndexNodeId id, AccessKind kind, std::uint32_t bytes,
                        bool sequential) const {
  trace.accesses.push_back(Access{id, nodes_[id].home, kind, bytes, sequential});
}

// A binary search over n entries touches about log2(n) lines, less the last
// probes that land in an already loaded line.
std::uint32_t SlicedIndex::probe_bytes(std::size_t entries) const {
  const std::size_t per_line = std::max<std::size_t>(1, params_.line_bytes / params_.entry_bytes);
  const std::size_t lines_in_node = std::max<std::size_t>(1, (entries + per_line - 1) / per_line);
  const std::size_t probes = std::bit_width(entries) > std::bit_width(per_line)
                                 ? std::bit_width(entries) - std::bit_width(per_line) + 1
                                 : 1;
  return static_cast<std::uint32_t>(std::min(probes, lines_in_node) * params_.line_bytes);
}

std::uint32_t SlicedIndex::scan_bytes(std::size_t entries) const {
  const std::size_t lines = std::max<std::size_t>(1, (entries * params_.entry_bytes + params_.line_bytes - 1) / params_.line_bytes);
  return static_cast<std::uint32_t>(lines * params_.line_bytes);
}

std::uint32_t SlicedIndex::child_slot(const IndexNode& inner, std::uint64_t key) const {
  return static_cast<std::uint32_t>(std::upper_bound(inner.keys.begin(), inner.keys.end(), key) - inner.keys.begin());
}

IndexNodeId SlicedIndex::descend(std::uint64_t key, AccessTrace& trace, std::vector<PathEntry>* path) const {
  IndexNodeId cur = root_;
  while (!nodes_[cur].leaf) {
    const IndexNode& n = nodes_[cur];
    touch(trace, cur, AccessKind::read, probe_bytes(n.children.size()), false);
    trace.comparisons += search_cost(n.keys.size());
    const std::uint32_t slot = child_slot(n, key);
    if (path != nullptr) path->push_back(PathEntry{cur, slot});
    cur = n.children[slot];
  }
  return cur;
}

void SlicedIndex::lookup_ordered(std::uint64_t key, AccessTrace& trace) const {
  const IndexNodeId leaf = descend(key, trace, nullptr);
  const IndexNode& n = nodes_[leaf];
  touch(trace, leaf, AccessKind::read, probe_bytes(n.keys.size()), false);
  trace.comparisons += search_cost(n.keys.size());
  trace.result_size = std::binary_search(n.keys.begin(), n.keys.end(), key) ? 1 : 0;
}

void SlicedIndex::scan_ordered(std::uint64_t lo, std::uint64_t hi, AccessTrace& trace) const {
  IndexNodeId leaf = descend(lo, trace, nullptr);
  bool first = true;
  while (leaf != kNoIndexNode) {
    const IndexNode& n = nodes_[leaf];
    auto begin = first ? std::lower_bound(n.keys.begin(), n.keys.end(), lo) : n.keys.begin();
    auto end = std::lower_bound(begin, n.keys.end(), hi);
    if (first) trace.comparisons += search_cost(n.keys.size());
    const auto touched = static_cast<std::uint64_t>(end - begin) + (end != n.keys.end() ? 1 : 0);
    trace.comparisons += touched;
    trace.result_size += static_cast<std::uint64_t>(end - begin);
    const std::uint32_t search = first ? probe_bytes(n.keys.size()) : 0;
    touch(trace, leaf, AccessKind::read, search + scan_bytes(static_cast<std::size_t>(touched)), true);
    if (end != n.keys.end() || n.keys.empty()) break;
    leaf = n.next;
    first = false;
  }
}

void SlicedIndex::search_spatial(const Rect& rect, bool exact_point, Point2 point, AccessTrace& trace) const {
  std::vector<IndexNodeId> stack{root_};
  while (!stack.empty()) {
    const IndexNodeId id = stack.back();
    stack.pop_back();
    const IndexNode& n = nodes_[id];
    if (n.leaf) {
      std::uint64_t hits = 0;
      for (const auto& p : n.points) {
        if (exact_point ? p == point : rect.contains(p)) ++hits;
      }
      trace.comparisons += n.points.size();
      trace.result_size += hits;
      touch(trace, id, AccessKind::read, scan_bytes(n.points.size()), true);
      continue;
    }
    touch(trace, id, AccessKind::read, scan_bytes(n.children.size()), true);
    trace.comparisons += n.children.size();
    for (std::size_t i = n.children.size(); i-- > 0;) {
      if (n.child_mbr[i].intersects(rect)) stack.push_back(n.children[i]);
    }
  }
}

void SlicedIndex::insert(const Record& rec, NodeId exec_node, AccessTrace& trace) {
  std::vector<PathEntry> path;
  const IndexNodeId leaf = descend(rec.key, trace, &path);
  {
    IndexNode& n = nodes_[leaf];
    trace.comparisons += search_cost(n.keys.size());
    const auto it = std::lower_bound(n.keys.begin(), n.keys.end(), rec.key);
    const auto pos = static_cast<std::size_t>(it - n.keys.begin());
    trace.result_size = 1;
    if (it != n.keys.end() && *it == rec.key) {
      n.values[pos] = rec.value;
      touch(trace, leaf, AccessKind::write, probe_bytes(n.keys.size()), false);
      return;
    }
    n.keys.insert(it, rec.key);
    n.values.insert(n.values.begin() + static_cast<std::ptrdiff_t>(pos), rec.value);
    if (spatial()) n.points.insert(n.points.begin() + static_cast<std::ptrdiff_t>(pos), rec.point);
    ++records_;
    touch(trace, leaf, AccessKind::write, probe_bytes(n.keys.size()), false);
  }
  if (spatial()) {
    for (std::size_t i = path.size(); i-- > 0;) {
      Rect& r = nodes_[path[i].node].child_mbr[path[i].child];
      const Rect before = r;
      r.expand(rec.point);
      if (r == before) break;
      touch(trace, path[i].node, AccessKind::write, params_.line_bytes, false);
    }
  }
  if (nodes_[leaf].keys.size() > leaf_max()) split_upwards(path, leaf, exec_node, trace);
}

void SlicedIndex::split_upwards(std::vector<PathEntry>& path, IndexNodeId leaf, NodeId exec_node,
                                AccessTrace& trace) {
  IndexNodeId cur = leaf;
  while (true) {
    const bool is_leaf = nodes_[cur].leaf;
    const std::size_t size = is_leaf ? nodes_[cur].keys.size() : nodes_[cur].children.size();
    if (size <= (is_leaf ? leaf_max() : inner_max())) return;

    const std::size_t mid = size / 2;
    const std::uint64_t sep_key = is_leaf ? nodes_[cur].keys[mid] : nodes_[cur].keys[mid - 1];
    const IndexNodeId right = allocate(is_leaf, home_for_new_node(sep_key, exec_node));
    IndexNode& c = nodes_[cur];
    IndexNode& r = nodes_[right];
    const auto cut = static_cast<std::ptrdiff_t>(mid);
    if (is_leaf) {
      r.keys.assign(c.keys.begin() + cut, c.keys.end());
      r.values.assign(c.values.begin() + cut, c.values.end());
      c.keys.resize(mid);
      c.values.resize(mid);
      if (spatial()) {
        r.points.assign(c.points.begin() + cut, c.points.end());
        c.points.resize(mid);
      }
      r.slice = c.slice;
      r.next = c.next;
      c.next = right;
    } else {
      r.children.assign(c.children.begin() + cut, c.children.end());
      r.keys.assign(c.keys.begin() + cut, c.keys.end());
      c.children.resize(mid);
      c.keys.resize(mid - 1);
      if (spatial()) {
        r.child_mbr.assign(c.child_mbr.begin() + cut, c.child_mbr.end());
        c.child_mbr.resize(mid);
      }
    }
    touch(trace, cur, AccessKind::write, scan_bytes(is_leaf ? c.keys.size() : c.children.size()), true);
    touch(trace, right, AccessKind::write, scan_bytes(is_leaf ? r.keys.size() : r.children.size()), true);

    if (path.empty()) {
      const IndexNodeId new_root = allocate(false, home_for_new_node(sep_key, exec_node));
      IndexNode& nr = nodes_[new_root];
      nr.children = {cur, right};
      nr.keys = {sep_key};
      if (spatial()) nr.child_mbr = {node_mbr(cur), node_mbr(right)};
      root_ = new_root;
      touch(trace, new_root, AccessKind::write, params_.line_bytes, false);
      return;
    }
    const PathEntry parent = path.back();
    path.pop_back();
    IndexNode& p = nodes_[parent.node];
    p.children.insert(p.children.begin() + parent.child + 1, right);
    p.keys.insert(p.keys.begin() + parent.child, sep_key);
    if (spatial()) {
      p.child_mbr[parent.child] = node_mbr(cur);
      p.child_mbr.insert(p.child_mbr.begin() + parent.child + 1, node_mbr(right));
    }
    touch(trace, parent.node, AccessKind::write, probe_bytes(p.children.size()), false);
    cur = parent.node;
  }
}

AccessTrace SlicedIndex::execute(const Query& q, NodeId exec_node) {
  AccessTrace trace;
  if (!domain_.contains(q.key)) throw Error("query key " + std::to_string(q.key) + " outside the index domain");
  switch (q.kind) {
    case QueryKind::lookup: lookup_ordered(q.key, trace); break;
    case QueryKind::insert: {
      Record rec{q.key, record_value(q.key), q.point};
      if (spatial()) rec.key = hilbert_index(q.point);
      insert(rec, exec_node, trace);
      break;
    }
    case QueryKind::scan:
      if (spatial()) {
        search_spatial(q.rect(), false, q.point, trace);
      } else {
        scan_ordered(q.key, std::min(q.key + std::max<std::uint64_t>(q.scan_length, 1), domain_.hi), trace);
      }
      break;
  }
  return trace;
}

void SlicedIndex::set_allocation_mode(PlacementMode mode, std::uint32_t node_count, NodeId first_touch_node) {
  if (node_count == 0) throw Error("placement needs at least one node");
  placement_ = mode;
  node_count_ = node_count;
  first_touch_node_ = first_touch_node;
}

void SlicedIndex::apply_placement(PlacementMode mode, std::uint32_t node_count, NodeId first_touch_node,
                                  const std::vector<NodeId>& slice_homes) {
  set_allocation_mode(mode, node_count, first_touch_node);
  switch (mode) {
    case PlacementMode::first_touch:
      for (auto& n : nodes_) n.home = first_touch_node;
      for (auto& s : slices_) s.home_node = first_touch_node;
      return;
    case PlacementMode::interleave:
      for (std::size_t i = 0; i < nodes_.size(); ++i) nodes_[i].home = static_cast<NodeId>(i % node_count);
      for (auto& s : slices_) s.home_node = s.id % node_count;
      return;
    case PlacementMode::slice_home:
      break;
  }
  if (slice_homes.size() != slices_.size()) throw Error("slice placement needs one home per slice");
  for (std::size_t s = 0; s < slices_.size(); ++s) {
    if (slice_homes[s] >= node_count) throw Error("slice home node out of range");
    slices_[s].home_node = slice_homes[s];
  }
  // Post-order: interior nodes follow the slice of their leftmost leaf.
  std::vector<std::pair<IndexNodeId, bool>> stack{{root_, false}};
  while (!stack.empty()) {
    auto [id, expanded] = stack.back();
    stack.pop_back();
    IndexNode& n = nodes_[id];
    if (n.leaf) {
      n.home = slices_[n.slice].home_node;
    } else if (expanded) {
      n.home = nodes_[n.children.front()].home;
    } else {
      stack.emplace_back(id, true);
      for (auto c : n.children) stack.emplace_back(c, false);
    }
  }
}

std::vector<IndexNodeId> SlicedIndex::leaves_of_slice(SliceId id) const {
  const IndexSlice& s = slice(id);
  AccessTrace scratch;
  IndexNodeId leaf = descend(s.range.lo, scratch, nullptr);
  std::vector<IndexNodeId> out;
  while (leaf != kNoIndexNode && nodes_[leaf].slice == id) {
    out.push_back(leaf);
    leaf = nodes_[leaf].next;
  }
  return out;
}

std::vector<MigrationStep> SlicedIndex::plan_migration(SliceId id, NodeId dest, MigrationMode mode,
                                                       std::uint32_t lazy_steps) {
  const IndexSlice& s = slice(id);
  if (s.home_node == dest) {
    const auto leaves = leaves_of_slice(id);
    if (std::all_of(leaves.begin(), leaves.end(), [&](IndexNodeId l) { return nodes_[l].home == dest; })) return {};
  }
  if (mode == MigrationMode::aggressive) {
    slices_[id].home_node = dest;
    return {MigrationStep{id, dest, s.range}};
  }
  if (lazy_steps == 0) throw Error("lazy migration needs at least one step");
  const auto leaves = leaves_of_slice(id);
  const std::size_t count = leaves.size();
  std::vector<MigrationStep> steps;
  for (std::uint32_t g = 0; g < lazy_steps; ++g) {
    const std::size_t first = (g * count + lazy_steps - 1) / lazy_steps;
    const std::size_t last = ((g + 1) * count + lazy_steps - 1) / lazy_steps;
    const std::uint64_t lo = g == 0 ? s.range.lo : (first < count ? nodes_[leaves[first]].keys.front() : s.range.hi);
    const std::uint64_t hi = g + 1 == lazy_steps ? s.range.hi
                             : (last < count ? nodes_[leaves[last]].keys.front() : s.range.hi);
    steps.push_back(MigrationStep{id, dest, KeyRange{lo, std::max(lo, hi)}});
  }
  slices_[id].home_node = dest;
  return steps;
}

AccessTrace SlicedIndex::apply_migration_step(const MigrationStep& step) {
  AccessTrace trace;
  if (step.range.lo < step.range.hi) migrate_subtree(root_, domain_.lo, domain_.hi, step, trace);
  return trace;
}

void SlicedIndex::migrate_subtree(IndexNodeId id, std::uint64_t lo, std::uint64_t hi, const MigrationStep& step,
                                  AccessTrace& trace) {
  if (hi <= step.range.lo || lo >= step.range.hi) return;
  IndexNode& n = nodes_[id];
  const std::size_t entries = n.leaf ? n.keys.size() : n.children.size();
  const std::uint32_t bytes = scan_bytes(entries);
  touch(trace, id, AccessKind::read, bytes, true);
  if (n.leaf) {
    n.home = step.dest;
  } else if (n.migration_epoch != epoch_ || step.slice >= n.migration_slice) {
    n.home = step.dest;
    n.migration_epoch = epoch_;
    n.migration_slice = step.slice;
  }
  touch(trace, id, AccessKind::write, bytes, true);
  if (n.leaf) return;
  const std::size_t c = n.children.size();
  for (std::size_t i = 0; i < c; ++i) {
    const IndexNode& cur = nodes_[id];
    const std::uint64_t clo = i == 0 ? lo : cur.keys[i - 1];
    const std::uint64_t chi = i + 1 == c ? hi : cur.keys[i];
    migrate_subtree(cur.children[i], clo, chi, step, trace);
  }
}

AccessTrace SlicedIndex::migrate_slice(SliceId id, NodeId dest) {
  AccessTrace total;
  for (const auto& step : plan_migration(id, dest, MigrationMode::aggressive)) {
    auto t = apply_migration_step(step);
    total.accesses.insert(total.accesses.end(), t.accesses.begin(), t.accesses.end());
  }
  return total;
}

std::uint32_t SlicedIndex::height() const {
  std::uint32_t h = 1;
  for (IndexNodeId cur = root_; !nodes_[cur].leaf; cur = nodes_[cur].children.front()) ++h;
  return h;
}

std::vector<NodeId> SlicedIndex::home_vector() const {
  std::vector<NodeId> out;
  out.reserve(nodes_.size());
  for (const auto& n : nodes_) out.push_back(n.home);
  return out;
}

std::optional<std::string> SlicedIndex::check_node(IndexNodeId id, std::uint64_t lo, std::uint64_t hi,
                                                   std::uint32_t depth, std::uint32_t leaf_depth,
                                                   std::vector<IndexNodeId>& leaves) const {
  const IndexNode& n = nodes_[id];
  const std::string where = "node " + std::to_string(id) + ": ";
  const bool is_root = id == root_;
  if (!std::is_sorted(n.keys.begin(), n.keys.end()) ||
      std::adjacent_find(n.keys.begin(), n.keys.end()) != n.keys.end()) {
    return where + "keys not strictly ascending";
  }
  if (!n.keys.empty() && (n.keys.front() < lo || n.keys.back() >= hi)) return where + "key outside node range";
  if (n.leaf) {
    if (depth != leaf_depth) return where + "leaf at uneven depth";
    if (n.values.size() != n.keys.size()) return where + "value count mismatch";
    if (n.keys.size() > leaf_max()) return where + "leaf over capacity";
    if (n.slice >= slices_.size()) return where + "leaf without slice";
    const auto& sr = slices_[n.slice].range;
    if (lo < sr.lo || hi > sr.hi) return where + "leaf straddles a slice boundary";
    if (spatial()) {
      if (n.points.size() != n.keys.size()) return where + "point count mismatch";
      for (std::size_t i = 0; i < n.points.size(); ++i) {
        if (hilbert_index(n.points[i]) != n.keys[i]) return where + "point does not match its key";
      }
      if (!is_root && n.keys.size() < params_.rtree_min_fanout) return where + "leaf under minimum fanout";
    }
    if (n.keys.empty() && !is_root) return where + "empty leaf";
    leaves.push_back(id);
    return std::nullopt;
  }
  const std::size_t c = n.children.size();
  if (c == 0 || n.keys.size() + 1 != c) return where + "separator count mismatch";
  if (c > inner_max()) return where + "inner node over capacity";
  if (!is_root && c < 2) return where + "inner node with a single child";
  if (spatial()) {
    if (n.child_mbr.size() != c) return where + "bounding box count mismatch";
    if (!is_root && c < params_.rtree_min_fanout) return where + "inner node under minimum fanout";
  }
  for (std::size_t i = 0; i < c; ++i) {
    const std::uint64_t clo = i == 0 ? lo : n.keys[i - 1];
    const std::uint64_t chi = i + 1 == c ? hi : n.keys[i];
    if (spatial() && !(n.child_mbr[i] == node_mbr(n.children[i]))) return where + "stale child bounding box";
    if (auto err = check_node(n.children[i], clo, chi, depth + 1, leaf_depth, leaves)) return err;
  }
  return std::nullopt;
}

std::optional<std::string> SlicedIndex::check_structure() const {
  if (root_ == kNoIndexNode) return "index has no root";
  std::vector<IndexNodeId> leaves;
  if (auto err = check_node(root_, domain_.lo, domain_.hi, 1, height(), leaves)) return err;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    const IndexNodeId expected = i + 1 < leaves.size() ? leaves[i + 1] : kNoIndexNode;
    if (nodes_[leaves[i]].next != expected) return "leaf chain out of order at node " + std::to_string(leaves[i]);
  }
  std::uint64_t total = 0;
  for (auto l : leaves) total += nodes_[l].keys.size();
  if (total != records_) return "record count mismatch";
  for (std::size_t s = 0; s + 1 < slices_.size(); ++s) {
    if (slices_[s].range.hi != slices_[s + 1].range.lo) return "slice ranges are not contiguous";
  }
  return std::nullopt;
}

SlicedIndex build_index(IndexKind kind, std::vector<Record> records, KeyRange domain, std::uint32_t slice_count,
                        const IndexParams& params) {
  if (slice_count == 0) throw Error("slice count must be positive");
  if (records.empty()) throw Error("degenerate key domain: no records");
  if (records.size() < slice_count) throw Error("more slices than records");
  if (domain.lo >= domain.hi) throw Error("empty index domain");
  if (params.leaf_capacity < 2 || params.inner_capacity < 3) throw Error("node capacities too small");
  if (params.rtree_min_fanout < 1 || params.rtree_min_fanout * 2 > params.rtree_max_fanout + 1 ||
      params.rtree_bulk_fill < params.rtree_min_fanout || params.rtree_bulk_fill > params.rtree_max_fanout) {
    throw Error("inconsistent R-tree fanout parameters");
  }
  if (kind == IndexKind::rtree2d) {
    for (auto& r : records) r.key = hilbert_index(r.point);
  }
  std::sort(records.begin(), records.end(), [](const Record& a, const Record& b) { return a.key < b.key; });
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (i > 0 && records[i].key == records[i - 1].key) {
      throw Error("duplicate record key " + std::to_string(records[i].key));
    }
    if (!domain.contains(records[i].key)) throw Error("record key outside the index domain");
  }

  SlicedIndex idx;
  idx.kind_ = kind;
  idx.params_ = params;
  idx.domain_ = domain;
  idx.records_ = records.size();
  const bool spatial = kind == IndexKind::rtree2d;
  const std::size_t n = records.size();

  std::vector<std::size_t> start(slice_count + 1);
  for (std::uint32_t s = 0; s <= slice_count; ++s) start[s] = s * n / slice_count;
  for (std::uint32_t s = 0; s < slice_count; ++s) {
    IndexSlice sl;
    sl.id = s;
    sl.range.lo = s == 0 ? domain.lo : records[start[s]].key;
    sl.range.hi = s + 1 == slice_count ? domain.hi : records[start[s + 1]].key;
    idx.slices_.push_back(sl);
  }

  const std::size_t leaf_fill =
      spatial ? params.rtree_bulk_fill
              : std::max<std::size_t>(1, static_cast<std::size_t>(params.leaf_capacity * params.bulk_fill));
  const std::size_t inner_fill =
      spatial ? params.rtree_bulk_fill
              : std::max<std::size_t>(2, static_cast<std::size_t>(params.inner_capacity * params.bulk_fill));

  // (node, lower bound of its key range)
  std::vector<std::pair<IndexNodeId, std::uint64_t>> level;
  IndexNodeId prev_leaf = kNoIndexNode;
  for (std::uint32_t s = 0; s < slice_count; ++s) {
    const std::size_t count = start[s + 1] - start[s];
    if (spatial && slice_count > 1 && count < params.rtree_min_fanout) {
      throw Error("slice " + std::to_string(s) + " holds " + std::to_string(count) +
                  " records, fewer than the minimum R-tree fanout");
    }
    std::size_t pos = start[s];
    for (std::size_t size : group_sizes(count, leaf_fill)) {
      const IndexNodeId id = idx.allocate(true, 0);
      IndexNode& leaf = idx.nodes_[id];
      leaf.slice = s;
      for (std::size_t i = pos; i < pos + size; ++i) {
        leaf.keys.push_back(records[i].key);
        leaf.values.push_back(records[i].value);
        if (spatial) leaf.points.push_back(records[i].point);
      }
      if (prev_leaf != kNoIndexNode) idx.nodes_[prev_leaf].next = id;
      prev_leaf = id;
      level.emplace_back(id, pos == start[s] ? idx.slices_[s].range.lo : records[pos].key);
      pos += size;
    }
  }

  while (level.size() > 1) {
    std::vector<std::pair<IndexNodeId, std::uint64_t>> upper;
    std::size_t pos = 0;
    for (std::size_t size : group_sizes(level.size(), inner_fill)) {
      const IndexNodeId id = idx.allocate(false, 0);
      for (std::size_t i = pos; i < pos + size; ++i) {
        IndexNode& inner = idx.nodes_[id];
        inner.children.push_back(level[i].first);
        if (i > pos) inner.keys.push_back(level[i].second);
        if (spatial) {
          const Rect mbr = idx.node_mbr(level[i].first);
          idx.nodes_[id].child_mbr.push_back(mbr);
        }
      }
      upper.emplace_back(id, level[pos].second);
      pos += size;
    }
    level = std::move(upper);
  }
  idx.root_ = level.front().first;
  return idx;
}

std::vector<Record> records_from(const KeySpace& keys) {
  std::vector<Record> out(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    out[i].key = keys.keys[i];
    out[i].value = record_value(keys.keys[i]);
    if (keys.kind == IndexKind::rtree2d) out[i].point = keys.points[i];
  }
  return out;
}

SlicedIndex build_index(const KeySpace& keys, std::uint32_t slice_count, const IndexParams& params) {
  return build_index(keys.kind, records_from(keys), KeyRange{keys.domain_lo, keys.domain_hi}, slice_count, params);
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::uint64_t read_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void write_u64_le(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (auto& c : b) {
    c = static_cast<unsigned char>(v & 0xff);
    v >>= 8;
  }
  out.write(reinterpret_cast<const char*>(b), 8);
}

}  // namespace

std::vector<Record> load_records(const std::string& path, IndexKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open record file '" + path + "'");
  std::vector<Record> out;
  const bool spatial = kind == IndexKind::rtree2d;
  if (ends_with(path, ".bin")) {
    const std::size_t width = spatial ? 24 : 16;
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() % width != 0) throw Error("record file '" + path + "' has a truncated record");
    for (std::size_t off = 0; off < buf.size(); off += width) {
      Record r;
      if (spatial) {
        r.point = Point2{static_cast<std::uint32_t>(read_u64_le(&buf[off])),
                         static_cast<std::uint32_t>(read_u64_le(&buf[off + 8]))};
        r.value = read_u64_le(&buf[off + 16]);
        r.key = hilbert_index(r.point);
      } else {
        r.key = read_u64_le(&buf[off]);
        r.value = read_u64_le(&buf[off + 8]);
      }
      out.push_back(r);
    }
    return out;
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    Record r;
    bool ok = false;
    if (spatial) {
      std::uint64_t x = 0;
      std::uint64_t y = 0;
      ok = static_cast<bool>(row >> x >> y >> r.value) && x < kSpatialSide && y < kSpatialSide;
      r.point = Point2{static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y)};
      r.key = hilbert_index(r.point);
    } else {
      ok = static_cast<bool>(row >> r.key >> r.value);
    }
    if (!ok) throw Error("malformed record at " + path + ":" + std::to_string(line_no));
    out.push_back(r);
  }
  return out;
}

void save_records(const std::string& path, IndexKind kind, const std::vector<Record>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write record file '" + path + "'");
  const bool spatial = kind == IndexKind::rtree2d;
  if (ends_with(path, ".bin")) {
    for (const auto& r : records) {
      if (spatial) {
        write_u64_le(out, r.point.x);
        write_u64_le(out, r.point.y);
      } else {
        write_u64_le(out, r.key);
      }
      write_u64_le(out, r.value);
    }
    return;
  }
  for (const auto& r : records) {
    if (spatial) {
      out << r.point.x << ',' << r.point.y << ',' << r.value << '\n';
    } else {
      out << r.key << ',' << r.value << '\n';
    }
  }
}

}  // namespace numalab
