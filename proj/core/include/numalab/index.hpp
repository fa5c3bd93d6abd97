#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "numalab/hilbert.hpp"
#include "numalab/topology.hpp"
#include "numalab/workload.hpp"

namespace numalab {

using IndexNodeId = std::uint32_t;
using SliceId = std::uint32_t;
inline constexpr IndexNodeId kNoIndexNode = std::numeric_limits<IndexNodeId>::max();
inline constexpr SliceId kNoSlice = std::numeric_limits<SliceId>::max();

enum class AccessKind : std::uint8_t { read, write };

struct Access {
  IndexNodeId node = kNoIndexNode;
  NodeId home = 0;
  AccessKind kind = AccessKind::read;
  std::uint32_t bytes = 0;
  bool sequential = false;  // streamed lines (scans, copies) rather than dependent probes
};

/// Memory footprint of one executed query: the index nodes it touched, in order.
struct AccessTrace {
  std::vector<Access> accesses;
  std::uint64_t comparisons = 0;
  std::uint64_t result_size = 0;

  std::size_t writes() const;
};

struct Record {
  std::uint64_t key = 0;  // ordered key; Hilbert index for spatial records
  std::uint64_t value = 0;
  Point2 point;
};

/// Half-open key interval [lo, hi).
struct KeyRange {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;
  bool contains(std::uint64_t k) const { return k >= lo && k < hi; }
};

struct IndexSlice {
  SliceId id = 0;
  KeyRange range;
  NodeId home_node = 0;
  std::optional<CoreId> assigned_core;
};

struct IndexParams {
  std::uint32_t leaf_capacity = 255;   // B+-tree leaf entries
  std::uint32_t inner_capacity = 255;  // B+-tree children per inner node
  double bulk_fill = 0.75;             // B+-tree bulk-load occupancy
  std::uint32_t rtree_min_fanout = 20;
  std::uint32_t rtree_max_fanout = 50;
  std::uint32_t rtree_bulk_fill = 40;
  std::uint32_t line_bytes = 64;
  std::uint32_t entry_bytes = 16;
};

enum class PlacementMode : std::uint8_t {
  first_touch,  // everything on the node of the allocating core
  interleave,   // round-robin over nodes by index-node id
  slice_home,   // each slice on its home node
};

struct IndexNode {
  bool leaf = true;
  NodeId home = 0;
  SliceId slice = kNoSlice;  // owning slice of a leaf
  std::vector<std::uint64_t> keys;      // leaf: entry keys; inner: separators (children - 1)
  std::vector<IndexNodeId> children;
  std::vector<std::uint64_t> values;    // leaf payloads
  std::vector<Point2> points;           // spatial leaf payloads
  std::vector<Rect> child_mbr;          // spatial inner: bounding box per child
  IndexNodeId next = kNoIndexNode;      // leaf chain
  std::uint32_t migration_epoch = 0;
  SliceId migration_slice = kNoSlice;
};

enum class MigrationMode : std::uint8_t { aggressive, lazy };

/// One migratory range scan: rehomes every node it touches to `dest`.
struct MigrationStep {
  SliceId slice = 0;
  NodeId dest = 0;
  KeyRange range;
};

/// A key-partitioned main-memory index whose nodes carry a NUMA home.
///
/// Both index kinds share one ordered-tree core: the B+-tree orders by key,
/// the 2D R-tree by the Hilbert index of each point (a Hilbert R-tree), with
/// bounding boxes kept per child for spatial search. Leaves never straddle a
/// slice boundary, so every leaf belongs to exactly one slice.
class SlicedIndex {
 public:
  IndexKind kind() const { return kind_; }
  const IndexParams& params() const { return params_; }
  KeyRange domain() const { return domain_; }

  std::uint32_t slice_count() const { return static_cast<std::uint32_t>(slices_.size()); }
  const IndexSlice& slice(SliceId id) const;
  const std::vector<IndexSlice>& slices() const { return slices_; }
  void assign_core(SliceId id, std::optional<CoreId> core);

  /// Slice whose key range holds `key`; throws when outside the domain.
  SliceId slice_of_key(std::uint64_t key) const;

  /// Slices a query has to visit, ascending. Lookups and inserts map to one slice.
  std::vector<SliceId> slices_of(const Query& q) const;

  /// Runs the query logically and returns the nodes it touched. Nodes allocated
  /// by splits are homed per the active placement; `exec_node` is the node of
  /// the executing core (used by first-touch placement).
  AccessTrace execute(const Query& q, NodeId exec_node = 0);

  /// Re-homes every node per `mode`. `slice_homes` (one per slice) is required
  /// for slice_home placement.
  void apply_placement(PlacementMode mode, std::uint32_t node_count, NodeId first_touch_node = 0,
                       const std::vector<NodeId>& slice_homes = {});
  PlacementMode placement_mode() const { return placement_; }

  /// Changes where future allocations go without moving existing nodes.
  void set_allocation_mode(PlacementMode mode, std::uint32_t node_count, NodeId first_touch_node = 0);

  /// Splits a slice migration into migratory range scans (one when aggressive,
  /// `lazy_steps` over equal shares of the slice's leaves when lazy) and
  /// switches the slice's home so new allocations land on `dest`. Empty when
  /// the slice and all its leaves already live on `dest`.
  std::vector<MigrationStep> plan_migration(SliceId id, NodeId dest, MigrationMode mode, std::uint32_t lazy_steps = 4);

  /// Performs one migratory range scan. Interior nodes shared by several
  /// migrating slices end up on the destination of the highest slice id that
  /// touched them during the current epoch.
  AccessTrace apply_migration_step(const MigrationStep& step);

  /// Starts a new enforcement epoch for the interior-node tie-break.
  void begin_migration_epoch() { ++epoch_; }

  /// Convenience: plan and apply every step of an aggressive migration.
  AccessTrace migrate_slice(SliceId id, NodeId dest);

  // Inspection.
  std::size_t node_count() const { return nodes_.size(); }
  const IndexNode& node(IndexNodeId id) const { return nodes_[id]; }
  IndexNodeId root() const { return root_; }
  std::uint32_t height() const;
  std::uint64_t record_count() const { return records_; }
  std::vector<IndexNodeId> leaves_of_slice(SliceId id) const;
  std::vector<NodeId> home_vector() const;

  /// Full structural audit; returns a description of the first violation.
  std::optional<std::string> check_structure() const;

 private:
  friend SlicedIndex build_index(IndexKind, std::vector<Record>, KeyRange, std::uint32_t, const IndexParams&);

  struct PathEntry {
    IndexNodeId node;
    std::uint32_t child;
  };

  bool spatial() const { return kind_ == IndexKind::rtree2d; }
  std::uint32_t leaf_max() const { return spatial() ? params_.rtree_max_fanout : params_.leaf_capacity; }
  std::uint32_t inner_max() const { return spatial() ? params_.rtree_max_fanout : params_.inner_capacity; }

  IndexNodeId allocate(bool leaf, NodeId home);
  NodeId home_for_new_node(std::uint64_t key, NodeId exec_node) const;
  Rect node_mbr(IndexNodeId id) const;
  void touch(AccessTrace& trace, IndexNodeId id, AccessKind kind, std::uint32_t bytes, bool sequential) const;
  std::uint32_t probe_bytes(std::size_t entries) const;
  std::uint32_t scan_bytes(std::size_t entries) const;
  std::uint32_t child_slot(const IndexNode& inner, std::uint64_t key) const;

  IndexNodeId descend(std::uint64_t key, AccessTrace& trace, std::vector<PathEntry>* path) const;
  void lookup_ordered(std::uint64_t key, AccessTrace& trace) const;
  void scan_ordered(std::uint64_t lo, std::uint64_t hi, AccessTrace& trace) const;
  void search_spatial(const Rect& rect, bool exact_point, Point2 point, AccessTrace& trace) const;
  void insert(const Record& rec, NodeId exec_node, AccessTrace& trace);
  void split_upwards(std::vector<PathEntry>& path, IndexNodeId leaf, NodeId exec_node, AccessTrace& trace);
  void migrate_subtree(IndexNodeId id, std::uint64_t lo, std::uint64_t hi, const MigrationStep& step,
                       AccessTrace& trace);
  void spatial_slices(const Rect& rect, std::uint32_t level, std::uint32_t x0, std::uint32_t y0,
                      std::vector<bool>& hit) const;
  std::optional<std::string> check_node(IndexNodeId id, std::uint64_t lo, std::uint64_t hi, std::uint32_t depth,
                                        std::uint32_t leaf_depth, std::vector<IndexNodeId>& leaves) const;

  IndexKind kind_ = IndexKind::bplus;
  IndexParams params_;
  KeyRange domain_;
  std::vector<IndexNode> nodes_;
  std::vector<IndexSlice> slices_;
  IndexNodeId root_ = kNoIndexNode;
  std::uint64_t records_ = 0;
  PlacementMode placement_ = PlacementMode::first_touch;
  std::uint32_t node_count_ = 1;
  NodeId first_touch_node_ = 0;
  std::uint32_t epoch_ = 0;
};

/// Bulk-loads an index over sorted, unique records split into `slice_count`
/// equal-population key ranges. Nodes start homed on node 0 (first touch).
SlicedIndex build_index(IndexKind kind, std::vector<Record> records, KeyRange domain, std::uint32_t slice_count,
                        const IndexParams& params = {});

/// Builds over the records of a generated key space.
SlicedIndex build_index(const KeySpace& keys, std::uint32_t slice_count, const IndexParams& params = {});

std::vector<Record> records_from(const KeySpace& keys);

/// Record files: CSV rows of `key,value` (or `x,y,value` for spatial data),
/// or raw little-endian u64 pairs when the path ends in `.bin`.
std::vector<Record> load_records(const std::string& path, IndexKind kind);
void save_records(const std::string& path, IndexKind kind, const std::vector<Record>& records);

}  // namespace numalab
