#pragma once

#include "mpt/tree.hpp"

#include <memory>
#include <string>

namespace mpt {

/// Storage model M1 stores the unique vertex table and per-node vertex
/// indices; M2 drops the vertex table and stores each node's precomputed
/// affine barycentric map instead, trading file size for factorization-free
/// point location. Both are little-endian with IEEE-754 doubles and a CRC32
/// trailer.
enum class StorageModel : std::uint8_t { M1 = 1, M2 = 2 };

struct TreeFileMeta {
    TreeMode mode = TreeMode::SemiExplicit;
    Index p = 0;
    Index n_out = 0; ///< stored decision components per vertex (explicit mode)
    Index m = 0;
    std::string label;
    std::vector<Index> output_indices; ///< slice of the full decision vector
};

/// Writes the tree; requires every leaf to be closed. Returns bytes written.
std::uint64_t save_tree(const PartitionTree &tree, const TreeFileMeta &meta,
                        const std::string &path, StorageModel model);

struct LoadedTree {
    std::unique_ptr<PartitionTree> tree;
    TreeFileMeta meta;
    StorageModel model = StorageModel::M1;
};

LoadedTree load_tree(const std::string &path);

/// Field-count size prediction mirroring the writer's layout byte for byte.
std::uint64_t predict_file_size(const PartitionTree &tree,
                                const TreeFileMeta &meta, StorageModel model);

/// The idealized per-leaf storage estimates (perfect binary tree, simplex
/// domain, no structure records); reported for comparison only.
struct IdealizedSizes {
    double m1 = 0.0;
    double m2 = 0.0;
};
IdealizedSizes idealized_sizes(const TreeStats &stats, Index p, Index m,
                               Index n_out, TreeMode mode);

/// Progress sink streaming rows to a CSV file with the documented header
/// (wall_time_s, closed_leaf_count, closed_volume_fraction, open_count,
/// depth).
ProgressSink make_progress_csv_sink(const std::string &path);

} // namespace mpt
