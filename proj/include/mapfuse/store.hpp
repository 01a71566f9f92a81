#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "mapfuse/map_model.hpp"

namespace mapfuse {

/// Raised when a commit's base version is stale; the caller should reload the
/// head and re-fuse.
struct VersionConflict : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Versioned file-per-snapshot map store. Layout per region:
///   <root>/<region>/v<k>.json and <root>/<region>/HEAD (the integer k).
/// Commits claim their version file atomically, so of two concurrent commits
/// at the same base exactly one succeeds.
class MapRepository {
 public:
  explicit MapRepository(std::filesystem::path root);

  /// Requires map.version == head + 1 (head 0 when the region is empty).
  /// Returns the committed version.
  int commit(const std::string& region, const VectorMap& map);

  /// Loads a specific version, or the head when none is given.
  VectorMap load(const std::string& region, std::optional<int> version = std::nullopt) const;

  std::optional<int> head_version(const std::string& region) const;

  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path region_dir(const std::string& region) const;
  std::filesystem::path root_;
};

}  // namespace mapfuse
