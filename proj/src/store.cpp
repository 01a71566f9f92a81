#include "mapfuse/store.hpp"

#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <fstream>
#include <regex>

#include "mapfuse/map_io.hpp"

namespace mapfuse {

namespace fs = std::filesystem;

MapRepository::MapRepository(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_);
}

fs::path MapRepository::region_dir(const std::string& region) const {
  if (region.empty() || region.find('/') != std::string::npos) {
    throw std::invalid_argument("invalid region id: " + region);
  }
  return root_ / region;
}

std::optional<int> MapRepository::head_version(const std::string& region) const {
  const fs::path dir = region_dir(region);
  if (!fs::exists(dir)) return std::nullopt;
  // Snapshot files are the source of truth; HEAD is a convenience pointer
  // that may lag by a crashed commit.
  static const std::regex pat(R"(v(\d+)\.json)");
  int best = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pat)) best = std::max(best, std::stoi(m[1].str()));
  }
  if (best == 0) return std::nullopt;
  return best;
}

int MapRepository::commit(const std::string& region, const VectorMap& map) {
  const fs::path dir = region_dir(region);
  fs::create_directories(dir);
  const int head = head_version(region).value_or(0);
  if (map.version != head + 1) {
    throw VersionConflict("commit of version " + std::to_string(map.version) +
                          " against head " + std::to_string(head));
  }
  const int version = static_cast<int>(map.version);
  const fs::path final_path = dir / ("v" + std::to_string(version) + ".json");
  const fs::path tmp_path =
      dir / ("v" + std::to_string(version) + ".json.tmp." + std::to_string(::getpid()));
  save_map(tmp_path, map);
  // link() claims the version slot atomically; it fails if someone else won.
  if (::link(tmp_path.c_str(), final_path.c_str()) != 0) {
    const int err = errno;
    std::remove(tmp_path.c_str());
    if (err == EEXIST) {
      throw VersionConflict("version " + std::to_string(version) + " already committed");
    }
    throw std::runtime_error("commit failed: " + final_path.string());
  }
  std::remove(tmp_path.c_str());

  const fs::path head_tmp = dir / ("HEAD.tmp." + std::to_string(::getpid()));
  {
    std::ofstream out(head_tmp);
    out << version << "\n";
  }
  fs::rename(head_tmp, dir / "HEAD");
  return version;
}

VectorMap MapRepository::load(const std::string& region, std::optional<int> version) const {
  int v;
  if (version) {
    v = *version;
  } else {
    const auto head = head_version(region);
    if (!head) throw std::runtime_error("no snapshots for region: " + region);
    v = *head;
  }
  const fs::path path = region_dir(region) / ("v" + std::to_string(v) + ".json");
  if (!fs::exists(path)) {
    throw std::runtime_error("missing snapshot: " + path.string());
  }
  return load_map(path);
}

}  // namespace mapfuse
