#include "mapfuse/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mapfuse/hungarian.hpp"

namespace mapfuse {

UnionFind::UnionFind(std::size_t n) : parent_(n), rank_(n, 0) {
  for (std::size_t i = 0; i < n; ++i) parent_[i] = i;
}

std::size_t UnionFind::add() {
  parent_.push_back(parent_.size());
  rank_.push_back(0);
  return parent_.size() - 1;
}

std::size_t UnionFind::find(std::size_t a) {
  while (parent_[a] != a) {
    parent_[a] = parent_[parent_[a]];
    a = parent_[a];
  }
  return a;
}

bool UnionFind::unite(std::size_t a, std::size_t b) {
  a = find(a);
  b = find(b);
  if (a == b) return false;
  if (rank_[a] < rank_[b]) std::swap(a, b);
  parent_[b] = a;
  if (rank_[a] == rank_[b]) ++rank_[a];
  return true;
}

WeightedVertex fuse_vertex(std::span<const WeightedVertex> members,
                           const std::optional<WeightedVertex>& prior) {
  if (members.empty() && !prior) throw std::invalid_argument("fuse_vertex: empty input");
  if (members.empty()) return *prior;

  double wx = 0.0, wy = 0.0, mx = 0.0, my = 0.0, mz = 0.0;
  for (const auto& m : members) {
    if (!m.scale.positive()) throw std::invalid_argument("fuse_vertex: non-positive scale");
    const double ix = 1.0 / m.scale.var_x();
    const double iy = 1.0 / m.scale.var_y();
    wx += ix;
    wy += iy;
    mx += ix * m.position.x();
    my += iy * m.position.y();
    mz += m.position.z();
  }
  if (prior) {
    if (!prior->scale.positive()) throw std::invalid_argument("fuse_vertex: non-positive prior scale");
    const double ix = 1.0 / prior->scale.var_x();
    const double iy = 1.0 / prior->scale.var_y();
    wx += ix;
    wy += iy;
    mx += ix * prior->position.x();
    my += iy * prior->position.y();
  }
  WeightedVertex out;
  out.position = Vec3{mx / wx, my / wy, mz / static_cast<double>(members.size())};
  out.scale = scale_from_variance(1.0 / wx, 1.0 / wy);
  return out;
}

namespace {

int nearest_vertex_index(const Vec3& p, const std::vector<MapVertex>& verts) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < verts.size(); ++k) {
    const double d =
        std::hypot(p.x() - verts[k].position.x(), p.y() - verts[k].position.y());
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

struct ProvisionalElement {
  std::string key;
  ElementClass cls = ElementClass::Divider;
  MapElement world_geometry;  // first sighting, world frame
};

}  // namespace

ClusterSet build_clusters(const ObservationBatch& batch, const VectorMap& prior,
                          const FusionConfig& cfg) {
  ClusterSet set;

  // Hub slots for prior elements come first so slot node ids are stable.
  UnionFind uf;
  std::map<std::pair<std::string, int>, std::size_t> hub_node;
  std::vector<std::string> prior_ids;
  for (const auto& e : prior.elements) prior_ids.push_back(e.id);
  std::sort(prior_ids.begin(), prior_ids.end());
  for (const auto& id : prior_ids) {
    set.prior_groups.insert(id);
    for (int k = 0; k < kVertexCount; ++k) hub_node[{id, k}] = uf.add();
  }

  struct ObsNode {
    std::size_t node;
    ClusterMember member;
    ElementClass cls;
    std::string group_hint;  // filled through unions later
  };
  std::vector<ObsNode> obs_nodes;
  std::map<std::pair<int, std::string>, std::vector<std::size_t>> obs_node_of;

  std::vector<ProvisionalElement> provisionals;

  for (std::size_t f = 0; f < batch.frames.size(); ++f) {
    const auto& frame = batch.frames[f];
    auto add_obs_nodes = [&](const MapElement& elem) -> std::vector<std::size_t>& {
      auto& nodes = obs_node_of[{static_cast<int>(f), elem.id}];
      if (!nodes.empty()) return nodes;
      for (int k = 0; k < static_cast<int>(elem.vertices.size()); ++k) {
        ObsNode n;
        n.node = uf.add();
        n.cls = elem.cls;
        n.member.ref = {batch.traversal_id, static_cast<int>(f), elem.id, k};
        n.member.world_position = frame.pose.apply(elem.vertices[static_cast<std::size_t>(k)].position);
        n.member.scale = elem.vertices[static_cast<std::size_t>(k)].scale;
        n.member.element_confidence = elem.confidence;
        nodes.push_back(n.node);
        obs_nodes.push_back(std::move(n));
      }
      return nodes;
    };

    // Matched elements hub through the full prior element; correspondence
    // prior vertices are re-keyed to the nearest full-element slot so frames
    // with different crop windows stay aligned.
    for (const auto& c : frame.assoc.correspondences) {
      const MapElement* full = prior.find(c.prior_element);
      if (full == nullptr) {
        throw std::invalid_argument("batch references prior element missing from map: " +
                                    c.prior_element);
      }
      const MapElement* obs_elem = frame.obs.find(c.obs_element);
      if (obs_elem == nullptr) {
        throw std::invalid_argument("batch references unknown obs element: " + c.obs_element);
      }
      auto& nodes = add_obs_nodes(*obs_elem);
      const int slot = nearest_vertex_index(c.prior_vertex.position, full->vertices);
      uf.unite(nodes[static_cast<std::size_t>(c.obs_index)], hub_node[{c.prior_element, slot}]);
    }

    // New elements hub through a provisional element created at first
    // sighting; later frames match against the provisionals to gather
    // multi-frame support.
    std::vector<const MapElement*> new_elems;
    for (const auto& id : frame.assoc.new_ids) {
      const MapElement* e = frame.obs.find(id);
      if (e == nullptr) throw std::invalid_argument("unknown new element id: " + id);
      new_elems.push_back(e);
    }
    std::sort(new_elems.begin(), new_elems.end(),
              [](const MapElement* a, const MapElement* b) { return a->id < b->id; });
    std::vector<MapElement> new_world;
    new_world.reserve(new_elems.size());
    for (const auto* e : new_elems) new_world.push_back(transform_element(frame.pose, *e));

    std::vector<int> assigned(new_elems.size(), -1);
    if (!new_world.empty() && !provisionals.empty()) {
      std::vector<double> cost(new_world.size() * provisionals.size(), kForbiddenCost);
      for (std::size_t i = 0; i < new_world.size(); ++i) {
        for (std::size_t j = 0; j < provisionals.size(); ++j) {
          if (new_world[i].cls != provisionals[j].cls) continue;
          const double d = chamfer_distance(new_world[i], provisionals[j].world_geometry);
          if (d <= cfg.match_gate) cost[i * provisionals.size() + j] = d;
        }
      }
      const auto sol = solve_assignment(cost, static_cast<int>(new_world.size()),
                                        static_cast<int>(provisionals.size()),
                                        cfg.match_gate + 1.0);
      for (std::size_t i = 0; i < new_world.size(); ++i) assigned[i] = sol.row_to_col[i];
    }
    for (std::size_t i = 0; i < new_world.size(); ++i) {
      auto& nodes = add_obs_nodes(*new_elems[i]);
      if (assigned[i] < 0) {
        ProvisionalElement prov;
        prov.key = "~new_" + std::to_string(provisionals.size());
        prov.cls = new_world[i].cls;
        prov.world_geometry = new_world[i];
        for (int k = 0; k < kVertexCount; ++k) hub_node[{prov.key, k}] = uf.add();
        provisionals.push_back(std::move(prov));
        assigned[i] = static_cast<int>(provisionals.size()) - 1;
      }
      const auto& prov = provisionals[static_cast<std::size_t>(assigned[i])];
      for (int k = 0; k < static_cast<int>(new_world[i].vertices.size()); ++k) {
        const int slot = nearest_vertex_index(new_world[i].vertices[static_cast<std::size_t>(k)].position,
                                              prov.world_geometry.vertices);
        uf.unite(nodes[static_cast<std::size_t>(k)], hub_node[{prov.key, slot}]);
      }
    }
  }

  // Assemble clusters per union-find root; roots without any observed member
  // (unobserved prior slots) do not become clusters.
  std::map<std::size_t, int> root_cluster;
  auto cluster_for = [&](std::size_t root, ElementClass cls) {
    auto it = root_cluster.find(root);
    if (it != root_cluster.end()) return it->second;
    FusedCluster c;
    c.cls = cls;
    c.order_hint = kVertexCount;
    set.clusters.push_back(std::move(c));
    const int idx = static_cast<int>(set.clusters.size()) - 1;
    root_cluster.emplace(root, idx);
    return idx;
  };
  for (auto& n : obs_nodes) {
    const int idx = cluster_for(uf.find(n.node), n.cls);
    set.clusters[static_cast<std::size_t>(idx)].members.push_back(n.member);
  }
  for (const auto& [key, node] : hub_node) {
    const auto root = uf.find(node);
    const auto it = root_cluster.find(root);
    if (it == root_cluster.end()) continue;
    auto& cluster = set.clusters[static_cast<std::size_t>(it->second)];
    if (cluster.group.empty() || key.second < cluster.order_hint) {
      cluster.group = key.first;
      cluster.order_hint = key.second;
    }
    if (set.prior_groups.count(key.first) != 0) {
      const MapElement* full = prior.find(key.first);
      const auto& v = full->vertices[static_cast<std::size_t>(key.second)];
      if (!cluster.prior_anchor) cluster.prior_anchor = WeightedVertex{v.position, v.scale};
    }
  }

  // Stable ordering: by group then hub slot; re-key lookup tables afterwards.
  std::vector<int> order(set.clusters.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[static_cast<std::size_t>(i)] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto& ca = set.clusters[static_cast<std::size_t>(a)];
    const auto& cb = set.clusters[static_cast<std::size_t>(b)];
    if (ca.group != cb.group) return ca.group < cb.group;
    return ca.order_hint < cb.order_hint;
  });
  std::vector<int> new_index(set.clusters.size());
  std::vector<FusedCluster> sorted;
  sorted.reserve(set.clusters.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    new_index[static_cast<std::size_t>(order[rank])] = static_cast<int>(rank);
    sorted.push_back(std::move(set.clusters[static_cast<std::size_t>(order[rank])]));
    sorted.back().id = static_cast<int>(rank);
  }
  set.clusters = std::move(sorted);

  for (const auto& [key, nodes] : obs_node_of) {
    std::vector<int> idx(nodes.size(), -1);
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const auto it = root_cluster.find(uf.find(nodes[k]));
      if (it != root_cluster.end()) idx[k] = new_index[static_cast<std::size_t>(it->second)];
    }
    set.obs_cluster.emplace(key, std::move(idx));
  }
  for (const auto& [key, node] : hub_node) {
    const auto it = root_cluster.find(uf.find(node));
    if (it != root_cluster.end()) {
      set.hub_cluster[key] = new_index[static_cast<std::size_t>(it->second)];
    }
  }
  return set;
}

void fuse_all(ClusterSet& set, kernels::ExecPolicy policy) {
  auto& clusters = set.clusters;
  const auto n = static_cast<std::int64_t>(clusters.size());
  auto fuse_one = [&](std::int64_t i) {
    auto& c = clusters[static_cast<std::size_t>(i)];
    std::vector<WeightedVertex> members;
    members.reserve(c.members.size());
    for (const auto& m : c.members) members.push_back({m.world_position, m.scale});
    c.fused = fuse_vertex(members, c.prior_anchor);
  };
  if (policy == kernels::ExecPolicy::parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t i = 0; i < n; ++i) fuse_one(i);
  } else {
    for (std::int64_t i = 0; i < n; ++i) fuse_one(i);
  }
}

void vote_topology(ClusterSet& set) {
  std::map<std::pair<int, int>, int> votes;
  for (const auto& [key, idx] : set.obs_cluster) {
    (void)key;
    for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
      if (idx[k] >= 0 && idx[k + 1] >= 0 && idx[k] != idx[k + 1]) {
        ++votes[{idx[k], idx[k + 1]}];
      }
    }
  }
  // The prior's own topology counts as one more observer, but only for
  // elements that exist in the prior map.
  for (const auto& [key, idx] : set.hub_cluster) {
    if (set.prior_groups.count(key.first) == 0) continue;
    const auto next = set.hub_cluster.find({key.first, key.second + 1});
    if (next == set.hub_cluster.end()) continue;
    if (idx != next->second) ++votes[{idx, next->second}];
  }

  for (auto& c : set.clusters) {
    c.successor = -1;
    c.predecessor = -1;
  }

  // Votes never cross groups, so the assignment decomposes per group.
  std::map<std::string, std::vector<int>> groups;
  for (const auto& c : set.clusters) groups[c.group].push_back(c.id);
  for (const auto& [group, ids] : groups) {
    (void)group;
    const int n = static_cast<int>(ids.size());
    if (n < 2) continue;
    std::map<int, int> local;
    for (int i = 0; i < n; ++i) local[ids[static_cast<std::size_t>(i)]] = i;
    std::vector<double> cost(static_cast<std::size_t>(n) * static_cast<std::size_t>(n),
                             kForbiddenCost);
    bool any = false;
    for (const auto& [edge, count] : votes) {
      const auto a = local.find(edge.first);
      const auto b = local.find(edge.second);
      if (a == local.end() || b == local.end()) continue;
      cost[static_cast<std::size_t>(a->second) * static_cast<std::size_t>(n) +
           static_cast<std::size_t>(b->second)] = -static_cast<double>(count);
      any = true;
    }
    if (!any) continue;
    const auto sol = solve_assignment(cost, n, n, 0.0);
    for (int i = 0; i < n; ++i) {
      const int j = sol.row_to_col[static_cast<std::size_t>(i)];
      if (j < 0) continue;
      set.clusters[static_cast<std::size_t>(ids[static_cast<std::size_t>(i)])].successor =
          ids[static_cast<std::size_t>(j)];
      set.clusters[static_cast<std::size_t>(ids[static_cast<std::size_t>(j)])].predecessor =
          ids[static_cast<std::size_t>(i)];
    }
  }

  // One-to-one links form disjoint paths and cycles; cut each cycle at its
  // weakest vote so only simple paths remain.
  std::vector<int> state(set.clusters.size(), 0);
  for (std::size_t start = 0; start < set.clusters.size(); ++start) {
    if (state[start] != 0) continue;
    std::vector<int> path;
    int cur = static_cast<int>(start);
    while (cur >= 0 && state[static_cast<std::size_t>(cur)] == 0) {
      state[static_cast<std::size_t>(cur)] = 1;
      path.push_back(cur);
      cur = set.clusters[static_cast<std::size_t>(cur)].successor;
    }
    if (cur >= 0 && state[static_cast<std::size_t>(cur)] == 1) {
      // Found a cycle: locate it within path and cut the minimum-vote edge.
      const auto cycle_begin = std::find(path.begin(), path.end(), cur) - path.begin();
      int cut_from = -1;
      int min_votes = std::numeric_limits<int>::max();
      for (std::size_t i = static_cast<std::size_t>(cycle_begin); i < path.size(); ++i) {
        const int from = path[i];
        const int to = set.clusters[static_cast<std::size_t>(from)].successor;
        const auto it = votes.find({from, to});
        const int v = it == votes.end() ? 0 : it->second;
        if (v < min_votes) {
          min_votes = v;
          cut_from = from;
        }
      }
      if (cut_from >= 0) {
        const int to = set.clusters[static_cast<std::size_t>(cut_from)].successor;
        set.clusters[static_cast<std::size_t>(cut_from)].successor = -1;
        set.clusters[static_cast<std::size_t>(to)].predecessor = -1;
      }
    }
    for (const int c : path) state[static_cast<std::size_t>(c)] = 2;
  }
}

namespace {

struct Chain {
  std::vector<int> clusters;
};

std::vector<Chain> walk_chains(const ClusterSet& set, const std::vector<int>& ids) {
  std::vector<Chain> chains;
  std::set<int> in_group(ids.begin(), ids.end());
  for (const int id : ids) {
    const auto& c = set.clusters[static_cast<std::size_t>(id)];
    if (c.predecessor >= 0 && in_group.count(c.predecessor) != 0) continue;  // not a head
    Chain chain;
    int cur = id;
    std::set<int> seen;
    while (cur >= 0 && in_group.count(cur) != 0 && seen.insert(cur).second) {
      chain.clusters.push_back(cur);
      cur = set.clusters[static_cast<std::size_t>(cur)].successor;
    }
    chains.push_back(std::move(chain));
  }
  return chains;
}

std::optional<MapElement> rebuild_element(const ClusterSet& set, const Chain& chain,
                                          const std::string& id) {
  std::vector<MapVertex> verts;
  double conf_sum = 0.0;
  std::size_t conf_n = 0;
  ElementClass cls = ElementClass::Divider;
  for (const int cid : chain.clusters) {
    const auto& c = set.clusters[static_cast<std::size_t>(cid)];
    cls = c.cls;
    MapVertex v;
    v.position = c.fused.position;
    v.scale = c.fused.scale;
    if (verts.empty() ||
        std::hypot(v.position.x() - verts.back().position.x(),
                   v.position.y() - verts.back().position.y()) > 1e-12) {
      verts.push_back(v);
    }
    for (const auto& m : c.members) {
      conf_sum += m.element_confidence;
      ++conf_n;
    }
  }
  if (verts.size() < 2) return std::nullopt;
  MapElement out;
  out.id = id;
  out.cls = cls;
  try {
    out.vertices = resample_fixed(verts, kVertexCount);
  } catch (const std::invalid_argument&) {
    return std::nullopt;  // degenerate geometry
  }
  out.confidence = conf_n == 0 ? 1.0 : std::clamp(conf_sum / static_cast<double>(conf_n), 0.0, 1.0);
  return out;
}

}  // namespace

nlohmann::json fusion_report_to_json(const FusionReport& report) {
  nlohmann::json votes = nlohmann::json::object();
  for (const auto& [id, jv] : report.element_votes) {
    votes[id] = {{"observing_frames", jv.first}, {"outdated_frames", jv.second}};
  }
  return {{"n_clusters", report.n_clusters},
          {"dropped", report.dropped},
          {"admitted", report.admitted},
          {"element_votes", votes},
          {"chain_breaks", report.chain_breaks},
          {"singletons_discarded", report.singletons_discarded}};
}

VectorMap crowdsource_update(const VectorMap& prior, const ObservationBatch& batch,
                             const FusionConfig& cfg, FusionReport* report) {
  ClusterSet set = build_clusters(batch, prior, cfg);
  fuse_all(set, cfg.policy);
  vote_topology(set);

  FusionReport local_report;
  local_report.n_clusters = static_cast<int>(set.clusters.size());

  // Existence votes per prior element: frames that observed the element's
  // area either re-matched it or flagged it outdated.
  std::map<std::string, std::pair<int, int>> votes;  // id -> (J, outdated)
  for (const auto& frame : batch.frames) {
    std::set<std::string> seen;
    for (const auto& p : frame.assoc.matched) {
      if (seen.insert(p.prior_id).second) ++votes[p.prior_id].first;
    }
    for (const auto& id : frame.assoc.outdated) {
      if (seen.insert(id).second) {
        ++votes[id].first;
        ++votes[id].second;
      }
    }
  }
  local_report.element_votes = votes;

  std::map<std::string, std::vector<int>> groups;
  for (const auto& c : set.clusters) groups[c.group].push_back(c.id);

  std::map<std::string, std::set<std::pair<int, int>>> group_frames;
  for (const auto& c : set.clusters) {
    for (const auto& m : c.members) {
      group_frames[c.group].insert({m.ref.traversal, m.ref.frame});
    }
  }

  VectorMap out;
  out.version = prior.version + 1;
  out.frame = MapFrame::world;

  for (const auto& element : prior.elements) {
    const auto v = votes.find(element.id);
    if (v == votes.end()) {
      out.elements.push_back(element);  // never observed this batch
      continue;
    }
    const auto [observing, outdated] = v->second;
    if (outdated >= (observing + 1) / 2) {
      local_report.dropped.push_back(element.id);
      continue;
    }
    const auto g = groups.find(element.id);
    if (g == groups.end()) {
      out.elements.push_back(element);
      continue;
    }
    auto chains = walk_chains(set, g->second);
    std::sort(chains.begin(), chains.end(), [](const Chain& a, const Chain& b) {
      return a.clusters.size() > b.clusters.size();
    });
    int emitted = 0;
    for (const auto& chain : chains) {
      if (static_cast<int>(chain.clusters.size()) < cfg.min_chain_clusters) {
        ++local_report.singletons_discarded;
        continue;
      }
      const std::string id =
          emitted == 0 ? element.id : element.id + "_s" + std::to_string(emitted);
      if (auto rebuilt = rebuild_element(set, chain, id)) {
        if (emitted > 0) ++local_report.chain_breaks;
        out.elements.push_back(std::move(*rebuilt));
        ++emitted;
      }
    }
    if (emitted == 0) out.elements.push_back(element);  // fusion degenerated; keep prior
  }

  // Admit new elements with enough independent frame support.
  int admitted_seq = 0;
  for (const auto& [group, ids] : groups) {
    if (set.prior_groups.count(group) != 0) continue;
    if (static_cast<int>(group_frames[group].size()) < cfg.admit_min_frames) continue;
    auto chains = walk_chains(set, ids);
    std::sort(chains.begin(), chains.end(), [](const Chain& a, const Chain& b) {
      return a.clusters.size() > b.clusters.size();
    });
    for (const auto& chain : chains) {
      if (static_cast<int>(chain.clusters.size()) < cfg.min_chain_clusters) {
        ++local_report.singletons_discarded;
        continue;
      }
      const std::string id = "new_v" + std::to_string(out.version) + "_" +
                             std::to_string(admitted_seq);
      if (auto rebuilt = rebuild_element(set, chain, id)) {
        out.elements.push_back(std::move(*rebuilt));
        local_report.admitted.push_back(id);
        ++admitted_seq;
      }
    }
  }

  if (report != nullptr) *report = std::move(local_report);
  return out;
}

}  // namespace mapfuse
