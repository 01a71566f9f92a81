#include "mapfuse/association.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "mapfuse/hungarian.hpp"

namespace mapfuse {

namespace {

// Index-aligned mean xy distance; the order-sensitive score used to pick the
// prior polyline orientation (the symmetric Chamfer cannot, being invariant
// to vertex order).
double aligned_distance(const MapElement& a, const MapElement& b, bool reversed) {
  const std::size_t n = a.vertices.size();
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& va = a.vertices[k].position;
    const auto& vb = b.vertices[reversed ? n - 1 - k : k].position;
    sum += std::hypot(va.x() - vb.x(), va.y() - vb.y());
  }
  return sum / static_cast<double>(n);
}

std::vector<const MapElement*> sorted_elements(const VectorMap& map) {
  std::vector<const MapElement*> out;
  out.reserve(map.elements.size());
  for (const auto& e : map.elements) out.push_back(&e);
  std::sort(out.begin(), out.end(),
            [](const MapElement* a, const MapElement* b) { return a->id < b->id; });
  return out;
}

}  // namespace

Assignment hungarian_match(const VectorMap& obs, const VectorMap& prior_local, double gate,
                           kernels::ExecPolicy policy) {
  Assignment out;
  const auto rows = sorted_elements(obs);
  const auto cols = sorted_elements(prior_local);
  if (rows.empty() || cols.empty()) {
    for (const auto* e : rows) out.unmatched_obs.push_back(e->id);
    for (const auto* e : cols) out.unmatched_prior.push_back(e->id);
    return out;
  }

  std::vector<MapElement> row_elems, col_elems;
  row_elems.reserve(rows.size());
  col_elems.reserve(cols.size());
  for (const auto* e : rows) row_elems.push_back(*e);
  for (const auto* e : cols) col_elems.push_back(*e);
  auto cost = kernels::chamfer_cost_matrix(row_elems, col_elems, policy);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      auto& c = cost[i * cols.size() + j];
      if (rows[i]->cls != cols[j]->cls || c > gate) c = kForbiddenCost;
    }
  }

  const auto sol = solve_assignment(cost, static_cast<int>(rows.size()),
                                    static_cast<int>(cols.size()), gate + 1.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int j = sol.row_to_col[i];
    if (j >= 0) {
      out.pairs.push_back({rows[i]->id, cols[static_cast<std::size_t>(j)]->id,
                           cost[i * cols.size() + static_cast<std::size_t>(j)]});
    } else {
      out.unmatched_obs.push_back(rows[i]->id);
    }
  }
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (sol.col_to_row[j] < 0) out.unmatched_prior.push_back(cols[j]->id);
  }
  return out;
}

AssociationResult classify_existence(const Assignment& assign, const VectorMap& obs,
                                     const VectorMap& prior_ego, const VectorMap& prior_world,
                                     const AssocConfig& cfg) {
  AssociationResult out;
  auto build_corrs = [&](const AssignmentPair& pair, std::vector<Correspondence>& dst) {
    const MapElement* o = obs.find(pair.obs_id);
    const MapElement* pe = prior_ego.find(pair.prior_id);
    const MapElement* pw = prior_world.find(pair.prior_id);
    if (o == nullptr || pe == nullptr || pw == nullptr) {
      throw std::invalid_argument("assignment references unknown element ids");
    }
    const bool reversed = aligned_distance(*o, *pe, true) < aligned_distance(*o, *pe, false);
    const int n = static_cast<int>(o->vertices.size());
    for (int k = 0; k < n; ++k) {
      const int kp = reversed ? n - 1 - k : k;
      Correspondence c;
      c.obs_element = pair.obs_id;
      c.prior_element = pair.prior_id;
      c.obs_index = k;
      c.prior_index = kp;
      c.obs_vertex = o->vertices[static_cast<std::size_t>(k)];
      c.prior_vertex = pw->vertices[static_cast<std::size_t>(kp)];
      dst.push_back(std::move(c));
    }
  };

  for (const auto& pair : assign.pairs) {
    const MapElement* o = obs.find(pair.obs_id);
    if (o == nullptr) throw std::invalid_argument("unknown obs id: " + pair.obs_id);
    if (o->confidence >= cfg.conf_threshold) {
      out.matched.push_back(pair);
      build_corrs(pair, out.correspondences);
    } else {
      out.outdated.push_back(pair.prior_id);
      out.demoted.push_back(pair);
      build_corrs(pair, out.demoted_correspondences);
    }
  }
  for (const auto& id : assign.unmatched_prior) out.outdated.push_back(id);
  std::sort(out.outdated.begin(), out.outdated.end());

  for (const auto& id : assign.unmatched_obs) {
    out.new_ids.push_back(id);
    const MapElement* o = obs.find(id);
    bool covered = false;
    for (const auto& pv : prior_ego.elements) {
      for (const auto& v : o->vertices) {
        for (const auto& w : pv.vertices) {
          if (std::hypot(v.position.x() - w.position.x(), v.position.y() - w.position.y()) <=
              cfg.coverage_radius) {
            covered = true;
            break;
          }
        }
        if (covered) break;
      }
      if (covered) break;
    }
    if (covered) out.new_in_coverage.push_back(id);
  }
  std::sort(out.new_ids.begin(), out.new_ids.end());
  std::sort(out.new_in_coverage.begin(), out.new_in_coverage.end());
  return out;
}

AssociationResult associate(const VectorMap& obs, const VectorMap& prior_local_ego,
                            const Pose2& init, const AssocConfig& cfg,
                            kernels::ExecPolicy policy) {
  const Assignment assign = hungarian_match(obs, prior_local_ego, cfg.gate, policy);
  const VectorMap prior_world = transform_map(init, prior_local_ego);
  return classify_existence(assign, obs, prior_local_ego, prior_world, cfg);
}

bool change_event(const AssociationResult& result) {
  return !result.outdated.empty() || !result.new_in_coverage.empty();
}

ChangeDecision detect_change(const AssociationResult& current,
                             std::span<const AssociationResult> history, int window) {
  if (window < 1) throw std::invalid_argument("change window must be >= 1");
  int considered = 1;
  int events = change_event(current) ? 1 : 0;
  for (auto it = history.rbegin(); it != history.rend() && considered < window; ++it) {
    ++considered;
    if (change_event(*it)) ++events;
  }
  const int needed = (considered + 1) / 2;
  return events >= needed ? ChangeDecision::changed : ChangeDecision::unchanged;
}

nlohmann::json association_to_json(const AssociationResult& result) {
  using nlohmann::json;
  auto pairs_json = [](const std::vector<AssignmentPair>& pairs) {
    json arr = json::array();
    for (const auto& p : pairs) {
      arr.push_back({{"obs", p.obs_id}, {"prior", p.prior_id}, {"cost", p.cost}});
    }
    return arr;
  };
  json corrs = json::array();
  for (const auto& c : result.correspondences) {
    corrs.push_back({{"obs_element", c.obs_element},
                     {"prior_element", c.prior_element},
                     {"obs_index", c.obs_index},
                     {"prior_index", c.prior_index},
                     {"obs", {c.obs_vertex.position.x(), c.obs_vertex.position.y(),
                              c.obs_vertex.position.z()}},
                     {"prior", {c.prior_vertex.position.x(), c.prior_vertex.position.y(),
                                c.prior_vertex.position.z()}},
                     {"obs_scale", {c.obs_vertex.scale.bx, c.obs_vertex.scale.by}},
                     {"prior_scale", {c.prior_vertex.scale.bx, c.prior_vertex.scale.by}}});
  }
  return {{"matched", pairs_json(result.matched)},
          {"outdated", result.outdated},
          {"new", result.new_ids},
          {"demoted", pairs_json(result.demoted)},
          {"new_in_coverage", result.new_in_coverage},
          {"correspondences", corrs}};
}

}  // namespace mapfuse
