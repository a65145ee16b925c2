// Copyright 2026 The Panther Simulator Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <limits>
#include <set>
#include <tuple>

#include "panther/compiler.hpp"
#include "panther/errors.hpp"

namespace panther {
namespace {

int kind_rank(PKind k) { return k == PKind::kMvm ? 0 : k == PKind::kMtvm ? 1 : 2; }

}  // namespace

Schedule fuse(const PGraph& g, const ScheduleOptions& opt) {
  const int n = static_cast<int>(g.nodes.size());
  Schedule s;
  s.step.assign(n, -1);
  s.level.assign(n, -1);
  std::vector<std::vector<int>> consumers(n);
  std::vector<int> waiting(n, 0), avail(n, 0), earliest(n, 0);
  for (int id = 0; id < n; ++id) {
    waiting[id] = static_cast<int>(g.nodes[id].inputs.size());
    for (int in : g.nodes[id].inputs) consumers[in].push_back(id);
  }

  // OPA chains: each shard applies its updates in program order.
  std::vector<int> chain_prev(n, -1);
  {
    std::vector<int> last(g.placement.shards.size(), -1);
    for (int id = 0; id < n; ++id) {
      if (g.nodes[id].kind != PKind::kOpa) continue;
      chain_prev[id] = last[g.nodes[id].shard];
      last[g.nodes[id].shard] = id;
    }
  }
  const bool fence = opt.variant != McuVariant::kV3;
  int mtvm_total = g.count(PKind::kMtvm), mtvm_done = 0, mtvm_last = -1;

  using Key = std::tuple<int, int, int, int>;
  std::set<Key> ready;
  auto key = [&](int id) {
    const PNode& p = g.nodes[id];
    return Key{p.sample, kind_rank(p.kind), p.layer, id};
  };

  int mcu_left = 0;
  std::vector<int> stack;
  auto resolve = [&](int id, int value) {
    // value: availability for MCU consumers.
    stack.push_back(id);
    avail[id] = value;
    while (!stack.empty()) {
      const int cur = stack.back();
      stack.pop_back();
      for (int c : consumers[cur]) {
        earliest[c] = std::max(earliest[c], avail[cur]);
        if (--waiting[c] > 0) continue;
        if (is_mcu_kind(g.nodes[c].kind)) {
          ready.insert(key(c));
        } else {
          avail[c] = earliest[c];
          stack.push_back(c);
        }
      }
    }
  };
  std::vector<int> roots;
  for (int id = 0; id < n; ++id) {
    if (is_mcu_kind(g.nodes[id].kind)) ++mcu_left;
    if (waiting[id] == 0) roots.push_back(id);
  }
  for (int id : roots) {
    if (is_mcu_kind(g.nodes[id].kind))
      ready.insert(key(id));
    else
      resolve(id, 0);
  }

  for (int t = 0; mcu_left > 0; ++t) {
    if (ready.empty()) throw Error("scheduler stalled with unscheduled MCU operations");
    std::set<std::pair<int, int>> busy;  // (global mcu, kind rank or -1)
    int issued = 0;
    bool changed = true;
    while (changed) {
      changed = false;
      ++s.iterations;
      for (auto it = ready.begin(); it != ready.end();) {
        const int id = std::get<3>(*it);
        const PNode& p = g.nodes[id];
        bool ok = earliest[id] <= t && (opt.fusion || issued == 0);
        if (ok && p.kind == PKind::kOpa) {
          if (fence && (mtvm_done < mtvm_total || mtvm_last > t)) ok = false;
          if (chain_prev[id] >= 0 && (s.step[chain_prev[id]] < 0 || s.step[chain_prev[id]] >= t)) ok = false;
        }
        const Shard& sh = g.placement.shards[p.shard];
        const int mcu = sh.core * kMaxMcusPerCore + sh.mcu;
        const std::pair<int, int> res{mcu, opt.variant == McuVariant::kV1 ? -1 : kind_rank(p.kind)};
        if (ok && busy.count(res)) ok = false;
        if (!ok) {
          ++it;
          continue;
        }
        busy.insert(res);
        s.step[id] = t;
        ++issued;
        --mcu_left;
        if (p.kind == PKind::kMtvm) {
          ++mtvm_done;
          mtvm_last = std::max(mtvm_last, t);
        }
        it = ready.erase(it);
        resolve(id, t + 1);
        changed = true;
      }
    }
    s.steps = t + 1;
  }

  // Non-MCU nodes run right after their latest MCU ancestor; nodes with no
  // MCU ancestor are deferred to just before their first use.
  for (int id = 0; id < n; ++id)
    if (!is_mcu_kind(g.nodes[id].kind)) s.level[id] = avail[id] - 1;
  for (int id = n - 1; id >= 0; --id) {
    if (is_mcu_kind(g.nodes[id].kind) || avail[id] != 0) continue;
    int lv = std::numeric_limits<int>::max();
    for (int c : consumers[id]) lv = std::min(lv, is_mcu_kind(g.nodes[c].kind) ? s.step[c] - 1 : s.level[c]);
    s.level[id] = consumers[id].empty() ? -1 : lv;
  }
  return s;
}

}  // namespace panther
