#include <algorithm>
#include <deque>
#include <set>

#include "mvee/tree_diff.hpp"
#include "tree_ops.hpp"

namespace mvee {

namespace {

constexpr std::int64_t kNone = -1;

// Pre-order view of a tree with dense local indices.
struct Flat {
  const Tree* tree = nullptr;
  std::vector<NodeId> ids;
  std::vector<std::int64_t> parent;
  std::vector<std::vector<std::uint32_t>> children;
  std::vector<std::uint32_t> end;  // one past the last descendant
  std::vector<std::uint32_t> height;
  std::vector<SubtreeHash> hash;

  explicit Flat(const Tree& t) : tree(&t), ids(t.preorder()) {
    const auto n = ids.size();
    std::unordered_map<NodeId, std::uint32_t> local;
    local.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) local.emplace(ids[i], i);
    parent.assign(n, kNone);
    children.resize(n);
    end.resize(n);
    height.assign(n, 1);
    auto hashes = compute_hashes(t);
    hash.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      const auto& node = t.node(ids[i]);
      for (auto c : node.children) {
        children[i].push_back(local.at(c));
        parent[local.at(c)] = i;
      }
      hash[i] = hashes.at(ids[i]);
      end[i] = i + 1;
    }
    for (auto i = static_cast<std::int64_t>(n) - 1; i > 0; --i) {
      const auto p = static_cast<std::size_t>(parent[static_cast<std::size_t>(i)]);
      end[p] = std::max(end[p], end[static_cast<std::size_t>(i)]);
      height[p] = std::max(height[p], height[static_cast<std::size_t>(i)] + 1);
    }
  }

  std::size_t size() const { return ids.size(); }
  const TreeNode& node(std::uint32_t i) const { return tree->node(ids[i]); }
};

bool globally_matchable(NodeKind kind) { return kind == NodeKind::Group || kind == NodeKind::Instruction; }

// Indices of a longest strictly increasing subsequence of `seq`.
std::vector<std::size_t> longest_increasing(const std::vector<std::uint32_t>& seq) {
  std::vector<std::size_t> tails;  // index into seq of the smallest tail per length
  std::vector<std::int64_t> prev(seq.size(), kNone);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    auto it = std::lower_bound(tails.begin(), tails.end(), seq[i],
                               [&](std::size_t k, std::uint32_t v) { return seq[k] < v; });
    if (it != tails.begin()) prev[i] = static_cast<std::int64_t>(*std::prev(it));
    if (it == tails.end()) {
      tails.push_back(i);
    } else {
      *it = i;
    }
  }
  std::vector<std::size_t> out;
  for (auto k = tails.empty() ? kNone : static_cast<std::int64_t>(tails.back()); k != kNone;
       k = prev[static_cast<std::size_t>(k)]) {
    out.push_back(static_cast<std::size_t>(k));
  }
  std::reverse(out.begin(), out.end());
  return out;
}

class Differ {
 public:
  Differ(const Tree& source, const Tree& target)
      : src_(source), tgt_(target), s2t_(src_.size(), kNone), t2s_(tgt_.size(), kNone), working_(source) {}

  EditScript run() {
    EditScript script;
    if (src_.size() == 0 || tgt_.size() == 0) throw Error("diff requires non-empty trees");
    if (src_.node(0).kind != tgt_.node(0).kind) throw Error("diff requires roots of equal kind");
    if (src_.hash[0].full == tgt_.hash[0].full) return script;
    match_exact();
    match_top_down();
    generate(script);
    return script;
  }

 private:
  void pair(std::uint32_t s, std::uint32_t t) {
    s2t_[s] = t;
    t2s_[t] = s;
  }

  // Pairs two subtrees with equal full hashes node by node.
  void pair_range(std::uint32_t s, std::uint32_t t) {
    for (std::uint32_t k = 0; s + k < src_.end[s]; ++k) pair(s + k, t + k);
  }

  bool range_free(std::uint32_t s, std::uint32_t t) const {
    for (std::uint32_t k = 0; s + k < src_.end[s]; ++k) {
      if (s2t_[s + k] != kNone || t2s_[t + k] != kNone) return false;
    }
    return true;
  }

  // Largest-first reuse of Group and Instruction subtrees whose full hash
  // occurs equally often in both trees.
  void match_exact() {
    std::unordered_map<Digest128, std::int64_t, detail::DigestHash> balance;
    for (std::uint32_t s = 0; s < src_.size(); ++s) {
      if (globally_matchable(src_.node(s).kind)) ++balance[src_.hash[s].full];
    }
    for (std::uint32_t t = 0; t < tgt_.size(); ++t) {
      if (globally_matchable(tgt_.node(t).kind)) --balance[tgt_.hash[t].full];
    }
    std::unordered_map<Digest128, std::set<std::uint32_t>, detail::DigestHash> available;
    for (std::uint32_t s = 0; s < src_.size(); ++s) {
      if (globally_matchable(src_.node(s).kind) && balance[src_.hash[s].full] == 0) {
        available[src_.hash[s].full].insert(s);
      }
    }
    std::vector<std::uint32_t> order;
    for (std::uint32_t t = 0; t < tgt_.size(); ++t) {
      if (globally_matchable(tgt_.node(t).kind) && available.count(tgt_.hash[t].full) > 0) order.push_back(t);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return tgt_.height[a] > tgt_.height[b]; });

    for (auto t : order) {
      if (t2s_[t] != kNone) continue;
      auto& candidates = available[tgt_.hash[t].full];
      if (candidates.empty()) continue;
      // Nearest source position; ties go to the earlier source node.
      auto hi = candidates.lower_bound(t);
      std::uint32_t best;
      if (hi == candidates.end()) {
        best = *std::prev(hi);
      } else if (hi == candidates.begin()) {
        best = *hi;
      } else {
        const auto lo = *std::prev(hi);
        best = (t - lo) <= (*hi - t) ? lo : *hi;
      }
      pair_range(best, t);
      for (auto s = best; s < src_.end[best]; ++s) {
        if (globally_matchable(src_.node(s).kind)) available[src_.hash[s].full].erase(s);
      }
    }
  }

  void match_top_down() {
    pair(0, 0);
    for (std::uint32_t t = 0; t < tgt_.size(); ++t) {
      if (t2s_[t] == kNone) continue;
      const auto s = static_cast<std::uint32_t>(t2s_[t]);
      if (src_.hash[s].full == tgt_.hash[t].full) continue;
      switch (tgt_.node(t).kind) {
        case NodeKind::Region:
        case NodeKind::Group:
          match_children_by_hash(s, t);
          break;
        case NodeKind::Instruction:
          match_operands(s, t);
          break;
        default:
          break;
      }
    }
  }

  std::vector<std::uint32_t> unmatched(const std::vector<std::uint32_t>& xs, const std::vector<std::int64_t>& m) {
    std::vector<std::uint32_t> out;
    for (auto x : xs) {
      if (m[x] == kNone) out.push_back(x);
    }
    return out;
  }

  void match_children_by_hash(std::uint32_t s, std::uint32_t t) {
    auto pass = [&](auto key, bool exact) {
      std::unordered_map<Digest128, std::deque<std::uint32_t>, detail::DigestHash> queues;
      for (auto sc : unmatched(src_.children[s], s2t_)) queues[key(src_, sc)].push_back(sc);
      for (auto tc : unmatched(tgt_.children[t], t2s_)) {
        auto it = queues.find(key(tgt_, tc));
        if (it == queues.end() || it->second.empty()) continue;
        if (exact) {
          // Skip candidates whose descendants were already reused elsewhere.
          auto& q = it->second;
          auto free = std::find_if(q.begin(), q.end(), [&](std::uint32_t sc) { return range_free(sc, tc); });
          if (free == q.end()) continue;
          pair_range(*free, tc);
          q.erase(free);
        } else {
          pair(it->second.front(), tc);
          it->second.pop_front();
        }
      }
    };
    pass([](const Flat& f, std::uint32_t i) { return f.hash[i].full; }, true);
    pass([](const Flat& f, std::uint32_t i) { return f.hash[i].structure; }, false);
    if (tgt_.node(t).kind == NodeKind::Region) {
      // Remaining groups pair up in order, so that edits stay inside them.
      const auto su = unmatched(src_.children[s], s2t_);
      const auto tu = unmatched(tgt_.children[t], t2s_);
      for (std::size_t i = 0; i < std::min(su.size(), tu.size()); ++i) {
        if (src_.node(su[i]).kind == tgt_.node(tu[i]).kind) pair(su[i], tu[i]);
      }
    }
  }

  void match_operands(std::uint32_t s, std::uint32_t t) {
    const auto& sc = src_.children[s];
    const auto& tc = tgt_.children[t];
    std::vector<Digest128> sh;
    std::vector<Digest128> th;
    for (auto c : sc) sh.push_back(src_.hash[c].full);
    for (auto c : tc) th.push_back(tgt_.hash[c].full);
    if (sh != th && std::is_permutation(sh.begin(), sh.end(), th.begin(), th.end())) {
      std::unordered_map<Digest128, std::deque<std::uint32_t>, detail::DigestHash> queues;
      for (auto c : sc) queues[src_.hash[c].full].push_back(c);
      for (auto c : tc) {
        auto& q = queues[tgt_.hash[c].full];
        pair(q.front(), c);
        q.pop_front();
      }
      return;
    }
    for (std::size_t i = 0; i < std::min(sc.size(), tc.size()); ++i) {
      const auto& a = src_.node(sc[i]);
      const auto& b = tgt_.node(tc[i]);
      if (a.kind == b.kind && a.part == b.part) pair(sc[i], tc[i]);
    }
  }

  void emit(EditScript& script, Edit edit) {
    detail::apply_edit(working_, edit, script.edits.size());
    script.edits.push_back(std::move(edit));
  }

  NewNode closure(std::uint32_t t) {
    const auto& n = tgt_.node(t);
    NewNode out;
    out.id = next_id_++;
    out.kind = n.kind;
    out.part = n.part;
    out.literal = n.literal;
    out.source_line = n.source_line;
    wid_[t] = out.id;
    for (auto c : tgt_.children[t]) {
      if (t2s_[c] == kNone) out.children.push_back(closure(c));
    }
    return out;
  }

  // Index right after `prev` in `parent`'s children, ignoring `moving`.
  std::size_t position_after(NodeId parent, std::optional<NodeId> moving, std::optional<NodeId> prev) const {
    if (!prev) return 0;
    std::size_t pos = 0;
    for (auto c : working_.node(parent).children) {
      if (moving && c == *moving) continue;
      ++pos;
      if (c == *prev) return pos;
    }
    throw Error("internal: predecessor not found under parent");
  }

  void generate(EditScript& script) {
    next_id_ = src_.tree->max_id() + 1;
    wid_.assign(tgt_.size(), std::nullopt);
    std::unordered_map<NodeId, std::uint32_t> target_of;  // working id -> target index
    for (std::uint32_t t = 0; t < tgt_.size(); ++t) {
      if (t2s_[t] != kNone) {
        wid_[t] = src_.ids[static_cast<std::size_t>(t2s_[t])];
        target_of.emplace(*wid_[t], t);
      }
    }

    for (std::uint32_t t = 0; t < tgt_.size(); ++t) {
      const NodeId w = *wid_[t];
      const auto& tn = tgt_.node(t);
      if (t2s_[t] != kNone) {
        const auto& sn = src_.node(static_cast<std::uint32_t>(t2s_[t]));
        if (sn.literal != tn.literal && sn.literal && tn.literal) {
          emit(script, UpdateEdit{w, *sn.literal, *tn.literal});
        }
      }
      const auto& tch = tgt_.children[t];
      if (tch.empty()) continue;

      // Target children already under `w`, as child ordinals in current order.
      std::unordered_map<std::uint32_t, std::uint32_t> ordinal;
      for (std::uint32_t i = 0; i < tch.size(); ++i) ordinal.emplace(tch[i], i);
      std::vector<std::uint32_t> seq;
      for (auto c : working_.node(w).children) {
        auto it = target_of.find(c);
        if (it == target_of.end()) continue;
        auto o = ordinal.find(it->second);
        if (o != ordinal.end()) seq.push_back(o->second);
      }
      std::vector<bool> stays(tch.size(), false);
      for (auto k : longest_increasing(seq)) stays[seq[k]] = true;

      std::optional<NodeId> prev;
      for (std::uint32_t i = 0; i < tch.size(); ++i) {
        const auto c = tch[i];
        if (!stays[i]) {
          if (wid_[c]) {
            emit(script, MoveEdit{*wid_[c], w, position_after(w, wid_[c], prev)});
          } else {
            auto node = closure(c);
            std::vector<std::uint32_t> fresh;
            collect_fresh(c, fresh);
            for (auto f : fresh) target_of.emplace(*wid_[f], f);
            const auto pos = position_after(w, std::nullopt, prev);
            emit(script, InsertEdit{std::move(node), w, pos});
          }
        }
        prev = wid_[c];
      }
    }

    for (std::uint32_t s = 1; s < src_.size(); ++s) {
      const auto p = src_.parent[s];
      if (s2t_[s] == kNone && p != kNone && s2t_[static_cast<std::size_t>(p)] != kNone) {
        emit(script, DeleteEdit{src_.ids[s]});
      }
    }
  }

  void collect_fresh(std::uint32_t t, std::vector<std::uint32_t>& out) {
    out.push_back(t);
    for (auto c : tgt_.children[t]) {
      if (t2s_[c] == kNone) collect_fresh(c, out);
    }
  }

  Flat src_;
  Flat tgt_;
  std::vector<std::int64_t> s2t_;
  std::vector<std::int64_t> t2s_;
  Tree working_;
  std::vector<std::optional<NodeId>> wid_;
  NodeId next_id_ = 0;
};

}  // namespace

EditScript diff(const Tree& source, const Tree& target) { return Differ(source, target).run(); }

}  // namespace mvee
