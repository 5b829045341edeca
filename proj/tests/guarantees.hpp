#pragma once

// Statistical checks of the directional guarantees on one finished run.

#include <cstddef>
#include <span>
#include <vector>

#include "flf/experiment.hpp"

namespace flf::test {

struct Tally {
  std::size_t hold = 0, total = 0;
  void add(bool ok) {
    hold += ok ? 1 : 0;
    ++total;
  }
  void merge(const Tally& o) {
    hold += o.hold;
    total += o.total;
  }
  double rate() const { return total == 0 ? 0.0 : static_cast<double>(hold) / static_cast<double>(total); }
};

struct GuaranteeTallies {
  Tally malicious_score;     // mean s: malicious >= Category II
  Tally category_one_score;  // mean s: Category I >= Category II
  Tally gap;                 // s' - s: malicious <= Category II, per cross pair
  Tally ratio;               // s'/s: malicious <= benign, per cross pair with both s > 0
  Tally target_loss;         // mean target-input loss at w_t + g: malicious <= benign, per attack round after warm-up
  Tally nontarget_loss;      // mean non-target-probe loss at w_t + g: malicious >= benign, same rounds
};

enum class Role { kMalicious, kCategoryOne, kCategoryTwo };

inline Role role_of(const ClientInfo& c) {
  if (c.malicious) return Role::kMalicious;
  return c.category_one ? Role::kCategoryOne : Role::kCategoryTwo;
}

/// `checkpoints` are the run's stored rounds; rounds before `warmup_round`
/// are skipped by the loss check.
inline GuaranteeTallies guarantee_tallies(const ExperimentResult& r, std::span<const Checkpoint> checkpoints,
                                      std::span<const Example> targets, const Example& nontarget,
                                      std::uint64_t warmup_round) {
  GuaranteeTallies t;
  if (!r.target_index) return t;
  std::vector<Role> role(r.clients.size());
  for (const auto& c : r.clients) role[c.client] = role_of(c);

  double sum[3] = {0, 0, 0};
  std::size_t count[3] = {0, 0, 0};
  for (const auto& p : r.pairs) {
    const auto k = static_cast<std::size_t>(role[p.client]);
    sum[k] += p.s;
    ++count[k];
  }
  const auto mean = [&](Role k) {
    const auto i = static_cast<std::size_t>(k);
    return count[i] == 0 ? 0.0 : sum[i] / static_cast<double>(count[i]);
  };
  if (count[0] > 0 && count[2] > 0) t.malicious_score.add(mean(Role::kMalicious) >= mean(Role::kCategoryTwo));
  if (count[1] > 0 && count[2] > 0) t.category_one_score.add(mean(Role::kCategoryOne) >= mean(Role::kCategoryTwo));

  for (const auto& m : r.pairs) {
    if (role[m.client] != Role::kMalicious) continue;
    for (const auto& b : r.pairs) {
      if (role[b.client] == Role::kMalicious) continue;
      if (role[b.client] == Role::kCategoryTwo) t.gap.add(m.s_prime - m.s <= b.s_prime - b.s);
      if (m.s > 0 && b.s > 0) t.ratio.add(m.s_prime / m.s <= b.s_prime / b.s);
    }
  }

  const auto& spec = r.config.model;
  const Example x{targets[*r.target_index].input, r.config.attack.target_label};
  for (const auto& cp : checkpoints) {
    if (cp.round < warmup_round) continue;
    double mal = 0, ben = 0, mal_nt = 0, ben_nt = 0;
    std::size_t nm = 0, nb = 0;
    std::vector<double> w(cp.global_model.size());
    for (const auto& u : cp.updates) {
      for (std::size_t k = 0; k < w.size(); ++k)
        w[k] = static_cast<double>(cp.global_model[k]) + static_cast<double>(u.values[k]);
      const double loss = ce_loss(x, w, spec);
      const double loss_nt = ce_loss(nontarget, w, spec);
      if (role[u.client] == Role::kMalicious) {
        mal += loss;
        mal_nt += loss_nt;
        ++nm;
      } else {
        ben += loss;
        ben_nt += loss_nt;
        ++nb;
      }
    }
    // A round where no malicious client sent an update is not an attack round.
    if (nm == 0 || nb == 0) continue;
    t.target_loss.add(mal / static_cast<double>(nm) <= ben / static_cast<double>(nb));
    t.nontarget_loss.add(mal_nt / static_cast<double>(nm) >= ben_nt / static_cast<double>(nb));
  }
  return t;
}

}  // namespace flf::test
