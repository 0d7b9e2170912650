#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "openkpz/model.hpp"
#include "openkpz/rng.hpp"

namespace openkpz {

/// Spins eta_x in {-1,+1} on sites 1..N; slot 0 is inert, no event touches it. +1 is a particle.
struct Configuration {
  int N = 0;
  std::vector<std::int8_t> spins;
  long magnetization = 0;

  static Configuration filled(int N, int spin);
  static Configuration from_spins(const std::vector<int>& s);

  int operator[](int x) const { return spins[x]; }
  int size() const { return N + 1; }
  void flip(int x) {
    magnetization -= 2 * spins[x];
    spins[x] = std::int8_t(-spins[x]);
  }
  void exchange(int a, int b) { std::swap(spins[a], spins[b]); }
  bool valid() const;
};

enum class EventKind : std::uint8_t { exchange, boundary_flip };

struct EventDescriptor {
  EventKind kind = EventKind::exchange;
  // exchange on the bond (x, x+k); direction +1 moves the particle right
  int x = 0;
  int k = 0;
  int direction = 0;
  // boundary flip at cluster index j (physical `site`); sign +1 creates a particle
  Side side = Side::minus;
  int j = 0;
  int site = 0;
  int sign = 0;
  double rate = 0.0;
};

/// Applies the event to a configuration (swap or flip).
void apply_event(Configuration& cfg, const EventDescriptor& e);

/// Every event with positive rate from `cfg`.
std::vector<EventDescriptor> enumerate_rates(const Configuration& cfg, const Model& md);

/// Configuration plus the left-reservoir flux h_{T,0}.
struct ParticleState {
  Configuration cfg;
  double flux = 0.0;
};

/// Flux bookkeeping: -2/sqrt N per left creation, +2/sqrt N per left annihilation.
void apply_event(ParticleState& st, const EventDescriptor& e);

/// (L f)(eta) = sum over events of rate * (f(after) - f(before)).
double generator_apply(const std::function<double(const Configuration&)>& f,
                       const Configuration& cfg, const Model& md);
double generator_apply(const std::function<double(const ParticleState&)>& f,
                       const ParticleState& st, const Model& md);

/// Binary sum tree over event slots; parents are always recomputed from children,
/// so incremental and from-scratch totals agree bit for bit.
class SumTree {
public:
  explicit SumTree(int n = 0);
  void set(int i, double r);
  double get(int i) const { return tree_[leaves_ + i]; }
  double total() const { return tree_[1]; }
  int size() const { return n_; }
  /// Leaf i with prefix(i) <= u < prefix(i+1); skips zero-rate leaves.
  int find(double u) const;
  const std::vector<double>& raw() const { return tree_; }

private:
  int n_ = 0;
  int leaves_ = 1;
  std::vector<double> tree_;
};

/// Exact Gillespie simulation of the particle system.
class Simulator {
public:
  Simulator(const Model& md, Configuration cfg0);

  struct Step {
    double dt = 0.0;
    EventDescriptor event;
  };

  const Configuration& config() const { return state_.cfg; }
  const ParticleState& state() const { return state_; }
  double time() const { return time_; }
  double total_rate() const { return tree_.total(); }
  const SumTree& rates() const { return tree_; }
  int slot_count() const { return tree_.size(); }

  /// Draws the next event without applying it. Throws ModelError when absorbing.
  Step propose(Rng& rng) const;
  /// Applies an event and refreshes the O(m) affected rate slots.
  void apply(const Step& s);
  Step step(Rng& rng) {
    Step s = propose(rng);
    apply(s);
    return s;
  }

  /// Runs until the next event would land after t_end; the clock then reads t_end.
  /// The observer sees (time after event, event, state after event).
  template <class Observer>
  std::uint64_t run_until(double t_end, Rng& rng, Observer&& obs) {
    std::uint64_t count = 0;
    while (true) {
      if (tree_.total() <= 0.0) break;
      Step s = propose(rng);
      if (time_ + s.dt > t_end) break;
      apply(s);
      ++count;
      obs(time_, s.event, state_);
    }
    time_ = std::max(time_, t_end);
    return count;
  }
  std::uint64_t run_until(double t_end, Rng& rng) {
    return run_until(t_end, rng, [](double, const EventDescriptor&, const ParticleState&) {});
  }

  /// Rate table rebuilt from scratch for the current configuration.
  SumTree rebuild_rates() const;
  EventDescriptor decode(int slot) const;

private:
  double slot_rate(int slot) const;
  void refresh_site(int s);

  const Model* md_;
  ParticleState state_;
  double time_ = 0.0;
  SumTree tree_;
  std::vector<int> bond_offset_;  // bond (x,k), x >= 1, lives at bond_offset_[k-1] + x - 1
  int n_bonds_ = 0;
  std::vector<double> rate_left_, rate_right_;  // per k: particle moves left / right
  std::array<std::vector<double>, 2> create_, annihilate_;
};

struct Trajectory {
  Configuration initial;
  std::vector<std::pair<double, EventDescriptor>> events;
  std::array<long, 2> creations{0, 0};
  std::array<long, 2> annihilations{0, 0};
  double t_end = 0.0;
};

/// Runs a recorded simulation from cfg0 up to t_end.
Trajectory simulate(const Model& md, const Configuration& cfg0, double t_end, Rng& rng,
                    const std::function<void(double, const EventDescriptor&,
                                             const ParticleState&)>& observer = {});

enum class InitialKind { near_stationary, narrow_wedge };

Configuration sample_initial(int N, InitialKind kind, Rng& rng);

void write_events_jsonl(std::ostream& os, const Trajectory& tr);
/// Snapshot rows `time,site,spin`.
void write_snapshot_csv(std::ostream& os, double t, const Configuration& cfg, bool header);

}  // namespace openkpz
