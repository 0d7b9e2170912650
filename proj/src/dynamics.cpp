#include "openkpz/dynamics.hpp"

#include <cmath>
#include <ostream>

#include <json.hpp>

namespace openkpz {

Configuration Configuration::filled(int N, int spin) {
  Configuration c;
  c.N = N;
  c.spins.assign(N + 1, std::int8_t(spin));
  c.magnetization = long(spin) * (N + 1);
  return c;
}

Configuration Configuration::from_spins(const std::vector<int>& s) {
  Configuration c;
  c.N = int(s.size()) - 1;
  c.spins.resize(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != 1 && s[i] != -1) throw InputError("spins must be +1 or -1");
    c.spins[i] = std::int8_t(s[i]);
    c.magnetization += s[i];
  }
  return c;
}

bool Configuration::valid() const {
  if (int(spins.size()) != N + 1) return false;
  long m = 0;
  for (auto s : spins) {
    if (s != 1 && s != -1) return false;
    m += s;
  }
  return m == magnetization;
}

void apply_event(Configuration& cfg, const EventDescriptor& e) {
  if (e.kind == EventKind::exchange)
    cfg.exchange(e.x, e.x + e.k);
  else
    cfg.flip(e.site);
}

void apply_event(ParticleState& st, const EventDescriptor& e) {
  apply_event(st.cfg, e);
  if (e.kind == EventKind::boundary_flip && e.side == Side::minus)
    st.flux -= 2.0 * e.sign / std::sqrt(double(st.cfg.N));
}

namespace {

struct RateConstants {
  std::vector<double> left, right;  // exchange, particle moving left / right
  std::array<std::vector<double>, 2> create, annihilate;
};

RateConstants rate_constants(const Model& md) {
  const ModelParams& p = md.params;
  const double N = p.N;
  const double N2 = N * N;
  const double rN = std::sqrt(N);
  RateConstants rc;
  rc.left.resize(p.m);
  rc.right.resize(p.m);
  for (int k = 1; k <= p.m; ++k) {
    rc.left[k - 1] = 0.5 * N2 * p.a(k) * (1.0 + p.g(k) / rN);
    rc.right[k - 1] = 0.5 * N2 * p.a(k) * (1.0 - p.g(k) / rN);
  }
  for (Side s : {Side::minus, Side::plus}) {
    rc.create[int(s)].resize(p.m);
    rc.annihilate[int(s)].resize(p.m);
    for (int j = 1; j <= p.m; ++j) {
      rc.create[int(s)][j - 1] = N2 * md.boundary.plus(s, j);
      rc.annihilate[int(s)][j - 1] = N2 * md.boundary.minus(s, j);
    }
  }
  return rc;
}

int flip_site(int N, Side s, int j) { return s == Side::minus ? j : N - j + 1; }

}  // namespace

std::vector<EventDescriptor> enumerate_rates(const Configuration& cfg, const Model& md) {
  const RateConstants rc = rate_constants(md);
  const int N = cfg.N;
  const int m = md.m();
  std::vector<EventDescriptor> out;
  for (int k = 1; k <= m; ++k) {
    for (int x = 1; x + k <= N; ++x) {
      const int a = cfg[x], b = cfg[x + k];
      if (a == b) continue;
      EventDescriptor e;
      e.kind = EventKind::exchange;
      e.x = x;
      e.k = k;
      e.direction = a == -1 ? -1 : +1;
      e.rate = a == -1 ? rc.left[k - 1] : rc.right[k - 1];
      if (e.rate > 0.0) out.push_back(e);
    }
  }
  for (Side s : {Side::minus, Side::plus}) {
    for (int j = 1; j <= m; ++j) {
      EventDescriptor e;
      e.kind = EventKind::boundary_flip;
      e.side = s;
      e.j = j;
      e.site = flip_site(N, s, j);
      e.sign = cfg[e.site] == -1 ? +1 : -1;
      e.rate = e.sign > 0 ? rc.create[int(s)][j - 1] : rc.annihilate[int(s)][j - 1];
      if (e.rate > 0.0) out.push_back(e);
    }
  }
  return out;
}

double generator_apply(const std::function<double(const Configuration&)>& f,
                       const Configuration& cfg, const Model& md) {
  const double f0 = f(cfg);
  double acc = 0.0;
  Configuration work = cfg;
  for (const auto& e : enumerate_rates(cfg, md)) {
    apply_event(work, e);
    acc += e.rate * (f(work) - f0);
    apply_event(work, e);  // both event kinds are involutions
  }
  return acc;
}

double generator_apply(const std::function<double(const ParticleState&)>& f,
                       const ParticleState& st, const Model& md) {
  const double f0 = f(st);
  double acc = 0.0;
  for (const auto& e : enumerate_rates(st.cfg, md)) {
    ParticleState work = st;
    apply_event(work, e);
    acc += e.rate * (f(work) - f0);
  }
  return acc;
}

SumTree::SumTree(int n) : n_(n) {
  while (leaves_ < std::max(n, 1)) leaves_ *= 2;
  tree_.assign(2 * leaves_, 0.0);
}

void SumTree::set(int i, double r) {
  int node = leaves_ + i;
  if (tree_[node] == r) return;
  tree_[node] = r;
  for (node >>= 1; node >= 1; node >>= 1) tree_[node] = tree_[2 * node] + tree_[2 * node + 1];
}

int SumTree::find(double u) const {
  int node = 1;
  while (node < leaves_) {
    const double L = tree_[2 * node];
    const double R = tree_[2 * node + 1];
    if (u < L || R <= 0.0) {
      node = 2 * node;
    } else {
      u -= L;
      node = 2 * node + 1;
    }
  }
  return node - leaves_;
}

Simulator::Simulator(const Model& md, Configuration cfg0) : md_(&md) {
  if (cfg0.N != md.N()) throw InputError("configuration size does not match N");
  state_.cfg = std::move(cfg0);
  const int N = md.N();
  const int m = md.m();
  bond_offset_.resize(m);
  for (int k = 1; k <= m; ++k) {
    bond_offset_[k - 1] = n_bonds_;
    n_bonds_ += N - k;  // bonds (x, x+k) with 1 <= x
  }
  const RateConstants rc = rate_constants(md);
  rate_left_ = rc.left;
  rate_right_ = rc.right;
  create_ = rc.create;
  annihilate_ = rc.annihilate;
  tree_ = rebuild_rates();
}

double Simulator::slot_rate(int slot) const {
  const Configuration& c = state_.cfg;
  if (slot < n_bonds_) {
    int k = 1;
    while (k < md_->m() && slot >= bond_offset_[k]) ++k;
    const int x = slot - bond_offset_[k - 1] + 1;
    const int a = c[x], b = c[x + k];
    if (a == b) return 0.0;
    return a == -1 ? rate_left_[k - 1] : rate_right_[k - 1];
  }
  const int idx = slot - n_bonds_;
  const Side s = idx < md_->m() ? Side::minus : Side::plus;
  const int j = idx % md_->m() + 1;
  const int site = flip_site(c.N, s, j);
  return c[site] == -1 ? create_[int(s)][j - 1] : annihilate_[int(s)][j - 1];
}

SumTree Simulator::rebuild_rates() const {
  const int n = n_bonds_ + 2 * md_->m();
  SumTree t(n);
  for (int i = 0; i < n; ++i) t.set(i, slot_rate(i));
  return t;
}

EventDescriptor Simulator::decode(int slot) const {
  const Configuration& c = state_.cfg;
  EventDescriptor e;
  e.rate = slot_rate(slot);
  if (slot < n_bonds_) {
    int k = 1;
    while (k < md_->m() && slot >= bond_offset_[k]) ++k;
    e.kind = EventKind::exchange;
    e.k = k;
    e.x = slot - bond_offset_[k - 1] + 1;
    e.direction = c[e.x] == -1 ? -1 : +1;
    return e;
  }
  const int idx = slot - n_bonds_;
  e.kind = EventKind::boundary_flip;
  e.side = idx < md_->m() ? Side::minus : Side::plus;
  e.j = idx % md_->m() + 1;
  e.site = flip_site(c.N, e.side, e.j);
  e.sign = c[e.site] == -1 ? +1 : -1;
  return e;
}

Simulator::Step Simulator::propose(Rng& rng) const {
  const double total = tree_.total();
  if (!(total > 0.0)) throw ModelError("absorbing state: total rate is zero");
  Step s;
  s.dt = exponential(rng, total);
  const int slot = tree_.find(uniform01(rng) * total);
  s.event = decode(slot);
  return s;
}

void Simulator::refresh_site(int s) {
  const int N = state_.cfg.N;
  const int m = md_->m();
  for (int k = 1; k <= m; ++k) {
    const int off = bond_offset_[k - 1] - 1;
    if (s - k >= 1) tree_.set(off + s - k, slot_rate(off + s - k));
    if (s >= 1 && s + k <= N) tree_.set(off + s, slot_rate(off + s));
  }
  if (s >= 1 && s <= m) tree_.set(n_bonds_ + s - 1, slot_rate(n_bonds_ + s - 1));
  if (s >= N - m + 1 && s <= N) {
    const int j = N - s + 1;
    tree_.set(n_bonds_ + m + j - 1, slot_rate(n_bonds_ + m + j - 1));
  }
}

void Simulator::apply(const Step& s) {
  time_ += s.dt;
  apply_event(state_, s.event);
  if (s.event.kind == EventKind::exchange) {
    refresh_site(s.event.x);
    refresh_site(s.event.x + s.event.k);
  } else {
    refresh_site(s.event.site);
  }
}

Trajectory simulate(const Model& md, const Configuration& cfg0, double t_end, Rng& rng,
                    const std::function<void(double, const EventDescriptor&,
                                             const ParticleState&)>& observer) {
  if (t_end > md.params.T_f) throw InputError("T_end exceeds T_f");
  Trajectory tr;
  tr.initial = cfg0;
  tr.t_end = t_end;
  Simulator sim(md, cfg0);
  sim.run_until(t_end, rng, [&](double t, const EventDescriptor& e, const ParticleState& st) {
    tr.events.emplace_back(t, e);
    if (e.kind == EventKind::boundary_flip) {
      if (e.sign > 0)
        ++tr.creations[int(e.side)];
      else
        ++tr.annihilations[int(e.side)];
    }
    if (observer) observer(t, e, st);
  });
  return tr;
}

Configuration sample_initial(int N, InitialKind kind, Rng& rng) {
  if (kind == InitialKind::narrow_wedge) return Configuration::filled(N, -1);
  Configuration c = Configuration::filled(N, -1);
  for (int x = 1; x <= N; ++x)
    if (rng() >> 63) c.flip(x);
  return c;
}

void write_events_jsonl(std::ostream& os, const Trajectory& tr) {
  for (const auto& [t, e] : tr.events) {
    nlohmann::json j;
    j["t"] = t;
    j["rate"] = e.rate;
    if (e.kind == EventKind::exchange) {
      j["kind"] = "exchange";
      j["x"] = e.x;
      j["k"] = e.k;
      j["direction"] = e.direction;
    } else {
      j["kind"] = "boundary_flip";
      j["side"] = e.side == Side::minus ? "-" : "+";
      j["j"] = e.j;
      j["site"] = e.site;
      j["sign"] = e.sign;
    }
    os << j.dump() << '\n';
  }
}

void write_snapshot_csv(std::ostream& os, double t, const Configuration& cfg, bool header) {
  os.precision(17);
  if (header) os << "time,site,spin\n";
  for (int x = 0; x <= cfg.N; ++x) os << t << ',' << x << ',' << int(cfg[x]) << '\n';
}

}  // namespace openkpz
