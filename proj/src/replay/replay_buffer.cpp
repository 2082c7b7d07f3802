#include "scenerep/replay/replay_buffer.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <unordered_set>

namespace scenerep::replay {

namespace {

constexpr char kMagic[8] = {'S', 'R', 'R', 'E', 'P', 'L', 'A', 'Y'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ConfigError("replay snapshot truncated");
  return v;
}

template <class T>
void put_vec(std::ostream& out, const std::vector<T>& v) {
  put<std::uint64_t>(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <class T>
std::vector<T> get_vec(std::istream& in) {
  const auto n = get<std::uint64_t>(in);
  if (n > (1ull << 32)) throw ConfigError("replay snapshot corrupt");
  std::vector<T> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
  if (!in) throw ConfigError("replay snapshot truncated");
  return v;
}

// Shared states are written once and referenced by index.
class StateTable {
 public:
  std::uint64_t index(const StatePtr& s) {
    if (!s) return kNull;
    const auto [it, fresh] = ids_.emplace(s.get(), order_.size());
    if (fresh) order_.push_back(s.get());
    return it->second;
  }
  void write(std::ostream& out) const {
    put<std::uint64_t>(out, order_.size());
    for (const auto* s : order_) {
      put(out, s->dims);
      put_vec(out, s->motion);
      put_vec(out, s->routes);
      put_vec(out, s->motion_mask);
      put_vec(out, s->route_mask);
      put_vec(out, s->agent_mask);
      put_vec(out, s->agent_ids);
    }
  }
  static constexpr std::uint64_t kNull = ~0ull;

 private:
  std::map<const scene::SceneState*, std::uint64_t> ids_;
  std::vector<const scene::SceneState*> order_;
};

std::vector<StatePtr> read_states(std::istream& in) {
  const auto n = get<std::uint64_t>(in);
  std::vector<StatePtr> out;
  out.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    auto s = std::make_shared<scene::SceneState>(get<scene::SceneDims>(in));
    s->motion = get_vec<double>(in);
    s->routes = get_vec<double>(in);
    s->motion_mask = get_vec<std::uint8_t>(in);
    s->route_mask = get_vec<std::uint8_t>(in);
    s->agent_mask = get_vec<std::uint8_t>(in);
    s->agent_ids = get_vec<int>(in);
    out.push_back(std::move(s));
  }
  return out;
}

void write_step(std::ostream& out, StateTable& table, const Step& s) {
  put(out, table.index(s.state));
  put(out, s.action);
  put(out, s.reward);
  put(out, table.index(s.next_state));
  put<std::uint8_t>(out, s.done);
}

Step read_step(std::istream& in, const std::vector<StatePtr>& states) {
  auto ref = [&](std::uint64_t i) -> StatePtr {
    if (i == StateTable::kNull) return nullptr;
    if (i >= states.size()) throw ConfigError("replay snapshot corrupt");
    return states[i];
  };
  Step s;
  s.state = ref(get<std::uint64_t>(in));
  s.action = get<RawAction>(in);
  s.reward = get<double>(in);
  s.next_state = ref(get<std::uint64_t>(in));
  s.done = get<std::uint8_t>(in) != 0;
  return s;
}

}  // namespace

ReplayBuffer::ReplayBuffer(std::size_t capacity, int horizon)
    : capacity_(capacity), horizon_(horizon) {
  if (capacity == 0) throw ConfigError("replay capacity must be positive");
  if (horizon < 1) throw ConfigError("future horizon must be positive");
}

void ReplayBuffer::emit(std::size_t queue_pos) {
  std::vector<StatePtr> states;
  std::vector<RawAction> actions;
  for (const auto& s : queue_) {
    states.push_back(s.state);
    actions.push_back(s.action);
  }
  Transition tr;
  tr.step = queue_[queue_pos];
  tr.window = scene::window_states(states, actions, queue_pos, horizon_);
  tr.id = next_id_++;
  items_.push_back(std::move(tr));
  if (items_.size() > capacity_) items_.pop_front();
}

void ReplayBuffer::push_step(Step step) {
  if (!step.state || !step.next_state) throw UsageError("push_step: missing state");
  if (step.reward != -1.0 && step.reward != 0.0 && step.reward != 1.0)
    throw UsageError("push_step: reward must be -1, 0 or +1");
  queue_.push_back(std::move(step));
  if (queue_.size() > static_cast<std::size_t>(horizon_)) {
    emit(0);
    queue_.pop_front();
  }
}

void ReplayBuffer::flush_episode() {
  for (std::size_t i = 0; i < queue_.size(); ++i) emit(i);
  queue_.clear();
}

std::vector<std::size_t> ReplayBuffer::sample(std::size_t batch_size, std::mt19937_64& rng) const {
  if (batch_size == 0) throw UsageError("sample: empty batch requested");
  if (batch_size > items_.size()) throw UsageError("sample: buffer smaller than batch");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<std::size_t> out;
  out.reserve(batch_size);
  while (out.size() < batch_size) {
    const std::size_t i = pick(rng);
    if (std::find(out.begin(), out.end(), i) == out.end()) out.push_back(i);
  }
  return out;
}

void ReplayBuffer::save(std::ostream& out) const {
  StateTable table;
  for (const auto& t : items_) {
    table.index(t.step.state);
    table.index(t.step.next_state);
    for (const auto& s : t.window.states) table.index(s);
  }
  for (const auto& s : queue_) {
    table.index(s.state);
    table.index(s.next_state);
  }
  out.write(kMagic, sizeof(kMagic));
  put(out, kVersion);
  put<std::uint64_t>(out, capacity_);
  put<std::int32_t>(out, horizon_);
  put(out, next_id_);
  table.write(out);
  put<std::uint64_t>(out, items_.size());
  for (const auto& t : items_) {
    write_step(out, table, t.step);
    put(out, t.id);
    for (const auto& s : t.window.states) put(out, table.index(s));
    for (const auto& a : t.window.actions) put(out, a);
    put_vec(out, t.window.state_valid);
    put_vec(out, t.window.action_valid);
  }
  put<std::uint64_t>(out, queue_.size());
  for (const auto& s : queue_) write_step(out, table, s);
  if (!out) throw std::runtime_error("replay snapshot write failed");
}

void ReplayBuffer::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  save(out);
}

ReplayBuffer ReplayBuffer::load(std::istream& in) {
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw ConfigError("not a replay snapshot");
  if (get<std::uint32_t>(in) != kVersion) throw ConfigError("unsupported replay snapshot version");
  const auto capacity = get<std::uint64_t>(in);
  const auto horizon = get<std::int32_t>(in);
  ReplayBuffer buf(capacity, horizon);
  buf.next_id_ = get<std::uint64_t>(in);
  const auto states = read_states(in);
  const auto n = get<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < n; ++i) {
    Transition t;
    t.step = read_step(in, states);
    t.id = get<std::uint64_t>(in);
    for (int k = 0; k <= horizon; ++k) {
      const auto idx = get<std::uint64_t>(in);
      if (idx >= states.size()) throw ConfigError("replay snapshot corrupt");
      t.window.states.push_back(states[idx]);
    }
    for (int k = 0; k < horizon; ++k) t.window.actions.push_back(get<RawAction>(in));
    t.window.state_valid = get_vec<std::uint8_t>(in);
    t.window.action_valid = get_vec<std::uint8_t>(in);
    buf.items_.push_back(std::move(t));
  }
  const auto q = get<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < q; ++i) buf.queue_.push_back(read_step(in, states));
  return buf;
}

ReplayBuffer ReplayBuffer::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  return load(in);
}

}  // namespace scenerep::replay
