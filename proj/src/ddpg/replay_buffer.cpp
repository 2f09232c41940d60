#include <cmath>
#include <unordered_set>

#include "tidealloc/ddpg.hpp"

namespace tidealloc::ddpg {

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::size_t n_step, double gamma_td)
    : capacity_(capacity), n_step_(n_step), gamma_(gamma_td) {
  if (capacity == 0) throw ValidationError("replay buffer capacity must be positive");
  if (n_step == 0) throw ValidationError("n_step must be at least 1");
  storage_.reserve(std::min<std::size_t>(capacity, 4096));
}

void ReplayBuffer::push(const env::Observation& s, double a, double r,
                        const env::Observation* s_next, bool done) {
  if (!done && s_next == nullptr) {
    throw std::invalid_argument("replay buffer: non-terminal step without a next state");
  }
  pending_.push_back({s, a, r, s_next ? *s_next : env::Observation{}, done, episode_step_++});
  if (done) {
    while (!pending_.empty()) emit_front();
    episode_step_ = 0;
    return;
  }
  if (pending_.size() == n_step_) emit_front();
}

void ReplayBuffer::discard_pending() {
  pending_.clear();
  episode_step_ = 0;
}

void ReplayBuffer::emit_front() {
  const std::size_t k = std::min(n_step_, pending_.size());
  Transition t;
  const RawStep& first = pending_.front();
  const RawStep& last = pending_[k - 1];
  t.state = first.state;
  t.action = first.action;
  double discount = 1.0;
  for (std::size_t i = 0; i < k; ++i) {
    t.reward += discount * pending_[i].reward;
    discount *= gamma_;
  }
  t.done = last.done;
  if (!t.done) t.next_state = last.next_state;
  t.steps = k;
  t.episode_step = first.episode_step;
  pending_.pop_front();

  if (storage_.size() < capacity_) {
    storage_.push_back(std::move(t));
  } else {
    storage_[cursor_] = std::move(t);
    cursor_ = (cursor_ + 1) % capacity_;
  }
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t batch_size,
                                                    std::mt19937_64& rng) const {
  if (batch_size == 0) throw std::invalid_argument("replay buffer: empty batch requested");
  if (batch_size > storage_.size()) {
    throw ProtocolError("replay buffer holds " + std::to_string(storage_.size()) +
                        " transitions, batch needs " + std::to_string(batch_size));
  }
  std::uniform_int_distribution<std::size_t> pick(0, storage_.size() - 1);
  std::unordered_set<std::size_t> chosen;
  std::vector<const Transition*> out;
  out.reserve(batch_size);
  while (out.size() < batch_size) {
    const std::size_t i = pick(rng);
    if (chosen.insert(i).second) out.push_back(&storage_[i]);
  }
  return out;
}

std::vector<const Transition*> ReplayBuffer::contents() const {
  std::vector<const Transition*> out;
  out.reserve(storage_.size());
  const std::size_t start = storage_.size() < capacity_ ? 0 : cursor_;
  for (std::size_t i = 0; i < storage_.size(); ++i) {
    out.push_back(&storage_[(start + i) % storage_.size()]);
  }
  return out;
}

}  // namespace tidealloc::ddpg
