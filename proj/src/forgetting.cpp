#include "lfsal/forgetting.hpp"

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>

#include "json.hpp"

namespace lfsal {

void ForgettingConfig::validate() const {
  if (delta <= 0.0 || delta >= 1.0) {
    throw ConfigError("forgetting margin delta must lie in (0,1), got " +
                      std::to_string(delta));
  }
  if (a <= 0.0) {
    throw ConfigError("confidence descent coefficient a must be positive, got " +
                      std::to_string(a));
  }
}

Tensor transform_matrix(const Tensor& s, const Tensor& label, double delta) {
  require_same_shape(s, label, "transform_matrix");
  Tensor t(s.shape());
  for (std::int64_t i = 0; i < s.size(); ++i) {
    t[i] = std::abs(s[i] - label[i]) <= delta ? 1.0 : 0.0;
  }
  return t;
}

Tensor confidence_weight(const Tensor& counts, double a) {
  Tensor m(counts.shape());
  for (std::int64_t i = 0; i < counts.size(); ++i) {
    // 2/(1+exp(x)) written via exp(-x) so huge counts saturate to 0 finitely;
    // at x = 0 this is exactly 2 * 1 / 2 = 1.
    const double x = a * counts[i] * counts[i];
    const double e = std::exp(-x);
    m[i] = 2.0 * e / (1.0 + e);
  }
  return m;
}

ForgettingState::ForgettingState(ForgettingConfig cfg) : cfg_(cfg) { cfg_.validate(); }

std::vector<std::string> ForgettingState::ids() const {
  std::vector<std::string> out;
  out.reserve(state_.size());
  for (const auto& [id, _] : state_) out.push_back(id);
  return out;
}

void ForgettingState::update(const std::string& id, const Tensor& s_f, const Tensor& s_r,
                             const Tensor& label, int epoch) {
  require_same_shape(s_f, s_r, "forgetting update");
  Tensor t_f = transform_matrix(s_f, label, cfg_.delta);
  Tensor t_r = transform_matrix(s_r, label, cfg_.delta);

  auto it = state_.find(id);
  if (it == state_.end()) {
    // First presentation: seed T, start all counts at zero.
    SampleForgetting s;
    s.g_f = Tensor(label.shape());
    s.g_r = Tensor(label.shape());
    s.first_learn_f = Tensor::full(label.shape(), -1.0);
    s.first_learn_r = Tensor::full(label.shape(), -1.0);
    for (std::int64_t i = 0; i < label.size(); ++i) {
      if (t_f[i] == 1.0) s.first_learn_f[i] = epoch;
      if (t_r[i] == 1.0) s.first_learn_r[i] = epoch;
    }
    s.t_f = std::move(t_f);
    s.t_r = std::move(t_r);
    s.last_epoch = epoch;
    state_.emplace(id, std::move(s));
    return;
  }

  SampleForgetting& s = it->second;
  if (epoch <= s.last_epoch) {
    throw StateError("sample '" + id + "' already updated at epoch " +
                     std::to_string(s.last_epoch) + "; got epoch " +
                     std::to_string(epoch));
  }
  for (std::int64_t i = 0; i < label.size(); ++i) {
    if (t_f[i] < s.t_f[i]) s.g_f[i] += 1.0;  // learned -> forgotten
    if (t_r[i] < s.t_r[i]) s.g_r[i] += 1.0;
    if (s.first_learn_f[i] < 0.0 && t_f[i] == 1.0) s.first_learn_f[i] = epoch;
    if (s.first_learn_r[i] < 0.0 && t_r[i] == 1.0) s.first_learn_r[i] = epoch;
  }
  s.t_f = std::move(t_f);
  s.t_r = std::move(t_r);
  s.last_epoch = epoch;
}

const SampleForgetting& ForgettingState::at(const std::string& id) const {
  const auto it = state_.find(id);
  if (it == state_.end()) {
    throw StateError("no forgetting state for sample '" + id + "'");
  }
  return it->second;
}

Tensor ForgettingState::weight_f(const std::string& id) const {
  return confidence_weight(at(id).g_f, cfg_.a);
}

Tensor ForgettingState::weight_r(const std::string& id) const {
  return confidence_weight(at(id).g_r, cfg_.a);
}

void ForgettingState::save(std::ostream& out) const {
  nlohmann::json header = {{"kind", "forgetting"},
                           {"delta", cfg_.delta},
                           {"a", cfg_.a},
                           {"count", state_.size()}};
  out << header.dump() << '\n';
  for (const auto& [id, s] : state_) {
    nlohmann::json entry = {{"id", id}, {"last_epoch", s.last_epoch}};
    out << entry.dump() << '\n';
    write_tensor_record(out, "t_f", s.t_f, Dtype::f64);
    write_tensor_record(out, "t_r", s.t_r, Dtype::f64);
    write_tensor_record(out, "g_f", s.g_f, Dtype::f64);
    write_tensor_record(out, "g_r", s.g_r, Dtype::f64);
    write_tensor_record(out, "first_learn_f", s.first_learn_f, Dtype::f64);
    write_tensor_record(out, "first_learn_r", s.first_learn_r, Dtype::f64);
  }
  if (!out) throw IoError("failed writing forgetting state");
}

ForgettingState ForgettingState::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("missing forgetting state header");
  nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
  if (header.is_discarded() || header.value("kind", "") != "forgetting") {
    throw IoError("malformed forgetting state header");
  }
  ForgettingConfig cfg;
  cfg.delta = header["delta"].get<double>();
  cfg.a = header["a"].get<double>();
  ForgettingState state(cfg);
  const auto count = header["count"].get<std::size_t>();
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw IoError("truncated forgetting state");
    nlohmann::json entry = nlohmann::json::parse(line, nullptr, false);
    if (entry.is_discarded() || !entry.contains("id")) {
      throw IoError("malformed forgetting state entry: " + line);
    }
    SampleForgetting s;
    s.last_epoch = entry["last_epoch"].get<int>();
    auto read_into = [&in](const char* want) {
      auto rec = read_tensor_record(in);
      if (!rec || rec->name != want) {
        throw IoError("forgetting state: expected tensor '" + std::string(want) + "'");
      }
      return std::move(rec->tensor);
    };
    s.t_f = read_into("t_f");
    s.t_r = read_into("t_r");
    s.g_f = read_into("g_f");
    s.g_r = read_into("g_r");
    s.first_learn_f = read_into("first_learn_f");
    s.first_learn_r = read_into("first_learn_r");
    state.state_.emplace(entry["id"].get<std::string>(), std::move(s));
  }
  return state;
}

Var guided_fuse(Tape& tape, Var s_f, Var s_r, const Tensor& m_f, const Tensor& m_r,
                Var weights, Var bias, int out_h, int out_w) {
  auto as_chw = [](const Tensor& m) {
    if (m.ndim() == 3) return m;
    return Tensor::from({1, m.dim(0), m.dim(1)},
                        std::vector<double>(m.data(), m.data() + m.size()));
  };
  // Snapshot the kernel size before pushing nodes: pushes may reallocate the
  // tape's storage and invalidate references into it.
  int kh = 0;
  {
    const Tensor& wt = tape.value(weights);
    if (wt.ndim() != 4 || wt.dim(0) != 1 || wt.dim(1) != 2 || wt.dim(2) % 2 == 0 ||
        wt.dim(3) % 2 == 0) {
      throw ShapeError("fusion weights must be (1,2,odd,odd), got " + wt.shape_string());
    }
    kh = wt.dim(2);
  }
  Var weighted_f = tape.mul_const(s_f, as_chw(m_f));
  Var weighted_r = tape.mul_const(s_r, as_chw(m_r));
  Var mixed = tape.conv2d(tape.concat_channels({weighted_f, weighted_r}), weights, bias,
                          /*stride=*/1, /*pad=*/kh / 2);
  const int mh = tape.value(mixed).dim(1);
  const int mw = tape.value(mixed).dim(2);
  if (mh != out_h || mw != out_w) {
    mixed = tape.upsample_bilinear(mixed, out_h, out_w);
  }
  return tape.sigmoid(mixed);
}

}  // namespace lfsal
