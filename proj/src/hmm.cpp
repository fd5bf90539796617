#include "seqsteal/hmm.hpp"

#include <cmath>
#include <fstream>
#include <functional>

#include "seqsteal/errors.hpp"

namespace seqsteal {

namespace {

constexpr double kStochasticTol = 1e-12;

void check_distribution(const Eigen::VectorXd& v, const std::string& what) {
  if (v.size() == 0) throw ValidationError(what + " is empty");
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!(v[i] >= 0.0) || !std::isfinite(v[i])) {
      throw ValidationError(what + " has a negative or non-finite entry");
    }
  }
  if (std::abs(v.sum() - 1.0) > kStochasticTol) {
    throw ValidationError(what + " does not sum to 1 (sum = " + std::to_string(v.sum()) + ")");
  }
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols,
                                 const std::string& what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    throw ValidationError(what + " must have " + std::to_string(rows) + " rows");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ValidationError(what + " row " + std::to_string(r) + " must have " +
                            std::to_string(cols) + " entries");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace

Hmm::Hmm(Eigen::VectorXd mu, Eigen::MatrixXd trans, Eigen::MatrixXd emit, int seq_len)
    : mu_(std::move(mu)), trans_(std::move(trans)), emit_(std::move(emit)), seq_len_(seq_len) {
  if (seq_len_ < 1) throw ValidationError("sequence length must be positive");
  const Eigen::Index s = mu_.size();
  if (s < 1) throw ValidationError("need at least one hidden state");
  if (trans_.rows() != s || trans_.cols() != s) throw ValidationError("trans must be S x S");
  if (emit_.cols() != s || emit_.rows() < 1) throw ValidationError("emit must be O x S");
  check_distribution(mu_, "mu");
  for (Eigen::Index c = 0; c < s; ++c) {
    check_distribution(trans_.col(c), "trans column " + std::to_string(c));
    check_distribution(emit_.col(c), "emit column " + std::to_string(c));
  }
}

Hmm Hmm::random(int num_states, int alphabet_size, int seq_len, std::uint64_t seed) {
  if (num_states < 1 || alphabet_size < 1 || seq_len < 1) {
    throw ParameterError("S, O and T must be positive");
  }
  Rng rng(seed);
  auto draw = [&](int n) {
    auto v = uniform_simplex(n, rng);
    return Eigen::Map<Eigen::VectorXd>(v.data(), n).eval();
  };
  Eigen::VectorXd mu = draw(num_states);
  Eigen::MatrixXd trans(num_states, num_states);
  Eigen::MatrixXd emit(alphabet_size, num_states);
  for (int s = 0; s < num_states; ++s) trans.col(s) = draw(num_states);
  for (int s = 0; s < num_states; ++s) emit.col(s) = draw(alphabet_size);
  return Hmm(std::move(mu), std::move(trans), std::move(emit), seq_len);
}

void Hmm::check_history(const TokenString& h) const {
  if (static_cast<int>(h.size()) > seq_len_) throw LengthError("history longer than T");
  check_tokens(h, alphabet_size());
}

Eigen::VectorXd Hmm::forward(const TokenString& h) const {
  Eigen::VectorXd a = mu_;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (i > 0) a = trans_ * a;
    a = a.cwiseProduct(emit_.row(h[i]).transpose());
  }
  return a;
}

double Hmm::sequence_prob(const TokenString& x) const {
  if (static_cast<int>(x.size()) != seq_len_) {
    throw LengthError("sequence_prob expects length " + std::to_string(seq_len_) + ", got " +
                      std::to_string(x.size()));
  }
  check_tokens(x, alphabet_size());
  return forward(x).sum();
}

double Hmm::prefix_prob(const TokenString& h) const {
  check_history(h);
  return h.empty() ? 1.0 : forward(h).sum();
}

Eigen::VectorXd Hmm::predictive_state(const TokenString& h) const {
  check_history(h);
  if (h.empty()) return mu_;
  if (static_cast<int>(h.size()) >= seq_len_) throw LengthError("no state follows a full-length string");
  Eigen::VectorXd a = forward(h);
  const double p = a.sum();
  if (!(p > 0.0)) throw ConditioningError("conditioning on a zero-probability prefix");
  return trans_ * (a / p);
}

std::vector<double> Hmm::conditional_future_dist(const TokenString& h) const {
  check_history(h);
  const int remaining = seq_len_ - static_cast<int>(h.size());
  if (remaining <= 0) throw LengthError("conditional_future_dist needs |h| < T");
  const Eigen::VectorXd start = predictive_state(h);
  const int o_count = alphabet_size();
  std::vector<double> out(count_strings(o_count, remaining), 0.0);
  // Depth-first over futures; `q` carries the joint Pr[f so far, next state].
  std::function<void(const Eigen::VectorXd&, int, std::uint64_t)> walk =
      [&](const Eigen::VectorXd& q, int depth, std::uint64_t index) {
        for (int o = 0; o < o_count; ++o) {
          Eigen::VectorXd a = q.cwiseProduct(emit_.row(o).transpose());
          const std::uint64_t child = index * static_cast<std::uint64_t>(o_count) + static_cast<std::uint64_t>(o);
          if (depth + 1 == remaining) {
            out[child] = a.sum();
          } else {
            walk(trans_ * a, depth + 1, child);
          }
        }
      };
  walk(start, 0, 0);
  return out;
}

TokenString Hmm::conditional_sample(const TokenString& h, Rng& rng) const {
  check_history(h);
  const int remaining = seq_len_ - static_cast<int>(h.size());
  if (remaining <= 0) throw LengthError("conditional_sample needs |h| < T");
  Eigen::VectorXd q = predictive_state(h);
  int state = sample_index(std::span<const double>(q.data(), static_cast<std::size_t>(q.size())), rng);
  TokenString f;
  f.reserve(static_cast<std::size_t>(remaining));
  for (int i = 0; i < remaining; ++i) {
    if (i > 0) {
      auto col = trans_.col(state);
      state = sample_index(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())), rng);
    }
    auto e = emit_.col(state);
    f.push_back(sample_index(std::span<const double>(e.data(), static_cast<std::size_t>(e.size())), rng));
  }
  return f;
}

TokenString Hmm::conditional_sample(const TokenString& h, std::uint64_t seed) const {
  Rng rng(seed);
  return conditional_sample(h, rng);
}

std::optional<std::vector<double>> Hmm::exact_next_char(const TokenString& h) const {
  if (static_cast<int>(h.size()) >= seq_len_) throw LengthError("no next character after T tokens");
  Eigen::VectorXd p = emit_ * predictive_state(h);
  return std::vector<double>(p.data(), p.data() + p.size());
}

OndimMatrix Hmm::ondim_matrix(int t) const {
  if (t <= 0 || t >= seq_len_) throw ParameterError("ondim_matrix needs 0 < t < T");
  const int o_count = alphabet_size();
  const auto rows = count_strings(o_count, t);
  const auto cols = count_strings(o_count, seq_len_ - t);
  OndimMatrix out;
  out.t = t;
  out.M = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  out.null_rows.assign(rows, false);
  for (std::uint64_t r = 0; r < rows; ++r) {
    TokenString h = string_at(r, o_count, t);
    if (!(prefix_prob(h) > 0.0)) {
      out.null_rows[r] = true;
      continue;
    }
    auto dist = conditional_future_dist(h);
    for (std::uint64_t c = 0; c < cols; ++c) out.M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = dist[c];
  }
  return out;
}

nlohmann::json Hmm::to_json() const {
  nlohmann::json j;
  j["S"] = num_states();
  j["O"] = alphabet_size();
  j["T"] = seq_len_;
  j["mu"] = std::vector<double>(mu_.data(), mu_.data() + mu_.size());
  j["trans"] = matrix_to_json(trans_);
  j["emit"] = matrix_to_json(emit_);
  return j;
}

Hmm Hmm::from_json(const nlohmann::json& j) {
  try {
    const int s = j.at("S").get<int>();
    const int o = j.at("O").get<int>();
    const int t = j.at("T").get<int>();
    if (s < 1 || o < 1 || t < 1) throw ValidationError("S, O and T must be positive");
    auto mu_vec = j.at("mu").get<std::vector<double>>();
    if (static_cast<int>(mu_vec.size()) != s) throw ValidationError("mu must have S entries");
    Eigen::VectorXd mu = Eigen::Map<Eigen::VectorXd>(mu_vec.data(), s);
    Eigen::MatrixXd trans = matrix_from_json(j.at("trans"), s, s, "trans");
    Eigen::MatrixXd emit = matrix_from_json(j.at("emit"), o, s, "emit");
    return Hmm(std::move(mu), std::move(trans), std::move(emit), t);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed HMM JSON: ") + e.what());
  }
}

void Hmm::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << to_json().dump(2) << '\n';
}

Hmm Hmm::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed HMM JSON: ") + e.what());
  }
  return from_json(j);
}

}  // namespace seqsteal
