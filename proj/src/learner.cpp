#include "seqsteal/learner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "seqsteal/dimred.hpp"
#include "seqsteal/errors.hpp"
#include "seqsteal/lp.hpp"
#include "seqsteal/spanner.hpp"

namespace seqsteal {

namespace {

void push_unique(std::vector<TokenString>& out, std::set<TokenString>& seen, const TokenString& h) {
  if (seen.insert(h).second) out.push_back(h);
}

std::vector<TokenString> extend_all(const std::vector<TokenString>& hs, int alphabet_size) {
  std::vector<TokenString> out;
  for (const auto& h : hs) {
    for (Token o = 0; o < alphabet_size; ++o) out.push_back(append(h, o));
  }
  return out;
}

nlohmann::json strings_json(const std::vector<TokenString>& xs) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& x : xs) j.push_back(x);
  return j;
}

std::vector<TokenString> strings_from(const nlohmann::json& j) {
  std::vector<TokenString> out;
  for (const auto& x : j) out.push_back(x.get<TokenString>());
  return out;
}

nlohmann::json vector_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vector_from(const nlohmann::json& j) {
  auto v = j.get<std::vector<double>>();
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

Eigen::MatrixXd next_char_table(LazyPdfTree& oracle, const std::vector<TokenString>& histories) {
  if (histories.empty()) throw ParameterError("next_char_table needs at least one history");
  const std::size_t len = histories.front().size();
  if (static_cast<int>(len) >= oracle.length()) throw LengthError("next_char_table needs histories shorter than T");
  Eigen::MatrixXd P(static_cast<Eigen::Index>(histories.size()), oracle.alphabet_size());
  for (std::size_t i = 0; i < histories.size(); ++i) {
    if (histories[i].size() != len) throw LengthError("next_char_table needs histories of equal length");
    const auto& row = oracle.node_weights(histories[i]);
    for (int o = 0; o < oracle.alphabet_size(); ++o) {
      P(static_cast<Eigen::Index>(i), o) = row[static_cast<std::size_t>(o)];
    }
  }
  return P;
}

double spanner_threshold(const LearnerParams& params, int S) {
  const double k = static_cast<double>(params.k);
  return std::max(params.gamma / (100.0 * S * k * k), 1e-12);
}

std::vector<TokenString> build_spanner_step(LazyPdfTree& oracle, int t, const std::vector<TokenString>& current,
                                            int S, const LearnerParams& params, Rng& rng, StepStats* stats) {
  if (S < 1) throw ParameterError("S must be at least 1");
  if (t < 0 || t >= oracle.length()) throw ParameterError("build_spanner_step needs 0 <= t < T");
  if (current.empty() || static_cast<int>(current.size()) > S) {
    throw ParameterError("build_spanner_step needs between 1 and S current histories");
  }

  std::vector<TokenString> candidates;
  std::set<TokenString> seen;
  for (const auto& h : extend_all(current, oracle.alphabet_size())) push_unique(candidates, seen, h);
  for (int i = 0; i < params.N; ++i) {
    push_unique(candidates, seen, prefix(oracle.cond_sample({}, rng), static_cast<std::size_t>(t) + 1));
  }

  SketchBundle bundle = build_vectors(oracle, t + 1, candidates, params.k, rng);
  Eigen::MatrixXd cols(bundle.w.size(), static_cast<Eigen::Index>(candidates.size()));
  for (std::size_t i = 0; i < candidates.size(); ++i) cols.col(static_cast<Eigen::Index>(i)) = bundle.u[i];

  const double threshold = spanner_threshold(params, S);
  SpannerResult sp = robust_spanner(cols, S, threshold, S);
  if (sp.indices.empty()) throw Error("spanner step " + std::to_string(t + 1) + " kept no direction");

  std::vector<TokenString> chosen;
  for (int idx : sp.indices) chosen.push_back(candidates[static_cast<std::size_t>(idx)]);

  if (stats) {
    std::set<TokenString> distinct(bundle.futures.begin(), bundle.futures.end());
    stats->t = t + 1;
    stats->candidates = static_cast<int>(candidates.size());
    stats->distinct_futures = static_cast<int>(distinct.size());
    stats->rank = sp.rank;
    stats->rank_capped = sp.rank_capped;
    stats->exceeded_s = sp.exceeded_s;
    stats->chosen = static_cast<int>(chosen.size());
    stats->swaps = sp.swaps;
    stats->condition_warnings = sp.condition_warnings;
    stats->threshold = threshold;
    stats->residual_bound = sp.residual_bound;
    if (params.verify_spanners) {
      stats->verified_residual = verify_spanner(cols, sp.indices, 2.0, sp.residual_bound).max_residual;
    }
  }
  return chosen;
}

LearnedRepresentation learn(LazyPdfTree& oracle, int S, const LearnerParams& params) {
  if (S < 1) throw ParameterError("S must be at least 1");
  if (params.k < 1 || params.N < 0) throw ParameterError("need k >= 1 and N >= 0");
  if (!(params.gamma > 0.0) || !(params.eta > 0.0)) throw ParameterError("gamma and eta must be positive");
  const int O = oracle.alphabet_size();
  const int T = oracle.length();

  LearnedRepresentation rep;
  rep.S = S;
  rep.O = O;
  rep.T = T;
  rep.params = params;
  rep.spanner_threshold = seqsteal::spanner_threshold(params, S);
  rep.levels.resize(static_cast<std::size_t>(T) + 1);
  rep.levels[0].H = {TokenString{}};

  Rng rng(params.seed);
  for (int t = 0; t < T; ++t) {
    const Level& prev = rep.levels[static_cast<std::size_t>(t)];
    Level next;
    next.t = t + 1;
    next.P = next_char_table(oracle, prev.H);
    StepStats stats;
    next.H = build_spanner_step(oracle, t, prev.H, S, params, rng, &stats);
    if (static_cast<int>(next.H.size()) > S) throw Error("internal: spanner returned more than S histories");
    rep.steps.push_back(stats);

    std::set<TokenString> seen;
    for (const auto& h : next.H) push_unique(next.B, seen, h);
    for (const auto& h : extend_all(prev.H, O)) push_unique(next.B, seen, h);

    SketchBundle bundle = build_vectors(oracle, t + 1, next.B, params.k, rng);
    next.X = std::move(bundle.futures);
    for (std::size_t i = 0; i < next.B.size(); ++i) next.u[next.B[i]] = std::move(bundle.u[i]);
    next.w = std::move(bundle.w);
    rep.levels[static_cast<std::size_t>(t) + 1] = std::move(next);
  }
  rep.budget = oracle.budget();
  return rep;
}

void LearnedRepresentation::validate(double floor) const {
  auto fail = [](const std::string& msg) { throw ValidationError("representation: " + msg); };
  if (S < 1 || O < 1 || T < 1) fail("S, O, T must be positive");
  if (levels.size() != static_cast<std::size_t>(T) + 1) fail("expected T + 1 levels");
  if (levels[0].H != std::vector<TokenString>{TokenString{}}) fail("level 0 must hold only the empty history");
  for (int t = 1; t <= T; ++t) {
    const Level& L = levels[static_cast<std::size_t>(t)];
    const Level& prev = levels[static_cast<std::size_t>(t) - 1];
    const std::string at = " at level " + std::to_string(t);
    if (L.t != t) fail("level index mismatch" + at);
    if (L.H.empty() || static_cast<int>(L.H.size()) > S) fail("spanning set size outside [1, S]" + at);
    if (L.P.rows() != static_cast<Eigen::Index>(prev.H.size()) || L.P.cols() != O) fail("P has the wrong shape" + at);
    for (Eigen::Index i = 0; i < L.P.rows(); ++i) {
      if (std::abs(L.P.row(i).sum() - 1.0) > 1e-12) fail("P row does not sum to 1" + at);
      if (floor > 0.0 && L.P.row(i).minCoeff() < floor * (1.0 - 1e-12)) fail("P entry below the oracle floor" + at);
    }
    std::set<TokenString> b(L.B.begin(), L.B.end());
    for (const auto& h : L.H) {
      if (!b.count(h)) fail("H is not contained in B" + at);
    }
    for (const auto& h : extend_all(prev.H, O)) {
      if (!b.count(h)) fail("B misses an extension of the previous spanning set" + at);
    }
    const auto dim = static_cast<Eigen::Index>(L.X.size());
    if (dim == 0) fail("no sampled futures" + at);
    for (const auto& h : L.B) {
      if (static_cast<int>(h.size()) != t) fail("history of the wrong length in B" + at);
      check_tokens(h, O);
      auto it = L.u.find(h);
      if (it == L.u.end()) fail("missing sketch for '" + history_key(h) + "'" + at);
      if (it->second.size() != dim) fail("sketch dimension differs from |X|" + at);
    }
    for (const auto& x : L.X) {
      if (static_cast<int>(x.size()) != T - t) fail("future of the wrong length" + at);
    }
    if (L.w.size() != dim || !(L.w.minCoeff() > 0.0) || !L.w.allFinite()) fail("w must be positive with size |X|" + at);
  }
}

nlohmann::json LearnedRepresentation::to_json() const {
  nlohmann::json j;
  j["version"] = 1;
  j["S"] = S;
  j["O"] = O;
  j["T"] = T;
  j["params"] = {{"k", params.k},
                 {"N", params.N},
                 {"gamma", params.gamma},
                 {"eta", params.eta},
                 {"seed", params.seed},
                 {"verify_spanners", params.verify_spanners},
                 {"spanner_threshold", spanner_threshold}};
  j["levels"] = nlohmann::json::array();
  for (const auto& L : levels) {
    nlohmann::json lj;
    lj["t"] = L.t;
    lj["H"] = strings_json(L.H);
    nlohmann::json P = nlohmann::json::array();
    for (Eigen::Index i = 0; i < L.P.rows(); ++i) P.push_back(vector_json(L.P.row(i).transpose()));
    lj["P"] = P;
    lj["B"] = strings_json(L.B);
    lj["X"] = strings_json(L.X);
    nlohmann::json u = nlohmann::json::object();
    for (const auto& [h, v] : L.u) u[history_key(h)] = vector_json(v);
    lj["u"] = u;
    lj["w"] = vector_json(L.w);
    j["levels"].push_back(lj);
  }
  j["steps"] = nlohmann::json::array();
  for (const auto& s : steps) {
    j["steps"].push_back({{"t", s.t},
                          {"candidates", s.candidates},
                          {"distinct_futures", s.distinct_futures},
                          {"rank", s.rank},
                          {"rank_capped", s.rank_capped},
                          {"exceeded_s", s.exceeded_s},
                          {"chosen", s.chosen},
                          {"swaps", s.swaps},
                          {"condition_warnings", s.condition_warnings},
                          {"threshold", s.threshold},
                          {"residual_bound", s.residual_bound},
                          {"verified_residual", s.verified_residual}});
  }
  j["budget"] = {{"conditional_queries", budget.conditional_queries}, {"nodes_visited", budget.nodes_visited}};
  return j;
}

LearnedRepresentation LearnedRepresentation::from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != 1) throw ValidationError("unsupported representation version");
    LearnedRepresentation rep;
    rep.S = j.at("S").get<int>();
    rep.O = j.at("O").get<int>();
    rep.T = j.at("T").get<int>();
    const auto& p = j.at("params");
    rep.params.k = p.at("k").get<int>();
    rep.params.N = p.at("N").get<int>();
    rep.params.gamma = p.at("gamma").get<double>();
    rep.params.eta = p.at("eta").get<double>();
    rep.params.seed = p.at("seed").get<std::uint64_t>();
    rep.params.verify_spanners = p.value("verify_spanners", true);
    rep.spanner_threshold = p.value("spanner_threshold", seqsteal::spanner_threshold(rep.params, rep.S));
    for (const auto& lj : j.at("levels")) {
      Level L;
      L.t = lj.at("t").get<int>();
      L.H = strings_from(lj.at("H"));
      const auto& P = lj.at("P");
      const auto rows = static_cast<Eigen::Index>(P.size());
      L.P.resize(rows, rows ? static_cast<Eigen::Index>(P[0].size()) : 0);
      for (Eigen::Index i = 0; i < rows; ++i) {
        Eigen::VectorXd r = vector_from(P[static_cast<std::size_t>(i)]);
        if (r.size() != L.P.cols()) throw ValidationError("ragged P matrix");
        L.P.row(i) = r.transpose();
      }
      L.B = strings_from(lj.at("B"));
      L.X = strings_from(lj.at("X"));
      for (const auto& [key, v] : lj.at("u").items()) L.u[parse_history_key(key)] = vector_from(v);
      L.w = vector_from(lj.at("w"));
      rep.levels.push_back(std::move(L));
    }
    if (j.contains("steps")) {
      for (const auto& s : j.at("steps")) {
        StepStats st;
        st.t = s.at("t").get<int>();
        st.candidates = s.at("candidates").get<int>();
        st.distinct_futures = s.at("distinct_futures").get<int>();
        st.rank = s.at("rank").get<int>();
        st.rank_capped = s.at("rank_capped").get<bool>();
        st.exceeded_s = s.at("exceeded_s").get<bool>();
        st.chosen = s.at("chosen").get<int>();
        st.swaps = s.at("swaps").get<int>();
        st.condition_warnings = s.at("condition_warnings").get<int>();
        st.threshold = s.at("threshold").get<double>();
        st.residual_bound = s.at("residual_bound").get<double>();
        st.verified_residual = s.at("verified_residual").get<double>();
        rep.steps.push_back(st);
      }
    }
    if (j.contains("budget")) {
      rep.budget.conditional_queries = j["budget"].at("conditional_queries").get<std::uint64_t>();
      rep.budget.nodes_visited = j["budget"].at("nodes_visited").get<std::uint64_t>();
    }
    rep.validate();
    return rep;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed representation JSON: ") + e.what());
  }
}

void LearnedRepresentation::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << to_json().dump(1) << '\n';
}

LearnedRepresentation LearnedRepresentation::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

namespace {

// min ||D_h - y^T D_H||_1 over |y| <= bound with y^T D_H >= c' on `positive`.
bool representable(const std::vector<double>& target, const std::vector<std::vector<double>>& basis,
                   const std::vector<std::uint64_t>& positive, double bound, double c_prime, double max_residual) {
  const int m = static_cast<int>(basis.size());
  const int n = static_cast<int>(target.size());
  // Variables: y (boxed), then e+ and e- per future with D_h - y^T D_H = e+ - e-.
  LinearProgram lp(m + 2 * n);
  for (int i = 0; i < m; ++i) {
    lp.lower[static_cast<std::size_t>(i)] = -bound;
    lp.upper[static_cast<std::size_t>(i)] = bound;
  }
  lp.cost.tail(2 * n).setOnes();
  lp.A = Eigen::MatrixXd::Zero(n, m + 2 * n);
  for (int x = 0; x < n; ++x) {
    for (int i = 0; i < m; ++i) lp.A(x, i) = basis[static_cast<std::size_t>(i)][static_cast<std::size_t>(x)];
    lp.A(x, m + x) = 1.0;
    lp.A(x, m + n + x) = -1.0;
  }
  lp.sense.assign(static_cast<std::size_t>(n), RowSense::Equal);
  lp.rhs = target;
  // Positivity rows are added only once violated; an optimum of the smaller
  // program that satisfies all of them is optimal for the full one.
  std::vector<bool> active(positive.size(), false);
  Eigen::RowVectorXd row(m + 2 * n);
  for (;;) {
    LpSolution sol = solve_lp(lp);
    if (sol.status != LpStatus::Optimal) return false;
    bool added = false;
    for (std::size_t k = 0; k < positive.size(); ++k) {
      if (active[k]) continue;
      double value = 0.0;
      for (int i = 0; i < m; ++i) value += sol.x[i] * basis[static_cast<std::size_t>(i)][positive[k]];
      if (value >= c_prime) continue;
      row.setZero();
      for (int i = 0; i < m; ++i) row[i] = basis[static_cast<std::size_t>(i)][positive[k]];
      lp.add_row(row, RowSense::GreaterEqual, c_prime);
      active[k] = true;
      added = true;
    }
    if (!added) return sol.objective <= max_residual * (1.0 + 1e-9);
  }
}

}  // namespace

nlohmann::json AuditReport::to_json() const {
  nlohmann::json j;
  j["failing_fraction"] = failing_fraction;
  j["structure_ok"] = structure_ok;
  j["levels"] = nlohmann::json::array();
  for (const auto& l : levels) {
    j["levels"].push_back({{"t", l.t},
                           {"size_ok", l.size_ok},
                           {"w_max", l.w_max},
                           {"w_bound", l.w_bound},
                           {"w_ok", l.w_ok},
                           {"tested", l.tested},
                           {"failing", l.failing},
                           {"skipped", l.skipped}});
  }
  return j;
}

AuditReport audit_representation(const LearnedRepresentation& rep, LazyPdfTree& oracle, const AuditParams& params) {
  if (!(params.c > 0.0 && params.c < 1.0)) throw ParameterError("audit needs c in (0, 1)");
  if (rep.O != oracle.alphabet_size() || rep.T != oracle.length()) {
    throw ParameterError("representation and oracle disagree on O or T");
  }
  AuditReport out;
  out.structure_ok = true;
  Rng rng(params.seed);
  int tested = 0;
  int failing = 0;
  for (int t = 1; t <= rep.T; ++t) {
    const Level& L = rep.levels[static_cast<std::size_t>(t)];
    LevelAudit la;
    la.t = t;
    la.size_ok = static_cast<int>(L.H.size()) <= rep.S;
    la.w_max = L.w.size() ? L.w.maxCoeff() : 0.0;
    la.w_bound = 1.0 / std::sqrt(params.c);
    la.w_ok = la.w_max <= la.w_bound;
    out.structure_ok = out.structure_ok && la.size_ok && la.w_ok;

    if (count_strings(rep.O, rep.T - t) > params.max_futures) {
      la.skipped = true;
      out.levels.push_back(la);
      continue;
    }
    std::vector<std::vector<double>> basis;
    for (const auto& h : L.H) basis.push_back(oracle.conditional_dist(h));
    std::set<std::uint64_t> pos_set;
    for (const auto& x : L.X) pos_set.insert(string_index(x, rep.O));
    std::vector<std::uint64_t> positive(pos_set.begin(), pos_set.end());

    const double bound = 2.0 * rep.S;
    const double max_residual = 2.0 * rep.S * params.eta;
    for (int i = 0; i < params.histories_per_level; ++i) {
      TokenString h = prefix(oracle.cond_sample({}, rng), static_cast<std::size_t>(t));
      if (!representable(oracle.conditional_dist(h), basis, positive, bound, params.c_prime, max_residual)) {
        ++la.failing;
      }
      ++la.tested;
    }
    tested += la.tested;
    failing += la.failing;
    out.levels.push_back(la);
  }
  out.failing_fraction = tested ? static_cast<double>(failing) / tested : 0.0;
  return out;
}

}  // namespace seqsteal
