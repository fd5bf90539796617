#include "seqsteal/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "seqsteal/dimred.hpp"
#include "seqsteal/errors.hpp"
#include "seqsteal/linalg.hpp"
#include "seqsteal/lp.hpp"

namespace seqsteal {

std::vector<double> round_dist(const std::vector<double>& v, double tau) {
  if (!(tau > 0.0)) throw ParameterError("round_dist needs tau > 0");
  if (v.empty()) throw ParameterError("round_dist needs a nonempty vector");
  std::vector<double> out(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) throw ParameterError("round_dist got a non-finite entry");
    out[i] = std::max(v[i], tau);
    total += out[i];
  }
  std::size_t largest = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] /= total;
    if (out[i] > out[largest]) largest = i;
  }
  double rest = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (i != largest) rest += out[i];
  }
  out[largest] = 1.0 - rest;
  return out;
}

double ProjectionProblem::objective(const Eigen::VectorXd& alpha) const {
  return trunc_kl_weighted(R.transpose() * alpha, z, floor, weight);
}

double ProjectionProblem::divergence(const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta) const {
  return trunc_kl_weighted(R.transpose() * alpha, R.transpose() * beta, floor, weight);
}

double ProjectionProblem::z_norm() const { return weight.dot(z.cwiseAbs()); }

Eigen::VectorXd ProjectionProblem::mass() const { return R * weight; }

bool ProjectionProblem::feasible(const Eigen::VectorXd& alpha, double eq_tol) const {
  if (alpha.size() != R.rows()) return false;
  if (alpha.cwiseAbs().maxCoeff() > bound) return false;
  Eigen::VectorXd a = R.transpose() * alpha;
  if ((a.array() < floor.array()).any()) return false;
  return std::abs(mass().dot(alpha) - 1.0) <= eq_tol;
}

namespace {

void check_problem(const ProjectionProblem& p) {
  const auto n = p.R.cols();
  if (p.R.rows() < 1 || n < 1) throw ParameterError("projection needs at least one coefficient and coordinate");
  if (p.z.size() != n || p.floor.size() != n || p.weight.size() != n) {
    throw LengthError("projection vectors must match the number of coordinates");
  }
  if (!(p.floor.minCoeff() > 0.0)) throw ParameterError("projection floor must be positive");
  if (!(p.weight.minCoeff() > 0.0)) throw ParameterError("coordinate weights must be positive");
  if (!(p.bound > 0.0)) throw ParameterError("coefficient bound must be positive");
}

// Feasible set without the objective: box, floor and unit mass. Adds the
// rows to `lp` for coefficient variables 0..m-1; `slack` is the column of an
// extra variable s that pushes every inequality inward (or -1 for none).
void add_feasibility_rows(LinearProgram& lp, const ProjectionProblem& p, int slack, bool with_floor) {
  const int m = p.num_coefficients();
  const int n = p.num_coords();
  const int vars = lp.num_vars();
  Eigen::RowVectorXd row(vars);
  if (with_floor) {
    for (int j = 0; j < n; ++j) {
      row.setZero();
      row.head(m) = p.R.col(j).transpose();
      // Push the floor constraint in units of the coordinate's own size.
      if (slack >= 0) row[slack] = -p.R.col(j).cwiseAbs().maxCoeff();
      lp.add_row(row, RowSense::GreaterEqual, p.floor[j]);
    }
  }
  for (int h = 0; h < m; ++h) {
    lp.lower[static_cast<std::size_t>(h)] = -p.bound;
    lp.upper[static_cast<std::size_t>(h)] = p.bound;
    if (slack < 0) continue;
    row.setZero();
    row[h] = 1.0;
    row[slack] = p.bound;
    lp.add_row(row, RowSense::LessEqual, p.bound);
    row[h] = -1.0;
    lp.add_row(row, RowSense::LessEqual, p.bound);
  }
  row.setZero();
  row.head(m) = p.mass().transpose();
  lp.add_row(row, RowSense::Equal, 1.0);
}

[[noreturn]] void throw_infeasible(const ProjectionProblem& p) {
  LinearProgram box(p.num_coefficients());
  add_feasibility_rows(box, p, -1, false);
  if (solve_lp(box).status != LpStatus::Optimal) {
    throw InfeasibleError("projection infeasible: coefficient box |alpha| <= " + std::to_string(p.bound) +
                          " cannot reach unit mass");
  }
  throw InfeasibleError("projection infeasible: entrywise floor alpha^T R >= floor has no strictly feasible point");
}

// Point maximizing the smallest scaled slack of every inequality.
Eigen::VectorXd interior_point(const ProjectionProblem& p) {
  const int m = p.num_coefficients();
  LinearProgram lp(m + 1);
  lp.cost[m] = -1.0;
  lp.lower[static_cast<std::size_t>(m)] = -1.0;
  lp.upper[static_cast<std::size_t>(m)] = 1.0;
  add_feasibility_rows(lp, p, m, true);
  LpSolution sol = solve_lp(lp);
  if (sol.status != LpStatus::Optimal || !(sol.x[m] > 1e-9)) throw_infeasible(p);
  Eigen::VectorXd alpha = sol.x.head(m);
  // Put the equality back to full precision along the mass direction.
  const Eigen::VectorXd g = p.mass();
  alpha += g * ((1.0 - g.dot(alpha)) / g.squaredNorm());
  if (!p.feasible(alpha, 1e-12)) throw_infeasible(p);
  return alpha;
}

struct Barrier {
  const ProjectionProblem& p;
  Eigen::VectorXd log_target;  // log max(z, floor)

  explicit Barrier(const ProjectionProblem& prob) : p(prob) {
    log_target = p.z.cwiseMax(p.floor).array().log();
  }

  bool inside(const Eigen::VectorXd& alpha) const {
    if ((alpha.array().abs() >= p.bound).any()) return false;
    Eigen::VectorXd a = p.R.transpose() * alpha;
    return ((a - p.floor).array() > 0.0).all();
  }

  double value(const Eigen::VectorXd& alpha, double mu) const {
    Eigen::ArrayXd a = (p.R.transpose() * alpha).array();
    double f = (p.weight.array() * a * (a.log() - log_target.array())).sum();
    double b = (a - p.floor.array()).log().sum() + (p.bound - alpha.array()).log().sum() +
               (p.bound + alpha.array()).log().sum();
    return f - mu * b;
  }

  void derivatives(const Eigen::VectorXd& alpha, double mu, Eigen::VectorXd& grad, Eigen::MatrixXd& hess) const {
    Eigen::ArrayXd a = (p.R.transpose() * alpha).array();
    Eigen::ArrayXd slack = a - p.floor.array();
    Eigen::ArrayXd ga = p.weight.array() * (a.log() + 1.0 - log_target.array()) - mu / slack;
    Eigen::ArrayXd ha = p.weight.array() / a + mu / slack.square();
    Eigen::ArrayXd hi = p.bound - alpha.array();
    Eigen::ArrayXd lo = p.bound + alpha.array();
    grad = p.R * ga.matrix();
    grad.array() += mu / hi - mu / lo;
    hess = p.R * ha.matrix().asDiagonal() * p.R.transpose();
    hess.diagonal().array() += mu / hi.square() + mu / lo.square();
  }
};

}  // namespace

ProjectionResult kl_project(const ProjectionProblem& problem, double tol, int max_iterations) {
  check_problem(problem);
  if (!(tol > 0.0)) throw ParameterError("kl_project needs tol > 0");
  const int m = problem.num_coefficients();
  const int n = problem.num_coords();
  ProjectionResult out;

  if (m == 1) {
    Eigen::VectorXd alpha(1);
    alpha[0] = 1.0 / problem.mass()[0];
    if (!std::isfinite(alpha[0]) || std::abs(alpha[0]) > problem.bound) throw_infeasible(problem);
    if (((problem.R.row(0).transpose() * alpha[0]).array() < problem.floor.array()).any()) {
      throw InfeasibleError("projection infeasible: entrywise floor alpha^T R >= floor");
    }
    out.alpha = alpha;
    out.objective = problem.objective(alpha);
    return out;
  }

  Eigen::VectorXd alpha = interior_point(problem);

  // Orthonormal basis of the directions that keep the unit-mass equality.
  const Eigen::VectorXd g = problem.mass();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(m, m);
  Eigen::MatrixXd null = Q.rightCols(m - 1);

  Barrier barrier(problem);
  const double num_ineq = static_cast<double>(n + 2 * m);
  double mu = 1e-2;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  for (;;) {
    // Centering.
    for (;;) {
      if (out.iterations >= max_iterations) {
        std::ostringstream msg;
        msg << "kl_project: no convergence after " << out.iterations << " Newton steps (mu=" << mu
            << ", objective=" << problem.objective(alpha) << ")";
        throw ConvergenceError(msg.str());
      }
      barrier.derivatives(alpha, mu, grad, hess);
      Eigen::VectorXd rg = null.transpose() * grad;
      Eigen::MatrixXd rh = null.transpose() * hess * null;
      Eigen::VectorXd step = -rh.ldlt().solve(rg);
      const double decrement = -rg.dot(step);
      if (!(decrement > 2e-14)) break;
      ++out.iterations;
      Eigen::VectorXd dir = null * step;
      const double base = barrier.value(alpha, mu);
      double s = 1.0;
      bool moved = false;
      for (int k = 0; k < 80; ++k, s *= 0.5) {
        Eigen::VectorXd cand = alpha + s * dir;
        if (!barrier.inside(cand)) continue;
        if (barrier.value(cand, mu) <= base - 0.25 * s * decrement) {
          alpha = cand;
          moved = true;
          break;
        }
      }
      // No representable decrease left along the Newton direction.
      if (!moved) break;
    }
    if (mu * num_ineq <= tol) break;
    mu *= 0.1;
  }

  // Undo drift in the equality from accumulated steps.
  alpha += g * ((1.0 - g.dot(alpha)) / g.squaredNorm());
  if (!problem.feasible(alpha, 1e-9)) throw ConvergenceError("kl_project: final iterate left the feasible set");
  out.alpha = alpha;
  out.objective = problem.objective(alpha);
  return out;
}

std::vector<Eigen::VectorXd> random_feasible_points(const ProjectionProblem& problem, int count, Rng& rng) {
  check_problem(problem);
  const int m = problem.num_coefficients();
  std::vector<Eigen::VectorXd> out;
  if (m == 1) {
    Eigen::VectorXd alpha(1);
    alpha[0] = 1.0 / problem.mass()[0];
    if (problem.feasible(alpha)) out.assign(static_cast<std::size_t>(count), alpha);
    return out;
  }
  const Eigen::VectorXd center = interior_point(problem);
  std::vector<Eigen::VectorXd> anchors{center};
  std::normal_distribution<double> normal;
  for (int r = 0; r < 2 * m + 2; ++r) {
    LinearProgram lp(m);
    for (int h = 0; h < m; ++h) lp.cost[h] = normal(rng);
    add_feasibility_rows(lp, problem, -1, true);
    LpSolution sol = solve_lp(lp);
    if (sol.status == LpStatus::Optimal) anchors.push_back(sol.x);
  }
  while (static_cast<int>(out.size()) < count) {
    std::vector<double> mix = uniform_simplex(static_cast<int>(anchors.size()), rng);
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(m);
    for (std::size_t i = 0; i < anchors.size(); ++i) alpha += mix[i] * anchors[i];
    // Vertices can sit a rounding error outside; pull toward the interior.
    for (int k = 0; k < 40 && !problem.feasible(alpha); ++k) alpha = center + 0.9 * (alpha - center);
    if (!problem.feasible(alpha)) alpha = center;
    out.push_back(alpha);
  }
  return out;
}

double effective_truncation(double eta, int O, int T, int S, double c_floor) {
  if (!(eta > 0.0 && eta < 1.0)) throw ParameterError("eta must lie in (0, 1)");
  if (!(c_floor > 0.0 && c_floor < 1.0)) throw ParameterError("c_floor must lie in (0, 1)");
  const double log_c = 10.0 * O * T * S * std::log(eta);
  return std::exp(std::max(log_c, std::log(c_floor)));
}

nlohmann::json trace_json(const TraceStep& s) {
  return {{"t", s.t},
          {"o", s.o},
          {"p", s.p},
          {"objective", s.objective},
          {"iterations", s.iterations},
          {"fallback", s.fallbacks > 0},
          {"fallbacks", s.fallbacks}};
}

Sampler::Sampler(const LearnedRepresentation& rep, SamplerConfig config) : rep_(rep), config_(config) {
  rep_.validate();
  if (!(config_.tol > 0.0) || config_.max_iterations < 1 || config_.max_fallbacks < 0) {
    throw ParameterError("invalid sampler configuration");
  }
  c_eff_ = effective_truncation(rep_.params.eta, rep_.O, rep_.T, rep_.S, config_.c_floor);
  const double log_c = std::log(c_eff_);
  tau_ = 2.0 * std::exp(0.1 * log_c);

  levels_.resize(static_cast<std::size_t>(rep_.T) + 1);
  for (int l = 1; l <= rep_.T; ++l) {
    const Level& L = rep_.levels[static_cast<std::size_t>(l)];
    const Level& prev = rep_.levels[static_cast<std::size_t>(l) - 1];
    // Coordinates whose sketch values all agree are merged.
    const auto dim = static_cast<Eigen::Index>(L.X.size());
    const auto nb = static_cast<Eigen::Index>(L.B.size());
    Eigen::MatrixXd table(dim, nb + 1);
    std::map<TokenString, Eigen::Index> col;
    for (Eigen::Index i = 0; i < nb; ++i) {
      const TokenString& h = L.B[static_cast<std::size_t>(i)];
      table.col(i) = L.u.at(h);
      col[h] = i;
    }
    table.col(nb) = L.w;
    CompressedRows comp = compress_rows(table);

    LevelData& data = levels_[static_cast<std::size_t>(l)];
    const auto n = comp.rows.rows();
    data.base.R.resize(static_cast<Eigen::Index>(L.H.size()), n);
    for (std::size_t i = 0; i < L.H.size(); ++i) {
      data.base.R.row(static_cast<Eigen::Index>(i)) = comp.rows.col(col.at(L.H[i])).transpose();
    }
    // Step t = l - 1 uses c^{T - t}, clamped at c_floor.
    const int exponent = rep_.T - (l - 1);
    data.floor_scale = std::exp(std::max(exponent * log_c, std::log(config_.c_floor)));
    data.base.floor = data.floor_scale * comp.rows.col(nb);
    data.base.weight = comp.multiplicity;
    data.base.bound = 3.0 * rep_.S;
    data.base.z = Eigen::VectorXd::Zero(n);
    for (Token o = 0; o < rep_.O; ++o) {
      Eigen::MatrixXd ext(static_cast<Eigen::Index>(prev.H.size()), n);
      for (std::size_t i = 0; i < prev.H.size(); ++i) {
        ext.row(static_cast<Eigen::Index>(i)) = comp.rows.col(col.at(append(prev.H[i], o))).transpose();
      }
      data.extension.push_back(std::move(ext));
    }
  }
}

Sampler::State Sampler::initial_state() const {
  State s;
  s.alpha = Eigen::VectorXd::Ones(1);
  return s;
}

std::vector<double> Sampler::next_char_probs(const State& s) const {
  if (s.t < 0 || s.t >= rep_.T) throw LengthError("next_char_probs needs t < T");
  const Eigen::MatrixXd& P = rep_.levels[static_cast<std::size_t>(s.t) + 1].P;
  if (s.alpha.size() != P.rows()) throw LengthError("coefficient vector does not match the level");
  Eigen::RowVectorXd v = s.alpha.transpose() * P;
  return round_dist(std::vector<double>(v.data(), v.data() + v.size()), tau_);
}

Sampler::State Sampler::advance(const State& s, Token o, const std::vector<double>& p, TraceStep* step) const {
  if (s.t < 0 || s.t >= rep_.T) throw LengthError("advance needs t < T");
  if (o < 0 || o >= rep_.O) throw ParameterError("token out of range");
  const LevelData& data = levels_[static_cast<std::size_t>(s.t) + 1];
  const Eigen::MatrixXd& P = rep_.levels[static_cast<std::size_t>(s.t) + 1].P;

  Eigen::VectorXd nu = s.alpha.cwiseProduct(P.col(o)) / p[static_cast<std::size_t>(o)];
  ProjectionProblem problem = data.base;
  problem.z = data.extension[static_cast<std::size_t>(o)].transpose() * nu;

  int fallbacks = 0;
  ProjectionResult res;
  for (;;) {
    try {
      res = kl_project(problem, config_.tol, config_.max_iterations);
      break;
    } catch (const InfeasibleError&) {
      if (fallbacks >= config_.max_fallbacks) throw;
      ++fallbacks;
      problem.floor /= 10.0;
    }
  }
  projections_.fetch_add(1, std::memory_order_relaxed);
  iterations_.fetch_add(static_cast<std::uint64_t>(res.iterations), std::memory_order_relaxed);
  fallbacks_.fetch_add(static_cast<std::uint64_t>(fallbacks), std::memory_order_relaxed);

  State next;
  next.t = s.t + 1;
  next.prefix = append(s.prefix, o);
  next.alpha = res.alpha;
  if (observer_) {
    ProjectionRecord rec;
    rec.t = s.t;
    rec.prefix = next.prefix;
    rec.problem = &problem;
    rec.alpha = res.alpha;
    rec.objective = res.objective;
    rec.iterations = res.iterations;
    rec.fallbacks = fallbacks;
    observer_(rec);
  }
  if (step) {
    step->t = s.t;
    step->o = o;
    step->p = p;
    step->objective = res.objective;
    step->iterations = res.iterations;
    step->fallbacks = fallbacks;
  }
  return next;
}

TokenString Sampler::sample(std::uint64_t seed, std::vector<TraceStep>* trace) const {
  Rng rng(seed);
  return sample(rng, trace);
}

TokenString Sampler::sample(Rng& rng, std::vector<TraceStep>* trace) const {
  State s = initial_state();
  while (s.t < rep_.T) {
    std::vector<double> p = next_char_probs(s);
    Token o = sample_index(p, rng);
    TraceStep step;
    s = advance(s, o, p, &step);
    if (trace) trace->push_back(std::move(step));
  }
  return s.prefix;
}

double Sampler::pdf(const TokenString& x) const {
  if (static_cast<int>(x.size()) != rep_.T) throw LengthError("learned pdf needs a string of length T");
  check_tokens(x, rep_.O);
  State s = initial_state();
  double prob = 1.0;
  for (Token o : x) {
    std::vector<double> p = next_char_probs(s);
    prob *= p[static_cast<std::size_t>(o)];
    s = advance(s, o, p);
  }
  return prob;
}

void Sampler::full_pdf_rec(const State& s, double mass, std::vector<double>& out) const {
  if (s.t == rep_.T) {
    out[string_index(s.prefix, rep_.O)] = mass;
    return;
  }
  std::vector<double> p = next_char_probs(s);
  for (Token o = 0; o < rep_.O; ++o) {
    full_pdf_rec(advance(s, o, p), mass * p[static_cast<std::size_t>(o)], out);
  }
}

std::vector<double> Sampler::full_pdf() const {
  const std::uint64_t total = count_strings(rep_.O, rep_.T);
  if (total > 10'000'000) throw GuardError("O^T exceeds 1e7; use empirical evaluation");
  std::vector<double> out(total, 0.0);
  full_pdf_rec(initial_state(), 1.0, out);
  return out;
}

SamplerStats Sampler::stats() const {
  SamplerStats s;
  s.projections = projections_.load();
  s.newton_iterations = iterations_.load();
  s.fallbacks = fallbacks_.load();
  return s;
}

}  // namespace seqsteal
