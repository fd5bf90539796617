#include "seqsteal/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <random>

namespace seqsteal {

double tv_exact(const PdfFn& p, const PdfFn& q, int O, int T) {
  const std::uint64_t total = count_strings(O, T);
  if (total > kExactGuard) {
    throw GuardError("O^T = " + std::to_string(total) + " exceeds the exact-evaluation guard; use empirical mode");
  }
  double sum = 0.0;
  for (std::uint64_t i = 0; i < total; ++i) {
    TokenString x = string_at(i, O, T);
    sum += std::abs(p(x) - q(x));
  }
  return 0.5 * sum;
}

double tv_exact(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw LengthError("tv_exact: pdf vectors differ in length");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += std::abs(p[i] - q[i]);
  return 0.5 * sum;
}

TvEstimate tv_empirical(const SamplerFn& sampler, const PdfFn& q, int n, Rng& rng, int resamples, double level) {
  if (n < 1000) throw ParameterError("tv_empirical needs n >= 1000");
  if (resamples < 1 || !(level > 0.0 && level < 1.0)) throw ParameterError("invalid bootstrap settings");
  std::map<TokenString, int> ids;
  std::vector<int> draws(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto it = ids.emplace(sampler(rng), static_cast<int>(ids.size())).first;
    draws[static_cast<std::size_t>(i)] = it->second;
  }
  std::vector<double> target(ids.size());
  for (const auto& [x, id] : ids) target[static_cast<std::size_t>(id)] = q(x);

  auto estimate = [&](const std::vector<int>& counts) {
    double overlap = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      overlap += std::min(static_cast<double>(counts[i]) / n, target[i]);
    }
    return std::clamp(1.0 - overlap, 0.0, 1.0);
  };

  std::vector<int> counts(ids.size(), 0);
  for (int d : draws) ++counts[static_cast<std::size_t>(d)];
  TvEstimate out;
  out.n = n;
  out.estimate = estimate(counts);

  std::uniform_int_distribution<int> pick(0, n - 1);
  std::vector<double> boot;
  boot.reserve(static_cast<std::size_t>(resamples));
  for (int b = 0; b < resamples; ++b) {
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(draws[static_cast<std::size_t>(pick(rng))])];
    boot.push_back(estimate(counts));
  }
  std::sort(boot.begin(), boot.end());
  const double tail = 0.5 * (1.0 - level);
  auto quantile = [&](double a) {
    auto idx = static_cast<std::size_t>(std::floor(a * (static_cast<double>(boot.size()) - 1.0) + 0.5));
    return boot[std::min(idx, boot.size() - 1)];
  };
  out.ci_low = std::min(quantile(tail), out.estimate);
  out.ci_high = std::max(quantile(1.0 - tail), out.estimate);
  return out;
}

void ExperimentConfig::validate() const {
  auto bad = [](const std::string& msg) { throw ParameterError("config: " + msg); };
  if (hmm_file.empty() && (S < 1 || O < 1 || T < 1)) bad("S, O and T must be positive");
  if (oracle.mode == OracleMode::ExactBase ? !(oracle.eps >= 0.0 && oracle.eps < 1.0)
                                           : !(oracle.eps > 0.0 && oracle.eps < 1.0)) {
    bad("oracle eps out of range");
  }
  if (oracle.samples_per_node < 1) bad("samples_per_node must be positive");
  if (learner.k < 1) bad("k must be positive");
  if (learner.N < 0) bad("N must be nonnegative");
  if (!(learner.gamma > 0.0 && learner.gamma < 1.0)) bad("gamma must lie in (0, 1)");
  if (!(learner.eta > 0.0 && learner.eta < 1.0)) bad("eta must lie in (0, 1)");
  if (S_bound < 0) bad("S_bound must be nonnegative");
  if (!(sampler.c_floor > 0.0 && sampler.c_floor < 1.0)) bad("c_floor must lie in (0, 1)");
  if (!(sampler.tol > 0.0)) bad("tol must be positive");
  if (sampler.max_iterations < 1 || sampler.max_fallbacks < 0) bad("invalid solver limits");
  if (audit_params.histories_per_level < 0 || !(audit_params.c_prime > 0.0)) bad("invalid audit settings");
  if (eval_mode != "exact" && eval_mode != "empirical") bad("eval mode must be 'exact' or 'empirical'");
  if (eval_mode == "empirical" && eval_samples < 1000) bad("empirical evaluation needs at least 1000 samples");
}

nlohmann::json ExperimentConfig::to_json() const {
  return {
      {"hmm", {{"file", hmm_file}, {"S", S}, {"O", O}, {"T", T}, {"seed", hmm_seed}}},
      {"oracle",
       {{"mode", to_string(oracle.mode)},
        {"eps", oracle.eps},
        {"samples_per_node", oracle.samples_per_node},
        {"seed", oracle.seed}}},
      {"learner",
       {{"k", learner.k},
        {"N", learner.N},
        {"gamma", learner.gamma},
        {"eta", learner.eta},
        {"seed", learner.seed},
        {"S_bound", S_bound},
        {"verify_spanners", learner.verify_spanners}}},
      {"sampler",
       {{"c_floor", sampler.c_floor},
        {"tol", sampler.tol},
        {"max_iterations", sampler.max_iterations},
        {"max_fallbacks", sampler.max_fallbacks},
        {"seed", sampler_seed}}},
      {"audit",
       {{"enabled", audit},
        {"c_prime", audit_params.c_prime},
        {"histories_per_level", audit_params.histories_per_level},
        {"seed", audit_params.seed}}},
      {"eval", {{"mode", eval_mode}, {"n_samples", eval_samples}, {"seed", eval_seed}}},
      {"out_dir", out_dir},
  };
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  std::random_device entropy;
  auto fresh_seed = [&] { return (static_cast<std::uint64_t>(entropy()) << 32) ^ entropy(); };
  auto seed_of = [&](const nlohmann::json& section) {
    return section.contains("seed") ? section.at("seed").get<std::uint64_t>() : fresh_seed();
  };
  const nlohmann::json empty = nlohmann::json::object();
  auto section = [&](const char* name) -> const nlohmann::json& { return j.contains(name) ? j.at(name) : empty; };
  try {
    const auto& h = section("hmm");
    c.hmm_file = h.value("file", c.hmm_file);
    c.S = h.value("S", c.S);
    c.O = h.value("O", c.O);
    c.T = h.value("T", c.T);
    c.hmm_seed = seed_of(h);

    const auto& o = section("oracle");
    if (o.contains("mode")) c.oracle.mode = parse_oracle_mode(o.at("mode").get<std::string>());
    c.oracle.eps = o.value("eps", c.oracle.eps);
    c.oracle.samples_per_node = o.value("samples_per_node", c.oracle.samples_per_node);
    c.oracle.seed = seed_of(o);

    const auto& l = section("learner");
    c.learner.k = l.value("k", c.learner.k);
    c.learner.N = l.value("N", c.learner.N);
    c.learner.gamma = l.value("gamma", c.learner.gamma);
    c.learner.eta = l.value("eta", c.learner.eta);
    c.learner.seed = seed_of(l);
    c.learner.verify_spanners = l.value("verify_spanners", c.learner.verify_spanners);
    c.S_bound = l.value("S_bound", c.S_bound);

    const auto& s = section("sampler");
    c.sampler.c_floor = s.value("c_floor", c.sampler.c_floor);
    c.sampler.tol = s.value("tol", c.sampler.tol);
    c.sampler.max_iterations = s.value("max_iterations", c.sampler.max_iterations);
    c.sampler.max_fallbacks = s.value("max_fallbacks", c.sampler.max_fallbacks);
    c.sampler_seed = seed_of(s);

    const auto& a = section("audit");
    c.audit = a.value("enabled", c.audit);
    c.audit_params.c_prime = a.value("c_prime", c.audit_params.c_prime);
    c.audit_params.histories_per_level = a.value("histories_per_level", c.audit_params.histories_per_level);
    c.audit_params.seed = seed_of(a);

    const auto& e = section("eval");
    c.eval_mode = e.value("mode", c.eval_mode);
    c.eval_samples = e.value("n_samples", c.eval_samples);
    c.eval_seed = seed_of(e);

    c.out_dir = j.value("out_dir", c.out_dir);
  } catch (const nlohmann::json::exception& ex) {
    throw ParameterError(std::string("config: ") + ex.what());
  }
  return c;
}

nlohmann::json RunReport::to_json(bool with_timing) const {
  nlohmann::json j;
  j["config"] = config.to_json();
  j["budget"] = {{"conditional_queries", budget.conditional_queries}, {"nodes_visited", budget.nodes_visited}};
  j["levels"] = nlohmann::json::array();
  for (std::size_t t = 0; t < level_sizes.size(); ++t) {
    nlohmann::json lj = {{"t", t}, {"size", level_sizes[t]}};
    for (const auto& s : steps) {
      if (s.t != static_cast<int>(t)) continue;
      lj["candidates"] = s.candidates;
      lj["distinct_futures"] = s.distinct_futures;
      lj["rank"] = s.rank;
      lj["rank_capped"] = s.rank_capped;
      lj["exceeded_s"] = s.exceeded_s;
      lj["swaps"] = s.swaps;
      lj["residual_bound"] = s.residual_bound;
      lj["verified_residual"] = s.verified_residual;
    }
    j["levels"].push_back(lj);
  }
  j["audit"] = audit ? audit->to_json() : nlohmann::json(nullptr);
  j["tv"] = {{"method", tv_method}, {"value", tv}, {"ci_low", tv_ci_low}, {"ci_high", tv_ci_high}};
  if (tv_surrogate) j["tv"]["surrogate"] = *tv_surrogate;
  if (learned_mass) j["tv"]["learned_mass"] = *learned_mass;
  j["sampler"] = {{"projections", sampler_stats.projections},
                  {"newton_iterations", sampler_stats.newton_iterations},
                  {"fallbacks", sampler_stats.fallbacks},
                  {"truncation", truncation},
                  {"rounding_threshold", rounding_threshold}};
  if (with_timing) {
    nlohmann::json tj = nlohmann::json::object();
    for (const auto& [stage, sec] : timing) tj[stage] = sec;
    j["timing"] = tj;
  }
  return j;
}

Hmm make_hmm(const ExperimentConfig& config) {
  if (!config.hmm_file.empty()) return Hmm::load(config.hmm_file);
  return Hmm::random(config.S, config.O, config.T, config.hmm_seed);
}

namespace {

template <typename F>
auto stage(const std::string& name, RunReport& report, F&& body) {
  const auto start = std::chrono::steady_clock::now();
  try {
    if constexpr (std::is_void_v<decltype(body())>) {
      body();
      report.timing.emplace_back(name, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    } else {
      auto result = body();
      report.timing.emplace_back(name, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
      return result;
    }
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

}  // namespace

RunReport run_pipeline(const ExperimentConfig& config) {
  try {
    config.validate();
  } catch (const std::exception& e) {
    throw StageError("config", e.what());
  }
  RunReport report;
  report.config = config;

  Hmm hmm = stage("hmm", report, [&] { return make_hmm(config); });
  auto tree = stage("oracle", report, [&] { return std::make_unique<LazyPdfTree>(hmm, config.oracle); });
  const int S = config.S_bound > 0 ? config.S_bound : hmm.num_states();

  LearnedRepresentation rep = stage("learn", report, [&] {
    LearnedRepresentation r = learn(*tree, S, config.learner);
    r.validate(tree->floor());
    return r;
  });
  report.budget = rep.budget;
  report.steps = rep.steps;
  for (const auto& L : rep.levels) report.level_sizes.push_back(static_cast<int>(L.H.size()));

  const double c_eff =
      effective_truncation(config.learner.eta, hmm.alphabet_size(), hmm.length(), S, config.sampler.c_floor);
  if (config.audit) {
    report.audit = stage("audit", report, [&] {
      AuditParams ap = config.audit_params;
      ap.c = c_eff;
      ap.eta = config.learner.eta;
      return audit_representation(rep, *tree, ap);
    });
  }

  auto sampler = stage("sample", report, [&] { return std::make_unique<Sampler>(rep, config.sampler); });
  report.truncation = sampler->truncation();
  report.rounding_threshold = sampler->rounding_threshold();

  stage("eval", report, [&] {
    const int O = hmm.alphabet_size();
    const int T = hmm.length();
    if (config.eval_mode == "exact") {
      if (count_strings(O, T) > kExactGuard) {
        throw GuardError("O^T exceeds the exact-evaluation guard; set eval mode to 'empirical'");
      }
      std::vector<double> learned = sampler->full_pdf();
      std::vector<double> truth(learned.size());
      std::vector<double> surrogate(learned.size());
      for (std::size_t i = 0; i < learned.size(); ++i) {
        TokenString x = string_at(i, O, T);
        truth[i] = hmm.sequence_prob(x);
        surrogate[i] = tree->pdf(x);
      }
      report.tv_method = "exact";
      report.tv = tv_exact(learned, truth);
      report.tv_ci_low = report.tv_ci_high = report.tv;
      report.tv_surrogate = tv_exact(learned, surrogate);
      double mass = 0.0;
      for (double p : learned) mass += p;
      report.learned_mass = mass;
    } else {
      Rng rng(config.eval_seed);
      TvEstimate est = tv_empirical([&](Rng& r) { return sampler->sample(r); },
                                    [&](const TokenString& x) { return hmm.sequence_prob(x); },
                                    config.eval_samples, rng);
      report.tv_method = "empirical";
      report.tv = est.estimate;
      report.tv_ci_low = est.ci_low;
      report.tv_ci_high = est.ci_high;
    }
  });
  report.sampler_stats = sampler->stats();

  if (!config.out_dir.empty()) {
    stage("write", report, [&] {
      std::filesystem::path dir(config.out_dir);
      std::filesystem::create_directories(dir);
      hmm.save(dir / "hmm.json");
      rep.save(dir / "rep.json");
      write_json(dir / "report.json", report.to_json());
    });
  }
  return report;
}

}  // namespace seqsteal
