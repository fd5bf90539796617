#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "seqsteal/harness.hpp"

using namespace seqsteal;

namespace {

// Config errors exit with 2, everything that fails while running with 3.
struct ConfigError : Error {
  using Error::Error;
};

struct Overrides {
  std::optional<std::string> config;
  std::optional<std::string> hmm_file;
  std::optional<int> S, O, T;
  std::optional<std::uint64_t> hmm_seed;
  std::optional<std::string> oracle_mode;
  std::optional<double> eps;
  std::optional<int> samples_per_node;
  std::optional<std::uint64_t> oracle_seed;
  std::optional<int> k, N, S_bound;
  std::optional<double> gamma, eta;
  std::optional<std::uint64_t> learner_seed;
  std::optional<double> c_floor, tol;
  std::optional<std::uint64_t> sampler_seed;
  std::optional<std::string> eval_mode;
  std::optional<int> eval_samples;
  std::optional<std::uint64_t> eval_seed;
  std::optional<double> c_prime;
  std::optional<int> audit_histories;
  std::optional<std::string> out_dir;
  bool no_audit = false;
};

void add_config(CLI::App* app, Overrides& ov) {
  app->add_option("--config", ov.config, "JSON experiment config; flags override it");
}

void add_hmm(CLI::App* app, Overrides& ov) {
  app->add_option("--hmm", ov.hmm_file, "HMM JSON file (otherwise generated)");
  app->add_option("--S", ov.S, "number of hidden states");
  app->add_option("--O", ov.O, "alphabet size");
  app->add_option("--T", ov.T, "sequence length");
  app->add_option("--hmm-seed", ov.hmm_seed, "seed for the generated HMM");
}

void add_oracle(CLI::App* app, Overrides& ov) {
  app->add_option("--oracle-mode", ov.oracle_mode, "sampled | exact-base | perturbed");
  app->add_option("--eps", ov.eps, "oracle closeness parameter");
  app->add_option("--samples-per-node", ov.samples_per_node, "conditional queries per tree node (sampled mode)");
  app->add_option("--oracle-seed", ov.oracle_seed, "oracle seed");
}

void add_learner(CLI::App* app, Overrides& ov) {
  app->add_option("--k", ov.k, "sketch samples per history");
  app->add_option("--N", ov.N, "fresh histories per spanner step");
  app->add_option("--gamma", ov.gamma, "spanner accuracy");
  app->add_option("--eta", ov.eta, "target accuracy");
  app->add_option("--learner-seed", ov.learner_seed, "learner seed");
  app->add_option("--S-bound", ov.S_bound, "rank bound (0: HMM state count)");
}

void add_sampler(CLI::App* app, Overrides& ov) {
  app->add_option("--c-floor", ov.c_floor, "lower clamp on the truncation base");
  app->add_option("--tol", ov.tol, "projection objective tolerance");
  app->add_option("--sampler-seed", ov.sampler_seed, "sampler seed");
}

void add_eval(CLI::App* app, Overrides& ov) {
  app->add_option("--eval-mode", ov.eval_mode, "exact | empirical");
  app->add_option("--eval-samples", ov.eval_samples, "samples for empirical evaluation");
  app->add_option("--eval-seed", ov.eval_seed, "evaluation seed");
}

void add_audit(CLI::App* app, Overrides& ov) {
  app->add_option("--c-prime", ov.c_prime, "positivity level required by the audit");
  app->add_option("--audit-histories", ov.audit_histories, "histories sampled per level");
}

template <typename T, typename U>
void apply(const std::optional<T>& v, U& field) {
  if (v) field = *v;
}

ExperimentConfig resolve(const Overrides& ov) {
  try {
    ExperimentConfig c;
    if (ov.config) {
      std::ifstream in(*ov.config);
      if (!in) throw ParameterError("cannot read config " + *ov.config);
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception& e) {
        throw ParameterError(*ov.config + ": " + e.what());
      }
      c = ExperimentConfig::from_json(j);
    }
    apply(ov.hmm_file, c.hmm_file);
    apply(ov.S, c.S);
    apply(ov.O, c.O);
    apply(ov.T, c.T);
    apply(ov.hmm_seed, c.hmm_seed);
    if (ov.oracle_mode) c.oracle.mode = parse_oracle_mode(*ov.oracle_mode);
    apply(ov.eps, c.oracle.eps);
    apply(ov.samples_per_node, c.oracle.samples_per_node);
    apply(ov.oracle_seed, c.oracle.seed);
    apply(ov.k, c.learner.k);
    apply(ov.N, c.learner.N);
    apply(ov.gamma, c.learner.gamma);
    apply(ov.eta, c.learner.eta);
    apply(ov.learner_seed, c.learner.seed);
    apply(ov.S_bound, c.S_bound);
    apply(ov.c_floor, c.sampler.c_floor);
    apply(ov.tol, c.sampler.tol);
    apply(ov.sampler_seed, c.sampler_seed);
    apply(ov.eval_mode, c.eval_mode);
    apply(ov.eval_samples, c.eval_samples);
    apply(ov.eval_seed, c.eval_seed);
    apply(ov.c_prime, c.audit_params.c_prime);
    apply(ov.audit_histories, c.audit_params.histories_per_level);
    apply(ov.out_dir, c.out_dir);
    if (ov.no_audit) c.audit = false;
    c.validate();
    return c;
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
}

LearnedRepresentation load_rep(const std::string& path) {
  try {
    return LearnedRepresentation::load(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

Hmm load_hmm(const ExperimentConfig& c) {
  try {
    return make_hmm(c);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn and sample a low-rank sequence distribution from conditional queries"};
  app.require_subcommand(1);
  Overrides ov;
  std::string out_file;
  std::string rep_file;
  std::string trace_file;
  int count = 10;

  auto* gen = app.add_subcommand("gen-hmm", "generate a random HMM");
  add_hmm(gen, ov);
  gen->add_option("--out", out_file, "output file")->default_val("hmm.json");

  auto* learn_cmd = app.add_subcommand("learn", "learn a representation through the oracle");
  add_config(learn_cmd, ov);
  add_hmm(learn_cmd, ov);
  add_oracle(learn_cmd, ov);
  add_learner(learn_cmd, ov);
  learn_cmd->add_option("--out", out_file, "output file")->default_val("rep.json");

  auto* sample_cmd = app.add_subcommand("sample", "draw strings from a representation");
  add_config(sample_cmd, ov);
  add_sampler(sample_cmd, ov);
  sample_cmd->add_option("--rep", rep_file, "representation file")->required();
  sample_cmd->add_option("--n", count, "number of strings")->default_val(10);
  sample_cmd->add_option("--trace", trace_file, "write per-step JSON lines here");

  auto* eval_cmd = app.add_subcommand("eval", "TV distance between a representation and its HMM");
  add_config(eval_cmd, ov);
  add_hmm(eval_cmd, ov);
  add_sampler(eval_cmd, ov);
  add_eval(eval_cmd, ov);
  eval_cmd->add_option("--rep", rep_file, "representation file")->required();

  auto* audit_cmd = app.add_subcommand("audit", "check a representation against the oracle");
  add_config(audit_cmd, ov);
  add_hmm(audit_cmd, ov);
  add_oracle(audit_cmd, ov);
  add_sampler(audit_cmd, ov);
  add_audit(audit_cmd, ov);
  audit_cmd->add_option("--rep", rep_file, "representation file")->required();

  auto* run_cmd = app.add_subcommand("run", "full pipeline: generate, learn, audit, evaluate, report");
  add_config(run_cmd, ov);
  add_hmm(run_cmd, ov);
  add_oracle(run_cmd, ov);
  add_learner(run_cmd, ov);
  add_sampler(run_cmd, ov);
  add_eval(run_cmd, ov);
  add_audit(run_cmd, ov);
  run_cmd->add_option("--out-dir", ov.out_dir, "directory for hmm.json, rep.json, report.json");
  run_cmd->add_flag("--no-audit", ov.no_audit, "skip the representation audit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) {
      ExperimentConfig c = resolve(ov);
      Hmm::random(c.S, c.O, c.T, c.hmm_seed).save(out_file);
      std::cout << out_file << '\n';
    } else if (learn_cmd->parsed()) {
      ExperimentConfig c = resolve(ov);
      Hmm hmm = load_hmm(c);
      LazyPdfTree tree(hmm, c.oracle);
      const int S = c.S_bound > 0 ? c.S_bound : hmm.num_states();
      LearnedRepresentation rep = learn(tree, S, c.learner);
      rep.save(out_file);
      nlohmann::json summary = {{"out", out_file}, {"budget", rep.to_json()["budget"]}, {"steps", rep.to_json()["steps"]}};
      std::cout << summary.dump(1) << '\n';
    } else if (sample_cmd->parsed()) {
      ExperimentConfig c = resolve(ov);
      LearnedRepresentation rep = load_rep(rep_file);
      Sampler sampler(rep, c.sampler);
      std::ofstream trace;
      if (!trace_file.empty()) {
        trace.open(trace_file);
        if (!trace) throw ConfigError("cannot write " + trace_file);
      }
      Rng rng(c.sampler_seed);
      for (int i = 0; i < count; ++i) {
        std::vector<TraceStep> steps;
        TokenString x = sampler.sample(rng, trace_file.empty() ? nullptr : &steps);
        std::cout << history_key(x) << '\n';
        for (const auto& s : steps) {
          nlohmann::json j = trace_json(s);
          j["sample"] = i;
          trace << j.dump() << '\n';
        }
      }
    } else if (eval_cmd->parsed()) {
      ExperimentConfig c = resolve(ov);
      Hmm hmm = load_hmm(c);
      LearnedRepresentation rep = load_rep(rep_file);
      Sampler sampler(rep, c.sampler);
      nlohmann::json out;
      if (c.eval_mode == "exact") {
        const double tv = tv_exact([&](const TokenString& x) { return sampler.pdf(x); },
                                   [&](const TokenString& x) { return hmm.sequence_prob(x); }, hmm.alphabet_size(),
                                   hmm.length());
        out = {{"method", "exact"}, {"tv", tv}};
      } else {
        Rng rng(c.eval_seed);
        TvEstimate est = tv_empirical([&](Rng& r) { return sampler.sample(r); },
                                      [&](const TokenString& x) { return hmm.sequence_prob(x); }, c.eval_samples, rng);
        out = {{"method", "empirical"}, {"tv", est.estimate}, {"ci_low", est.ci_low}, {"ci_high", est.ci_high},
               {"n", est.n}};
      }
      std::cout << out.dump(1) << '\n';
    } else if (audit_cmd->parsed()) {
      ExperimentConfig c = resolve(ov);
      Hmm hmm = load_hmm(c);
      LearnedRepresentation rep = load_rep(rep_file);
      LazyPdfTree tree(hmm, c.oracle);
      AuditParams ap = c.audit_params;
      ap.c = effective_truncation(rep.params.eta, rep.O, rep.T, rep.S, c.sampler.c_floor);
      ap.eta = rep.params.eta;
      std::cout << audit_representation(rep, tree, ap).to_json().dump(1) << '\n';
    } else if (run_cmd->parsed()) {
      ExperimentConfig c = resolve(ov);
      RunReport report = run_pipeline(c);
      std::cout << report.to_json().dump(1) << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const StageError& e) {
    std::cerr << "stage '" << e.stage() << "' failed: " << e.what() << '\n';
    return e.stage() == "config" ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
