#include "app.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include <nmln/errors.hpp>
#include <nmln/io.hpp>
#include <nmln/oracle.hpp>

namespace nmln::cli {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr std::size_t kExactReportAtoms = 16;

json config_json(const RunConfig& c) {
  auto paths = [](const std::vector<fs::path>& ps) {
    json a = json::array();
    for (const auto& p : ps) a.push_back(p.string());
    return a;
  };
  const auto& t = c.training;
  json j;
  j["task"] = c.task;
  j["seed"] = c.seed;
  j["inputs"] = {{"signature", c.signature.string()}, {"train", paths(c.train)},
                 {"valid", c.valid.string()},         {"test", c.test.string()},
                 {"model", c.model.string()},         {"rules", c.rules.string()},
                 {"constraints", c.constraints.string()}, {"auto_extend", c.auto_extend}};
  j["out_dir"] = c.out_dir.string();
  j["model_spec"] = {{"k", c.spec.k},
                     {"hidden", c.spec.hidden},
                     {"activation", std::string(to_string(c.spec.hidden_activation))},
                     {"heads", c.spec.heads},
                     {"embedding_dim", c.spec.embedding_dim}};
  j["train"] = {{"lr", t.learning_rate},
                {"epochs", t.epochs},
                {"pi_n", t.pi_n},
                {"chains", t.chains},
                {"sweeps_per_update", t.sweeps_per_update},
                {"optimizer", std::string(to_string(t.optimizer))},
                {"clip_norm", t.clip_norm},
                {"sampler", std::string(to_string(t.sampler))},
                {"exact_gradients", t.exact_gradients},
                {"disconnected_per_connected",
                 t.disconnected_per_connected ? json(*t.disconnected_per_connected) : json(nullptr)},
                {"negative_sampling", t.negative_sampling},
                {"neg_sample_rate", t.neg_sample_rate},
                {"train_net", t.train_net},
                {"train_betas", t.train_betas},
                {"train_embeddings", t.train_embeddings}};
  j["marginals"] = {{"burn_in", c.marginals.burn_in}, {"sweeps", c.marginals.sweeps}};
  j["hits"] = c.hits;
  j["generation"] = {{"top_n", c.top_n},
                     {"last_n", c.last_n},
                     {"collect_from_epoch", c.collect_from_epoch}};
  j["log_every"] = c.log_every;
  j["threads"] = default_thread_count();
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path.string() + "'");
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string fixed(double v, int digits = 6) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

void require(const fs::path& path, const char* flag) {
  if (path.empty()) throw InvalidArgument(std::string(flag) + " is required");
  if (!fs::exists(path)) throw InvalidArgument(std::string(flag) + ": '" + path.string() + "' does not exist");
}

struct Dataset {
  SignaturePtr signature;
  std::vector<std::vector<AtomRecord>> train;
  std::vector<AtomRecord> valid;
  std::vector<AtomRecord> test;
  std::vector<World> worlds;
};

Dataset load_dataset(const RunConfig& c, bool need_train) {
  require(c.signature, "--signature");
  if (need_train && c.train.empty()) throw InvalidArgument("--train is required");
  Dataset d;
  std::vector<std::vector<AtomRecord>> all;
  for (const auto& p : c.train) {
    require(p, "--train");
    d.train.push_back(read_atom_file(p));
    all.push_back(d.train.back());
  }
  if (!c.valid.empty()) {
    require(c.valid, "--valid");
    d.valid = read_atom_file(c.valid);
    all.push_back(d.valid);
  }
  if (!c.test.empty()) {
    require(c.test, "--test");
    d.test = read_atom_file(c.test);
    all.push_back(d.test);
  }
  LoadOptions options;
  options.auto_extend = c.auto_extend;
  d.signature = resolve_signature(read_signature_file(c.signature), all, options);
  for (const auto& records : d.train) d.worlds.push_back(make_world(records, d.signature));
  return d;
}

PotentialModel obtain_model(const RunConfig& c, const Signature& sig) {
  if (!c.model.empty()) {
    require(c.model, "--model");
    return load_model(c.model, sig);
  }
  PotentialModel model = make_model(sig, c.spec, derive_seed({c.seed, 0x30de1}));
  if (!c.rules.empty()) {
    require(c.rules, "--rules");
    for (auto& r : read_rules(c.rules, sig)) {
      model.indicators.push_back(std::move(r));
      model.betas.push_back(1.0);
    }
  }
  model.validate(sig);
  return model;
}

PotentialModel loaded_model(const RunConfig& c, const Signature& sig) {
  if (c.model.empty() && c.rules.empty()) throw InvalidArgument("--model or --rules is required");
  return obtain_model(c, sig);
}

TrainConfig resolved_training(const RunConfig& c, const Signature& sig) {
  TrainConfig t = c.training;
  t.seed = derive_seed({c.seed, 0x7a1});
  if (!c.constraints.empty()) {
    require(c.constraints, "--constraints");
    t.constraints = read_constraints(c.constraints, sig);
  }
  if (t.sampler == SamplerMode::constrained && t.constraints.empty()) {
    throw InvalidArgument("the constrained sampler needs --constraints");
  }
  return t;
}

json likelihood_report(const PotentialModel& model, const std::vector<World>& worlds) {
  json j;
  double pll = 0.0;
  for (const auto& w : worlds) pll += pseudo_log_likelihood(model, w);
  j["pseudo_log_likelihood"] = pll / static_cast<double>(worlds.size());
  if (worlds.front().signature().num_atoms() <= kExactReportAtoms) {
    OracleOptions options;
    options.max_atoms = kExactReportAtoms;
    j["exact_log_likelihood"] = exact_log_likelihood(model, worlds, options);
  }
  return j;
}

std::string report_line(const GradientReport& r) {
  double worst = 0.0;
  for (double x : r.residuals) worst = std::max(worst, std::abs(x));
  std::ostringstream s;
  s << "epoch " << r.epoch << " grad_net " << fixed(r.grad_norm_net) << " grad_beta "
    << fixed(r.grad_norm_beta) << " grad_emb " << fixed(r.grad_norm_embedding) << " max_residual "
    << fixed(worst) << (r.clipped ? " clipped" : "") << '\n';
  return s.str();
}

struct TrainOutcome {
  PotentialModel model;
  GradientReport last;
};

TrainOutcome run_training(const RunConfig& c, const Dataset& d, std::ostream& log,
                          SampleLog* samples) {
  TrainConfig t = resolved_training(c, *d.signature);
  Trainer trainer(obtain_model(c, *d.signature), d.worlds, t);
  if (samples) trainer.set_snapshot_hook(collect_generations(*samples, c.collect_from_epoch));
  GradientReport last;
  for (int e = 0; e < t.epochs; ++e) {
    last = trainer.grad_step();
    if (c.log_every > 0 && (e % c.log_every == 0 || e + 1 == t.epochs)) log << report_line(last);
  }
  return {trainer.model(), last};
}

json training_metrics(const TrainOutcome& o, const Dataset& d, const RunConfig& c) {
  json j = likelihood_report(o.model, d.worlds);
  j["epochs"] = c.training.epochs;
  j["num_parameters"] = num_parameters(o.model);
  j["final_grad_norm_net"] = o.last.grad_norm_net;
  j["final_grad_norm_beta"] = o.last.grad_norm_beta;
  j["final_grad_norm_embedding"] = o.last.grad_norm_embedding;
  j["data_statistics"] = o.last.data_statistics;
  j["model_statistics"] = o.last.model_statistics;
  j["betas"] = o.model.betas;
  return j;
}

int task_train(const RunConfig& c, const fs::path& out, std::ostream& log) {
  const Dataset d = load_dataset(c, true);
  const auto outcome = run_training(c, d, log, nullptr);
  save_model(outcome.model, *d.signature, out / "model" / "model.json");
  std::ofstream sig_out(out / "model" / "signature.txt");
  write_signature(sig_out, *d.signature);
  write_json(out / "metrics" / "train.json", training_metrics(outcome, d, c));
  return 0;
}

// Evidence for ranking and classification: the training KB with every atom
// under evaluation cleared.
World evidence_world(const Dataset& d) {
  if (d.worlds.size() != 1) throw InvalidArgument("exactly one --train KB is required");
  return d.worlds.front();
}

int task_complete(const RunConfig& c, const fs::path& out, std::ostream& log) {
  if (c.test.empty()) throw InvalidArgument("--test is required");
  const Dataset d = load_dataset(c, true);
  const PotentialModel model = loaded_model(c, *d.signature);
  World evidence = evidence_world(d);
  std::vector<GroundAtom> tests;
  for (const auto& r : d.test) {
    if (!r.label.value_or(true)) continue;
    tests.push_back(to_atom(r, *d.signature));
    evidence.set(tests.back(), false);
  }
  if (tests.empty()) throw InvalidArgument("no positive test facts");
  MarginalConfig mc = c.marginals;
  mc.seed = derive_seed({c.seed, 0xc0e});
  const auto results = rank_all(tests, model, evidence, mc);
  const auto metrics = kbc_metrics(results, c.hits);

  std::ostringstream ranks;
  ranks << "fact\tcorruptions\trank\treciprocal_rank\n";
  for (const auto& r : results) {
    ranks << d.signature->format(r.test) << '\t' << r.corruption_count << '\t' << r.rank << '\t'
          << fixed(r.reciprocal_rank, 10) << '\n';
  }
  write_text(out / "metrics" / "ranks.tsv", ranks.str());
  json j;
  j["num_tests"] = results.size();
  j["mrr"] = metrics.mrr;
  for (const auto& [m, v] : metrics.hits) j["hits@" + std::to_string(m)] = v;
  write_json(out / "metrics" / "complete.json", j);
  log << "ranked " << results.size() << " facts, MRR " << fixed(metrics.mrr) << '\n';
  return 0;
}

int task_classify(const RunConfig& c, const fs::path& out, std::ostream& log) {
  if (c.valid.empty() || c.test.empty()) throw InvalidArgument("--valid and --test are required");
  const Dataset d = load_dataset(c, true);
  const PotentialModel model = loaded_model(c, *d.signature);
  World evidence = evidence_world(d);
  auto labelled = [&](const std::vector<AtomRecord>& records) {
    std::vector<ScoredTriple> out_triples;
    for (const auto& r : records) {
      if (!r.label) throw ParseError("classification triples need a 0/1 label", r.line);
      out_triples.push_back(ScoredTriple{to_atom(r, *d.signature), 0.0, *r.label});
    }
    return out_triples;
  };
  auto valid = labelled(d.valid);
  auto test = labelled(d.test);
  // One joint query over every distinct atom being scored.
  std::vector<AtomIndex> query;
  std::map<AtomIndex, std::size_t> slot;
  for (const auto* set : {&valid, &test}) {
    for (const auto& t : *set) {
      const AtomIndex a = d.signature->atom_index(t.atom);
      if (slot.emplace(a, query.size()).second) query.push_back(a);
      evidence.set(a, false);
    }
  }
  MarginalConfig mc = c.marginals;
  mc.seed = derive_seed({c.seed, 0xc1a});
  const auto marginals = query_marginals(model, evidence, query, mc);
  for (auto* set : {&valid, &test}) {
    for (auto& t : *set) t.score = marginals[slot.at(d.signature->atom_index(t.atom))];
  }
  const auto policy = fit_thresholds(valid);
  const double accuracy = classification_accuracy(test, policy);
  json j;
  j["accuracy"] = accuracy;
  j["validation_accuracy"] = classification_accuracy(valid, policy);
  j["global_threshold"] = policy.global;
  json per = json::object();
  for (const auto& [p, th] : policy.per_relation) per[d.signature->predicate(p).name] = th;
  j["thresholds"] = std::move(per);
  j["num_test"] = test.size();
  write_json(out / "metrics" / "classify.json", j);
  log << "test accuracy " << fixed(accuracy) << '\n';
  return 0;
}

int task_generate(const RunConfig& c, const fs::path& out, std::ostream& log) {
  const Dataset d = load_dataset(c, true);
  if (d.signature->num_constants() > kMaxCanonicalConstants) {
    throw DomainTooLarge("generation is limited to " + std::to_string(kMaxCanonicalConstants) +
                         " constants");
  }
  if (c.top_n < 1 || c.last_n < 0) throw InvalidArgument("--top-n must be >= 1 and --last-n >= 0");
  SampleLog samples(static_cast<std::size_t>(c.last_n));
  const auto outcome = run_training(c, d, log, &samples);
  save_model(outcome.model, *d.signature, out / "model" / "model.json");

  const auto top = samples.top(static_cast<std::size_t>(c.top_n), c.last_n > 0);
  std::size_t denominator = samples.kept();
  if (c.last_n > 0) denominator = std::min<std::size_t>(samples.kept(), c.last_n);
  std::ostringstream table;
  table << "rank\tcount\tfrequency\tfirst_sweep\tfile\n";
  for (std::size_t i = 0; i < top.size(); ++i) {
    std::ostringstream name;
    name << "structure_" << std::setw(3) << std::setfill('0') << i + 1 << ".txt";
    save_world(top[i].representative, out / "samples" / name.str());
    table << i + 1 << '\t' << top[i].count << '\t'
          << fixed(static_cast<double>(top[i].count) / static_cast<double>(denominator), 6) << '\t'
          << top[i].first_sweep << '\t' << name.str() << '\n';
  }
  write_text(out / "samples" / "frequencies.tsv", table.str());
  json j = training_metrics(outcome, d, c);
  j["kept_samples"] = samples.kept();
  j["distinct_structures"] = samples.entries().size();
  write_json(out / "metrics" / "generate.json", j);
  return 0;
}

int task_oracle(const RunConfig& c, const fs::path& out, std::ostream& log) {
  const Dataset d = load_dataset(c, false);
  const PotentialModel model = loaded_model(c, *d.signature);
  std::vector<ExclusionBlock> constraints;
  if (!c.constraints.empty()) {
    require(c.constraints, "--constraints");
    constraints = read_constraints(c.constraints, *d.signature);
  }
  OracleOptions options;
  options.constraints = constraints;
  const auto dist = exact_distribution(model, d.signature, options);
  const auto marginals = exact_marginals(model, d.signature, options);
  std::ostringstream table;
  table << "atom\tprobability\n";
  for (AtomIndex a = 0; a < marginals.size(); ++a) {
    table << d.signature->format(a) << '\t' << fixed(marginals[a], 12) << '\n';
  }
  write_text(out / "metrics" / "marginals.tsv", table.str());
  json j;
  j["log_partition"] = dist.log_z;
  j["num_worlds"] = dist.worlds.size();
  j["num_atoms"] = d.signature->num_atoms();
  write_json(out / "metrics" / "oracle.json", j);
  log << "enumerated " << dist.worlds.size() << " worlds\n";
  return 0;
}

int task_eval(const RunConfig& c, const fs::path& out, std::ostream& log) {
  const Dataset d = load_dataset(c, true);
  const PotentialModel model = loaded_model(c, *d.signature);
  json j = likelihood_report(model, d.worlds);
  Scorer scorer(model, d.signature);
  json worlds = json::array();
  for (std::size_t i = 0; i < d.worlds.size(); ++i) {
    worlds.push_back({{"file", c.train[i].string()},
                      {"score", scorer.world_score(d.worlds[i])},
                      {"global_potentials", scorer.global_potentials(d.worlds[i])}});
  }
  j["worlds"] = std::move(worlds);
  write_json(out / "metrics" / "eval.json", j);
  log << "evaluated " << d.worlds.size() << " worlds\n";
  return 0;
}

}  // namespace

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    const fs::path dir = config.out_dir;
    for (const char* sub : {"model", "metrics", "samples", "logs"}) fs::create_directories(dir / sub);
    write_json(dir / "config.json", config_json(config));
    std::ofstream log(dir / "logs" / (config.task + ".log"), std::ios::binary);
    int status = 0;
    if (config.task == "train") {
      status = task_train(config, dir, log);
    } else if (config.task == "complete") {
      status = task_complete(config, dir, log);
    } else if (config.task == "classify") {
      status = task_classify(config, dir, log);
    } else if (config.task == "generate") {
      status = task_generate(config, dir, log);
    } else if (config.task == "oracle") {
      status = task_oracle(config, dir, log);
    } else if (config.task == "eval") {
      status = task_eval(config, dir, log);
    } else {
      throw InvalidArgument("unknown task '" + config.task + "'");
    }
    out << config.task << ": wrote " << dir.string() << '\n';
    return status;
  } catch (const std::exception& e) {
    err << "nmln " << config.task << ": " << e.what() << '\n';
    return 1;
  }
}

std::optional<RunConfig> parse_command_line(int argc, const char* const* argv, int& status) {
  CLI::App app{"Neural Markov Logic Networks: training, inference and evaluation"};
  app.require_subcommand(1);
  RunConfig c;
  std::string activation = "relu";
  std::string optimizer = "adam";
  std::string sampler = "sequential";
  int disconnected = 2;

  auto data_options = [&](CLI::App* sub) {
    sub->add_option("--signature", c.signature, "Signature file (name/arity lines)")->required();
    sub->add_option("--out", c.out_dir, "Run directory")->capture_default_str();
    sub->add_option("--seed", c.seed, "Master seed")->capture_default_str();
    sub->add_flag("--auto-extend", c.auto_extend, "Add unknown predicates/constants to the signature");
  };
  auto model_options = [&](CLI::App* sub) {
    sub->add_option("--model", c.model, "Model file to load");
    sub->add_option("--rules", c.rules, "Indicator rules ('weight formula' lines)");
  };
  auto spec_options = [&](CLI::App* sub) {
    sub->add_option("--k", c.spec.k, "Fragment size")->capture_default_str();
    sub->add_option("--hidden", c.spec.hidden, "Hidden layer widths")->capture_default_str();
    sub->add_option("--activation", activation, "Hidden activation: relu|sigmoid|identity")
        ->capture_default_str();
    sub->add_option("--heads", c.spec.heads, "Neural potentials (0 for indicator-only)")
        ->capture_default_str();
    sub->add_option("--embedding-dim", c.spec.embedding_dim, "Constant embedding size (0: symmetric)")
        ->capture_default_str();
  };
  auto train_options = [&](CLI::App* sub) {
    auto& t = c.training;
    sub->add_option("--train", c.train, "Training world file(s)")->required();
    sub->add_option("--lr", t.learning_rate, "Learning rate")->capture_default_str();
    sub->add_option("--epochs", t.epochs, "Gradient steps")->capture_default_str();
    sub->add_option("--pi-n", t.pi_n, "Per-epoch flip probability")->capture_default_str();
    sub->add_option("--chains", t.chains, "Persistent chains")->capture_default_str();
    sub->add_option("--sweeps-per-update", t.sweeps_per_update, "Sweeps per gradient step")
        ->capture_default_str();
    sub->add_option("--optimizer", optimizer, "sgd|adam")->capture_default_str();
    sub->add_option("--clip-norm", t.clip_norm, "Global gradient-norm clip (<= 0 disables)")
        ->capture_default_str();
    sub->add_option("--sampler", sampler, "sequential|blocked|constrained")->capture_default_str();
    sub->add_option("--constraints", c.constraints, "Exclusion constraint file");
    sub->add_flag("--exact-gradients", t.exact_gradients, "Enumerate worlds instead of sampling");
    sub->add_option("--disconnected-per-connected", disconnected,
                    "Embedding models: disconnected fragments per connected one (-1: all)")
        ->capture_default_str();
    sub->add_flag("--negative-sampling", t.negative_sampling,
                  "Blocked k = 2: skip most empty constant pairs");
    sub->add_option("--neg-sample-rate", t.neg_sample_rate, "Kept fraction of empty pair blocks")
        ->capture_default_str();
    sub->add_option("--log-every", c.log_every, "Epochs between log lines")->capture_default_str();
    sub->add_flag("!--no-train-net", t.train_net, "Freeze network weights");
    sub->add_flag("!--no-train-betas", t.train_betas, "Freeze betas");
    sub->add_flag("!--no-train-embeddings", t.train_embeddings, "Freeze embeddings");
  };
  auto marginal_options = [&](CLI::App* sub) {
    sub->add_option("--burn-in", c.marginals.burn_in, "Discarded sweeps")->capture_default_str();
    sub->add_option("--sweeps", c.marginals.sweeps, "Kept sweeps")->capture_default_str();
  };

  auto* train = app.add_subcommand("train", "Train a model by maximum likelihood");
  data_options(train);
  model_options(train);
  spec_options(train);
  train_options(train);

  auto* complete = app.add_subcommand("complete", "Rank test facts against their corruptions");
  data_options(complete);
  model_options(complete);
  complete->add_option("--train", c.train, "Training KB (evidence)")->required();
  complete->add_option("--test", c.test, "Test facts")->required();
  complete->add_option("--hits", c.hits, "HITS@m cutoffs")->capture_default_str();
  marginal_options(complete);

  auto* classify = app.add_subcommand("classify", "Triple classification with fitted thresholds");
  data_options(classify);
  model_options(classify);
  classify->add_option("--train", c.train, "Training KB (evidence)")->required();
  classify->add_option("--valid", c.valid, "Labelled validation triples")->required();
  classify->add_option("--test", c.test, "Labelled test triples")->required();
  marginal_options(classify);

  auto* generate = app.add_subcommand("generate", "Train and collect sampled structures");
  data_options(generate);
  model_options(generate);
  spec_options(generate);
  train_options(generate);
  generate->add_option("--top-n", c.top_n, "Structures to keep")->capture_default_str();
  generate->add_option("--last-n", c.last_n, "Rank only the last N samples (0: all)")
      ->capture_default_str();
  generate->add_option("--collect-from-epoch", c.collect_from_epoch, "First epoch to collect")
      ->capture_default_str();

  auto* oracle = app.add_subcommand("oracle", "Exact marginals by enumeration");
  data_options(oracle);
  model_options(oracle);
  oracle->add_option("--constraints", c.constraints, "Exclusion constraint file");

  auto* eval = app.add_subcommand("eval", "Likelihood and potentials of worlds");
  data_options(eval);
  model_options(eval);
  eval->add_option("--train", c.train, "World file(s)")->required();

  try {
    app.parse(argc, argv);
    c.task = app.get_subcommands().front()->get_name();
    c.spec.hidden_activation = parse_activation(activation);
    c.training.optimizer = parse_optimizer(optimizer);
    c.training.sampler = parse_sampler_mode(sampler);
    if (disconnected >= 0) {
      c.training.disconnected_per_connected = disconnected;
    } else {
      c.training.disconnected_per_connected.reset();
    }
  } catch (const CLI::ParseError& e) {
    status = app.exit(e);
    return std::nullopt;
  } catch (const Error& e) {
    std::cerr << "nmln: " << e.what() << '\n';
    status = 2;
    return std::nullopt;
  }
  status = 0;
  return c;
}

}  // namespace nmln::cli
