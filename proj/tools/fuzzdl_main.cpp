// Command-line front end: ingest -> sample -> train -> eval / answer, plus a
// finite-difference gradient audit. Exit codes: 0 ok, 1 usage, 2 data error,
// 3 divergence / failed gradient check.
#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fuzzdl/errors.hpp"
#include "fuzzdl/eval.hpp"
#include "fuzzdl/gradcheck.hpp"
#include "fuzzdl/kb.hpp"
#include "fuzzdl/params.hpp"
#include "fuzzdl/query.hpp"
#include "fuzzdl/sampler.hpp"
#include "fuzzdl/training.hpp"

namespace {

using fuzzdl::DataError;
using fuzzdl::KbIndex;
using fuzzdl::KnowledgeBase;
using fuzzdl::LoadedSplit;
using fuzzdl::ParameterStore;
using fuzzdl::QueryInstance;
using fuzzdl::Vocab;

void check_dims(const ParameterStore& params, const Vocab& vocab) {
  if (params.num_entities() != vocab.num_entities() ||
      params.num_concepts() != vocab.num_concepts() ||
      params.num_relations() != vocab.num_relations()) {
    throw DataError("checkpoint shape (" + std::to_string(params.num_entities()) +
                    " entities, " + std::to_string(params.num_concepts()) +
                    " concepts, " + std::to_string(params.num_relations()) +
                    " relations) does not match the knowledge base");
  }
}

// A degraded KB stores former concepts as entities [base, num_entities) and
// appends the instance-of relation last. Rebuild the pre-degradation vocab so
// instance files sampled from the original KB resolve to the original ids.
Vocab bridge_vocab(const Vocab& degraded, int base) {
  if (base <= 0 || base > degraded.num_entities()) {
    throw DataError("invalid base entity count in split metadata");
  }
  const int r_ec = degraded.require(Vocab::Space::Relation,
                                    fuzzdl::kInstanceRelationName);
  if (r_ec != degraded.num_relations() - 1) {
    throw DataError("degraded KB must list the instance-of relation last");
  }
  Vocab bridge;
  for (int e = 0; e < base; ++e) {
    bridge.add(Vocab::Space::Entity, degraded.entity_name(e));
  }
  for (int c = base; c < degraded.num_entities(); ++c) {
    bridge.add(Vocab::Space::Concept, degraded.entity_name(c));
  }
  for (int r = 0; r < r_ec; ++r) {
    bridge.add(Vocab::Space::Relation, degraded.relation_name(r));
  }
  return bridge;
}

std::vector<QueryInstance> load_instance_files(
    const std::vector<std::string>& paths, const Vocab& vocab) {
  std::vector<QueryInstance> out;
  for (const auto& path : paths) {
    auto part = fuzzdl::load_instances(path, vocab);
    out.insert(out.end(), std::make_move_iterator(part.begin()),
               std::make_move_iterator(part.end()));
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open output file " + path);
  out << text;
}

// Expand `train --config FILE` into ordinary argv tokens before the parse.
// Keys already present on the command line win; empty strings mean unset.
std::vector<std::string> inject_train_config(std::vector<std::string> args) {
  if (args.empty() || args.front() != "train") return args;
  std::string config_path;
  std::set<std::string> given;
  for (std::size_t i = 1; i < args.size(); ++i) {
    const std::string& t = args[i];
    if (t.rfind("--", 0) != 0) continue;
    const std::string name = t.substr(0, t.find('='));
    given.insert(name);
    if (name == "--config") {
      if (auto eq = t.find('='); eq != std::string::npos) {
        config_path = t.substr(eq + 1);
      } else if (i + 1 < args.size()) {
        config_path = args[i + 1];
      }
    }
  }
  if (config_path.empty()) return args;
  std::ifstream in(config_path);
  if (!in) throw CLI::FileError::Missing(config_path);
  const auto items = CLI::ConfigTOML{}.from_config(in);
  std::vector<std::string> injected;
  for (const auto& item : items) {
    const std::string name = item.fullname();
    if (name == "config" || name == "dump-config") continue;
    if (given.count("--" + name)) continue;
    if (item.inputs.size() == 1 && item.inputs[0].empty()) continue;
    for (const auto& v : item.inputs) injected.push_back("--" + name + "=" + v);
  }
  args.insert(args.begin() + 1, injected.begin(), injected.end());
  return args;
}

// ---------------------------------------------------------------------------
// ingest

struct IngestOpts {
  std::string tbox, abox_ee, abox_ec, out;
  int threshold = 5;
  double train_fraction = 0.95;
  std::uint64_t seed = 0;
  bool degrade = false;
};

int cmd_ingest(const IngestOpts& o) {
  KnowledgeBase kb = fuzzdl::load_kb(o.tbox, o.abox_ee, o.abox_ec);
  KnowledgeBase filtered = fuzzdl::filter_low_degree(kb, o.threshold);
  fuzzdl::KbSplit split =
      fuzzdl::split_abox(filtered, o.train_fraction, o.seed);

  fuzzdl::SplitMeta meta;
  meta.seed = o.seed;
  meta.train_fraction = o.train_fraction;
  meta.degree_threshold = o.threshold;
  if (o.degrade) {
    meta.degraded = true;
    meta.base_entities = filtered.vocab.num_entities();
    split.train = fuzzdl::degrade_concepts(split.train);
  }
  fuzzdl::save_split(split, meta, o.out);

  const Vocab& v = split.train.vocab;
  std::cout << "wrote " << o.out << ": " << v.num_entities() << " entities, "
            << v.num_concepts() << " concepts, " << v.num_relations()
            << " relations; train/valid/test ee triples "
            << split.train.abox_ee.size() << "/" << split.valid_triples.size()
            << "/" << split.test_triples.size() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// sample

struct SampleOpts {
  std::string kb, out, qtype = "1p", split = "train";
  int n = 0;
  std::uint64_t seed = 0;
  int max_answers = 100;
  bool enumerate = false;
};

int cmd_sample(const SampleOpts& o) {
  if (!o.enumerate && o.n <= 0) {
    std::cerr << "sample: --n must be positive (or pass --enumerate)\n";
    return 1;
  }
  LoadedSplit loaded = fuzzdl::load_split(o.kb);

  // The walk graph grows with the split; answers are labeled on it. The
  // baseline (previous stage) marks which answers a memorizing model already
  // knows, so evaluation queries must add at least one harder answer.
  KnowledgeBase walk_kb = loaded.split.train;
  std::optional<KbIndex> baseline;
  if (o.split == "valid") {
    baseline.emplace(walk_kb);
    walk_kb.abox_ee.insert(walk_kb.abox_ee.end(),
                           loaded.split.valid_triples.begin(),
                           loaded.split.valid_triples.end());
  } else if (o.split == "test") {
    walk_kb.abox_ee.insert(walk_kb.abox_ee.end(),
                           loaded.split.valid_triples.begin(),
                           loaded.split.valid_triples.end());
    baseline.emplace(walk_kb);
    walk_kb.abox_ee.insert(walk_kb.abox_ee.end(),
                           loaded.split.test_triples.begin(),
                           loaded.split.test_triples.end());
  }
  KbIndex walk(walk_kb);

  fuzzdl::SampleOptions so;
  so.qtype = o.qtype;
  so.n = o.n;
  so.seed = o.seed;
  so.max_answers = o.max_answers;
  so.enumerate_1p = o.enumerate;
  so.hard_answer_baseline = baseline ? &*baseline : nullptr;

  auto instances = fuzzdl::sample_queries(walk, so);
  fuzzdl::save_instances(instances, loaded.split.train.vocab, o.out);
  std::cout << "wrote " << instances.size() << " " << o.qtype
            << " instances to " << o.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
  std::string kb, checkpoint, log, tnorm = "product";
  std::vector<std::string> train_files, valid_files;
  fuzzdl::TrainConfig cfg;
  bool no_sub = false, no_ins = false, dump_config = false;
  int threads = 1;
};

int cmd_train(const TrainOpts& o, CLI::App* sub) {
  if (o.dump_config) {
    std::cout << sub->config_to_str(true, false);
    return 0;
  }
  LoadedSplit loaded = fuzzdl::load_split(o.kb);

  fuzzdl::TrainConfig cfg = o.cfg;
  cfg.tnorm_kind = fuzzdl::tnorm_from_string(o.tnorm);
  cfg.use_sub = !o.no_sub;
  cfg.use_ins = !o.no_ins;
  cfg.validate();

  const Vocab& vocab = loaded.split.train.vocab;
  auto train_instances = load_instance_files(o.train_files, vocab);
  auto valid_instances = load_instance_files(o.valid_files, vocab);

  std::ofstream log_stream;
  std::ostream* log = nullptr;
  if (!o.log.empty()) {
    log_stream.open(o.log, std::ios::binary);
    if (!log_stream) throw DataError("cannot open log file " + o.log);
    log = &log_stream;
  }

  fuzzdl::TrainResult result =
      fuzzdl::train(loaded.split.train, train_instances, valid_instances, cfg, log);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  fuzzdl::save_checkpoint(result.best_params, o.checkpoint);

  std::cout << "trained " << result.steps_run << " steps";
  if (result.best_step > 0) {
    std::cout << "; best validation metric " << result.best_metric
              << " at step " << result.best_step;
  }
  if (result.stopped_early) std::cout << " (early stop)";
  std::cout << "; checkpoint " << o.checkpoint << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOpts {
  std::string kb, checkpoint, report, mode = "standard";
  std::vector<std::string> instance_files;
  int threads = 1;
};

int cmd_eval(const EvalOpts& o) {
  LoadedSplit loaded = fuzzdl::load_split(o.kb);
  ParameterStore params = fuzzdl::load_checkpoint(o.checkpoint);
  const Vocab& vocab = loaded.split.train.vocab;
  check_dims(params, vocab);

  fuzzdl::RankingReport report;
  if (o.mode == "one-more-hop") {
    if (!loaded.meta.degraded) {
      throw DataError(
          "--mode one-more-hop needs a KB directory written by ingest "
          "--degrade");
    }
    const int r_ec =
        vocab.require(Vocab::Space::Relation, fuzzdl::kInstanceRelationName);
    Vocab bridge = bridge_vocab(vocab, loaded.meta.base_entities);
    auto instances = load_instance_files(o.instance_files, bridge);
    report = fuzzdl::one_more_hop_eval(params, instances,
                                       loaded.meta.base_entities, r_ec);
  } else {
    if (loaded.meta.degraded) {
      throw DataError(
          "this KB directory was degraded at ingest; use --mode one-more-hop");
    }
    auto instances = load_instance_files(o.instance_files, vocab);
    report = fuzzdl::evaluate(params, instances);
  }

  std::cout << report.to_table();
  if (!o.report.empty()) write_text_file(o.report, report.to_json_text());
  return 0;
}

// ---------------------------------------------------------------------------
// answer

struct AnswerOpts {
  std::string kb, checkpoint, query;
  int k = 3;
};

int cmd_answer(const AnswerOpts& o) {
  LoadedSplit loaded = fuzzdl::load_split(o.kb);
  ParameterStore params = fuzzdl::load_checkpoint(o.checkpoint);
  const Vocab& vocab = loaded.split.train.vocab;
  check_dims(params, vocab);

  auto ast = fuzzdl::parse_query(o.query, vocab);
  auto answers = fuzzdl::answer_query(params, ast, o.k);
  for (const auto& a : answers) {
    const std::string& name = a.level == "abox" ? vocab.entity_name(a.id)
                                                : vocab.concept_name(a.id);
    std::cout << a.level << "\t" << name << "\t" << a.score << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradOpts {
  fuzzdl::GradCheckOptions g;
  std::string tnorm = "product";
  double tolerance = 1e-4;
};

int cmd_gradcheck(const GradOpts& o) {
  fuzzdl::GradCheckOptions g = o.g;
  g.tnorm_kind = fuzzdl::tnorm_from_string(o.tnorm);
  auto result = fuzzdl::run_gradcheck(g);
  for (const auto& item : result.items) {
    std::printf("%-8s max rel err %.3e\n", item.name.c_str(),
                item.max_rel_err);
  }
  std::printf("max relative error: %.3e (tolerance %.1e)\n",
              result.max_rel_err, o.tolerance);
  if (result.max_rel_err > o.tolerance) {
    std::cerr << "gradient check FAILED\n";
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "fuzzdl: joint entity/concept query answering over knowledge bases"};
  app.require_subcommand(1);
  std::function<int()> action;

  // ingest ------------------------------------------------------------------
  auto ing = std::make_shared<IngestOpts>();
  CLI::App* ingest = app.add_subcommand(
      "ingest", "Load TSV axioms, filter low-degree entities, split, write a KB dir");
  ingest->add_option("--tbox", ing->tbox, "subsumption axioms TSV (sub<TAB>super)")
      ->required();
  ingest->add_option("--abox-ee", ing->abox_ee,
                     "relation triples TSV (head<TAB>rel<TAB>tail)")
      ->required();
  ingest->add_option("--abox-ec", ing->abox_ec,
                     "instantiation pairs TSV (entity<TAB>concept)")
      ->required();
  ingest->add_option("--out", ing->out, "output KB directory")->required();
  ingest->add_option("--threshold", ing->threshold,
                     "drop entities with degree below this (0 disables)")
      ->capture_default_str();
  ingest->add_option("--train-fraction", ing->train_fraction,
                     "share of relation triples kept for training")
      ->capture_default_str();
  ingest->add_option("--seed", ing->seed, "split shuffle seed")
      ->capture_default_str();
  ingest->add_flag("--degrade", ing->degrade,
                   "rewrite concepts as entities linked by " +
                       std::string(fuzzdl::kInstanceRelationName));
  ingest->callback([&action, ing] { action = [ing] { return cmd_ingest(*ing); }; });

  // sample ------------------------------------------------------------------
  auto smp = std::make_shared<SampleOpts>();
  CLI::App* sample = app.add_subcommand(
      "sample", "Sample labeled query instances from a KB split");
  sample->add_option("--kb", smp->kb, "KB directory from ingest")->required();
  sample->add_option("--out", smp->out, "output JSONL file")->required();
  sample->add_option("--type", smp->qtype, "query shape")
      ->check(CLI::IsMember(fuzzdl::query_shapes()))
      ->capture_default_str();
  sample->add_option("--n", smp->n, "number of instances");
  sample->add_option("--seed", smp->seed, "sampler seed")->capture_default_str();
  sample->add_option("--max-answers", smp->max_answers,
                     "skip queries with more entity answers than this")
      ->capture_default_str();
  sample->add_option("--split", smp->split,
                     "graph stage: train, valid (train+valid, hard answers "
                     "required), or test")
      ->check(CLI::IsMember({"train", "valid", "test"}))
      ->capture_default_str();
  sample->add_flag("--enumerate", smp->enumerate,
                   "1p only: one instance per training triple");
  sample->callback([&action, smp] { action = [smp] { return cmd_sample(*smp); }; });

  // train -------------------------------------------------------------------
  auto trn = std::make_shared<TrainOpts>();
  CLI::App* train = app.add_subcommand("train", "Train embeddings on sampled queries");
  std::string config_path;  // expanded in inject_train_config before parsing
  train->add_option("--config", config_path, "read defaults from a TOML file")
      ->configurable(false);
  train->add_option("--kb", trn->kb, "KB directory from ingest")->required();
  train->add_option("--train", trn->train_files, "training instance JSONL file(s)")
      ->required();
  train->add_option("--valid", trn->valid_files,
                    "validation instance JSONL file(s)");
  train->add_option("--checkpoint", trn->checkpoint, "output checkpoint path")
      ->required();
  train->add_option("--log", trn->log, "JSONL training log path");
  train->add_option("--lr", trn->cfg.lr, "Adam learning rate")
      ->capture_default_str();
  train->add_option("--d", trn->cfg.d, "embedding dimension")
      ->capture_default_str();
  train->add_option("--batch", trn->cfg.batch_size, "positives per task per step")
      ->capture_default_str();
  train->add_option("--m", trn->cfg.m, "negative samples per positive")
      ->capture_default_str();
  train->add_option("--max-steps", trn->cfg.max_steps, "optimization steps")
      ->capture_default_str();
  train->add_option("--valid-interval", trn->cfg.valid_interval,
                    "steps between validations")
      ->capture_default_str();
  train->add_option("--patience", trn->cfg.patience,
                    "non-improving validations before early stop")
      ->capture_default_str();
  train->add_option("--seed", trn->cfg.seed, "master seed")->capture_default_str();
  train->add_option("--gamma", trn->cfg.gamma, "entity score margin")
      ->capture_default_str();
  train->add_option("--eps", trn->cfg.eps, "norm floor for distributions")
      ->capture_default_str();
  train->add_option("--p", trn->cfg.p_norm, "norm exponent for distributions")
      ->capture_default_str();
  train->add_option("--tnorm", trn->tnorm, "t-norm: godel, product, lukasiewicz")
      ->check(CLI::IsMember({"godel", "product", "lukasiewicz"}))
      ->capture_default_str();
  train->add_flag("--no-sub", trn->no_sub, "disable the subsumption task");
  train->add_flag("--no-ins", trn->no_ins, "disable the instantiation task");
  train->add_option("--threads", trn->threads,
                    "worker cap (reserved; this build is single-threaded)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train->add_flag("--dump-config", trn->dump_config,
                  "print the effective config as TOML and exit")
      ->configurable(false);
  train->callback([&action, trn, train] {
    action = [trn, train] { return cmd_train(*trn, train); };
  });

  // eval --------------------------------------------------------------------
  auto evl = std::make_shared<EvalOpts>();
  CLI::App* eval_cmd = app.add_subcommand("eval", "Rank gold answers and report MRR/Hits@k");
  eval_cmd->add_option("--kb", evl->kb, "KB directory from ingest")->required();
  eval_cmd->add_option("--checkpoint", evl->checkpoint, "trained checkpoint")
      ->required();
  eval_cmd->add_option("--instances", evl->instance_files,
                       "instance JSONL file(s)")
      ->required();
  eval_cmd->add_option("--report", evl->report, "also write the report as JSON here");
  eval_cmd->add_option("--mode", evl->mode,
                       "standard or one-more-hop (degraded-KB comparison)")
      ->check(CLI::IsMember({"standard", "one-more-hop"}))
      ->capture_default_str();
  eval_cmd->add_option("--threads", evl->threads,
                       "worker cap (reserved; this build is single-threaded)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  eval_cmd->callback([&action, evl] { action = [evl] { return cmd_eval(*evl); }; });

  // answer ------------------------------------------------------------------
  auto ans = std::make_shared<AnswerOpts>();
  CLI::App* answer = app.add_subcommand(
      "answer", "Answer one query with top-k entities and concepts");
  answer->add_option("--kb", ans->kb, "KB directory from ingest")->required();
  answer->add_option("--checkpoint", ans->checkpoint, "trained checkpoint")
      ->required();
  answer->add_option("-q,--query", ans->query,
                     "s-expression query, e.g. \"(p rel (e entity))\"")
      ->required();
  answer->add_option("-k", ans->k, "answers per level")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  answer->callback([&action, ans] { action = [ans] { return cmd_answer(*ans); }; });

  // gradcheck ---------------------------------------------------------------
  auto grd = std::make_shared<GradOpts>();
  CLI::App* grad = app.add_subcommand(
      "gradcheck", "Verify analytic gradients against finite differences");
  grad->add_option("--d", grd->g.d, "embedding dimension")->capture_default_str();
  grad->add_option("--entities", grd->g.entities, "entity count")
      ->capture_default_str();
  grad->add_option("--concepts", grd->g.concepts, "concept count")
      ->capture_default_str();
  grad->add_option("--relations", grd->g.relations, "relation count")
      ->capture_default_str();
  grad->add_option("--m", grd->g.m, "negatives per positive")
      ->capture_default_str();
  grad->add_option("--seed", grd->g.seed, "parameter seed")->capture_default_str();
  grad->add_option("--tnorm", grd->tnorm, "t-norm: godel, product, lukasiewicz")
      ->check(CLI::IsMember({"godel", "product", "lukasiewicz"}))
      ->capture_default_str();
  grad->add_option("--tolerance", grd->tolerance, "max relative error allowed")
      ->capture_default_str();
  grad->callback([&action, grd] { action = [grd] { return cmd_gradcheck(*grd); }; });

  app.name("fuzzdl");
  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = inject_train_config(std::move(args));
    std::reverse(args.begin(), args.end());  // CLI11 consumes back to front
    app.parse(std::move(args));
  } catch (const CLI::Success& e) {
    return app.exit(e);  // --help and friends
  } catch (const CLI::Error& e) {
    app.exit(e);
    return 1;
  }

  try {
    return action ? action() : 1;
  } catch (const fuzzdl::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
