// Command-line front end: corpus generation, training, evaluation, gradient
// checking, and introspection exports. Every command prints one JSON result
// object on stdout; diagnostics go to stderr.

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "litevl/checkpoint.hpp"
#include "litevl/config.hpp"
#include "litevl/corpus.hpp"
#include "litevl/corpus_io.hpp"
#include "litevl/frame_sampling.hpp"
#include "litevl/gradsuite.hpp"
#include "litevl/graph.hpp"
#include "litevl/introspection.hpp"
#include "litevl/metrics.hpp"
#include "litevl/model.hpp"
#include "litevl/scoring.hpp"
#include "litevl/trainer.hpp"
#include "litevl/video_encoder.hpp"

namespace {

using nlohmann::json;
using namespace litevl;

std::string slurp_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Config resolution order: defaults, then --profile, then --config file, then
// repeated --set key=value, then the named convenience flags.
struct ConfigArgs {
  std::string profile;
  std::string config_path;
  std::vector<std::string> overrides;
};

void add_config_flags(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("--profile", args.profile, "named preset (paper-scale)");
  cmd->add_option("--config", args.config_path, "JSON config file with flat keys")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", args.overrides,
                  "override one config key as key=value (repeatable)");
}

RunConfig apply_profile(RunConfig rc, const std::string& name) {
  if (name.empty()) return rc;
  if (name == "paper-scale") {
    rc.train.learning_rate = 2.5e-5;
    rc.train.batch_size = 64;
    rc.train.epochs = 10;
    return rc;
  }
  if (name == "toy") {
    rc.model.num_layers = 2;
    rc.model.frames = 2;
    rc.model.patches_per_frame = 4;
    rc.model.hidden_dim = 32;
    rc.model.num_heads = 4;
    rc.model.projection_dim = 16;
    rc.model.ffn_dim = 128;
    rc.model.patch_size = 4;
    rc.model.frame_resolution = 8;
    rc.model.vocab_size = 16;
    rc.model.answer_count = 4;
    rc.model.max_text_len = 6;
    rc.model.pooling_temperature = 0.05;
    rc.model.zero_init_temporal_output = true;
    rc.train.frames_train = 2;
    rc.train.frames_eval = 2;
    return rc;
  }
  throw std::invalid_argument("unknown profile '" + name +
                              "' (known: toy, paper-scale)");
}

RunConfig resolve_config(const ConfigArgs& args) {
  RunConfig rc = apply_profile(RunConfig{}, args.profile);
  if (!args.config_path.empty()) {
    rc = run_config_from_json(slurp_file(args.config_path), rc);
  }
  if (!args.overrides.empty()) {
    json patch = json::object();
    for (const auto& kv : args.overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
      }
      const std::string key = kv.substr(0, eq);
      const std::string val = kv.substr(eq + 1);
      json parsed = json::parse(val, nullptr, false);
      if (parsed.is_discarded()) parsed = val;  // bare words are strings
      patch[key] = parsed;
    }
    rc = run_config_from_json(patch.dump(), rc);
  }
  return rc;
}

// Named flags shared by the training commands. Each only applies when given.
struct TrainFlags {
  double lr = 0;
  std::size_t batch_size = 0, epochs = 0, max_steps = 0;
  CLI::Option *lr_opt = nullptr, *batch_opt = nullptr, *epochs_opt = nullptr,
              *steps_opt = nullptr;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  f.lr_opt = cmd->add_option("--lr", f.lr, "peak learning rate");
  f.batch_opt = cmd->add_option("--batch-size", f.batch_size, "pairs per step");
  f.epochs_opt = cmd->add_option("--epochs", f.epochs, "passes over the corpus");
  f.steps_opt = cmd->add_option("--max-steps", f.max_steps,
                                "hard step cap, 0 means use epochs");
}

void apply_train_flags(RunConfig& rc, const TrainFlags& f) {
  if (f.lr_opt->count()) rc.train.learning_rate = f.lr;
  if (f.batch_opt->count()) rc.train.batch_size = f.batch_size;
  if (f.epochs_opt->count()) rc.train.epochs = f.epochs;
  if (f.steps_opt->count()) rc.train.max_steps = f.max_steps;
}

struct CorpusBundle {
  std::vector<SyntheticPair<float>> pairs;
  RunConfig gen;
  std::size_t seed = 0;
};

CorpusBundle load_corpus_bundle(const std::string& path) {
  auto loaded = load_corpus<float>(path);
  CorpusBundle b;
  b.pairs = std::move(loaded.pairs);
  const json meta = json::parse(loaded.meta_json);
  b.gen = run_config_from_json(meta.at("config").dump(), RunConfig{});
  b.seed = meta.value("seed", std::size_t{0});
  return b;
}

// The corpus pins the data-coupled model fields; everything else is free.
void require_corpus_match(const ModelConfig& run, const ModelConfig& gen) {
  auto check = [](const char* field, std::size_t r, std::size_t g) {
    if (r != g) {
      throw std::invalid_argument(std::string("corpus was generated with ") + field + "=" +
                                  std::to_string(g) + " but the run config has " +
                                  std::to_string(r) +
                                  "; regenerate the corpus or adjust the config");
    }
  };
  check("frames", run.frames, gen.frames);
  check("frame_resolution", run.frame_resolution, gen.frame_resolution);
  check("vocab_size", run.vocab_size, gen.vocab_size);
  check("answer_count", run.answer_count, gen.answer_count);
}

struct RestoredModel {
  RunConfig rc;
  std::size_t step = 0;
  std::unique_ptr<Model<float>> model;
};

RestoredModel restore_model(const std::string& path) {
  auto loaded = load_checkpoint<float>(path);
  RestoredModel r;
  std::tie(r.rc, r.step) = parse_checkpoint_echo(loaded.config_echo);
  r.model = std::make_unique<Model<float>>(r.rc.model, 0);
  r.model->load_state(loaded.tensors);
  return r;
}

Tensor<double> vtc_matrix(const EncodedCorpus<float>& enc) {
  const std::size_t n = enc.v_cls.rows();
  Tensor<double> s({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0;
      for (std::size_t d = 0; d < enc.v_cls.cols(); ++d) {
        dot += static_cast<double>(enc.v_cls(i, d)) * static_cast<double>(enc.t_cls(j, d));
      }
      s(i, j) = dot;
    }
  }
  return s;
}

void emit(const json& j) { std::cout << j.dump(2) << "\n"; }

// ---- subcommand bodies ----

struct GenOpts {
  ConfigArgs config;
  std::string out;
  std::size_t pairs = 64;
  std::size_t seed = 1;
};

void run_gen_corpus(const GenOpts& o) {
  RunConfig rc = resolve_config(o.config);
  rc.model.validate();
  const auto corpus = generate_synthetic_corpus<float>(rc.model, o.pairs, o.seed);
  json meta;
  meta["config"] = json::parse(run_config_to_json(rc));
  meta["pairs"] = o.pairs;
  meta["seed"] = o.seed;
  save_corpus(o.out, corpus, meta.dump(2));
  emit({{"command", "gen-corpus"},
        {"out", o.out},
        {"pairs", o.pairs},
        {"seed", o.seed},
        {"frames", rc.model.frames},
        {"frame_resolution", rc.model.frame_resolution}});
}

struct TrainOpts {
  ConfigArgs config;
  TrainFlags flags;
  std::string corpus_path, out, log_path = "train_log.csv";
  std::size_t seed = 0;
};

RunConfig prepare_training(const TrainOpts& o, CorpusBundle& bundle) {
  RunConfig rc = resolve_config(o.config);
  apply_train_flags(rc, o.flags);
  rc.train.seed = o.seed;
  bundle = load_corpus_bundle(o.corpus_path);
  require_corpus_match(rc.model, bundle.gen.model);
  rc.validate();
  return rc;
}

void run_train_retrieval(const TrainOpts& o) {
  CorpusBundle bundle;
  const RunConfig rc = prepare_training(o, bundle);
  Model<float> model(rc.model, o.seed);
  std::ofstream log(o.log_path, std::ios::app);
  if (!log) throw std::runtime_error("cannot write log '" + o.log_path + "'");
  const auto result = train_retrieval(model, bundle.pairs, rc.train, &log);
  save_checkpoint(o.out, model.state_dict(), checkpoint_echo(rc, result.steps.size()));
  const auto& last = result.steps.back();
  emit({{"command", "train-retrieval"},
        {"steps", result.steps.size()},
        {"initial_loss", result.initial_loss},
        {"final_loss", result.final_loss},
        {"final_vtc", last.vtc},
        {"final_vtm", last.vtm},
        {"checkpoint", o.out},
        {"log", o.log_path}});
}

void run_train_vqa(const TrainOpts& o) {
  CorpusBundle bundle;
  const RunConfig rc = prepare_training(o, bundle);
  Model<float> model(rc.model, o.seed);
  std::ofstream log(o.log_path, std::ios::app);
  if (!log) throw std::runtime_error("cannot write log '" + o.log_path + "'");
  const auto result = train_vqa(model, bundle.pairs, rc.train, &log);
  save_checkpoint(o.out, model.state_dict(), checkpoint_echo(rc, result.steps.size()));
  emit({{"command", "train-vqa"},
        {"steps", result.steps.size()},
        {"val_accuracy", result.val_accuracy},
        {"best_val_accuracy", result.best_val_accuracy},
        {"best_epoch", result.best_epoch},
        {"checkpoint", o.out},
        {"log", o.log_path}});
}

struct EvalOpts {
  std::string checkpoint, corpus_path;
  bool two_stage = false;
  std::size_t k = 16;
};

void run_eval_retrieval(const EvalOpts& o) {
  auto r = restore_model(o.checkpoint);
  auto bundle = load_corpus_bundle(o.corpus_path);
  require_corpus_match(r.rc.model, bundle.gen.model);
  RetrievalMetrics m;
  if (o.two_stage) {
    m = eval_two_stage_model(*r.model, bundle.pairs, o.k);
  } else {
    const auto enc = encode_corpus(*r.model, bundle.pairs);
    m = eval_retrieval(vtc_matrix(enc));
  }
  json out = {{"command", "eval-retrieval"}, {"queries", bundle.pairs.size()},
              {"two_stage", o.two_stage},   {"r1", m.r1},
              {"r5", m.r5},                 {"r10", m.r10},
              {"mdr", m.mdr}};
  if (o.two_stage) out["k"] = o.k;
  emit(out);
}

void run_eval_vqa(const EvalOpts& o) {
  auto r = restore_model(o.checkpoint);
  auto bundle = load_corpus_bundle(o.corpus_path);
  require_corpus_match(r.rc.model, bundle.gen.model);
  const double acc = vqa_accuracy(*r.model, bundle.pairs);
  emit({{"command", "eval-vqa"}, {"pairs", bundle.pairs.size()}, {"accuracy", acc}});
}

struct GradOpts {
  double tolerance = 1e-4;
  std::size_t max_coords = 4;
};

int run_grad_check(const GradOpts& o) {
  const auto cases = run_grad_suite(o.tolerance, o.max_coords);
  json rows = json::array();
  for (const auto& c : cases) {
    std::cerr << (c.passed ? "PASS " : "FAIL ") << c.name
              << "  max_rel_err=" << c.report.max_rel_err
              << "  worst=" << c.report.worst_param << "\n";
    rows.push_back({{"name", c.name},
                    {"max_rel_err", c.report.max_rel_err},
                    {"worst_param", c.report.worst_param},
                    {"coords_checked", c.report.coords_checked},
                    {"passed", c.passed}});
  }
  const bool ok = grad_suite_passed(cases);
  emit({{"command", "grad-check"},
        {"tolerance", o.tolerance},
        {"passed", ok},
        {"cases", rows}});
  return ok ? 0 : 1;
}

struct InspectOpts {
  std::string checkpoint, corpus_path, out, spatial_out;
  std::size_t pair = 0;
  std::size_t layer = static_cast<std::size_t>(-1);  // default: last layer
  std::size_t token = 0;
};

void run_inspect_scalings(const InspectOpts& o) {
  auto loaded = load_checkpoint<float>(o.checkpoint);
  auto it = loaded.tensors.find("video.gamma");
  if (it == loaded.tensors.end()) {
    throw std::runtime_error("checkpoint has no temporal gate tensor 'video.gamma'");
  }
  const auto report = build_scaling_report(it->second);
  std::ofstream os(o.out, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write '" + o.out + "'");
  write_scalings_csv(report, os);
  emit({{"command", "inspect-scalings"},
        {"layers", report.gamma.rows()},
        {"frames", report.gamma.cols()},
        {"out", o.out}});
}

void run_inspect_pooling(const InspectOpts& o) {
  auto r = restore_model(o.checkpoint);
  auto bundle = load_corpus_bundle(o.corpus_path);
  require_corpus_match(r.rc.model, bundle.gen.model);
  if (o.pair >= bundle.pairs.size()) {
    throw std::invalid_argument("pair index " + std::to_string(o.pair) + " out of range, corpus has " +
                                std::to_string(bundle.pairs.size()) + " pairs");
  }
  const auto& cfg = r.rc.model;
  const auto& pair = bundle.pairs[o.pair];
  NoGradGuard guard;
  const auto clip = patchify(eval_clip(cfg, pair.frames), cfg.patch_size);
  const auto ev = r.model->forward_video(clip);
  const auto et = r.model->forward_text(pair.caption);
  const auto pooled = r.model->forward_pool(ev.v_l, et.t_cls_full);

  std::ofstream os(o.out, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write '" + o.out + "'");
  write_temporal_weights_csv(pooled, os);
  if (!o.spatial_out.empty()) {
    std::ofstream ss(o.spatial_out, std::ios::trunc);
    if (!ss) throw std::runtime_error("cannot write '" + o.spatial_out + "'");
    write_spatial_weights_csv(pooled, ss);
  }

  const auto& g_t = pooled.g_t.value();
  std::size_t argmax = 0;
  for (std::size_t t = 1; t < g_t.numel(); ++t) {
    if (g_t[t] > g_t[argmax]) argmax = t;
  }
  json out = {{"command", "inspect-pooling"},
              {"pair", o.pair},
              {"signal_frame", pair.signal_frame},
              {"argmax_frame", argmax},
              {"out", o.out}};
  if (!o.spatial_out.empty()) out["spatial_out"] = o.spatial_out;
  emit(out);
}

void run_inspect_gradcam(const InspectOpts& o) {
  auto r = restore_model(o.checkpoint);
  auto bundle = load_corpus_bundle(o.corpus_path);
  require_corpus_match(r.rc.model, bundle.gen.model);
  if (o.pair >= bundle.pairs.size()) {
    throw std::invalid_argument("pair index " + std::to_string(o.pair) + " out of range, corpus has " +
                                std::to_string(bundle.pairs.size()) + " pairs");
  }
  const std::size_t layer =
      o.layer == static_cast<std::size_t>(-1) ? r.rc.model.num_layers - 1 : o.layer;
  const auto map = gradcam(*r.model, bundle.pairs[o.pair], layer, o.token);
  std::ofstream os(o.out, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write '" + o.out + "'");
  render_heatmap(map, os);
  emit({{"command", "inspect-gradcam"},
        {"pair", o.pair},
        {"layer", layer},
        {"token", o.token},
        {"rows", map.grid.rows()},
        {"cols", map.grid.cols()},
        {"out", o.out}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"video-language retrieval and QA workbench"};
  app.require_subcommand(1);
  int exit_code = 0;

  auto gen = std::make_shared<GenOpts>();
  {
    auto* cmd = app.add_subcommand("gen-corpus", "write a synthetic paired video-text corpus");
    add_config_flags(cmd, gen->config);
    cmd->add_option("--out", gen->out, "corpus file to write")->required();
    cmd->add_option("--pairs", gen->pairs, "number of pairs (default 64)");
    cmd->add_option("--seed", gen->seed, "corpus seed (default 1)");
    cmd->callback([gen]() { run_gen_corpus(*gen); });
  }

  auto tr = std::make_shared<TrainOpts>();
  {
    auto* cmd = app.add_subcommand("train-retrieval",
                                   "train the contrastive + matching objectives");
    add_config_flags(cmd, tr->config);
    add_train_flags(cmd, tr->flags);
    cmd->add_option("--corpus", tr->corpus_path, "corpus file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", tr->out, "checkpoint file to write")->required();
    cmd->add_option("--log", tr->log_path, "CSV training log (appended)");
    cmd->add_option("--seed", tr->seed, "run seed")->required();
    cmd->callback([tr]() { run_train_retrieval(*tr); });
  }

  auto tq = std::make_shared<TrainOpts>();
  {
    auto* cmd = app.add_subcommand("train-vqa", "train the answer head, keep the best epoch");
    add_config_flags(cmd, tq->config);
    add_train_flags(cmd, tq->flags);
    cmd->add_option("--corpus", tq->corpus_path, "corpus file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", tq->out, "checkpoint file to write")->required();
    cmd->add_option("--log", tq->log_path, "CSV training log (appended)");
    cmd->add_option("--seed", tq->seed, "run seed")->required();
    cmd->callback([tq]() { run_train_vqa(*tq); });
  }

  auto er = std::make_shared<EvalOpts>();
  {
    auto* cmd = app.add_subcommand("eval-retrieval", "text-to-video retrieval metrics");
    cmd->add_option("--checkpoint", er->checkpoint, "trained checkpoint")
        ->required()->check(CLI::ExistingFile);
    cmd->add_option("--corpus", er->corpus_path, "corpus file")->required()->check(CLI::ExistingFile);
    auto* two = cmd->add_flag("--two-stage", er->two_stage,
                              "rerank similarity shortlist with matching scores");
    cmd->add_option("--k", er->k, "shortlist size for --two-stage (default 16)")->needs(two);
    cmd->callback([er]() { run_eval_retrieval(*er); });
  }

  auto ev = std::make_shared<EvalOpts>();
  {
    auto* cmd = app.add_subcommand("eval-vqa", "answer accuracy over a corpus");
    cmd->add_option("--checkpoint", ev->checkpoint, "trained checkpoint")
        ->required()->check(CLI::ExistingFile);
    cmd->add_option("--corpus", ev->corpus_path, "corpus file")->required()->check(CLI::ExistingFile);
    cmd->callback([ev]() { run_eval_vqa(*ev); });
  }

  auto gc = std::make_shared<GradOpts>();
  {
    auto* cmd = app.add_subcommand("grad-check",
                                   "finite-difference audit of the backward pass");
    cmd->add_option("--tolerance", gc->tolerance, "max relative error (default 1e-4)");
    cmd->add_option("--max-coords", gc->max_coords,
                    "coordinates probed per parameter in the end-to-end cases");
    cmd->callback([gc, &exit_code]() { exit_code = run_grad_check(*gc); });
  }

  auto in = std::make_shared<InspectOpts>();
  {
    auto* cmd = app.add_subcommand("inspect", "export introspection artifacts");
    cmd->require_subcommand(1);

    auto* sc = cmd->add_subcommand("scalings", "temporal gate values per layer and frame");
    sc->add_option("--checkpoint", in->checkpoint, "checkpoint")->required()->check(CLI::ExistingFile);
    sc->add_option("--out", in->out, "CSV file to write")->required();
    sc->callback([in]() { run_inspect_scalings(*in); });

    auto* po = cmd->add_subcommand("pooling", "text-conditioned pooling weights for one pair");
    po->add_option("--checkpoint", in->checkpoint, "checkpoint")->required()->check(CLI::ExistingFile);
    po->add_option("--corpus", in->corpus_path, "corpus file")->required()->check(CLI::ExistingFile);
    po->add_option("--pair", in->pair, "pair index (default 0)");
    po->add_option("--out", in->out, "temporal weights CSV")->required();
    po->add_option("--spatial-out", in->spatial_out, "also write spatial weights CSV");
    po->callback([in]() { run_inspect_pooling(*in); });

    auto* gr = cmd->add_subcommand("gradcam", "matching-gradient relevance map as PGM");
    gr->add_option("--checkpoint", in->checkpoint, "checkpoint")->required()->check(CLI::ExistingFile);
    gr->add_option("--corpus", in->corpus_path, "corpus file")->required()->check(CLI::ExistingFile);
    gr->add_option("--pair", in->pair, "pair index (default 0)");
    gr->add_option("--layer", in->layer, "cross-attention layer (default last)");
    gr->add_option("--token", in->token, "text token position (default 0)");
    gr->add_option("--out", in->out, "PGM file to write")->required();
    gr->callback([in]() { run_inspect_gradcam(*in); });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return exit_code;
}
