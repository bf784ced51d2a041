// cbdsel: command-line driver for aligner fitting, RCS construction,
// concept-diversity selection, evaluation runs and fixture generation.
//
// Exit codes: 0 ok, 1 usage, 2 data/validation error, 3 internal error.

#include <cstdio>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "cbdsel/aligner.hpp"
#include "cbdsel/concept_space.hpp"
#include "cbdsel/detail/binary_io.hpp"
#include "cbdsel/embstore.hpp"
#include "cbdsel/eval_harness.hpp"
#include "cbdsel/selector.hpp"
#include "cbdsel/synthetic.hpp"
#include "cbdsel/uncertainty.hpp"

namespace fs = std::filesystem;
using namespace cbdsel;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

/// Prefixes errors with the pipeline stage they came from.
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& what) : Error(stage + ": " + what) {}
};

template <typename F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e.what());
  }
}

void require_inputs(std::initializer_list<const std::string*> paths) {
  for (const auto* p : paths)
    if (p && !p->empty() && !fs::exists(*p)) throw IoError("input '" + *p + "' does not exist");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
}

std::vector<ConceptAssignment> assign_against(const RowMatrix<double>& shared, const Rcs& rcs, std::size_t m,
                                              unsigned threads) {
  return assign_concepts(shared, CosineIndex(rcs.space.embeddings), m, threads);
}

// ---------------------------------------------------------------------------

struct FitAlignerArgs {
  std::string source, target, out;
  double lambda = kDefaultRidge;
};

int run_fit_aligner(const FitAlignerArgs& a) {
  require_inputs({&a.source, &a.target});
  const auto source = stage("load", [&] { return load_embeddings(a.source); });
  const auto target = stage("load", [&] { return load_embeddings(a.target); });
  const auto model = stage("fit", [&] { return fit_aligner(source, target, a.lambda); });
  stage("write", [&] { save_aligner(model, a.out); });
  std::printf("r2=%.6f\n", model.r_squared);
  if (model.underdetermined) std::fprintf(stderr, "warning: fewer training pairs than source dimensions + 1\n");
  return 0;
}

// ---------------------------------------------------------------------------

struct BuildRcsArgs {
  std::string train, knb_names, knb_embeddings, out_dir;
  std::size_t m = kDefaultTopM;
  unsigned threads = 1;
};

int run_build_rcs(const BuildRcsArgs& a) {
  require_inputs({&a.train, &a.knb_names, &a.knb_embeddings});
  const auto train = stage("load", [&] { return load_embeddings(a.train); });
  const auto knb = stage("load", [&] { return load_concepts(a.knb_names, a.knb_embeddings); });
  const auto rcs = stage("rcs", [&] { return build_rcs(train, knb, a.m, a.threads); });
  stage("write", [&] { save_rcs(rcs, a.out_dir); });
  std::printf("rcs_size=%zu\n", rcs.size());
  return 0;
}

// ---------------------------------------------------------------------------

struct SelectArgs {
  std::string reps, model, rcs_dir, probs, predicted, train_z, train_labels, out, scores_out;
  std::string metric = "margin";
  std::string strategy = "cbd";
  std::size_t k = 10;
  double tau = 1.0;
  std::optional<std::size_t> budget;
  std::optional<double> percent;
  std::uint64_t seed = 0;
  std::size_t m = kDefaultTopM;
  unsigned threads = 1;
};

UncertaintyVector compute_uncertainty(const SelectArgs& a, const EmbeddingMatrix& reps) {
  const auto metric = parse_uncertainty_metric(a.metric);
  const auto n = static_cast<std::size_t>(reps.rows());
  if (metric == UncertaintyMetric::margin) {
    if (a.probs.empty()) throw ConfigError("--metric margin needs --probs");
    const auto probs = load_probabilities(a.probs);
    if (static_cast<std::size_t>(probs.rows()) != n)
      throw ShapeError("probabilities have " + std::to_string(probs.rows()) + " rows, representations " +
                       std::to_string(n));
    return margin_uncertainty(probs);
  }
  if (a.train_z.empty() || a.train_labels.empty()) throw ConfigError("--metric datis needs --train-z and --train-labels");
  if (a.predicted.empty() && a.probs.empty()) throw ConfigError("--metric datis needs --predicted or --probs");
  const auto train_z = load_embeddings(a.train_z);
  const auto train_labels = load_labels(a.train_labels);
  const auto predicted = a.predicted.empty() ? predicted_labels(load_probabilities(a.probs)) : load_labels(a.predicted);
  if (predicted.size() != n)
    throw ShapeError(std::to_string(predicted.size()) + " predicted labels for " + std::to_string(n) + " inputs");
  return datis_uncertainty(reps, predicted, train_z, train_labels, DatisConfig{a.k, a.tau}, a.threads);
}

int run_select(const SelectArgs& a) {
  require_inputs({&a.reps, &a.model, &a.rcs_dir, &a.probs, &a.predicted, &a.train_z, &a.train_labels});
  const auto reps = stage("load", [&] { return load_embeddings(a.reps); });
  const auto n = static_cast<std::size_t>(reps.rows());
  const std::size_t budget = stage("budget", [&] {
    return a.budget ? *a.budget : budget_from_percent(n, *a.percent);
  });
  const bool random = a.strategy == "random";
  const auto uncertainty =
      random ? UncertaintyVector{} : stage("uncertainty", [&] { return compute_uncertainty(a, reps); });

  SelectionResult result;
  double lambda = 0.0;
  if (a.strategy == "cbd") {
    const auto model = stage("load", [&] { return load_aligner(a.model); });
    const auto rcs = stage("load", [&] { return load_rcs(a.rcs_dir); });
    lambda = model.lambda;
    const auto shared = stage("align", [&] { return map(model, reps); });
    const auto assignments = stage("concepts", [&] { return assign_against(shared, rcs, a.m, a.threads); });
    result = stage("select", [&] { return select_cbd(assignments, uncertainty, budget); });
  } else if (a.strategy == "uncertainty") {
    result = stage("select", [&] { return select_top_uncertainty(uncertainty, budget); });
  } else {
    result = stage("select", [&] { return select_random(n, budget, a.seed); });
  }

  auto& p = result.provenance;
  p.m = a.strategy == "cbd" ? a.m : 0;
  const bool datis = !random && a.metric == "datis";
  p.k = datis ? a.k : 0;
  p.tau = datis ? a.tau : 0.0;
  p.lambda = lambda;
  p.seed = a.seed;

  stage("write", [&] {
    detail::write_text_file(a.out, to_json(result));
    if (!a.scores_out.empty() && !random) save_matrix(EmbeddingMatrix(uncertainty.scores.cast<float>()), a.scores_out);
  });
  std::printf("selected=%zu fill=%zu cbd=%.6f\n", result.selected.size(), result.fill_count, result.final_cbd);
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  bool rq1 = false, bench_diversity = false, bench_selection = false;
  std::string embeddings, gd_features, labels, rcs_dir, probs, out;
  std::size_t subset_size = 250;
  std::vector<std::size_t> schedule = {2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::size_t repetitions = 12;
  std::vector<std::uint64_t> seeds = {0};
  std::vector<std::size_t> sizes;
  std::vector<std::string> selectors = {"cbd", "uncertainty"};
  std::size_t repeats = 50;
  std::size_t m = kDefaultTopM;
  unsigned threads = 1;
};

int run_eval(const EvalArgs& a) {
  require_inputs({&a.embeddings, &a.gd_features, &a.labels, &a.rcs_dir, &a.probs});
  if (a.embeddings.empty() || a.rcs_dir.empty()) throw ConfigError("eval needs --embeddings and --rcs");
  const auto shared = stage("load", [&] { return load_embeddings(a.embeddings); });
  const auto rcs = stage("load", [&] { return load_rcs(a.rcs_dir); });
  std::optional<EmbeddingMatrix> gd_features;
  if (!a.gd_features.empty()) gd_features = stage("load", [&] { return load_embeddings(a.gd_features); });

  std::string csv, table;
  if (a.rq1) {
    if (a.labels.empty()) throw ConfigError("--rq1 needs --labels");
    const auto labels = stage("load", [&] { return load_labels(a.labels); });
    std::vector<ControlledSubsetPlan> plans;
    for (auto seed : a.seeds) {
      ControlledSubsetPlan plan{a.subset_size, a.schedule, seed};
      plan.repetitions = a.repetitions;
      plans.push_back(plan);
    }
    Rq1Options options;
    options.m = a.m;
    options.threads = a.threads;
    const auto reports = stage("rq1", [&] { return run_rq1(shared, gd_features, rcs, labels, plans, options); });
    csv = correlation_csv(reports);
    table = correlation_table(reports);
  } else {
    const auto assignments = stage("concepts", [&] {
      return assign_concepts(shared, CosineIndex(rcs.space.embeddings), a.m, a.threads);
    });
    if (a.sizes.empty()) throw ConfigError("benchmarks need --sizes");
    if (a.bench_diversity) {
      const EmbeddingMatrix& features = gd_features ? *gd_features : shared;
      const auto rows = stage("bench", [&] { return time_diversity(features, assignments, a.sizes, a.repeats, a.seeds.front()); });
      csv = diversity_timing_csv(rows);
      table = diversity_timing_table(rows);
    } else {
      if (a.probs.empty()) throw ConfigError("--bench-selection needs --probs");
      const auto probs = stage("load", [&] { return load_probabilities(a.probs); });
      std::vector<SelectorKind> kinds;
      for (const auto& s : a.selectors) kinds.push_back(parse_selector_kind(s));
      const auto rows = stage("bench", [&] {
        return time_selection(SelectionPool{probs, assignments}, kinds, a.sizes, a.repeats, a.seeds.front());
      });
      csv = selection_timing_csv(rows);
      table = selection_timing_table(rows);
    }
  }
  if (!a.out.empty()) stage("write", [&] { detail::write_text_file(a.out, csv); });
  std::fputs(table.c_str(), stdout);
  return 0;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out_dir;
  synthetic::WorldConfig world;
  double temperature = 4.0;
  double logit_noise = 1.0;
};

/// Writes a clustered world plus classifier-side files:
///   shared.ebin   points in the shared space
///   reps.ebin     the same points in a rotated, shifted "classifier" space
///   labels.lbl, probs.prb, knb.txt, knb.ebin
int run_synth(const SynthArgs& a) {
  ensure_dir(a.out_dir);
  const auto world = synthetic::make_world(a.world);
  std::mt19937_64 rng(a.world.seed ^ 0x5eedULL);
  const auto dim = static_cast<Eigen::Index>(a.world.dim);
  const RowMatrix<double> rotation = synthetic::random_orthogonal(dim, rng);
  const Vector<double> shift = synthetic::gaussian_matrix(dim, 1, rng);
  RowMatrix<double> reps = world.points.cast<double>() * rotation;
  reps.rowwise() += shift.transpose();

  const fs::path dir = a.out_dir;
  save_matrix(world.points, dir / "shared.ebin");
  save_matrix(EmbeddingMatrix(reps.cast<float>()), dir / "reps.ebin");
  save_labels(world.labels, dir / "labels.lbl");
  save_matrix(synthetic::class_probabilities(world, a.temperature, a.logit_noise, a.world.seed), dir / "probs.prb");
  save_concepts(world.concepts, dir / "knb.txt", dir / "knb.ebin");
  std::printf("wrote %zu points, %zu concepts to %s\n", a.world.points, world.concepts.size(), a.out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Concept-diversity input selection"};
  app.require_subcommand(1);

  FitAlignerArgs fit;
  auto* fit_cmd = app.add_subcommand("fit-aligner", "Fit an affine map from classifier to shared space");
  fit_cmd->add_option("source", fit.source, "Source representations (EBIN)")->required();
  fit_cmd->add_option("target", fit.target, "Target shared-space embeddings (EBIN)")->required();
  fit_cmd->add_option("--lambda", fit.lambda, "Ridge strength")->capture_default_str();
  fit_cmd->add_option("--out", fit.out, "Model file")->required();

  BuildRcsArgs rcs;
  auto* rcs_cmd = app.add_subcommand("build-rcs", "Build the representative concept set");
  rcs_cmd->add_option("train_shared", rcs.train, "Training embeddings in the shared space (EBIN)")->required();
  rcs_cmd->add_option("knb_names", rcs.knb_names, "Knowledge-base concept names")->required();
  rcs_cmd->add_option("knb_embeddings", rcs.knb_embeddings, "Knowledge-base concept embeddings (EBIN)")->required();
  rcs_cmd->add_option("--m", rcs.m, "Concepts per image")->capture_default_str()->check(CLI::PositiveNumber);
  rcs_cmd->add_option("--threads", rcs.threads)->capture_default_str()->check(CLI::PositiveNumber);
  rcs_cmd->add_option("--out-dir", rcs.out_dir)->required();

  SelectArgs sel;
  auto* sel_cmd = app.add_subcommand("select", "Select inputs for labelling");
  sel_cmd->add_option("reps", sel.reps, "Candidate representations (EBIN)")->required();
  sel_cmd->add_option("model", sel.model, "Aligner model")->required();
  sel_cmd->add_option("rcs_dir", sel.rcs_dir, "RCS directory")->required();
  sel_cmd->add_option("--probs", sel.probs, "Class probabilities (PRB1)");
  sel_cmd->add_option("--metric", sel.metric)->capture_default_str()->check(CLI::IsMember({"margin", "datis"}));
  sel_cmd->add_option("--strategy", sel.strategy)
      ->capture_default_str()
      ->check(CLI::IsMember({"cbd", "uncertainty", "random"}));
  sel_cmd->add_option("--predicted", sel.predicted, "Predicted labels (LBL1) for DATIS");
  sel_cmd->add_option("--train-z", sel.train_z, "Training representations (EBIN) for DATIS");
  sel_cmd->add_option("--train-labels", sel.train_labels, "Training labels (LBL1) for DATIS");
  sel_cmd->add_option("--k", sel.k)->capture_default_str()->check(CLI::PositiveNumber);
  sel_cmd->add_option("--tau", sel.tau)->capture_default_str();
  auto* b_opt = sel_cmd->add_option("--b", sel.budget, "Absolute budget")->check(CLI::PositiveNumber);
  auto* pct_opt = sel_cmd->add_option("--percent", sel.percent, "Budget as a percentage of the pool");
  b_opt->excludes(pct_opt);
  sel_cmd->add_option("--seed", sel.seed)->capture_default_str();
  sel_cmd->add_option("--m", sel.m)->capture_default_str()->check(CLI::PositiveNumber);
  sel_cmd->add_option("--threads", sel.threads)->capture_default_str()->check(CLI::PositiveNumber);
  sel_cmd->add_option("--out", sel.out, "Selection JSON")->required();
  sel_cmd->add_option("--scores-out", sel.scores_out, "Uncertainty scores (EBIN, n x 1)");

  EvalArgs ev;
  auto* ev_cmd = app.add_subcommand("eval", "Correlation and timing studies");
  auto* rq1_flag = ev_cmd->add_flag("--rq1", ev.rq1, "CBD/GD rank correlation on controlled subsets");
  auto* bd_flag = ev_cmd->add_flag("--bench-diversity", ev.bench_diversity, "CBD vs GD scoring time");
  auto* bs_flag = ev_cmd->add_flag("--bench-selection", ev.bench_selection, "Selector wall-clock time");
  rq1_flag->excludes(bd_flag)->excludes(bs_flag);
  bd_flag->excludes(bs_flag);
  ev_cmd->add_option("--embeddings", ev.embeddings, "Shared-space embeddings (EBIN)");
  ev_cmd->add_option("--gd-features", ev.gd_features, "Features for GD (EBIN); defaults to --embeddings");
  ev_cmd->add_option("--labels", ev.labels, "Labels (LBL1)");
  ev_cmd->add_option("--rcs", ev.rcs_dir, "RCS directory");
  ev_cmd->add_option("--probs", ev.probs, "Class probabilities (PRB1)");
  ev_cmd->add_option("--subset-size", ev.subset_size)->capture_default_str();
  ev_cmd->add_option("--schedule", ev.schedule)->delimiter(',')->capture_default_str();
  ev_cmd->add_option("--repetitions", ev.repetitions)->capture_default_str();
  ev_cmd->add_option("--seeds", ev.seeds)->delimiter(',')->capture_default_str();
  ev_cmd->add_option("--sizes", ev.sizes, "Subset sizes or budgets")->delimiter(',');
  ev_cmd->add_option("--selectors", ev.selectors)->delimiter(',')->capture_default_str();
  ev_cmd->add_option("--repeats", ev.repeats)->capture_default_str();
  ev_cmd->add_option("--m", ev.m)->capture_default_str()->check(CLI::PositiveNumber);
  ev_cmd->add_option("--threads", ev.threads)->capture_default_str()->check(CLI::PositiveNumber);
  ev_cmd->add_option("--out", ev.out, "CSV report");

  SynthArgs syn;
  auto* syn_cmd = app.add_subcommand("synth", "Write a seeded synthetic fixture");
  syn_cmd->add_option("--out-dir", syn.out_dir)->required();
  syn_cmd->add_option("--seed", syn.world.seed)->capture_default_str();
  syn_cmd->add_option("--classes", syn.world.classes)->capture_default_str()->check(CLI::PositiveNumber);
  syn_cmd->add_option("--points", syn.world.points)->capture_default_str()->check(CLI::PositiveNumber);
  syn_cmd->add_option("--dim", syn.world.dim)->capture_default_str()->check(CLI::PositiveNumber);
  syn_cmd->add_option("--concepts-per-class", syn.world.concepts_per_class)
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
    if (sel_cmd->parsed() && !sel.budget && !sel.percent) throw CLI::ValidationError("select", "one of --b or --percent is required");
    if (ev_cmd->parsed() && !ev.rq1 && !ev.bench_diversity && !ev.bench_selection)
      throw CLI::ValidationError("eval", "one of --rq1, --bench-diversity or --bench-selection is required");
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (fit_cmd->parsed()) return run_fit_aligner(fit);
    if (rcs_cmd->parsed()) return run_build_rcs(rcs);
    if (sel_cmd->parsed()) return run_select(sel);
    if (ev_cmd->parsed()) return run_eval(ev);
    if (syn_cmd->parsed()) return run_synth(syn);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return kExitInternal;
  }
  return kExitUsage;
}
