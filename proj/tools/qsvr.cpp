// qsvr: landmark regression with annealing-trained epsilon-SVR models.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "qsvr/commands.hpp"

namespace {

using qsvr::RunConfig;

void add_data_flags(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--store", cfg.features, "Feature store CSV written by preprocess")->required();
}

struct EnumFlags {
  std::string method = "baseline";
  std::string mne = "abs";
  std::string d_mode = "box";
};

void add_training_flags(CLI::App* sub, RunConfig& cfg, EnumFlags& names) {
  sub->add_option("--method", names.method, "Dual solver: annealing, exact or baseline")
      ->check(CLI::IsMember({"annealing", "exact", "baseline"}))
      ->capture_default_str();
  sub->add_option("--sweeps", cfg.sa.sweeps, "Annealing sweeps per read")->capture_default_str();
  sub->add_option("--reads", cfg.sa.reads, "Annealing reads per run")->capture_default_str();
  sub->add_option("--keep-best", cfg.sa.keep_best, "Lowest-energy samples averaged per run")->capture_default_str();
  sub->add_option("--ensemble", cfg.ensemble, "Annealing runs averaged into one model")->capture_default_str();
  sub->add_option("--features", cfg.feature_count, "Pearson-selected features per sub-task (1-9)")
      ->capture_default_str();
  sub->add_option("--epsilon", cfg.epsilon, "Error tube half-width")->capture_default_str();
  sub->add_option("--mne", names.mne, "MCCV score: signed (|mean residual|) or abs (mean |residual|)")
      ->check(CLI::IsMember({"signed", "abs"}))
      ->capture_default_str();
  sub->add_option("--repeats", cfg.repeats, "MCCV resamples per tuple")->capture_default_str();
  sub->add_option("--train-frac", cfg.train_frac, "MCCV training fraction")->capture_default_str();
  sub->add_option("--model-frac", cfg.model_frac, "Model/test split fraction")->capture_default_str();
  sub->add_option("--grid-gamma", cfg.grid_gamma, "Baseline box bounds (default 15 31 63)");
  sub->add_option("--grid-eta", cfg.grid_eta, "Gaussian widths (default 4 16 64 256)");
  sub->add_option("--grid-bits", cfg.grid_bits, "Encoding bits B (default 4 5 6)");
  sub->add_option("--grid-frac-bits", cfg.grid_frac_bits, "Fractional bits B_f (default 0)");
  sub->add_option("--grid-lambda", cfg.grid_lambda, "Equality penalties (default 1 5 10)");
  sub->add_option("--threads", cfg.threads, "Worker threads, 0 = all cores")->capture_default_str();
  sub->add_option("--max-iter", cfg.max_iter, "Iteration cap for the baseline solver")->capture_default_str();
  sub->add_flag("--strict", cfg.strict, "Exit 4 when the baseline solver does not converge");
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  EnumFlags names;
  CLI::App app{"Facial landmark regression with QUBO/annealing-trained epsilon-SVR models.\n"
               "Output goes to --out; the environment variable QSVR_OUT_DIR, when set, replaces it."};
  app.require_subcommand(1);
  app.add_option("--seed", cfg.seed, "Base seed for every random choice")->capture_default_str();
  app.add_option("--out", cfg.out, "Output directory")->capture_default_str();

  auto* synth = app.add_subcommand("synth", "Write a synthetic annotated image set (or feature store)");
  synth->add_option("--count", cfg.count, "Number of images or rows")->capture_default_str();
  synth->add_flag("--feature-store", cfg.synth_features, "Write features.csv with affine targets instead of images");

  auto* pre = app.add_subcommand("preprocess", "Images + annotations -> features.csv");
  pre->add_option("--images", cfg.images, "Directory of binary PGM/PPM images")->required();
  pre->add_option("--annotations", cfg.annotations, "Annotation CSV (default <images>/annotations.csv)");
  pre->add_option("--threads", cfg.threads, "Worker threads, 0 = all cores")->capture_default_str();

  auto* train = app.add_subcommand("train", "Select features, cross-validate and train 2L models");
  add_data_flags(train, cfg);
  add_training_flags(train, cfg, names);

  auto* cv = app.add_subcommand("cv", "Cross-validate only and write the selected tuples");
  add_data_flags(cv, cfg);
  add_training_flags(cv, cfg, names);

  auto* eval = app.add_subcommand("eval", "Evaluate trained models on their test split");
  add_data_flags(eval, cfg);
  eval->add_option("--models", cfg.models, "Model directory (default --out)");
  eval->add_option("--eth", cfg.e_th, "Failure threshold on normalised error")->capture_default_str();
  eval->add_option("--d-mode", names.d_mode, "Error normaliser: box (face-box width) or iod (inter-ocular)")
      ->check(CLI::IsMember({"box", "iod"}))
      ->capture_default_str();

  auto* dump = app.add_subcommand("qubo-dump", "Write the QUBO for one sub-task and tuple");
  add_data_flags(dump, cfg);
  dump->add_option("--ell", cfg.ell, "Sub-task index in [0, 2L)")->capture_default_str();
  dump->add_option("--bits", cfg.bits, "Encoding bits B")->capture_default_str();
  dump->add_option("--frac-bits", cfg.frac_bits, "Fractional bits B_f")->capture_default_str();
  dump->add_option("--eta", cfg.eta, "Gaussian width")->capture_default_str();
  dump->add_option("--lambda", cfg.lambda, "Equality penalty")->capture_default_str();
  dump->add_option("--epsilon", cfg.epsilon, "Error tube half-width")->capture_default_str();
  dump->add_option("--features", cfg.feature_count, "Pearson-selected features (1-9)")->capture_default_str();
  dump->add_option("--model-frac", cfg.model_frac, "Model/test split fraction")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  cfg.method = qsvr::parse_method(names.method);
  cfg.mne_mode = qsvr::parse_mne_mode(names.mne);
  cfg.d_mode = qsvr::parse_d_mode(names.d_mode);
  if (*synth) cfg.command = qsvr::Command::Synth;
  else if (*pre) cfg.command = qsvr::Command::Preprocess;
  else if (*train) cfg.command = qsvr::Command::Train;
  else if (*cv) cfg.command = qsvr::Command::Cv;
  else if (*eval) cfg.command = qsvr::Command::Eval;
  else cfg.command = qsvr::Command::QuboDump;
  return qsvr::run_guarded(cfg);
}
