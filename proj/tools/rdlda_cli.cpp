// Experiment runner: train / sweep / subclass / eval / export-dims.
// Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include "rdlda/harness.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

using namespace rdlda;

namespace {

Objective parse_objective(const std::string& name) {
  if (name == "rdlda") return Objective::kRdlda;
  if (name == "dlda") return Objective::kDlda;
  if (name == "cce") return Objective::kCce;
  throw CLI::ValidationError("--objective", "must be rdlda, dlda, or cce");
}

struct CliState {
  ExperimentConfig cfg;
  std::string objective = "rdlda";
  std::string predictor = "hyperplane";
  std::vector<double> alphas;
  std::string checkpoint;
};

void add_data_options(CLI::App* sub, CliState& st) {
  sub->add_option("--data", st.cfg.data_path, "training CSV file");
  sub->add_option("--test-data", st.cfg.test_path,
                  "held-out test CSV (otherwise carved from --data)");
  sub->add_option("--label-col", st.cfg.label_column,
                  "label column name or zero-based index");
  sub->add_option("--synthetic", st.cfg.synthetic,
                  "synthetic spec, e.g. gaussians,c=3,n=200,d=8,sep=6");
  sub->add_option("--val-fraction", st.cfg.val_fraction,
                  "validation fraction of the train split");
  sub->add_option("--test-fraction", st.cfg.test_fraction,
                  "test fraction when no --test-data is given");
  sub->add_option("--seed", st.cfg.seed, "root random seed");
  sub->add_option("--out", st.cfg.out_dir, "output directory");
}

void add_train_options(CLI::App* sub, CliState& st) {
  sub->add_option("--objective", st.objective, "rdlda | dlda | cce");
  sub->add_option("--alpha", st.cfg.alpha,
                  "within-class scatter off-diagonal scale in [0, 1]");
  sub->add_option("--lambda", st.cfg.lambda, "diagonal ridge");
  sub->add_option("--epsilon", st.cfg.epsilon, "eigenvalue selection margin");
  sub->add_option("--epochs", st.cfg.train.epochs, "training epochs");
  sub->add_option("--batch-size", st.cfg.train.batch_size, "mini-batch size");
  sub->add_option("--lr", st.cfg.train.base_lr, "base learning rate");
  sub->add_option("--momentum", st.cfg.train.momentum, "Nesterov momentum");
  sub->add_option("--weight-decay", st.cfg.train.weight_decay, "weight decay");
  sub->add_option("--net", st.cfg.net_preset, "network preset: mlp | dorfernet-mini");
  sub->add_option("--predictor", st.predictor, "hyperplane | euclidean | lda");
  sub->add_option("--hflip", st.cfg.hflip,
                  "horizontal flip probability (image data)");
  sub->add_option("--bins", st.cfg.histogram_bins, "dimension histogram bins");
}

void finalize(CLI::App* sub, CliState& st) {
  st.cfg.objective = parse_objective(st.objective);
  st.cfg.predictor = parse_predictor(st.predictor);
  st.cfg.alpha_set = sub->count("--alpha") > 0;
  st.cfg.epsilon_set = sub->count("--epsilon") > 0;
}

void print_summary(const MetricsReport& report) {
  for (const auto& [name, acc] : report.test_accuracy)
    std::cout << name << " accuracy: " << acc << '\n';
  if (report.confusion.sensitivity)
    std::cout << "sensitivity: " << *report.confusion.sensitivity << '\n';
  if (report.confusion.specificity)
    std::cout << "specificity: " << *report.confusion.specificity << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regularized deep linear discriminant analysis experiments"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "key=value configuration file; command-line flags override");

  CliState st;

  auto* train = app.add_subcommand("train", "train one model and report");
  add_data_options(train, st);
  add_train_options(train, st);

  auto* sweep = app.add_subcommand("sweep", "train once per alpha");
  add_data_options(sweep, st);
  add_train_options(sweep, st);
  sweep->add_option("--alphas", st.alphas, "alpha grid")
      ->required()
      ->delimiter(',');

  auto* subclass = app.add_subcommand(
      "subclass", "autoencoder + k-means subclass pipeline, then train");
  add_data_options(subclass, st);
  add_train_options(subclass, st);
  subclass->add_option("--k", st.cfg.subclass.k, "subclasses per class");
  subclass->add_option("--ae-epochs", st.cfg.subclass.ae_epochs,
                       "autoencoder epochs");
  subclass->add_option("--embedding-dim", st.cfg.subclass.embedding_dim,
                       "autoencoder embedding width");
  subclass->add_option("--ae-lr", st.cfg.subclass.ae_lr,
                       "autoencoder learning rate");

  auto* eval = app.add_subcommand("eval", "evaluate a saved checkpoint");
  add_data_options(eval, st);
  add_train_options(eval, st);
  eval->add_option("--checkpoint", st.checkpoint, "checkpoint file")
      ->required();

  auto* export_dims = app.add_subcommand(
      "export-dims", "per-dimension class histograms of the latent space");
  add_data_options(export_dims, st);
  add_train_options(export_dims, st);
  export_dims->add_option("--checkpoint", st.checkpoint,
                          "checkpoint file (omit to histogram raw features)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 1;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    finalize(sub, st);

    if (sub == train) {
      print_summary(run_experiment(st.cfg));
    } else if (sub == sweep) {
      st.cfg.alphas = st.alphas;
      auto rows = sweep_alpha(st.cfg);
      for (const auto& row : rows) {
        std::cout << "alpha " << row.alpha_used << ": ";
        if (row.error.empty())
          std::cout << row.test_accuracy.at("hyperplane") << " / "
                    << row.test_accuracy.at("euclidean") << " / "
                    << row.test_accuracy.at("lda") << '\n';
        else
          std::cout << "failed: " << row.error << '\n';
      }
    } else if (sub == subclass) {
      st.cfg.subclass.enabled = true;
      print_summary(run_experiment(st.cfg));
    } else if (sub == eval) {
      DataSplits splits = load_splits(st.cfg);
      Model model = load_checkpoint(st.checkpoint);
      LossConfig loss;
      loss.alpha = st.cfg.alpha;
      loss.lambda = st.cfg.lambda;
      loss.epsilon = st.cfg.epsilon;
      loss.objective = st.cfg.objective;
      Evaluator ev = make_evaluator(model, splits.train, loss);
      MetricsReport report;
      for (PredictorKind kind :
           {PredictorKind::kHyperplane, PredictorKind::kEuclidean,
            PredictorKind::kLda}) {
        auto pred = evaluate(ev, model, splits.test.features, kind);
        auto conf =
            confusion_matrix(pred, splits.test.labels, splits.test.class_count);
        report.test_accuracy[predictor_name(kind)] = conf.accuracy;
        if (kind == st.cfg.predictor) report.confusion = std::move(conf);
      }
      print_summary(report);
    } else if (sub == export_dims) {
      DataSplits splits = load_splits(st.cfg);
      Matrix latents = splits.test.features;
      if (!st.checkpoint.empty()) {
        Model model = load_checkpoint(st.checkpoint);
        latents = model.forward(splits.test.features, Mode::kEval);
      }
      LabeledBatch batch{latents, splits.test.labels, splits.test.class_count};
      auto dist = dimension_distributions(batch, st.cfg.histogram_bins);
      std::string dir = st.cfg.out_dir.empty() ? "." : st.cfg.out_dir;
      std::filesystem::create_directories(dir);
      write_dimhist_csv(dist, dir + "/dimhist.csv");
      std::cout << "wrote " << dir << "/dimhist.csv\n";
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
