#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "loctomo/acceptance.hpp"
#include "loctomo/commands.hpp"
#include "loctomo/errors.hpp"

namespace {

using loctomo::RunConfig;

// Options every subcommand accepts. Precedence: built-in defaults, then the
// --config file, then --set pairs, then the dedicated flags.
struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> mode, filter, noise;
  std::optional<long> steps;

  void attach(CLI::App* sub, bool model_flags) {
    sub->add_option("--config", config, "key = value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--set", sets, "override one config key (key=value), repeatable");
    sub->add_option("--seed", seed, "master seed");
    sub->add_option("--threads", threads, "cap on worker threads (0 = runtime default)");
    sub->add_option("--filter", filter, "ramp | cosine_ramp");
    sub->add_option("--noise", noise, "none | gaussian | poisson");
    if (model_flags) {
      sub->add_option("--mode", mode, "pixel | wavelet");
      sub->add_option("--steps", steps, "training steps");
    }
  }

  RunConfig resolve() const {
    RunConfig cfg = config.empty() ? RunConfig{} : loctomo::parse_config(config);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw loctomo::InvalidArgument("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) cfg.seed = *seed;
    if (threads) cfg.set("threads", std::to_string(*threads));
    if (mode) cfg.set("mode", *mode);
    if (filter) cfg.set("filter", *filter);
    if (noise) cfg.set("noise", *noise);
    if (steps) cfg.set("steps", std::to_string(*steps));
    cfg.validate();
    return cfg;
  }
};

std::string res_text(const nlohmann::json& v) {
  if (v.is_null()) return "not crossed";
  std::ostringstream s;
  s << v.get<double>() << " A";
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Localized learned tomographic reconstruction"};
  app.require_subcommand(1);
  Common common;

  loctomo::SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "phantom + noisy even/odd tilt-series pair");
  common.attach(simulate, false);
  simulate->add_option("--out", sim.out_dir, "output directory")->required();

  loctomo::FbpArgs fbp;
  auto* fbp_cmd = app.add_subcommand("fbp", "filtered backprojection");
  common.attach(fbp_cmd, false);
  fbp_cmd->add_option("--tilts", fbp.tilts, "tilt-series MRC stack")->required()->check(CLI::ExistingFile);
  fbp_cmd->add_option("--angles", fbp.angles, "tilt angles (.tlt, degrees)")->required()->check(CLI::ExistingFile);
  fbp_cmd->add_option("--output", fbp.output, "output volume MRC")->required();
  fbp_cmd->add_option("--reference", fbp.reference, "ground-truth volume for metrics");
  fbp_cmd->add_option("--report", fbp.report, "report path (default <output>.report.json)");

  loctomo::TrainArgs tr;
  auto* train = app.add_subcommand("train", "train the localized network");
  common.attach(train, true);
  train->add_option("--data", tr.data_dirs, "directories written by simulate");
  train->add_option("--simulate", tr.simulate, "simulate this many training phantoms in memory");
  train->add_option("--checkpoint", tr.checkpoint, "output checkpoint")->required();
  train->add_option("--loss-csv", tr.loss_csv, "loss trace (default <checkpoint>.loss.csv)");
  train->add_option("--init", tr.init, "checkpoint to continue from");
  train->add_option("--report", tr.report, "report path (default <checkpoint>.report.json)");

  loctomo::ReconstructArgs rc;
  auto* recon = app.add_subcommand("reconstruct", "apply a trained network to a tilt-series");
  common.attach(recon, true);
  recon->add_option("--checkpoint", rc.checkpoint, "trained checkpoint")->required()->check(CLI::ExistingFile);
  recon->add_option("--tilts", rc.tilts, "tilt-series MRC stack")->required()->check(CLI::ExistingFile);
  recon->add_option("--angles", rc.angles, "tilt angles (.tlt, degrees)")->required()->check(CLI::ExistingFile);
  recon->add_option("--output", rc.output, "output volume MRC")->required();
  recon->add_option("--reference", rc.reference, "ground-truth volume for metrics");
  recon->add_option("--report", rc.report, "report path (default <output>.report.json)");

  loctomo::FscArgs fa;
  auto* fsc = app.add_subcommand("fsc", "Fourier shell correlation of two volumes");
  common.attach(fsc, false);
  fsc->add_option("a", fa.a, "first volume")->required()->check(CLI::ExistingFile);
  fsc->add_option("b", fa.b, "second volume")->required()->check(CLI::ExistingFile);
  fsc->add_option("--csv", fa.csv, "curve output (CSV)")->required();
  fsc->add_flag("--self", fa.self, "the volumes are independent half-set reconstructions");
  fsc->add_option("--report", fa.report, "report path (default <csv>.report.json)");
  std::vector<int> mask_box;
  fsc->add_option("--mask", mask_box, "box x0,y0,z0,x1,y1,z1 (end exclusive); outside is zeroed")
      ->delimiter(',')
      ->expected(6);

  loctomo::AcceptanceOptions acc;
  auto* accept = app.add_subcommand("repro-acceptance", "run the acceptance suite, one PASS/FAIL line per criterion");
  accept->add_option("--criteria", acc.criteria, "subset of criterion ids")->delimiter(',');
  accept->add_option("--seed", acc.seed, "suite seed");
  accept->add_option("--steps", acc.scale.steps, "training steps for the learned criteria");
  std::optional<int> accept_threads;
  accept->add_option("--threads", accept_threads, "cap on worker threads");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      const auto report = loctomo::cmd_simulate(common.resolve(), sim);
      std::cout << "wrote " << report["outputs"].size() << " files to " << sim.out_dir.string() << "\n";
    } else if (*fbp_cmd) {
      loctomo::cmd_fbp(common.resolve(), fbp);
      std::cout << "wrote " << fbp.output.string() << "\n";
    } else if (*train) {
      const auto report = loctomo::cmd_train(common.resolve(), tr);
      std::cout << "wrote " << tr.checkpoint.string() << " (final loss " << report["metrics"]["final_loss"]
                << ")\n";
    } else if (*recon) {
      RunConfig cfg = common.resolve();
      if (common.mode) rc.mode = loctomo::parse_mode(*common.mode);
      const auto report = loctomo::cmd_reconstruct(cfg, rc);
      std::cout << "wrote " << rc.output.string() << " (" << report["metrics"]["evaluations"]
                << " network evaluations)\n";
    } else if (*fsc) {
      if (!mask_box.empty())
        fa.mask = loctomo::Box{mask_box[0], mask_box[1], mask_box[2], mask_box[3], mask_box[4], mask_box[5]};
      const auto report = loctomo::cmd_fsc(common.resolve(), fa);
      std::cout << "FSC 0.5   : " << res_text(report["metrics"]["fsc_0.5_angstrom"]) << "\n"
                << "FSC 0.143 : " << res_text(report["metrics"]["fsc_0.143_angstrom"]) << "\n";
      if (report["metrics"].contains("note")) std::cout << "note: " << report["metrics"]["note"].get<std::string>() << "\n";
    } else if (*accept) {
      if (accept_threads) loctomo::apply_thread_limit(*accept_threads);
      acc.log = &std::cout;
      int failed = 0;
      loctomo::run_acceptance(acc, [&](const loctomo::CriterionResult& r) {
        std::cout << loctomo::format_result(r) << std::endl;
        if (!r.pass) ++failed;
      });
      return failed == 0 ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
