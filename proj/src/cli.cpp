#include "surfcp/cli.hpp"

#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "surfcp/conformal.hpp"
#include "surfcp/far.hpp"
#include "surfcp/io.hpp"
#include "surfcp/pipeline.hpp"
#include "surfcp/simulate.hpp"

namespace surfcp {

int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::argument: return kExitUsage;
    case ErrorKind::dimension:
    case ErrorKind::data:
    case ErrorKind::io: return kExitData;
    case ErrorKind::singular:
    case ErrorKind::degenerate:
    case ErrorKind::numerical: return kExitNumerical;
  }
  return kExitNumerical;
}

namespace {

const std::map<std::string, FarMethod> kMethods{{"naive", FarMethod::naive},   {"concurrent", FarMethod::concurrent},
                                                {"ek", FarMethod::ek},         {"ek+", FarMethod::ek_plus},
                                                {"var", FarMethod::var_scores}, {"oracle", FarMethod::oracle}};
const std::map<std::string, SplitMode> kSplits{{"random", SplitMode::random}, {"sequential", SplitMode::sequential}};
const std::map<std::string, RadiusRule> kRadiusRules{{"exact", RadiusRule::exact}, {"printed", RadiusRule::printed}};
const std::map<std::string, ModulationKind> kModulations{{"data_std", ModulationKind::data_std},
                                                         {"residual_std", ModulationKind::residual_std}};
const std::map<std::string, Gamma1Variant> kGamma1{{"burn_in", Gamma1Variant::burn_in},
                                                   {"trim_forward", Gamma1Variant::trim_forward},
                                                   {"trim_backward", Gamma1Variant::trim_backward}};
const std::map<std::string, EigenWeighting> kWeightings{{"inverse", EigenWeighting::inverse},
                                                        {"printed", EigenWeighting::printed}};
const std::map<std::string, IntervalMethod> kIntervals{{"normal", IntervalMethod::normal},
                                                       {"exact", IntervalMethod::exact}};
const std::map<std::string, BasisKind> kBases{{"bspline", BasisKind::bspline_cubic}, {"fourier", BasisKind::fourier}};

// Options shared by the commands that fit a predictor and build a band.
struct ModelOptions {
  double alpha = 0.1;
  double ratio = 0.5;
  SplitMode split = SplitMode::random;
  std::uint64_t seed = 0;
  double var_threshold = 0.8;
  Index components = 0;  // fixed M when positive
  Gamma1Variant gamma1 = Gamma1Variant::burn_in;
  EigenWeighting weighting = EigenWeighting::inverse;
  RadiusRule radius_rule = RadiusRule::exact;
  ModulationKind modulation = ModulationKind::data_std;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--alpha", alpha, "Miscoverage level in (0, 1]")->capture_default_str()->check(CLI::Range(1e-12, 1.0));
    cmd->add_option("--ratio", ratio, "Fraction of usable frames used for training")
        ->capture_default_str()
        ->check(CLI::Range(1e-12, 1.0 - 1e-12));
    cmd->add_option("--split", split, "Split mode")->transform(CLI::CheckedTransformer(kSplits))->capture_default_str();
    cmd->add_option("--seed", seed, "Master seed")->capture_default_str();
    cmd->add_option("--var-threshold", var_threshold, "Explained-variance threshold for FPCA")
        ->capture_default_str()
        ->check(CLI::Range(1e-12, 1.0));
    cmd->add_option("--components", components, "Fixed number of FPCA components (overrides --var-threshold)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--gamma1", gamma1, "Lag-1 covariance estimator")
        ->transform(CLI::CheckedTransformer(kGamma1))
        ->capture_default_str();
    cmd->add_option("--ek-weighting", weighting, "EK eigenvalue weighting")
        ->transform(CLI::CheckedTransformer(kWeightings))
        ->capture_default_str();
    cmd->add_option("--radius-rule", radius_rule, "Order-statistic rank for the band radius")
        ->transform(CLI::CheckedTransformer(kRadiusRules))
        ->capture_default_str();
    cmd->add_option("--modulation", modulation, "Modulation surface")
        ->transform(CLI::CheckedTransformer(kModulations))
        ->capture_default_str();
  }

  FarOptions far() const {
    FarOptions f;
    f.selector = components > 0 ? ComponentSelector::fixed(components) : ComponentSelector::variance(var_threshold);
    f.gamma1 = gamma1;
    f.weighting = weighting;
    return f;
  }

  ConformalOptions conformal() const { return ConformalOptions{radius_rule, modulation, true}; }
};

std::string kv_line(const std::string& key, const std::string& value) { return key + "=" + value + "\n"; }

int cmd_simulate(const std::string& out_path, std::string kernel_path, const SimulationConfig& cfg, std::ostream& out) {
  const SimulationOutput sim = simulate_far1(cfg);
  if (kernel_path.empty()) kernel_path = out_path + ".kernel.json";
  write_dataset(out_path, sim.data);
  write_text_file(kernel_path, kernel_to_json(sim.kernel));
  out << "wrote " << out_path << " (T=" << sim.data.length() << ", " << cfg.n1 << "x" << cfg.n2 << ") and "
      << kernel_path << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conformal prediction bands for surface-valued time series", "surfcp"};
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_config("--config", "", "Read options from a TOML/INI file (unknown keys are rejected)");
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand
  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker threads (0: SURFCP_THREADS or hardware count)");

  // simulate ---------------------------------------------------------------
  SimulationConfig sim;
  std::string sim_out;
  std::string sim_kernel;
  BasisKind sim_basis = BasisKind::bspline_cubic;
  Index sim_basis_size = 5;
  auto* c_sim = app.add_subcommand("simulate", "Simulate a FAR(1) surface series and its true kernel");
  c_sim->add_option("-o,--out", sim_out, "Output dataset file")->required();
  c_sim->add_option("--kernel", sim_kernel, "True-kernel JSON (default <out>.kernel.json)");
  c_sim->add_option("-T,--length", sim.length, "Number of frames")->capture_default_str()->check(CLI::PositiveNumber);
  c_sim->add_option("--seed", sim.seed, "Seed")->capture_default_str();
  c_sim->add_option("--n1", sim.n1, "Grid points along u")->capture_default_str()->check(CLI::Range(2, 100000));
  c_sim->add_option("--n2", sim.n2, "Grid points along v")->capture_default_str()->check(CLI::Range(2, 100000));
  c_sim->add_option("--basis", sim_basis, "Basis family")->transform(CLI::CheckedTransformer(kBases))->capture_default_str();
  c_sim->add_option("--basis-size", sim_basis_size, "Basis functions per axis")->capture_default_str()->check(CLI::Range(1, 64));
  c_sim->add_option("--warm-up", sim.burn_in_steps, "Discarded warm-up steps")->capture_default_str()->check(CLI::NonNegativeNumber);
  c_sim->add_option("--df", sim.innovation.df, "Innovation degrees of freedom")->capture_default_str();
  c_sim->add_option("--noise-scale", sim.innovation.multiplier, "Innovation multiplier")->capture_default_str();
  c_sim->add_option("--psi-norm", sim.psi_norm, "Frobenius norm of the coefficient operator")->capture_default_str();

  // import-csv / export-csv -----------------------------------------------
  std::string imp_values, imp_mask, imp_out;
  auto* c_imp = app.add_subcommand("import-csv", "Convert long-format CSV (t,i,j,value) to a dataset file");
  c_imp->add_option("--values", imp_values, "Values CSV")->required();
  c_imp->add_option("--mask", imp_mask, "Mask CSV (i,j,inside)");
  c_imp->add_option("-o,--out", imp_out, "Output dataset file")->required();

  std::string exp_in, exp_values, exp_mask;
  auto* c_exp = app.add_subcommand("export-csv", "Convert a dataset file to long-format CSV");
  c_exp->add_option("-i,--in", exp_in, "Dataset file")->required();
  c_exp->add_option("--values", exp_values, "Values CSV")->required();
  c_exp->add_option("--mask", exp_mask, "Mask CSV");

  // study ------------------------------------------------------------------
  StudyConfig study;
  ModelOptions study_model;
  std::vector<std::string> study_methods{"naive", "concurrent", "ek", "ek+", "var", "oracle"};
  std::string study_out;
  IntervalMethod study_ci = IntervalMethod::normal;
  Index study_n1 = 100, study_n2 = 100;
  auto* c_study = app.add_subcommand("study", "Replicated coverage / size study on simulated data");
  c_study->add_option("--method", study_methods, "Methods (repeat or comma separated)")
      ->delimiter(',')
      ->check(CLI::IsMember({"naive", "concurrent", "ek", "ek+", "var", "oracle"}))
      ->capture_default_str();
  c_study->add_option("-T,--length", study.lengths, "Sample sizes T")->delimiter(',')->capture_default_str();
  c_study->add_option("--block-size", study.block_sizes, "Block sizes b")->delimiter(',')->capture_default_str();
  c_study->add_option("--reps", study.replications, "Replications per (T, b)")->capture_default_str()->check(CLI::PositiveNumber);
  c_study->add_option("--n1", study_n1, "Grid points along u")->capture_default_str()->check(CLI::Range(2, 100000));
  c_study->add_option("--n2", study_n2, "Grid points along v")->capture_default_str()->check(CLI::Range(2, 100000));
  c_study->add_option("--ci", study_ci, "Coverage interval")->transform(CLI::CheckedTransformer(kIntervals))->capture_default_str();
  c_study->add_option("-o,--out", study_out, "Output prefix: <out>_reps.csv and <out>_aggregate.csv")->required();
  study_model.add_to(c_study);

  // forecast-band ----------------------------------------------------------
  ModelOptions band_model;
  std::string band_data, band_kernel, band_out, band_test, band_method = "ek";
  Index band_block = 1;
  auto* c_band = app.add_subcommand("forecast-band", "Band for the frame after the last one in a dataset");
  c_band->add_option("-d,--data", band_data, "Dataset file")->required();
  c_band->add_option("--kernel", band_kernel, "True-kernel JSON (oracle method)");
  c_band->add_option("--method", band_method, "Point predictor")
      ->check(CLI::IsMember({"naive", "concurrent", "ek", "ek+", "var", "oracle"}))
      ->capture_default_str();
  c_band->add_option("--block-size", band_block, "Block size b")->capture_default_str()->check(CLI::PositiveNumber);
  c_band->add_option("--test", band_test, "Dataset whose first frame is tested for membership");
  c_band->add_option("-o,--out", band_out, "Output prefix for the band files")->required();
  band_model.add_to(c_band);

  // rolling ----------------------------------------------------------------
  RollingConfig roll;
  ModelOptions roll_model;
  std::string roll_data, roll_out, roll_method = "ek";
  bool roll_fixed = false;
  auto* c_roll = app.add_subcommand("rolling", "Rolling-window backtest on the second differences of a raw series");
  c_roll->add_option("-d,--data", roll_data, "Raw dataset file")->required();
  c_roll->add_option("--window", roll.window, "Window length T")->capture_default_str()->check(CLI::Range(3, 1 << 30));
  c_roll->add_option("--shifts", roll.n_shifts, "Number of shifts")->capture_default_str()->check(CLI::PositiveNumber);
  c_roll->add_option("--method", roll_method, "Point predictor")
      ->check(CLI::IsMember({"naive", "concurrent", "ek", "ek+", "var"}))
      ->capture_default_str();
  c_roll->add_option("--block-size", roll.block_size, "Block size b")->capture_default_str()->check(CLI::PositiveNumber);
  c_roll->add_option("--lag", roll.lag, "Differencing lag")->capture_default_str()->check(CLI::PositiveNumber);
  c_roll->add_flag("--fixed-split", roll_fixed, "Reuse one split for every shift");
  c_roll->add_option("--ci", roll.interval, "Coverage interval")->transform(CLI::CheckedTransformer(kIntervals))->capture_default_str();
  c_roll->add_option("-o,--out", roll_out, "Output prefix: <out>_shifts.csv, <out>_hits.fts, <out>_width.fts")->required();
  roll_model.add_to(c_roll);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (c_sim->parsed()) {
      sim.basis = TensorBasis(BasisSystem1D(sim_basis, sim_basis_size), BasisSystem1D(sim_basis, sim_basis_size));
      return cmd_simulate(sim_out, sim_kernel, sim, out);
    }
    if (c_imp->parsed()) {
      const FtsDataset ds = import_csv(imp_values, imp_mask.empty() ? std::nullopt : std::optional(imp_mask));
      write_dataset(imp_out, ds);
      out << "wrote " << imp_out << " (T=" << ds.length() << ", " << ds.domain.n1() << "x" << ds.domain.n2() << ")\n";
      return kExitOk;
    }
    if (c_exp->parsed()) {
      const FtsDataset ds = read_dataset(exp_in);
      export_csv(ds, exp_values, exp_mask.empty() ? std::nullopt : std::optional(exp_mask));
      return kExitOk;
    }
    if (c_study->parsed()) {
      study.methods.clear();
      for (const auto& m : study_methods) study.methods.push_back(kMethods.at(m));
      study.alpha = study_model.alpha;
      study.split_ratio = study_model.ratio;
      study.split = study_model.split;
      study.seed = study_model.seed;
      study.far = study_model.far();
      study.conformal = study_model.conformal();
      study.interval = study_ci;
      study.threads = threads;
      study.simulation.n1 = study_n1;
      study.simulation.n2 = study_n2;
      const StudyResult res = run_study(study);
      write_text_file(study_out + "_reps.csv", format_study_csv(res.records));
      write_text_file(study_out + "_aggregate.csv", format_aggregate_csv(res.aggregates));
      out << format_aggregate_csv(res.aggregates);
      return kExitOk;
    }
    if (c_band->parsed()) {
      const FtsDataset ds = read_dataset(band_data);
      const FarMethod method = kMethods.at(band_method);
      std::optional<TrueKernel> kernel;
      if (method == FarMethod::oracle) {
        if (band_kernel.empty()) fail(ErrorKind::argument, "cli", "forecast_band", "oracle needs --kernel");
        kernel = kernel_from_json(read_text_file(band_kernel));
      }
      const SplitPlan plan = make_split(ds.length(), band_model.ratio, band_model.split, band_model.seed);
      const FarPredictor predictor = fit(method, ds, plan.train, band_model.far(), kernel ? &*kernel : nullptr);
      const PermutationFamily fam = make_permutation_family(plan.l(), band_block);
      const ConformalResult res =
          conformal_band(ds, plan, predictor, fam, band_model.alpha, ds.frames.back(), band_model.conformal());
      const ConformalBand& band = res.band;
      const BandFiles files = band_file_names(band_out);
      write_dataset(files.center, surface_dataset(band.center(), ds.domain, ds.mask));
      // An infinite or empty band has no finite bounds to store.
      const bool bounded = !band.whole_space() && !band.empty();
      if (bounded) {
        write_dataset(files.lower, surface_dataset(band.lower(), ds.domain, ds.mask));
        write_dataset(files.upper, surface_dataset(band.upper(), ds.domain, ds.mask));
      }
      std::string side;
      side += kv_line("method", band_method);
      side += kv_line("alpha", format_double(band_model.alpha));
      side += kv_line("block_size", std::to_string(band_block));
      side += kv_line("radius", format_double(band.radius()));
      side += kv_line("whole_space", band.whole_space() ? "1" : "0");
      side += kv_line("empty", band.empty() ? "1" : "0");
      side += kv_line("band_size", format_double(band.size()));
      side += kv_line("bounds_written", bounded ? "1" : "0");
      side += kv_line("training_size", std::to_string(plan.m()));
      side += kv_line("calibration_size", std::to_string(plan.l()));
      side += kv_line("family_size", std::to_string(fam.size()));
      side += kv_line("split", to_string(plan.mode));
      side += kv_line("seed", std::to_string(plan.seed));
      side += kv_line("n1", std::to_string(ds.domain.n1()));
      side += kv_line("n2", std::to_string(ds.domain.n2()));
      if (!band_test.empty()) {
        const FtsDataset test = read_dataset(band_test);
        if (!test.domain.same_shape(ds.domain) || test.length() < 1) {
          fail(ErrorKind::dimension, "cli", "forecast_band", "test dataset does not match the data grid");
        }
        side += kv_line("test_covered", band.contains(test.frames.front()) ? "1" : "0");
      }
      write_text_file(files.sidecar, side);
      out << side;
      return kExitOk;
    }
    if (c_roll->parsed()) {
      const FtsDataset raw = read_dataset(roll_data);
      roll.method = kMethods.at(roll_method);
      roll.alpha = roll_model.alpha;
      roll.split_ratio = roll_model.ratio;
      roll.split = roll_model.split;
      roll.seed = roll_model.seed;
      roll.far = roll_model.far();
      roll.conformal = roll_model.conformal();
      roll.resplit_each_shift = !roll_fixed;
      roll.threads = threads;
      const RollingReport rep = rolling_run(raw, roll);
      write_text_file(roll_out + "_shifts.csv", format_rolling_csv(rep));
      write_dataset(roll_out + "_hits.fts", surface_dataset(rep.hits, rep.domain, rep.mask));
      write_dataset(roll_out + "_width.fts", surface_dataset(rep.mean_width(), rep.domain, rep.mask));
      out << "shifts=" << rep.shifts.size() << " ok=" << rep.n_ok << " coverage=" << format_double(rep.coverage)
          << " ci=[" << format_double(rep.ci.lower) << ", " << format_double(rep.ci.upper) << "]\n";
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error [" << e.module() << "." << e.operation() << "]: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error [cli.run]: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"surfcp"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace surfcp
