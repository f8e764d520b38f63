#include <simr/cli.hpp>

#include <simr/io.hpp>
#include <simr/report.hpp>
#include <simr/simkit.hpp>

#include <CLI11.hpp>

#include <charconv>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace simr::cli {

namespace {

using nlohmann::json;

struct Options {
  std::string input;
  std::string response;
  std::vector<std::string> predictors;
  std::vector<std::string> transforms;
  std::string schema;
  int slices = 10;
  std::vector<double> alphas;
  std::vector<double> alpha_grid;
  double level = 0.05;
  std::uint64_t seed = 20240601;
  std::int64_t mc_reps = 0;
  std::string out;

  // fit
  std::vector<std::string> methods{"sir", "save", "simr"};
  // test
  std::string method = "simr";
  // select-alpha
  std::string criterion = "pvalue";
  int boot_reps = 200;
  int d_fixed = 0;
  std::string aggregation = "mean";
  std::string curves;
  // power-study
  std::string config;
  std::optional<int> reps;
  std::optional<int> threads;
};

std::string sig4(double v) {
  std::ostringstream os;
  os << std::setprecision(4) << v;
  return os.str();
}

double parse_double(const std::string& text, const std::string& what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw InvalidArgument("cannot parse " + what + " '" + text + "'");
  }
  return v;
}

std::map<std::string, double> parse_transforms(const std::vector<std::string>& specs) {
  std::map<std::string, double> out;
  for (const auto& s : specs) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw InvalidArgument("transform must look like column=exponent, got '" + s + "'");
    out[s.substr(0, eq)] = parse_double(s.substr(eq + 1), "transform exponent");
  }
  return out;
}

Dataset<double> load(const Options& o) {
  if (o.input.empty()) throw InvalidArgument("--input is required");
  if (o.response.empty()) throw InvalidArgument("--response is required");
  const io::CsvTable table = io::read_csv(o.input);
  if (!o.schema.empty()) {
    if (o.schema != "ozone") throw InvalidArgument("unknown schema '" + o.schema + "'");
    io::require_columns(table, io::ozone_columns());
  }
  io::ColumnSelection sel{o.response, o.predictors, parse_transforms(o.transforms)};
  Dataset<double> d = io::to_dataset(table, sel, o.input);
  validate(d);
  return d;
}

json run_info(const Options& o, const Dataset<double>& d) {
  json j;
  j["input"] = o.input;
  j["response"] = o.response;
  j["predictors"] = d.column_names;
  json tr = json::object();
  for (const auto& [c, e] : parse_transforms(o.transforms)) tr[c] = e;
  j["transforms"] = tr;
  j["n"] = d.n();
  j["p"] = d.p();
  j["slices"] = o.slices;
  return j;
}

void emit(const Options& o, const json& j) {
  if (o.out.empty()) return;
  std::ofstream f(o.out, std::ios::binary);
  if (!f) throw InvalidArgument("cannot write '" + o.out + "'");
  f << j.dump(2) << '\n';
}

std::vector<double> simr_alphas(const Options& o) {
  if (!o.alphas.empty()) return o.alphas;
  if (!o.alpha_grid.empty()) return o.alpha_grid;
  return {0.5};
}

void check_alpha(double a) {
  if (!(a >= 0.0 && a <= 1.0)) throw InvalidArgument("alpha must lie in [0, 1], got " + sig4(a));
}

void print_eigs(std::ostream& out, const std::string& label, const VectorXd& ev) {
  out << label << ':';
  for (Index i = 0; i < ev.size(); ++i) out << ' ' << sig4(ev(i));
  out << '\n';
}

int cmd_fit(const Options& o, std::ostream& out) {
  const Dataset<double> d = load(o);
  const StandardizedData<double> sd = standardize(d);
  json j = run_info(o, d);
  j["command"] = "fit";
  j["standardization_hash"] = report::standardization_hash(sd);

  std::optional<SliceAssignment> slices;
  std::optional<SliceMoments<double>> sm;
  auto sliced = [&]() -> const SliceMoments<double>& {
    if (!sm) {
      slices = slice_by_response(d.y, o.slices);
      sm = intraslice_moments(sd, *slices);
    }
    return *sm;
  };

  json methods = json::array();
  auto add = [&](const CandidateMatrix<double>& cm) {
    json m = report::candidate_json(cm);
    m["eigenvectors_x"] = report::matrix_json(to_x_scale(sd, cm.eigenvectors));
    methods.push_back(std::move(m));
    std::string label(to_string(cm.kind));
    if (cm.alpha) label += "(" + sig4(*cm.alpha) + ")";
    print_eigs(out, label + " eigenvalues", cm.eigenvalues);
  };
  for (const auto& name : o.methods) {
    if (name == "sir") {
      add(sir_matrix(sliced()));
    } else if (name == "mzz") {
      add(mzz_matrix(sliced()));
    } else if (name == "save") {
      add(save_matrix(sliced()));
    } else if (name == "phd-y") {
      add(phd_matrix(sd, d.y, PhdMode::kResponse));
    } else if (name == "phd-r") {
      add(phd_matrix(sd, d.y, PhdMode::kResidual));
    } else if (name == "simr") {
      for (double a : simr_alphas(o)) {
        check_alpha(a);
        add(simr_matrix(sliced(), a));
      }
    } else {
      throw InvalidArgument("unknown method '" + name + "' (expected sir, mzz, save, phd-y, phd-r or simr)");
    }
  }
  j["methods"] = std::move(methods);
  j["slicing_hash"] = slices ? json(report::slicing_hash(*slices)) : json(nullptr);
  emit(o, j);
  return 0;
}

int cmd_test(const Options& o, std::ostream& out) {
  const Dataset<double> d = load(o);
  json j = run_info(o, d);
  j["command"] = "test";
  j["method"] = o.method;
  j["level"] = o.level;
  if (!(o.level > 0.0 && o.level < 1.0)) throw InvalidArgument("--level must lie in (0, 1)");

  if (o.method == "sir") {
    const StandardizedData<double> sd = standardize(d);
    const SliceAssignment s = slice_by_response(d.y, o.slices);
    const auto sm = intraslice_moments(sd, s);
    const auto pv = simkit::sir_chisq_pvalues(sm, d.n());
    Index d_hat = d.p();
    for (std::size_t k = 0; k < pv.size(); ++k) {
      if (!(pv[k] < o.level)) {
        d_hat = static_cast<Index>(k);
        break;
      }
    }
    j["standardization_hash"] = report::standardization_hash(sd);
    j["slicing_hash"] = report::slicing_hash(s);
    j["p_values"] = pv;
    j["d_hat"] = d_hat;
    for (std::size_t k = 0; k < pv.size(); ++k) out << "d <= " << k << ": p = " << sig4(pv[k]) << '\n';
    out << "d_hat = " << d_hat << '\n';
  } else if (o.method == "simr") {
    if (o.alphas.size() > 1) throw InvalidArgument("test takes a single --alpha");
    const double alpha = o.alphas.empty() ? 0.5 : o.alphas.front();
    check_alpha(alpha);
    const PreparedData<double> pd = prepare(d, o.slices);
    std::optional<MonteCarloOptions> mc;
    if (o.mc_reps > 0) mc = MonteCarloOptions{o.mc_reps, o.seed, 4};
    const DimensionSequence seq = test_dimension_sequence(pd, alpha, o.level, mc);
    j["standardization_hash"] = report::standardization_hash(pd.sd);
    j["slicing_hash"] = report::slicing_hash(pd.slices);
    j["result"] = report::dimension_sequence_json(seq);
    j["d_hat"] = seq.d_hat;
    out << "alpha = " << sig4(alpha) << '\n';
    for (const auto& t : seq.tests) {
      out << "d <= " << t.d_tested << ": Lambda = " << sig4(t.lambda_stat) << ", p = " << sig4(t.p_satterthwaite());
      if (t.montecarlo) out << ", p_mc = " << sig4(t.montecarlo->p_value);
      out << (t.reject ? "  reject" : "") << '\n';
    }
    out << "d_hat = " << seq.d_hat << '\n';
  } else {
    throw InvalidArgument("--method must be simr or sir");
  }
  emit(o, j);
  return 0;
}

int cmd_select_alpha(const Options& o, std::ostream& out) {
  const Dataset<double> d = load(o);
  std::vector<double> grid = !o.alpha_grid.empty() ? o.alpha_grid : !o.alphas.empty() ? o.alphas : default_alpha_grid();
  for (double a : grid) check_alpha(a);
  AlphaSelectionReport rep;
  if (o.criterion == "pvalue") {
    rep = select_alpha_pvalue(d, o.slices, grid, o.level);
  } else if (o.criterion == "bootstrap") {
    if (o.d_fixed < 1) throw InvalidArgument("the bootstrap criterion needs --d-fixed");
    BootstrapOptions bo;
    bo.d_fixed = o.d_fixed;
    bo.reps = o.boot_reps;
    bo.seed = o.seed;
    if (o.aggregation == "mean") {
      bo.aggregation = Aggregation::kMean;
    } else if (o.aggregation == "median") {
      bo.aggregation = Aggregation::kMedian;
    } else {
      throw InvalidArgument("--aggregation must be mean or median");
    }
    rep = select_alpha_bootstrap(d, o.slices, grid, bo);
  } else {
    throw InvalidArgument("--criterion must be pvalue or bootstrap");
  }
  json j = run_info(o, d);
  j["command"] = "select-alpha";
  j["report"] = report::selection_json(rep);
  const StandardizedData<double> sd = standardize(d);
  j["standardization_hash"] = report::standardization_hash(sd);
  j["slicing_hash"] = report::slicing_hash(slice_by_response(d.y, o.slices));
  emit(o, j);
  if (!o.curves.empty()) {
    std::ofstream f(o.curves, std::ios::binary);
    if (!f) throw InvalidArgument("cannot write '" + o.curves + "'");
    f << curves_csv(rep);
  }
  out << "criterion = " << o.criterion << '\n';
  for (const auto& r : rep.per_alpha) {
    out << "alpha = " << sig4(r.alpha);
    if (rep.criterion == SelectionCriterion::kPValue) {
      out << ": d_hat = " << r.d_hat << ", p =";
      for (double p : r.p_values) out << ' ' << sig4(p);
    } else {
      out << ": score = " << sig4(r.score[static_cast<std::size_t>(rep.d_fixed - 1)]);
    }
    out << '\n';
  }
  out << "selected alpha = " << sig4(rep.selected_alpha);
  if (rep.selected_d) out << " (d_hat = " << *rep.selected_d << ")";
  out << '\n';
  return 0;
}

int cmd_power_study(const Options& o, std::ostream& out, const CLI::App& sub) {
  if (o.config.empty()) throw InvalidArgument("--config is required");
  std::ifstream f(o.config);
  if (!f) throw ParseError("cannot open '" + o.config + "'");
  json cj;
  try {
    cj = json::parse(f);
  } catch (const json::exception& e) {
    throw ParseError(o.config + ": " + e.what());
  }
  simkit::PowerStudyConfig cfg = simkit::parse_study_config(cj);
  if (sub.count("--seed") > 0) cfg.seed = o.seed;
  if (o.reps) cfg.reps = *o.reps;
  if (o.threads) cfg.threads = *o.threads;
  if (sub.count("--level") > 0) cfg.level = o.level;

  const simkit::PowerTable t = simkit::run_power_study(cfg);
  const std::string text = simkit::render_power_table(t);
  if (!o.out.empty()) {
    const auto write = [](const std::string& path, const std::string& body) {
      std::ofstream w(path, std::ios::binary);
      if (!w) throw InvalidArgument("cannot write '" + path + "'");
      w << body;
    };
    write(o.out + ".json", simkit::power_table_json(t).dump(2) + "\n");
    write(o.out + ".csv", simkit::power_table_csv(t));
    write(o.out + ".txt", text);
  }
  out << text;
  return 0;
}

void add_data_options(CLI::App* sub, Options& o) {
  sub->add_option("--input", o.input, "CSV file with a header row");
  sub->add_option("--response", o.response, "response column");
  sub->add_option("--predictors", o.predictors, "predictor columns (default: all others)")->delimiter(',');
  sub->add_option("--transform", o.transforms, "power transform column=exponent (repeatable)");
  sub->add_option("--schema", o.schema, "check expected columns (ozone)");
  sub->add_option("--slices", o.slices, "number of slices H");
  sub->add_option("--out", o.out, "JSON output path");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Sufficient dimension reduction with SIMR"};
  app.require_subcommand(1);

  auto* fit = app.add_subcommand("fit", "estimate candidate matrices and their eigen decompositions");
  add_data_options(fit, o);
  fit->add_option("--methods", o.methods, "sir, mzz, save, phd-y, phd-r, simr")->delimiter(',');
  fit->add_option("--alpha", o.alphas, "SIMR weight (repeatable)");
  fit->add_option("--alpha-grid", o.alpha_grid, "comma-separated SIMR weights")->delimiter(',');

  auto* test = app.add_subcommand("test", "sequential marginal dimension tests");
  add_data_options(test, o);
  test->add_option("--method", o.method, "simr or sir");
  test->add_option("--alpha", o.alphas, "SIMR weight (default 0.5)");
  test->add_option("--level", o.level, "test level");
  test->add_option("--mc-reps", o.mc_reps, "Monte-Carlo replicates for p-values (0: off)");
  test->add_option("--seed", o.seed, "Monte-Carlo seed");

  auto* sel = app.add_subcommand("select-alpha", "choose the SIMR weight");
  add_data_options(sel, o);
  sel->add_option("--criterion", o.criterion, "pvalue or bootstrap");
  sel->add_option("--alpha-grid", o.alpha_grid, "comma-separated grid")->delimiter(',');
  sel->add_option("--alpha", o.alphas, "grid point (repeatable)");
  sel->add_option("--level", o.level, "test level");
  sel->add_option("--seed", o.seed, "bootstrap seed");
  sel->add_option("--boot-reps", o.boot_reps, "bootstrap resamples");
  sel->add_option("--d-fixed", o.d_fixed, "CDRS dimension scored by the bootstrap");
  sel->add_option("--aggregation", o.aggregation, "mean or median");
  sel->add_option("--curves", o.curves, "CSV output of the criterion curves");

  auto* study = app.add_subcommand("power-study", "simulation study of size and power");
  study->add_option("--config", o.config, "study JSON file");
  study->add_option("--out", o.out, "output prefix for .json, .csv and .txt");
  study->add_option("--seed", o.seed, "override the configured seed");
  study->add_option("--reps", o.reps, "override the configured replicates");
  study->add_option("--threads", o.threads, "worker threads");
  study->add_option("--level", o.level, "override the configured level");

  std::vector<std::string> argv_store{"simr"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (fit->parsed()) return cmd_fit(o, out);
    if (test->parsed()) return cmd_test(o, out);
    if (sel->parsed()) return cmd_select_alpha(o, out);
    return cmd_power_study(o, out, *study);
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace simr::cli
